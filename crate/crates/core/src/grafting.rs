//! The pre-Lie layer: grafting and raising operators on the slot-tagged
//! space and on decorated trees, their adjoints, the lifted coherence map,
//! transport along the slot-forgetting projection, and the generator
//! reachability check.

use std::collections::BTreeSet;

use crate::algebra::{q_one, LinComb, MultiIndex, Q};
use crate::context::Context;
use crate::coproducts::Structure;
use crate::error::{Error, Result};
use crate::nonlin::expr::NonlinExpr;
use crate::nonlin::upsilon::ExtNonlin;
use crate::trees::{BTree, EdgeType, Tree};

// ---------------------------------------------------------------------------
// Grafting on the slot-tagged space
// ---------------------------------------------------------------------------

/// `σ̃ ↷_p σ`: attach at the root with a new kernel edge `I_p`, convert a
/// matching slot factor `J_s[X^p]` into an edge `I_s`, or graft into a
/// branch. Never touches extended decorations.
pub fn graft(sub: &BTree, host: &BTree, p: &MultiIndex) -> LinComb<BTree> {
    let mut out = LinComb::new();
    // Root attachment.
    out.add_term(host.product(&BTree::kernel(p.clone(), sub.clone())), q_one());
    let parts = host.root_parts();
    // Slot conversion: J_s[X^p] ↦ I_s[σ̃].
    for (i, (s, t)) in parts.jdecos.iter().enumerate() {
        if t == p {
            let mut jd = parts.jdecos.clone();
            jd.remove(i);
            let mut children: Vec<(EdgeType, BTree)> = Vec::new();
            for l in &parts.noises {
                children.push((EdgeType::noise(l.clone()), BTree::unit(p.dim())));
            }
            for (m, c) in &parts.branches {
                children.push((EdgeType::kernel(m.clone()), c.clone()));
            }
            children.push((EdgeType::kernel(s.clone()), sub.clone()));
            out.add_term(BTree::new(parts.ext.clone(), jd, children), q_one());
        }
    }
    // Lift into each branch, root untouched.
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in graft(sub, inner, p).iter() {
            out.add_term(replace_branch_b(host, i, m, g), c.clone());
        }
    }
    out
}

fn replace_branch_b(host: &BTree, idx: usize, m: &MultiIndex, new_inner: &BTree) -> BTree {
    let parts = host.root_parts();
    let mut children: Vec<(EdgeType, BTree)> = Vec::new();
    for l in &parts.noises {
        children.push((EdgeType::noise(l.clone()), BTree::unit(m.dim())));
    }
    for (j, (mj, cj)) in parts.branches.iter().enumerate() {
        if j == idx {
            children.push((EdgeType::kernel(m.clone()), new_inner.clone()));
        } else {
            children.push((EdgeType::kernel(mj.clone()), cj.clone()));
        }
    }
    BTree::new(parts.ext, parts.jdecos, children)
}

/// Adjoint of `↷_p` for the symmetry-factor inner products: cut a root
/// branch with derivative `m ≤ p`, leaving a slot factor `J_m[X^p]` behind
/// (none when `m = p`), weighted by `1/(p−m)!`; plus the branch lift.
pub fn graft_star(host: &BTree, p: &MultiIndex) -> LinComb<(BTree, BTree)> {
    let mut out = LinComb::new();
    let parts = host.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        if let Some(diff) = p.checked_sub(m) {
            let mut jd = parts.jdecos.clone();
            if !diff.is_zero() {
                jd.push((m.clone(), p.clone()));
            }
            let mut children: Vec<(EdgeType, BTree)> = Vec::new();
            for l in &parts.noises {
                children.push((EdgeType::noise(l.clone()), BTree::unit(p.dim())));
            }
            for (j, (mj, cj)) in parts.branches.iter().enumerate() {
                if j != i {
                    children.push((EdgeType::kernel(mj.clone()), cj.clone()));
                }
            }
            let rest = BTree::new(parts.ext.clone(), jd, children);
            let coeff = q_one() / Q::from_integer(diff.factorial());
            out.add_term((inner.clone(), rest), coeff);
        }
    }
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for ((l, r), c) in graft_star(inner, p).iter() {
            out.add_term((l.clone(), replace_branch_b(host, i, m, r)), c.clone());
        }
    }
    out
}

/// The raising operator `↑_b`: attach a new slot factor `J_p[X^{p+e_b}]`
/// for every coordinate `p` in the support, increment an existing slot's
/// polynomial, or raise inside a branch. The first family is infinite over
/// all of ℕ^d and is expanded only against the finite support.
pub fn raise(host: &BTree, b: usize, support: &[MultiIndex]) -> Result<LinComb<BTree>> {
    if support.is_empty() {
        return Err(Error::UnboundedFamily(format!(
            "raising in direction {b}"
        )));
    }
    let dim = support[0].dim();
    let eb = MultiIndex::unit(dim, b);
    let mut out = LinComb::new();
    for p in support {
        out.add_term(
            host.product(&BTree::jdeco(p.clone(), p.add(&eb))),
            q_one(),
        );
    }
    let parts = host.root_parts();
    for (i, (s, t)) in parts.jdecos.iter().enumerate() {
        let mut jd = parts.jdecos.clone();
        jd[i] = (s.clone(), t.add(&eb));
        let mut children: Vec<(EdgeType, BTree)> = Vec::new();
        for l in &parts.noises {
            children.push((EdgeType::noise(l.clone()), BTree::unit(dim)));
        }
        for (m, c) in &parts.branches {
            children.push((EdgeType::kernel(m.clone()), c.clone()));
        }
        out.add_term(BTree::new(parts.ext.clone(), jd, children), q_one());
    }
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in raise(inner, b, support)?.iter() {
            out.add_term(replace_branch_b(host, i, m, g), c.clone());
        }
    }
    Ok(out)
}

/// Adjoint of `↑_b`: lower one slot polynomial in direction `b`, weighted
/// by its entry; a slot lowered onto its derivative tag disappears.
pub fn raise_star(host: &BTree, b: usize) -> LinComb<BTree> {
    let mut out = LinComb::new();
    let parts = host.root_parts();
    let dim = match parts.jdecos.first() {
        Some((s, _)) => s.dim(),
        None => match parts.branches.first() {
            Some((m, _)) => m.dim(),
            None => match parts.noises.first() {
                Some(l) => l.dim(),
                None => return out,
            },
        },
    };
    let eb = MultiIndex::unit(dim, b);
    for (i, (s, t)) in parts.jdecos.iter().enumerate() {
        if t[b] > s[b] {
            let weight = crate::algebra::qi((t[b] - s[b]) as i64);
            let lowered = t.checked_sub(&eb).unwrap();
            let mut jd = parts.jdecos.clone();
            if &lowered == s {
                jd.remove(i);
            } else {
                jd[i] = (s.clone(), lowered);
            }
            let mut children: Vec<(EdgeType, BTree)> = Vec::new();
            for l in &parts.noises {
                children.push((EdgeType::noise(l.clone()), BTree::unit(dim)));
            }
            for (m, c) in &parts.branches {
                children.push((EdgeType::kernel(m.clone()), c.clone()));
            }
            out.add_term(BTree::new(parts.ext.clone(), jd, children), weight);
        }
    }
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in raise_star(inner, b).iter() {
            out.add_term(replace_branch_b(host, i, m, g), c.clone());
        }
    }
    out
}

/// The lifted coherence map: slot factors contribute a coordinate and a
/// derivative instead of a polynomial lift.
pub fn upsilon_ring(bf: &ExtNonlin, host: &BTree) -> NonlinExpr {
    let parts = host.root_parts();
    let mut base = bf.get(&parts.ext);
    if base.is_zero() {
        return NonlinExpr::zero();
    }
    for l in &parts.noises {
        base = base.d(&EdgeType::noise(l.clone()));
    }
    for (m, _) in &parts.branches {
        base = base.d(&EdgeType::kernel(m.clone()));
    }
    for (s, _) in &parts.jdecos {
        base = base.d(&EdgeType::kernel(s.clone()));
    }
    if base.is_zero() {
        return NonlinExpr::zero();
    }
    for (_, t) in &parts.jdecos {
        base = base.mul(&NonlinExpr::coord(EdgeType::kernel(t.clone())));
    }
    for (_, inner) in &parts.branches {
        base = base.mul(&upsilon_ring(bf, inner));
        if base.is_zero() {
            return base;
        }
    }
    base
}

/// Adjoint of the slot-forgetting projection: all ways of retagging each
/// node's polynomial decoration as slot factors `J_s[X^{s+δ}]` with `s` in
/// the support, weighted by `τ!/σ!`.
pub fn forget_star(t: &Tree, support: &[MultiIndex]) -> Result<LinComb<BTree>> {
    let preimages = forget_preimages(t, support)?;
    let tfac = t.factorial();
    let mut out = LinComb::new();
    for sigma in preimages {
        let coeff = &tfac / sigma.factorial();
        out.add_term(sigma, coeff);
    }
    Ok(out)
}

fn forget_preimages(t: &Tree, support: &[MultiIndex]) -> Result<Vec<BTree>> {
    if support.is_empty() && !t.poly().is_zero() {
        return Err(Error::UnboundedFamily(
            "slot retagging of a polynomial decoration".into(),
        ));
    }
    let parts = t.root_parts();
    let dim = t.dim();
    // Branch preimages combine independently.
    let mut branch_sets: Vec<Vec<(MultiIndex, BTree)>> = Vec::new();
    for (m, inner) in &parts.branches {
        let inner_pre = forget_preimages(inner, support)?;
        branch_sets.push(
            inner_pre
                .into_iter()
                .map(|b| (m.clone(), b))
                .collect(),
        );
    }
    let mut combos: Vec<Vec<(MultiIndex, BTree)>> = vec![Vec::new()];
    for set in &branch_sets {
        let mut next = Vec::new();
        for combo in &combos {
            for item in set {
                let mut c = combo.clone();
                c.push(item.clone());
                next.push(c);
            }
        }
        combos = next;
    }
    // Slot decompositions of the root polynomial.
    let mut decos: Vec<Vec<(MultiIndex, MultiIndex)>> = Vec::new();
    let mut current: Vec<(MultiIndex, MultiIndex)> = Vec::new();
    split_poly(
        &parts.poly,
        support,
        None,
        &MultiIndex::zero(dim),
        &mut current,
        &mut decos,
    );
    let mut out = Vec::new();
    for combo in &combos {
        for deco in &decos {
            let mut children: Vec<(EdgeType, BTree)> = Vec::new();
            for l in &parts.noises {
                children.push((EdgeType::noise(l.clone()), BTree::unit(dim)));
            }
            for (m, b) in combo {
                children.push((EdgeType::kernel(m.clone()), b.clone()));
            }
            let jdecos = deco
                .iter()
                .map(|(s, delta)| (s.clone(), s.add(delta)))
                .collect();
            out.push(BTree::new(parts.ext.clone(), jdecos, children));
        }
    }
    Ok(out)
}

/// Multisets of (tag, shift) pairs with nonzero shifts summing to the
/// polynomial; each multiset appears once, enumerated as a sequence that is
/// nondecreasing in the pair value.
fn split_poly(
    target: &MultiIndex,
    support: &[MultiIndex],
    min_pair: Option<&(MultiIndex, MultiIndex)>,
    acc: &MultiIndex,
    current: &mut Vec<(MultiIndex, MultiIndex)>,
    out: &mut Vec<Vec<(MultiIndex, MultiIndex)>>,
) {
    if acc == target {
        out.push(current.clone());
        return;
    }
    let remaining = target.checked_sub(acc).unwrap();
    for s in support {
        for d in remaining.sub_indices() {
            if d.is_zero() {
                continue;
            }
            let pair = (s.clone(), d.clone());
            if let Some(min) = min_pair {
                if &pair < min {
                    continue;
                }
            }
            current.push(pair.clone());
            split_poly(target, support, Some(&pair), &acc.add(&d), current, out);
            current.pop();
        }
    }
}

// ---------------------------------------------------------------------------
// Grafting on decorated trees
// ---------------------------------------------------------------------------

/// `τ̄ ĥ↷_p τ`: the root attachment consumes part of the root polynomial
/// into the edge derivative, `Σ_r binom(k,r) X^{k−r} ... I_{p−r}[τ̄]`, plus
/// the branch lift.
pub fn hgraft(sub: &Tree, host: &Tree, p: &MultiIndex) -> LinComb<Tree> {
    let mut out = LinComb::new();
    let k = host.poly();
    for r in k.sub_indices() {
        if let Some(edge) = p.checked_sub(&r) {
            let reduced = host.with_root_poly(k.checked_sub(&r).unwrap());
            let attached = reduced.product(&Tree::kernel(edge, sub.clone()));
            out.add_term(attached, Q::from_integer(k.binomial(&r)));
        }
    }
    let parts = host.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in hgraft(sub, inner, p).iter() {
            out.add_term(replace_branch(host, i, m, g), c.clone());
        }
    }
    out
}

fn replace_branch(host: &Tree, idx: usize, m: &MultiIndex, new_inner: &Tree) -> Tree {
    let parts = host.root_parts();
    let mut children: Vec<(EdgeType, Tree)> = Vec::new();
    for l in &parts.noises {
        children.push((EdgeType::noise(l.clone()), Tree::unit(host.dim())));
    }
    for (j, (mj, cj)) in parts.branches.iter().enumerate() {
        if j == idx {
            children.push((EdgeType::kernel(m.clone()), new_inner.clone()));
        } else {
            children.push((EdgeType::kernel(mj.clone()), cj.clone()));
        }
    }
    Tree::new(parts.poly, parts.ext, children)
}

/// Adjoint of `ĥ↷_p`: cut a root branch with derivative `m ≤ p`, bump the
/// root polynomial by `p−m`, weight `1/(p−m)!`; plus the branch lift.
pub fn hgraft_star(host: &Tree, p: &MultiIndex) -> LinComb<(Tree, Tree)> {
    let mut out = LinComb::new();
    let parts = host.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        if let Some(diff) = p.checked_sub(m) {
            let mut children: Vec<(EdgeType, Tree)> = Vec::new();
            for l in &parts.noises {
                children.push((EdgeType::noise(l.clone()), Tree::unit(host.dim())));
            }
            for (j, (mj, cj)) in parts.branches.iter().enumerate() {
                if j != i {
                    children.push((EdgeType::kernel(mj.clone()), cj.clone()));
                }
            }
            let rest = Tree::new(parts.poly.add(&diff), parts.ext.clone(), children);
            out.add_term(
                (inner.clone(), rest),
                q_one() / Q::from_integer(diff.factorial()),
            );
        }
    }
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for ((l, r), c) in hgraft_star(inner, p).iter() {
            out.add_term((l.clone(), replace_branch(host, i, m, r)), c.clone());
        }
    }
    out
}

/// `↑̂_b τ = X^{e_b} τ + branch lift`: one unit of polynomial decoration at
/// every node.
pub fn hat_raise(host: &Tree, b: usize) -> LinComb<Tree> {
    let mut out = LinComb::new();
    let eb = MultiIndex::unit(host.dim(), b);
    out.add_term(host.with_root_poly(host.poly().add(&eb)), q_one());
    let parts = host.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in hat_raise(inner, b).iter() {
            out.add_term(replace_branch(host, i, m, g), c.clone());
        }
    }
    out
}

/// Adjoint of `↑̂_b`: lower the polynomial decoration weighted by its entry.
pub fn hat_raise_star(host: &Tree, b: usize) -> LinComb<Tree> {
    let mut out = LinComb::new();
    let k = host.poly()[b];
    if k > 0 {
        let eb = MultiIndex::unit(host.dim(), b);
        out.add_term(
            host.with_root_poly(host.poly().checked_sub(&eb).unwrap()),
            crate::algebra::qi(k as i64),
        );
    }
    let parts = host.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (g, c) in hat_raise_star(inner, b).iter() {
            out.add_term(replace_branch(host, i, m, g), c.clone());
        }
    }
    out
}

/// Grafting restricted to the conforming span: `τ̄ ⤸_p τ = π_R(τ̄ ĥ↷_p τ)`.
pub fn bgraft(ctx: &Context, sub: &Tree, host: &Tree, p: &MultiIndex) -> Result<LinComb<Tree>> {
    ctx.project_conforming(&hgraft(sub, host, p), Structure::Extended)
}

/// Adjoint of `⤸_p`: both factors projected onto the conforming span.
pub fn bgraft_star(ctx: &Context, host: &Tree, p: &MultiIndex) -> Result<LinComb<(Tree, Tree)>> {
    let mut out = LinComb::new();
    for ((l, r), c) in hgraft_star(host, p).iter() {
        if ctx.extended_conforms(l)? && ctx.extended_conforms(r)? {
            out.add_term((l.clone(), r.clone()), c.clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Generator reachability
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct GeneratorsReport {
    pub total: usize,
    pub reachable: usize,
    /// Constructive decompositions `(tree, branch inner, derivative, rest)`.
    pub witnesses: Vec<(Tree, Tree, MultiIndex, Tree)>,
    pub failures: Vec<Tree>,
}

/// Verifies every basis tree is reachable from the kernel-edge-free
/// generators by iterated conforming grafts: each tree with a kernel branch
/// decomposes as that branch grafted onto the rest, provided the rest still
/// conforms.
pub fn generators_check(ctx: &Context) -> Result<GeneratorsReport> {
    let basis = ctx.circ_ex()?;
    let mut report = GeneratorsReport {
        total: basis.len(),
        ..Default::default()
    };
    let mut verified: BTreeSet<Tree> = BTreeSet::new();
    for t in basis.iter() {
        if reachable(ctx, t, &mut verified, &mut report.witnesses)? {
            report.reachable += 1;
        } else {
            report.failures.push(t.clone());
        }
    }
    Ok(report)
}

fn reachable(
    ctx: &Context,
    t: &Tree,
    verified: &mut BTreeSet<Tree>,
    witnesses: &mut Vec<(Tree, Tree, MultiIndex, Tree)>,
) -> Result<bool> {
    if verified.contains(t) {
        return Ok(true);
    }
    if t.kernel_edge_count() == 0 {
        verified.insert(t.clone());
        return Ok(true);
    }
    let parts = t.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        let mut children: Vec<(EdgeType, Tree)> = Vec::new();
        for l in &parts.noises {
            children.push((EdgeType::noise(l.clone()), Tree::unit(t.dim())));
        }
        for (j, (mj, cj)) in parts.branches.iter().enumerate() {
            if j != i {
                children.push((EdgeType::kernel(mj.clone()), cj.clone()));
            }
        }
        let rest = Tree::new(parts.poly.clone(), parts.ext.clone(), children);
        if !ctx.extended_conforms(&rest)? || !ctx.extended_conforms(inner)? {
            continue;
        }
        if reachable(ctx, inner, verified, witnesses)?
            && reachable(ctx, &rest, verified, witnesses)?
        {
            // The graft of `inner` onto `rest` along m contains t with a
            // positive coefficient (the r = 0 root term; all graft
            // coefficients are positive, so no cancellation).
            witnesses.push((t.clone(), inner.clone(), m.clone(), rest));
            verified.insert(t.clone());
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::qi;
    use crate::nonlin::expr::parse_nonlin;
    use crate::rules::load_spec;
    use crate::trees::{binner_product, inner_product, parse_btree, parse_tree};

    fn ctx() -> Context {
        Context::new(load_spec("phi4_3").unwrap())
    }

    fn t(s: &str) -> Tree {
        parse_tree(s, 4).unwrap()
    }

    fn bt(s: &str) -> BTree {
        parse_btree(s, 2).unwrap()
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn graft_into_bare_node() {
        let sub = BTree::noise(mi(&[0, 0]));
        let host = BTree::unit(2);
        let p = mi(&[1, 0]);
        let got = graft(&sub, &host, &p);
        assert_eq!(got, LinComb::basis(BTree::kernel(p, sub)));
    }

    #[test]
    fn graft_four_term_example() {
        // Host with two slot factors and one branch carrying another slot:
        // grafting produces root attach, one slot conversion at the root,
        // branch-root attach, and one conversion in the branch.
        let host = bt("J_(1,0)[X^(2,0)]*J_(0,1)[X^(0,2)]*I[J_(0,0)[X^(2,0)]]");
        let sub = bt("Xi");
        let p = mi(&[2, 0]);
        let got = graft(&sub, &host, &p);
        assert_eq!(got.len(), 4);
        assert_eq!(got.iter().count(), 4);
    }

    #[test]
    fn hgraft_examples() {
        // Ξ ĥ↷_0 1 = I[Ξ].
        let got = hgraft(&t("Xi"), &Tree::unit(4), &mi(&[0; 4]));
        assert_eq!(got, LinComb::basis(t("I[Xi]")));
        // Ξ ĥ↷_p X^k = Σ_{r ≤ k∧p} binom(k,r) X^{k−r} I_{p−r}[Ξ].
        let host = t("X^(1,0,0,0)");
        let p = mi(&[1, 0, 0, 0]);
        let got = hgraft(&t("Xi"), &host, &p);
        assert_eq!(got.len(), 2);
        assert_eq!(got.coeff(&t("X^(1,0,0,0)*I_(1,0,0,0)[Xi]")), qi(1));
        assert_eq!(got.coeff(&t("I[Xi]")), qi(1));
    }

    #[test]
    fn hat_raise_and_star() {
        // ↑̂_b Ξ: only the root gains a decoration (the noise node is bare).
        let got = hat_raise(&t("Xi"), 0);
        assert_eq!(got, LinComb::basis(t("X^(1,0,0,0)*Xi")));
        // ↑̂*_b X^{e_b} = 1, ↑̂*_b 1 = 0.
        assert_eq!(
            hat_raise_star(&t("X^(1,0,0,0)"), 0),
            LinComb::basis(Tree::unit(4))
        );
        assert!(hat_raise_star(&Tree::unit(4), 0).is_zero());
    }

    #[test]
    fn adjointness_hgraft_random_triples() {
        // ⟨τ̄ ĥ↷_p τ, σ⟩ = ⟨τ̄ ⊗ τ, ĥ↷_p* σ⟩.
        let subs = [t("Xi"), t("I[Xi]")];
        let hosts = [t("X^(1,0,0,0)"), t("I[Xi]*I[Xi]"), t("I[X^(0,0,1,0)*Xi]")];
        let sigmas = [
            t("I[Xi]*I_(1,0,0,0)[Xi]"),
            t("X^(1,0,0,0)*I[I[Xi]]"),
            t("I[I[Xi]*Xi]"),
        ];
        for p in [mi(&[0; 4]), mi(&[1, 0, 0, 0])] {
            for sub in &subs {
                for host in &hosts {
                    for sigma in &sigmas {
                        let lhs = inner_product(
                            &hgraft(sub, host, &p),
                            &LinComb::basis(sigma.clone()),
                        );
                        let star = hgraft_star(sigma, &p);
                        let mut rhs = crate::algebra::q_zero();
                        for ((l, r), c) in star.iter() {
                            if l == sub && r == host {
                                rhs += c * sub.factorial() * host.factorial();
                            }
                        }
                        assert_eq!(lhs, rhs, "p={p} sub={sub} host={host} sigma={sigma}");
                    }
                }
            }
        }
    }

    #[test]
    fn transport_along_forgetting() {
        // (Q ⊗ Q) ↷_p* = ĥ↷_p* Q on slot-tagged trees.
        let cases = [
            bt("I[Xi]*J_(0,0)[X^(1,0)]"),
            bt("I[J_(0,0)[X^(0,1)]*Xi]"),
            bt("I_(1,0)[Xi]*I[Xi]"),
        ];
        for p in [mi(&[0, 0]), mi(&[1, 0])] {
            for sigma in &cases {
                let lhs: LinComb<(Tree, Tree)> = graft_star(sigma, &p)
                    .rename(|(a, b)| (a.forget_slots(2), b.forget_slots(2)));
                let rhs = hgraft_star(&sigma.forget_slots(2), &p);
                assert_eq!(lhs, rhs, "p={p} sigma={sigma}");
            }
        }
    }

    #[test]
    fn upsilon_ring_cases() {
        let f = ExtNonlin::reduced(parse_nonlin("Y[I]^3 + Y[Xi]", 2).unwrap());
        // Υ̊[1] = F.
        assert_eq!(
            upsilon_ring(&f, &BTree::unit(2)),
            parse_nonlin("Y[I]^3 + Y[Xi]", 2).unwrap()
        );
        // Υ̊[J_0[X^{e_b}]] = Y[I,(1,0)] · D_I F = 3 Y[I,(1,0)] Y[I]².
        let host = bt("J_(0,0)[X^(1,0)]");
        assert_eq!(
            upsilon_ring(&f, &host),
            parse_nonlin("3*Y[I,(1,0)]*Y[I]^2", 2).unwrap()
        );
    }

    #[test]
    fn upsilon_through_retagging() {
        // Υ[τ] = Υ̊[Q*τ] with the support of the non-linearity.
        let c = ctx();
        let f = ExtNonlin::reduced(parse_nonlin("Y[I]^3 + Y[Xi]", 4).unwrap());
        let support = vec![MultiIndex::zero(4)];
        for s in ["Xi", "I[Xi]", "X^(1,0,0,0)*I[Xi]", "I[X^(0,0,1,0)*Xi]"] {
            let tau = t(s);
            let direct = crate::nonlin::upsilon::upsilon(&f, &tau);
            let pre = forget_star(&tau, &support).unwrap();
            let mut lifted = NonlinExpr::zero();
            for (sigma, coeff) in pre.iter() {
                lifted = lifted.add(&upsilon_ring(&f, sigma).scale(coeff));
            }
            assert_eq!(direct, lifted, "tree {s}");
            let _ = &c;
        }
    }

    #[test]
    fn forget_adjointness() {
        // ⟨Qσ, τ⟩ = ⟨σ, Q*τ⟩ on sample pairs.
        let support = vec![mi(&[0, 0]), mi(&[1, 0])];
        let taus = [
            parse_tree("X^(1,0)*Xi", 2).unwrap(),
            parse_tree("X^(2,0)*I[Xi]", 2).unwrap(),
        ];
        let sigmas = [
            bt("J_(0,0)[X^(1,0)]*Xi"),
            bt("J_(1,0)[X^(2,0)]*I[Xi]"),
            bt("J_(0,0)[X^(1,0)]*J_(0,0)[X^(1,0)]*I[Xi]"),
        ];
        for tau in &taus {
            let star = forget_star(tau, &support).unwrap();
            for sigma in &sigmas {
                let lhs = if &sigma.forget_slots(2) == tau {
                    tau.factorial()
                } else {
                    crate::algebra::q_zero()
                };
                let rhs = binner_product(&star, &LinComb::basis(sigma.clone()));
                assert_eq!(lhs, rhs, "tau={tau} sigma={sigma}");
            }
        }
    }

    #[test]
    fn generators_reachable_for_phi43() {
        let c = ctx();
        let report = generators_check(&c).unwrap();
        assert_eq!(report.total, report.reachable);
        assert!(report.failures.is_empty());
    }
}
