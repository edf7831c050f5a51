//! Positive and negative coproducts, antipodes, and the untruncated
//! coproduct composites.
//!
//! The positive coproduct encodes Taylor recentring and has both a recursive
//! and a global (subtree-sum) implementation, kept as mutual oracles. The
//! negative coproduct extracts negative subforests and contracts them,
//! recording degrees in extended decorations when asked to.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;


use crate::algebra::{bilinear, q_one, Degree, LinComb, MultiIndex, Q};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::trees::extraction::{contract, extract, Extraction, IndexedTree};
use crate::trees::{DegreeMode, EdgeKind, EdgeType, Forest, Tree};

/// Which grading truncates the positive coproduct and which decorations the
/// negative one writes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Structure {
    Reduced,
    Extended,
}

impl Structure {
    pub fn mode(self) -> DegreeMode {
        match self {
            Structure::Reduced => DegreeMode::S,
            Structure::Extended => DegreeMode::Plus,
        }
    }

    fn key(self) -> u8 {
        match self {
            Structure::Reduced => 0,
            Structure::Extended => 1,
        }
    }
}

/// Domain of the positive coproduct.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum PlusDomain {
    /// The comodule of conforming trees.
    Model,
    /// The positive Hopf algebra itself (left factors projected positive).
    Plus,
}

/// Domain of the negative coproduct.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum MinusDomain {
    Model,
    Plus,
    Minus,
}

pub type PlusResult = LinComb<(Tree, Tree)>;
pub type MinusResult = LinComb<(Forest, Tree)>;
pub type ForestMinusResult = LinComb<(Forest, Forest)>;

fn combine_pairs(a: &PlusResult, b: &PlusResult) -> PlusResult {
    bilinear(a, b, |(l1, r1), (l2, r2)| {
        LinComb::basis((l1.product(l2), r1.product(r2)))
    })
}

// ---------------------------------------------------------------------------
// Positive coproduct, recursive form
// ---------------------------------------------------------------------------

fn check_plus_flavor(ctx: &Context, t: &Tree, st: Structure) -> Result<()> {
    let mismatch = |found: String| Error::FlavorMismatch {
        expected: "product of polynomials and positive planted conforming trees".into(),
        found,
    };
    if !t.ext().is_zero() {
        return Err(mismatch(format!("{t} has a root extended decoration")));
    }
    let mode = st.mode();
    for (e, c) in t.children() {
        if e.kind == EdgeKind::Noise {
            return Err(mismatch(format!("{t} has a noise edge at the root")));
        }
        let branch = Tree::kernel(e.deriv.clone(), c.clone());
        if !branch.degree(ctx.params(), mode).is_positive() {
            return Err(mismatch(format!("branch {branch} has non-positive degree")));
        }
        if !ctx.conforms_in(c, st)? {
            return Err(mismatch(format!("branch inner tree {c} does not conform")));
        }
    }
    Ok(())
}

fn check_model_flavor(ctx: &Context, t: &Tree, st: Structure) -> Result<()> {
    if !ctx.conforms_in(t, st)? {
        return Err(Error::FlavorMismatch {
            expected: format!("conforming tree ({st:?} structure)"),
            found: t.to_string(),
        });
    }
    Ok(())
}

/// The positive coproduct, computed by the recursive definition.
pub fn delta_plus(
    ctx: &Context,
    t: &Tree,
    domain: PlusDomain,
    st: Structure,
) -> Result<PlusResult> {
    match domain {
        PlusDomain::Model => check_model_flavor(ctx, t, st)?,
        PlusDomain::Plus => check_plus_flavor(ctx, t, st)?,
    }
    delta_plus_rec(ctx, t, domain, st)
}

fn delta_plus_rec(
    ctx: &Context,
    t: &Tree,
    domain: PlusDomain,
    st: Structure,
) -> Result<PlusResult> {
    let key = (
        t.clone(),
        st.key() | if domain == PlusDomain::Plus { 2 } else { 0 },
    );
    if let Some(hit) = ctx.dp_memo.read().unwrap().get(&key) {
        return Ok((**hit).clone());
    }

    let dim = ctx.dim();
    let parts = t.root_parts();
    let mode = st.mode();

    // Extended decorations ride on the left factor only.
    let mut acc: PlusResult = LinComb::basis((
        Tree::ext_unit(dim, parts.ext.clone()),
        Tree::unit(dim),
    ));

    // Polynomial decoration: Δ X^k = Σ binom(k, n) X^n ⊗ X^{k−n}.
    if !parts.poly.is_zero() {
        let mut poly_cp = LinComb::new();
        for n in parts.poly.sub_indices() {
            let rest = parts.poly.checked_sub(&n).unwrap();
            poly_cp.add_term(
                (Tree::poly_tree(n.clone()), Tree::poly_tree(rest)),
                Q::from_integer(parts.poly.binomial(&n)),
            );
        }
        acc = combine_pairs(&acc, &poly_cp);
    }

    // Noise edges are primitive on the left.
    for l in &parts.noises {
        acc = combine_pairs(
            &acc,
            &LinComb::basis((Tree::noise(l.clone()), Tree::unit(dim))),
        );
    }

    // Kernel branches: (I_m ⊗ id) Δ σ plus the recentring tail.
    for (m, inner) in &parts.branches {
        let inner_cp = delta_plus_rec(ctx, inner, PlusDomain::Model, st)?;
        let branch = Tree::kernel(m.clone(), inner.clone());
        let bound = branch.degree(ctx.params(), mode);
        let mut branch_cp: PlusResult = LinComb::new();
        for ((l, r), c) in inner_cp.iter() {
            let wrapped = Tree::kernel(m.clone(), l.clone());
            if domain == PlusDomain::Plus
                && !wrapped.degree(ctx.params(), mode).is_positive()
            {
                continue;
            }
            branch_cp.add_term((wrapped, r.clone()), c.clone());
        }
        for k in crate::algebra::indices_below(dim, &ctx.params().scaling, &bound) {
            let coeff = Q::from_integer(1.into()) / Q::from_integer(k.factorial());
            branch_cp.add_term(
                (
                    Tree::poly_tree(k.clone()),
                    Tree::kernel(k.add(m), inner.clone()),
                ),
                coeff,
            );
        }
        acc = combine_pairs(&acc, &branch_cp);
    }

    ctx.dp_memo
        .write()
        .unwrap()
        .insert(key, Arc::new(acc.clone()));
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Positive coproduct, global form
// ---------------------------------------------------------------------------

/// The positive coproduct, computed by the global sum over rooted subtrees
/// with split decorations and boundary derivatives. Output is identical to
/// `delta_plus`; the two serve as mutual oracles.
pub fn delta_plus_global(
    ctx: &Context,
    t: &Tree,
    domain: PlusDomain,
    st: Structure,
) -> Result<PlusResult> {
    match domain {
        PlusDomain::Model => check_model_flavor(ctx, t, st)?,
        PlusDomain::Plus => check_plus_flavor(ctx, t, st)?,
    }
    let mode = st.mode();
    let it = IndexedTree::new(t);
    let n = it.len();
    let dim = ctx.dim();
    let mut out: PlusResult = LinComb::new();

    // Rooted subtrees: node sets containing the root that are closed under
    // taking parents.
    'subsets: for mask in 0..(1u32 << (n - 1)) {
        let mut nodes: BTreeSet<usize> = BTreeSet::from([0]);
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                nodes.insert(i);
            }
        }
        for &i in &nodes {
            if let Some((p, _)) = &it.node(i).parent {
                if !nodes.contains(p) {
                    continue 'subsets;
                }
            }
        }
        // Boundary edges must all be kernel edges, else the right factor
        // cannot lie in the positive algebra.
        let mut boundary: Vec<usize> = Vec::new();
        for &i in &nodes {
            for &c in &it.node(i).children {
                if !nodes.contains(&c) {
                    boundary.push(c);
                }
            }
        }
        boundary.sort_unstable();
        if boundary
            .iter()
            .any(|&y| it.node(y).parent.as_ref().unwrap().1.kind == EdgeKind::Noise)
        {
            continue;
        }
        // Positivity bounds for the boundary derivatives.
        let mut bounds: Vec<(usize, Degree)> = Vec::with_capacity(boundary.len());
        for &y in &boundary {
            let (_, e) = it.node(y).parent.clone().unwrap();
            let branch = Tree::kernel(e.deriv.clone(), it.subtree(y));
            let bound = branch.degree(ctx.params(), mode);
            if !bound.is_positive() {
                continue 'subsets;
            }
            bounds.push((y, bound));
        }

        // Enumerate polynomial splits over the subtree nodes.
        let node_list: Vec<usize> = nodes.iter().copied().collect();
        let mut splits: Vec<(Vec<(usize, MultiIndex)>, Q)> = vec![(Vec::new(), q_one())];
        for &x in &node_list {
            let poly = &it.node(x).poly;
            if poly.is_zero() {
                continue;
            }
            let mut next = Vec::new();
            for sub in poly.sub_indices() {
                let binom = Q::from_integer(poly.binomial(&sub));
                for (assign, coeff) in &splits {
                    let mut a = assign.clone();
                    a.push((x, sub.clone()));
                    next.push((a, coeff * &binom));
                }
            }
            splits = next;
        }

        // Enumerate boundary derivatives within the positivity bounds.
        let mut derivs: Vec<(Vec<(usize, MultiIndex)>, Q)> = vec![(Vec::new(), q_one())];
        for (y, bound) in &bounds {
            let mut next = Vec::new();
            for k in crate::algebra::indices_below(dim, &ctx.params().scaling, bound) {
                let f = Q::from_integer(1.into()) / Q::from_integer(k.factorial());
                for (assign, coeff) in &derivs {
                    let mut a = assign.clone();
                    a.push((*y, k.clone()));
                    next.push((a, coeff * &f));
                }
            }
            derivs = next;
        }

        for (poly_assign, poly_coeff) in &splits {
            for (deriv_assign, deriv_coeff) in &derivs {
                let sel = Extraction {
                    components: vec![nodes.clone()],
                    node_poly: poly_assign.iter().cloned().collect(),
                    edge_deriv: deriv_assign.iter().cloned().collect(),
                };
                // The rooted subtree with split decorations is exactly the
                // extraction of the single component containing the root.
                let forest = extract(t, &sel)?;
                debug_assert_eq!(forest.trees().len(), 1);
                let left = forest.trees()[0].clone();
                if domain == PlusDomain::Plus && !positive_form(ctx, &left, mode) {
                    continue;
                }
                let right = cut_above(&it, &nodes, &sel, dim);
                out.add_term((left, right), poly_coeff * deriv_coeff);
            }
        }
    }
    Ok(out)
}

/// Is the tree of the form `X^k Π I_m[τ_j]` with every branch positive?
fn positive_form(ctx: &Context, t: &Tree, mode: DegreeMode) -> bool {
    t.ext().is_zero()
        && t.children().iter().all(|(e, c)| {
            e.is_kernel()
                && Tree::kernel(e.deriv.clone(), c.clone())
                    .degree(ctx.params(), mode)
                    .is_positive()
        })
}

/// The right factor of the global positive coproduct: the root subtree
/// collapses to a bare root carrying the undistributed polynomial, and
/// boundary edges gain their derivative.
fn cut_above(
    it: &IndexedTree,
    nodes: &BTreeSet<usize>,
    sel: &Extraction,
    dim: usize,
) -> Tree {
    let mut root_poly = MultiIndex::zero(dim);
    for &x in nodes {
        let kept = sel
            .node_poly
            .get(&x)
            .cloned()
            .unwrap_or_else(|| MultiIndex::zero(dim));
        root_poly = root_poly.add(&it.node(x).poly.checked_sub(&kept).unwrap());
    }
    let mut children = Vec::new();
    for &x in nodes {
        for &y in &it.node(x).children {
            if !nodes.contains(&y) {
                let (_, mut e) = it.node(y).parent.clone().unwrap();
                if let Some(extra) = sel.edge_deriv.get(&y) {
                    e.deriv = e.deriv.add(extra);
                }
                children.push((e, it.subtree(y)));
            }
        }
    }
    Tree::new(root_poly, Degree::zero(), children)
}

// ---------------------------------------------------------------------------
// Negative coproduct
// ---------------------------------------------------------------------------

/// One surviving extraction: `coeff · forest ⊗ contracted`.
#[derive(Clone, Debug)]
pub struct CutTerm {
    pub coeff: Q,
    pub forest: Forest,
    pub contracted: Tree,
}

/// Enumerates every extraction of a negative conforming subforest from `t`,
/// with all decoration splits, in the given structure. The sum runs over
/// subgraphs: subsets of edges, whose connected components are the extracted
/// trees — two components may be adjacent in `t`. Components must be
/// unplanted, carry no polynomial at their root, conform, and have negative
/// degree; everything else is projected away.
pub fn negative_cuts(ctx: &Context, t: &Tree, st: Structure) -> Result<Arc<Vec<CutTerm>>> {
    let key = (t.clone(), st.key());
    if let Some(hit) = ctx.cut_memo.read().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let it = IndexedTree::new(t);
    let n = it.len();
    let dim = ctx.dim();
    let params = ctx.params();
    let mut terms: Vec<CutTerm> = Vec::new();

    // Edges are identified by their child node; ids 1..n. Components of a
    // chosen edge set are built in one ascending pass (parents precede
    // children in preorder).
    'subsets: for mask in 0..(1u64 << (n - 1)) {
        let mut comp_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut comps: Vec<BTreeSet<usize>> = Vec::new();
        for c in 1..n {
            if mask & (1 << (c - 1)) == 0 {
                continue;
            }
            let p = it.node(c).parent.as_ref().unwrap().0;
            let ci = match comp_of.get(&p) {
                Some(&ci) => ci,
                None => {
                    comps.push(BTreeSet::from([p]));
                    comp_of.insert(p, comps.len() - 1);
                    comps.len() - 1
                }
            };
            comps[ci].insert(c);
            comp_of.insert(c, ci);
        }

        // Shape prechecks per component (decoration-independent): the root
        // polynomial is forced to zero, so a single chosen edge at the
        // component root means a planted extraction.
        let mut budgets: Vec<(usize, Degree)> = Vec::new(); // (comp index, base degree)
        for (ci, comp) in comps.iter().enumerate() {
            let root = it.component_root(comp);
            let root_edges = it
                .node(root)
                .children
                .iter()
                .filter(|c| comp.contains(c))
                .count();
            if root_edges == 1 {
                continue 'subsets;
            }
            let mut base = Degree::zero();
            for &x in comp {
                if x != root {
                    let (_, e) = it.node(x).parent.clone().unwrap();
                    base += &params.edge_degree(&e);
                }
            }
            if !base.is_negative() {
                continue 'subsets;
            }
            if !component_conforms(ctx, &it, comp, st)? {
                continue 'subsets;
            }
            budgets.push((ci, base));
        }

        // Decoration choices per component: polynomial splits at non-root
        // nodes and boundary derivatives below non-root nodes, with total
        // scaled weight keeping the component degree negative.
        let mut assignments: Vec<(Extraction, Q)> = vec![(
            Extraction {
                components: comps.clone(),
                node_poly: Default::default(),
                edge_deriv: Default::default(),
            },
            q_one(),
        )];
        for (ci, base) in &budgets {
            let comp = &comps[*ci];
            let root = it.component_root(comp);
            let max_weight = -base.clone();
            let mut slots: Vec<DecorationSlot> = Vec::new();
            for &x in comp {
                if x == root {
                    continue;
                }
                if !it.node(x).poly.is_zero() {
                    slots.push(DecorationSlot::Poly(x));
                }
                for &c in &it.node(x).children {
                    if !comp.contains(&c) {
                        slots.push(DecorationSlot::Edge(c));
                    }
                }
            }
            let mut next: Vec<(Extraction, Q)> = Vec::new();
            for (sel, coeff) in &assignments {
                decorate(
                    ctx,
                    &it,
                    &slots,
                    0,
                    sel,
                    coeff,
                    &Degree::zero(),
                    &max_weight,
                    dim,
                    &mut next,
                );
            }
            assignments = next;
        }

        for (sel, coeff) in assignments {
            let forest = extract(t, &sel)?;
            let contracted = contract(t, &sel, params)?;
            terms.push(CutTerm {
                coeff,
                forest,
                contracted,
            });
        }
    }

    let arc = Arc::new(terms);
    ctx.cut_memo.write().unwrap().insert(key, arc.clone());
    Ok(arc)
}

enum DecorationSlot {
    /// Split part of the polynomial decoration at a node.
    Poly(usize),
    /// Extra derivative on the boundary edge above this child.
    Edge(usize),
}

#[allow(clippy::too_many_arguments)]
fn decorate(
    ctx: &Context,
    it: &IndexedTree,
    slots: &[DecorationSlot],
    i: usize,
    sel: &Extraction,
    coeff: &Q,
    weight: &Degree,
    max_weight: &Degree,
    dim: usize,
    out: &mut Vec<(Extraction, Q)>,
) {
    if i == slots.len() {
        out.push((sel.clone(), coeff.clone()));
        return;
    }
    let headroom = max_weight - weight;
    match &slots[i] {
        DecorationSlot::Poly(x) => {
            for sub in it.node(*x).poly.sub_indices() {
                let w = sub.s_degree(&ctx.params().scaling);
                if w >= headroom {
                    continue;
                }
                let c = coeff * Q::from_integer(it.node(*x).poly.binomial(&sub));
                let mut s = sel.clone();
                if !sub.is_zero() {
                    s.node_poly.insert(*x, sub);
                }
                decorate(ctx, it, slots, i + 1, &s, &c, &(weight + &w), max_weight, dim, out);
            }
        }
        DecorationSlot::Edge(y) => {
            for k in crate::algebra::indices_below(dim, &ctx.params().scaling, &headroom) {
                let w = k.s_degree(&ctx.params().scaling);
                let c = coeff / Q::from_integer(k.factorial());
                let mut s = sel.clone();
                if !k.is_zero() {
                    s.edge_deriv.insert(*y, k);
                }
                decorate(ctx, it, slots, i + 1, &s, &c, &(weight + &w), max_weight, dim, out);
            }
        }
    }
}

/// Does the component, read as a standalone tree shape, conform? Only edge
/// multisets and extended decorations matter.
fn component_conforms(
    ctx: &Context,
    it: &IndexedTree,
    comp: &BTreeSet<usize>,
    st: Structure,
) -> Result<bool> {
    for &x in comp {
        let multiset: Vec<EdgeType> = it
            .node(x)
            .children
            .iter()
            .filter(|c| comp.contains(c))
            .map(|&c| it.node(c).parent.clone().unwrap().1)
            .collect();
        let ok = match st {
            Structure::Reduced => ctx.spec().rule.contains(&multiset),
            Structure::Extended => ctx
                .profiles()?
                .contains(&sorted(multiset), &it.node(x).ext),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sorted(mut v: Vec<EdgeType>) -> Vec<EdgeType> {
    v.sort();
    v
}

/// The negative coproduct on trees: extraction ⊗ contraction. For the
/// `Model` domain the right factor must conform (else the rule is
/// incomplete); for the `Plus` domain the coproduct acts per planted branch
/// and never extracts across the root.
pub fn delta_minus(
    ctx: &Context,
    t: &Tree,
    domain: MinusDomain,
    st: Structure,
) -> Result<MinusResult> {
    match domain {
        MinusDomain::Model => {
            check_model_flavor(ctx, t, st)?;
            let mut out = MinusResult::new();
            for term in negative_cuts(ctx, t, st)?.iter() {
                let right = reduce_if(term.contracted.clone(), st);
                if !ctx.conforms_in(&right, st)? {
                    return Err(Error::RuleIncomplete {
                        offender: right.to_string(),
                    });
                }
                out.add_term((term.forest.clone(), right), term.coeff.clone());
            }
            Ok(out)
        }
        MinusDomain::Plus => {
            check_plus_flavor(ctx, t, st)?;
            let parts = t.root_parts();
            let base = Tree::poly_tree(parts.poly.clone());
            let mut out: MinusResult = LinComb::basis((Forest::empty(), base));
            for (m, inner) in &parts.branches {
                let planted = Tree::kernel(m.clone(), inner.clone());
                let mut branch_out = MinusResult::new();
                for term in negative_cuts(ctx, &planted, st)?.iter() {
                    let right = reduce_if(term.contracted.clone(), st);
                    let inner_right = &right.children()[0].1;
                    if !ctx.conforms_in(inner_right, st)? {
                        return Err(Error::RuleIncomplete {
                            offender: right.to_string(),
                        });
                    }
                    branch_out.add_term((term.forest.clone(), right), term.coeff.clone());
                }
                out = bilinear(&out, &branch_out, |(f1, t1), (f2, t2)| {
                    LinComb::basis(((f1.join(f2)), t1.product(t2)))
                });
            }
            Ok(out)
        }
        MinusDomain::Minus => Err(Error::Invalid(
            "use delta_minus_forest for the negative Hopf algebra domain".into(),
        )),
    }
}

fn reduce_if(t: Tree, st: Structure) -> Tree {
    match st {
        Structure::Reduced => t.project_reduced(),
        Structure::Extended => t,
    }
}

fn check_minus_flavor(ctx: &Context, f: &Forest, st: Structure) -> Result<()> {
    for t in f.trees() {
        let ok = ctx.conforms_in(t, st)?
            && ctx.degree(t, DegreeMode::S).is_negative()
            && t.poly().is_zero()
            && !t.is_planted()
            && !t.is_unit();
        if !ok {
            return Err(Error::FlavorMismatch {
                expected: "forest of negative unplanted conforming trees".into(),
                found: t.to_string(),
            });
        }
    }
    Ok(())
}

/// The negative coproduct on its own Hopf algebra: both factors are forests
/// of negative trees. A component contracted to a single bare node with no
/// polynomial decoration is identified with the unit forest (its extended
/// bookkeeping decoration is forgotten), which is what makes the counit
/// axioms hold.
pub fn delta_minus_forest(
    ctx: &Context,
    f: &Forest,
    st: Structure,
) -> Result<ForestMinusResult> {
    check_minus_flavor(ctx, f, st)?;
    let mut out: ForestMinusResult = LinComb::basis((Forest::empty(), Forest::empty()));
    for t in f.trees() {
        let mut tree_out = ForestMinusResult::new();
        for term in negative_cuts(ctx, t, st)?.iter() {
            let right = reduce_if(term.contracted.clone(), st);
            let right_forest = if right.children().is_empty() && right.poly().is_zero() {
                Forest::empty()
            } else if ctx.degree(&right, DegreeMode::S).is_negative()
                && right.poly().is_zero()
                && !right.is_planted()
                && ctx.conforms_in(&right, st)?
            {
                Forest::single(right)
            } else {
                continue;
            };
            tree_out.add_term((term.forest.clone(), right_forest), term.coeff.clone());
        }
        out = bilinear(&out, &tree_out, |(a1, b1), (a2, b2)| {
            LinComb::basis((a1.join(a2), b1.join(b2)))
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Antipodes
// ---------------------------------------------------------------------------

/// Antipode of the positive Hopf algebra, by generator recursion:
/// A(X^i) = −X^i and, reading the coproduct of a planted generator,
/// A(I_m τ) = −I_m τ − Σ A(left)·right over the proper middle terms.
pub fn antipode_plus(ctx: &Context, t: &Tree, st: Structure) -> Result<LinComb<Tree>> {
    check_plus_flavor(ctx, t, st)?;
    antipode_plus_rec(ctx, t, st)
}

fn antipode_plus_rec(ctx: &Context, t: &Tree, st: Structure) -> Result<LinComb<Tree>> {
    let dim = ctx.dim();
    let mut acc: LinComb<Tree> = LinComb::basis(Tree::unit(dim));
    for i in 0..dim {
        for _ in 0..t.poly()[i] {
            let xi = Tree::poly_tree(MultiIndex::unit(dim, i));
            acc = acc.map_basis(|b| LinComb::single(b.product(&xi), -q_one()));
        }
    }
    for (e, inner) in t.children() {
        let gen = Tree::kernel(e.deriv.clone(), inner.clone());
        let ag = antipode_plus_generator(ctx, &gen, st)?;
        acc = bilinear(&acc, &ag, |a, b| LinComb::basis(a.product(b)));
    }
    Ok(acc)
}

fn antipode_plus_generator(ctx: &Context, gen: &Tree, st: Structure) -> Result<LinComb<Tree>> {
    let key = (gen.clone(), st.key());
    if let Some(hit) = ctx.ap_memo.read().unwrap().get(&key) {
        return Ok((**hit).clone());
    }
    let unit = Tree::unit(ctx.dim());
    let cp = delta_plus(ctx, gen, PlusDomain::Plus, st)?;
    let mut acc = LinComb::single(gen.clone(), -q_one());
    for ((l, r), c) in cp.iter() {
        if (l == gen && r == &unit) || (l == &unit && r == gen) {
            continue;
        }
        let al = antipode_plus_rec(ctx, l, st)?;
        for (b, cb) in al.iter() {
            acc.add_term(b.product(r), -(c * cb));
        }
    }
    ctx.ap_memo
        .write()
        .unwrap()
        .insert(key, Arc::new(acc.clone()));
    Ok(acc)
}

/// Antipode of the negative Hopf algebra, by edge-count recursion on
/// generators and multiplicativity over forests.
pub fn antipode_minus(ctx: &Context, f: &Forest, st: Structure) -> Result<LinComb<Forest>> {
    check_minus_flavor(ctx, f, st)?;
    let mut acc: LinComb<Forest> = LinComb::basis(Forest::empty());
    for t in f.trees() {
        let at = antipode_minus_tree(ctx, t, st)?;
        acc = bilinear(&acc, &at, |a, b| LinComb::basis(a.join(b)));
    }
    Ok(acc)
}

fn antipode_minus_tree(ctx: &Context, t: &Tree, st: Structure) -> Result<LinComb<Forest>> {
    let key = (t.clone(), st.key());
    if let Some(hit) = ctx.am_memo.read().unwrap().get(&key) {
        return Ok((**hit).clone());
    }
    let cp = delta_minus_forest(ctx, &Forest::single(t.clone()), st)?;
    let mut acc = LinComb::single(Forest::single(t.clone()), -q_one());
    for ((l, r), c) in cp.iter() {
        if l.is_empty() || r.is_empty() {
            continue;
        }
        let al = antipode_minus(ctx, l, st)?;
        for (b, cb) in al.iter() {
            acc.add_term(b.join(r), -(c * cb));
        }
    }
    ctx.am_memo
        .write()
        .unwrap()
        .insert(key, Arc::new(acc.clone()));
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Untruncated coproduct composites
// ---------------------------------------------------------------------------

/// `M_12 (id ⊗ p_m) Δ₂`: the finite composite of the untruncated positive
/// coproduct with the projection onto a single planted slot `I_p[·]`.
/// Structurally this is a sum over kernel-edge cuts: the branch below the
/// cut lands on the left, the remainder (with a polynomial bump at the cut
/// node) on the right.
pub fn delta2_kernel_slot(ctx: &Context, t: &Tree, p: &MultiIndex) -> LinComb<(Tree, Tree)> {
    let mut out = LinComb::new();
    let parts = t.root_parts();
    // Cuts at the root.
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        if let Some(diff) = p.checked_sub(m) {
            let mut rest_children: Vec<(EdgeType, Tree)> = Vec::new();
            for l in &parts.noises {
                rest_children.push((EdgeType::noise(l.clone()), Tree::unit(ctx.dim())));
            }
            for (j, (mj, cj)) in parts.branches.iter().enumerate() {
                if j != i {
                    rest_children.push((EdgeType::kernel(mj.clone()), cj.clone()));
                }
            }
            let rest = Tree::new(parts.poly.add(&diff), parts.ext.clone(), rest_children);
            let coeff = q_one() / Q::from_integer(diff.factorial());
            out.add_term((inner.clone(), rest), coeff);
        }
    }
    // Cuts inside a branch: the branch edge is restored on the right only.
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for ((l, r), c) in delta2_kernel_slot(ctx, inner, p).iter() {
            let mut children: Vec<(EdgeType, Tree)> = Vec::new();
            for ln in &parts.noises {
                children.push((EdgeType::noise(ln.clone()), Tree::unit(ctx.dim())));
            }
            for (j, (mj, cj)) in parts.branches.iter().enumerate() {
                if j == i {
                    children.push((EdgeType::kernel(m.clone()), r.clone()));
                } else {
                    children.push((EdgeType::kernel(mj.clone()), cj.clone()));
                }
            }
            let rest = Tree::new(parts.poly.clone(), parts.ext.clone(), children);
            out.add_term((l.clone(), rest), c.clone());
        }
    }
    out
}

/// `M_1 (id ⊗ p_{X^b}) Δ₂`: the composite picking the single-polynomial
/// slot. Structurally: lower one unit of polynomial decoration in direction
/// `b` at each node, weighted by the decoration entry.
pub fn delta2_poly_slot(ctx: &Context, t: &Tree, b: usize) -> LinComb<Tree> {
    let mut out = LinComb::new();
    let k = t.poly()[b];
    if k > 0 {
        let lowered = t.with_root_poly(
            t.poly()
                .checked_sub(&MultiIndex::unit(ctx.dim(), b))
                .unwrap(),
        );
        out.add_term(lowered, crate::algebra::qi(k as i64));
    }
    let parts = t.root_parts();
    for (i, (m, inner)) in parts.branches.iter().enumerate() {
        for (r, c) in delta2_poly_slot(ctx, inner, b).iter() {
            let mut children: Vec<(EdgeType, Tree)> = Vec::new();
            for ln in &parts.noises {
                children.push((EdgeType::noise(ln.clone()), Tree::unit(ctx.dim())));
            }
            for (j, (mj, cj)) in parts.branches.iter().enumerate() {
                if j == i {
                    children.push((EdgeType::kernel(m.clone()), r.clone()));
                } else {
                    children.push((EdgeType::kernel(mj.clone()), cj.clone()));
                }
            }
            out.add_term(
                Tree::new(parts.poly.clone(), parts.ext.clone(), children),
                c.clone(),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Cointeraction defect
// ---------------------------------------------------------------------------

pub type TripleResult = LinComb<(Forest, Tree, Tree)>;

/// `M_{(13)(2)(4)} (Δ− ⊗ Δ−) Δ+ − (id ⊗ Δ+) Δ−` on a conforming tree.
/// Zero exactly when the two renormalisations cointeract; in the reduced
/// structure this famously fails.
pub fn cointeraction_defect(ctx: &Context, t: &Tree, st: Structure) -> Result<TripleResult> {
    let mut lhs: TripleResult = LinComb::new();
    for ((t1, t2), c) in delta_plus(ctx, t, PlusDomain::Model, st)?.iter() {
        let dm1 = delta_minus(ctx, t1, MinusDomain::Model, st)?;
        let dm2 = delta_minus(ctx, t2, MinusDomain::Plus, st)?;
        for ((f1, a), c1) in dm1.iter() {
            for ((f2, b), c2) in dm2.iter() {
                lhs.add_term((f1.join(f2), a.clone(), b.clone()), c * c1 * c2);
            }
        }
    }
    let mut rhs: TripleResult = LinComb::new();
    for ((f, t2), c) in delta_minus(ctx, t, MinusDomain::Model, st)?.iter() {
        for ((a, b), c2) in delta_plus(ctx, t2, PlusDomain::Model, st)?.iter() {
            rhs.add_term((f.clone(), a.clone(), b.clone()), c * c2);
        }
    }
    Ok(lhs.sub(&rhs))
}

// ---------------------------------------------------------------------------
// Completeness detection
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct CompletenessReport {
    pub complete_up_to_cutoff: bool,
    /// Offending `(basis tree, non-conforming right factor)` pairs.
    pub offenders: Vec<(Tree, Tree)>,
}

/// Scans every basis tree's negative coproduct and reports right factors
/// that fail to conform. Completeness is only ever certified up to the
/// enumeration cutoffs.
pub fn completeness_check(ctx: &Context, st: Structure) -> Result<CompletenessReport> {
    let basis = match st {
        Structure::Reduced => ctx.circ()?,
        Structure::Extended => ctx.circ_ex()?,
    };
    let mut offenders = Vec::new();
    for t in basis.iter() {
        for term in negative_cuts(ctx, t, st)?.iter() {
            let right = reduce_if(term.contracted.clone(), st);
            if !ctx.conforms_in(&right, st)? {
                offenders.push((t.clone(), right));
            }
        }
    }
    offenders.sort();
    offenders.dedup();
    Ok(CompletenessReport {
        complete_up_to_cutoff: offenders.is_empty(),
        offenders,
    })
}
