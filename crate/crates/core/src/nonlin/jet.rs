//! Jets (truncated tree-indexed series with exact symbolic coefficients),
//! the lift of a non-linearity to jets, the algebraic fixed-point solver,
//! and the coherence check.

use std::collections::BTreeMap;

use crate::algebra::{Atom, LinComb, MultiIndex, PolyQ, Q};
use crate::characters::{m_g, Character};
use crate::context::Context;
use crate::coproducts::MinusDomain;
use crate::error::{Error, Result};
use crate::trees::{EdgeKind, EdgeType, Tree};

use super::upsilon::{upsilon, ExtNonlin};

/// `U = Σ u_k X^k/k! + Σ u_{I[τ]} I[τ]/τ!` with polynomial-ring
/// coefficients; non-polynomial entries are keyed by the inner tree `τ` and
/// truncated by kernel-edge count.
#[derive(Clone, PartialEq, Debug)]
pub struct Jet {
    pub poly: BTreeMap<MultiIndex, PolyQ>,
    pub nonpoly: BTreeMap<Tree, PolyQ>,
    pub max_edges: usize,
}

impl Jet {
    /// A purely polynomial jet with symbolic coefficients `u_k` on the given
    /// key set.
    pub fn symbolic_polynomials(keys: impl IntoIterator<Item = MultiIndex>, max_edges: usize) -> Jet {
        Jet {
            poly: keys
                .into_iter()
                .map(|k| (k.clone(), PolyQ::atom(Atom::Coeff(k))))
                .collect(),
            nonpoly: BTreeMap::new(),
            max_edges,
        }
    }

    /// The polynomial key set adequate for an extended non-linearity: node
    /// polynomial cutoff plus the largest kernel-coordinate derivative the
    /// family depends on.
    pub fn standard_poly_keys(ctx: &Context, bf: &ExtNonlin) -> Vec<MultiIndex> {
        let mut max_q = MultiIndex::zero(ctx.dim());
        for e in bf.coord_support() {
            if e.kind == EdgeKind::Kernel {
                max_q = MultiIndex::new(
                    max_q
                        .entries()
                        .iter()
                        .zip(e.deriv.entries())
                        .map(|(a, b)| *a.max(b))
                        .collect(),
                );
            }
        }
        ctx.spec().cutoffs.max_poly.add(&max_q).sub_indices()
    }

    pub fn coefficient(&self, inner: &Tree) -> PolyQ {
        self.nonpoly.get(inner).cloned().unwrap_or_else(PolyQ::zero)
    }
}

/// Coefficient of each target tree in `Σ_a F_a(U) 1^a`: the Taylor lift of
/// the extended non-linearity evaluated on the jet. Exact, computed per
/// target by enumerating the finitely many Taylor multi-indices compatible
/// with the target's root structure.
pub fn lift_coefficients(
    ctx: &Context,
    bf: &ExtNonlin,
    u: &Jet,
    targets: &[Tree],
) -> Result<LinComb<Tree, PolyQ>> {
    let mut out = LinComb::new();
    for t in targets {
        let c = lift_coefficient(ctx, bf, u, t)?;
        out.add_term(t.clone(), c);
    }
    Ok(out)
}

fn lift_coefficient(ctx: &Context, bf: &ExtNonlin, u: &Jet, target: &Tree) -> Result<PolyQ> {
    let parts = target.root_parts();
    let f_a = bf.get(&parts.ext);
    if f_a.is_zero() {
        return Ok(PolyQ::zero());
    }

    // Derivatives from the noise edges and the kernel branches; the branch
    // coefficient is Π (u_{I[inner]}/inner!)^β / β!.
    let mut derivative_multiset: Vec<EdgeType> = Vec::new();
    let mut prefactor = PolyQ::one();
    for l in &parts.noises {
        derivative_multiset.push(EdgeType::noise(l.clone()));
    }
    {
        // Group identical branches.
        let mut i = 0;
        let branches = &parts.branches;
        while i < branches.len() {
            let mut j = i + 1;
            while j < branches.len() && branches[j] == branches[i] {
                j += 1;
            }
            let beta = (j - i) as u32;
            let (m, inner) = &branches[i];
            let coeff = u.coefficient(inner);
            if coeff.is_zero() {
                return Ok(PolyQ::zero());
            }
            let scale = (Q::from_integer(1.into()) / inner.factorial())
                .pow(beta as i32)
                / Q::from_integer(crate::algebra::q::int_factorial(beta));
            let mut powered = PolyQ::one();
            for _ in 0..beta {
                powered = powered.mul(&coeff);
            }
            prefactor = prefactor.mul(&powered.scale(&scale));
            for _ in 0..beta {
                derivative_multiset.push(EdgeType::kernel(m.clone()));
            }
            i = j;
        }
    }
    // Noise multiplicities contribute 1/α!.
    {
        let mut grouped: BTreeMap<&MultiIndex, u32> = BTreeMap::new();
        for l in &parts.noises {
            *grouped.entry(l).or_insert(0) += 1;
        }
        for (_, c) in grouped {
            prefactor = prefactor.scale(
                &(Q::from_integer(1.into())
                    / Q::from_integer(crate::algebra::q::int_factorial(c))),
            );
        }
    }

    // Polynomial assignments: ways of producing X^{root poly} from factors
    // X^{m−q} with q a kernel coordinate of F_a and m a polynomial key.
    let kernel_support: Vec<MultiIndex> = f_a
        .coord_support()
        .into_iter()
        .filter(|e| e.kind == EdgeKind::Kernel)
        .map(|e| e.deriv)
        .collect();
    let mut pairs: Vec<(MultiIndex, MultiIndex, PolyQ)> = Vec::new(); // (q, m−q, u_m/(m−q)!)
    for q in &kernel_support {
        for (m, um) in &u.poly {
            if let Some(diff) = m.checked_sub(q) {
                if diff.is_zero() || !diff.leq(&parts.poly) {
                    continue;
                }
                let c = um.scale(
                    &(Q::from_integer(1.into()) / Q::from_integer(diff.factorial())),
                );
                pairs.push((q.clone(), diff, c));
            }
        }
    }

    let mut total = PolyQ::zero();
    let mut assignment: Vec<(usize, u32)> = Vec::new();
    enumerate_poly_assignments(
        &pairs,
        0,
        &parts.poly,
        &MultiIndex::zero(ctx.dim()),
        &PolyQ::one(),
        &mut assignment,
        &mut |assign, factor| {
            // Assemble α and apply the derivatives.
            let mut expr = f_a.clone();
            for o in &derivative_multiset {
                expr = expr.d(o);
                if expr.is_zero() {
                    return;
                }
            }
            for &(pi, count) in assign {
                let o = EdgeType::kernel(pairs[pi].0.clone());
                for _ in 0..count {
                    expr = expr.d(&o);
                    if expr.is_zero() {
                        return;
                    }
                }
            }
            let v = expr.eval_origin();
            if v.is_zero() {
                return;
            }
            total = total.add(&v.mul(factor));
        },
    );
    Ok(total.mul(&prefactor))
}

/// Recursively choose multiplicities for the (coordinate, shift) pairs so
/// the shifts sum to the target polynomial; each choice multiplies in
/// `c^p / p!`.
fn enumerate_poly_assignments(
    pairs: &[(MultiIndex, MultiIndex, PolyQ)],
    i: usize,
    target: &MultiIndex,
    acc: &MultiIndex,
    factor: &PolyQ,
    assignment: &mut Vec<(usize, u32)>,
    emit: &mut impl FnMut(&[(usize, u32)], &PolyQ),
) {
    if i == pairs.len() {
        if acc == target {
            emit(assignment, factor);
        }
        return;
    }
    let (_, shift, coeff) = &pairs[i];
    // Multiplicity zero.
    enumerate_poly_assignments(pairs, i + 1, target, acc, factor, assignment, emit);
    let mut current = acc.clone();
    let mut f = factor.clone();
    let mut p = 0u32;
    loop {
        let next = current.add(shift);
        if !next.leq(target) {
            break;
        }
        p += 1;
        f = f
            .mul(coeff)
            .scale(&(Q::from_integer(1.into()) / Q::from_integer(p.into())));
        current = next;
        assignment.push((i, p));
        enumerate_poly_assignments(pairs, i + 1, target, &current, &f, assignment, emit);
        assignment.pop();
    }
}

/// Solves the algebraic fixed point `U = U^P + I[Σ_a F_a(U) 1^a]` by
/// kernel-edge strata; the coefficient of each tree at stratum n depends
/// only on strata below, so the loop terminates after `max_edges` rounds.
pub fn solve_jet(
    ctx: &Context,
    bf: &ExtNonlin,
    poly: BTreeMap<MultiIndex, PolyQ>,
    max_edges: usize,
) -> Result<Jet> {
    if max_edges > ctx.spec().cutoffs.max_kernel_edges {
        return Err(Error::CutoffExceeded(format!(
            "jet truncation {max_edges} exceeds the enumerated basis cutoff"
        )));
    }
    let mut u = Jet {
        poly,
        nonpoly: BTreeMap::new(),
        max_edges,
    };
    let basis = ctx.circ_ex()?;
    for n in 0..max_edges {
        let targets: Vec<Tree> = basis
            .iter()
            .filter(|t| t.kernel_edge_count() == n)
            .cloned()
            .collect();
        let coeffs = lift_coefficients(ctx, bf, &u, &targets)?;
        for (t, c) in coeffs.iter() {
            u.nonpoly.insert(t.clone(), c.mul(&PolyQ::constant(t.factorial())));
        }
    }
    Ok(u)
}

/// Is the jet coherent with the family? True iff every non-polynomial
/// coefficient equals the coherence map evaluated at the jet origin,
/// over the conforming trees within the truncation.
pub fn coherence_check(ctx: &Context, bf: &ExtNonlin, u: &Jet) -> Result<bool> {
    let basis = ctx.circ_ex()?;
    for t in basis.iter() {
        if t.kernel_edge_count() + 1 > u.max_edges {
            continue;
        }
        let expected = upsilon(bf, t).eval_origin();
        if u.coefficient(t) != expected {
            return Ok(false);
        }
    }
    // No stray coefficients outside the conforming truncation.
    for t in u.nonpoly.keys() {
        if t.kernel_edge_count() + 1 > u.max_edges || !basis.contains(t) {
            if !u.coefficient(t).is_zero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The fixed-point residual `U − U^P − I[Σ F_a(U) 1^a]`, reported as the
/// coefficient difference per tree; zero exactly on solutions.
pub fn fixed_point_residual(
    ctx: &Context,
    bf: &ExtNonlin,
    u: &Jet,
) -> Result<LinComb<Tree, PolyQ>> {
    let basis = ctx.circ_ex()?;
    let targets: Vec<Tree> = basis
        .iter()
        .filter(|t| t.kernel_edge_count() + 1 <= u.max_edges)
        .cloned()
        .collect();
    let coeffs = lift_coefficients(ctx, bf, u, &targets)?;
    let mut out = LinComb::new();
    for t in &targets {
        let lhs = u.coefficient(t);
        let rhs = coeffs.coeff(t).mul(&PolyQ::constant(t.factorial()));
        let d = lhs.sub(&rhs);
        if !d.is_zero() {
            out.add_term(t.clone(), d);
        }
    }
    Ok(out)
}

/// The renormalisation map on jets: polynomials are untouched, planted
/// coefficients transform by `M_g` on the inner tree.
pub fn renormalise_jet(ctx: &Context, g: &Character, u: &Jet) -> Result<Jet> {
    let mut nonpoly: BTreeMap<Tree, PolyQ> = BTreeMap::new();
    for (tau, coeff) in &u.nonpoly {
        if coeff.is_zero() {
            continue;
        }
        let moved = m_g(ctx, g, tau, MinusDomain::Model)?;
        for (sigma, c) in moved.iter() {
            let add = coeff.scale(&(c * sigma.factorial() / tau.factorial()));
            let entry = nonpoly.entry(sigma.clone()).or_insert_with(PolyQ::zero);
            *entry = entry.add(&add);
        }
    }
    nonpoly.retain(|_, v| !v.is_zero());
    Ok(Jet {
        poly: u.poly.clone(),
        nonpoly,
        max_edges: u.max_edges,
    })
}

/// `M_g` applied to a tree series with polynomial coefficients.
pub fn renormalise_series(
    ctx: &Context,
    g: &Character,
    x: &LinComb<Tree, PolyQ>,
) -> Result<LinComb<Tree, PolyQ>> {
    let mut out = LinComb::new();
    for (t, c) in x.iter() {
        for (r, cr) in m_g(ctx, g, t, MinusDomain::Model)?.iter() {
            out.add_term(r.clone(), c.scale(cr));
        }
    }
    Ok(out)
}
