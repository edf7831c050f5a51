//! The coherence map on trees and the renormalised non-linearities.
//!
//! `upsilon` assigns to each decorated tree the elementary differential of
//! an extended non-linearity it stands for; counterterms arise by feeding
//! the adjoint renormalisation of decorated units through it.

use std::collections::BTreeMap;

use num::Zero;

use crate::algebra::{Degree, LinComb, Q};
use crate::characters::{m_g, m_g_star, Character};
use crate::context::Context;
use crate::coproducts::{MinusDomain, Structure};
use crate::error::{Error, Result};
use crate::trees::{inner_product, DegreeMode, EdgeType, Tree};

use super::expr::{obeys, NonlinExpr};

/// A family of non-linearities indexed by non-positive degrees, finitely
/// supported; reduced means support in degree zero only.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ExtNonlin {
    components: BTreeMap<Degree, NonlinExpr>,
}

impl ExtNonlin {
    pub fn new() -> ExtNonlin {
        ExtNonlin::default()
    }

    pub fn reduced(f: NonlinExpr) -> ExtNonlin {
        let mut e = ExtNonlin::new();
        e.set(Degree::zero(), f);
        e
    }

    pub fn set(&mut self, a: Degree, f: NonlinExpr) {
        assert!(a <= Degree::zero(), "components are indexed by a ≤ 0");
        if f.is_zero() {
            self.components.remove(&a);
        } else {
            self.components.insert(a, f);
        }
    }

    pub fn get(&self, a: &Degree) -> NonlinExpr {
        self.components.get(a).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Degree, &NonlinExpr)> {
        self.components.iter()
    }

    pub fn is_reduced(&self) -> bool {
        self.components.keys().all(|a| a.is_zero())
    }

    /// The union of the coordinate supports of all components.
    pub fn coord_support(&self) -> std::collections::BTreeSet<EdgeType> {
        let mut out = std::collections::BTreeSet::new();
        for f in self.components.values() {
            out.extend(f.coord_support());
        }
        out
    }
}

/// The coherence map: for `τ = 1^a X^k Ξ_L Π I_{m_j}[τ_j]`,
/// `Υ[τ] = (Π Υ[τ_j]) · ∂^k (Π D_{(I,m_j)} Π D_{(Ξ,l)}) F_a`.
/// Vanishes when the root carries a positive extended decoration (no
/// component is indexed there).
pub fn upsilon(bf: &ExtNonlin, t: &Tree) -> NonlinExpr {
    let parts = t.root_parts();
    let mut base = bf.get(&parts.ext);
    if base.is_zero() {
        return NonlinExpr::zero();
    }
    for l in &parts.noises {
        base = base.d(&EdgeType::noise(l.clone()));
        if base.is_zero() {
            return NonlinExpr::zero();
        }
    }
    for (m, _) in &parts.branches {
        base = base.d(&EdgeType::kernel(m.clone()));
        if base.is_zero() {
            return NonlinExpr::zero();
        }
    }
    base = base.partial(&parts.poly);
    for (_, inner) in &parts.branches {
        base = base.mul(&upsilon(bf, inner));
        if base.is_zero() {
            return NonlinExpr::zero();
        }
    }
    base
}

/// Linear extension of the coherence map.
pub fn upsilon_lincomb(bf: &ExtNonlin, x: &LinComb<Tree>) -> NonlinExpr {
    let mut acc = NonlinExpr::zero();
    for (t, c) in x.iter() {
        acc = acc.add(&upsilon(bf, t).scale(c));
    }
    acc
}

/// The renormalised non-linearity `F^g`: component `a` collects
/// `g(τ)/τ! · Υ[τ]` over the negative trees of degree `a`, plus `F` itself
/// at degree zero. Requires `F` to obey the rule.
pub fn counterterms(ctx: &Context, f: &NonlinExpr, g: &Character) -> Result<ExtNonlin> {
    check_counterterm_inputs(ctx, f, g)?;
    let bf = ExtNonlin::reduced(f.clone());
    let mut out = ExtNonlin::reduced(f.clone());
    let minus = ctx.minus()?;
    for tau in minus.iter() {
        let value = g.eval_forest(ctx, &crate::trees::Forest::single(tau.clone()))?;
        if value.is_zero() {
            continue;
        }
        let a = ctx.degree(tau, DegreeMode::S);
        let term = upsilon(&bf, tau).scale(&(value / tau.factorial()));
        out.set(a.clone(), out.get(&a).add(&term));
    }
    Ok(out)
}

/// The same family through the literal adjoint route
/// `F^g_a = Υ[M_g* 1^a]`, kept as an independent oracle for `counterterms`.
pub fn counterterms_via_adjoint(
    ctx: &Context,
    f: &NonlinExpr,
    g: &Character,
) -> Result<ExtNonlin> {
    check_counterterm_inputs(ctx, f, g)?;
    let bf = ExtNonlin::reduced(f.clone());
    let mut out = ExtNonlin::reduced(f.clone());
    let basis = ctx.circ_ex()?;
    let mut degrees: Vec<Degree> = ctx
        .minus()?
        .iter()
        .map(|t| ctx.degree(t, DegreeMode::S))
        .collect();
    degrees.sort();
    degrees.dedup();
    for a in degrees {
        let target = Tree::ext_unit(ctx.dim(), a.clone());
        let adj = m_g_star(ctx, g, &target, basis)?;
        let term = upsilon_lincomb(&bf, &adj);
        out.set(a.clone(), out.get(&a).add(&term));
    }
    Ok(out)
}

fn check_counterterm_inputs(ctx: &Context, f: &NonlinExpr, g: &Character) -> Result<()> {
    if g.algebra != crate::characters::Algebra::Minus || g.structure != Structure::Extended {
        return Err(Error::FlavorMismatch {
            expected: "extended negative character".into(),
            found: format!("{:?}/{:?}", g.algebra, g.structure),
        });
    }
    let max_order = ctx.spec().cutoffs.max_kernel_edges + 2;
    if !obeys(f, &ctx.spec().rule, max_order) {
        return Err(Error::NotObeying(format!("{f}")));
    }
    Ok(())
}

/// `Υ^{F^g}[τ] = Υ^F[M_g* τ]` — the morphism property, exposed for tests:
/// returns the two sides.
pub fn morphism_sides(
    ctx: &Context,
    f: &NonlinExpr,
    g: &Character,
    t: &Tree,
) -> Result<(NonlinExpr, NonlinExpr)> {
    let fg = counterterms(ctx, f, g)?;
    let lhs = upsilon(&fg, t);
    let bf = ExtNonlin::reduced(f.clone());
    let adj = m_g_star(ctx, g, t, ctx.circ_ex()?)?;
    let rhs = upsilon_lincomb(&bf, &adj);
    Ok((lhs, rhs))
}

/// Checks the inner-product expansion of the adjoint against the direct
/// coefficient: `⟨M_g τ, 1^a⟩` is the coefficient of the decorated unit.
pub fn unit_pairing(ctx: &Context, g: &Character, tau: &Tree, a: &Degree) -> Result<Q> {
    let target = LinComb::basis(Tree::ext_unit(ctx.dim(), a.clone()));
    let moved = m_g(ctx, g, tau, MinusDomain::Model)?;
    Ok(inner_product(&moved, &target))
}
