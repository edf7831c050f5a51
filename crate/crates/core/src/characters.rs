//! Character groups of the positive and negative Hopf algebras, the
//! recentring and renormalisation representations, and the adjoint of the
//! renormalisation map.
//!
//! Characters are multiplicative functionals determined by their values on
//! generators: `X^i` and positive planted trees on the positive side,
//! negative unplanted trees on the negative side. Composite characters
//! (group products, antipode inverses, pullbacks, renormalisation twists)
//! are evaluated lazily through the coproducts, so every value is exact no
//! matter how the character was assembled.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use num::Zero;

use rand::{Rng, SeedableRng};

use crate::algebra::{q, q_one, q_zero, LinComb, MultiIndex, Q};
use crate::context::Context;
use crate::coproducts::{
    antipode_minus, antipode_plus, delta_minus, delta_minus_forest, delta_plus, MinusDomain,
    PlusDomain, Structure,
};
use crate::error::{Error, Result};
use crate::rules::TreeBasis;
use crate::trees::{inner_product, DegreeMode, EdgeKind, Forest, Tree};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Algebra {
    Plus,
    Minus,
}

enum CharKind {
    /// The counit: 1 on the unit, 0 on every other generator.
    Counit,
    /// Explicit generator values; unlisted generators evaluate to 0.
    Table(BTreeMap<Tree, Q>),
    /// Group product; on the positive side `(a ⊗ b) Δ+`, on the negative
    /// side `(b ⊗ a) Δ−`.
    Product(Character, Character),
    /// Composition with the antipode (the group inverse).
    Inverse(Character),
    /// Negative-side pullback along the decoration-forgetting projection.
    PullbackForget(Character),
    /// Positive-side pullback along the embedding of reduced trees.
    PullbackEmbed(Character),
    /// `f M_g`: a positive character twisted by a renormalisation character.
    Twist(Character, Character),
}

struct CharInner {
    kind: CharKind,
    memo: RwLock<HashMap<Tree, Q>>,
}

/// A character of the positive or negative Hopf algebra (reduced or
/// extended structure), evaluated exactly on demand.
#[derive(Clone)]
pub struct Character {
    pub algebra: Algebra,
    pub structure: Structure,
    inner: Arc<CharInner>,
}

impl Character {
    fn make(algebra: Algebra, structure: Structure, kind: CharKind) -> Character {
        Character {
            algebra,
            structure,
            inner: Arc::new(CharInner {
                kind,
                memo: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn counit(algebra: Algebra, structure: Structure) -> Character {
        Character::make(algebra, structure, CharKind::Counit)
    }

    pub fn table(
        algebra: Algebra,
        structure: Structure,
        values: BTreeMap<Tree, Q>,
    ) -> Character {
        Character::make(algebra, structure, CharKind::Table(values))
    }

    /// Value on a single generator (positive: `X^i` or a planted tree;
    /// negative: a negative unplanted tree).
    pub fn on_generator(&self, ctx: &Context, gen: &Tree) -> Result<Q> {
        if let Some(v) = self.inner.memo.read().unwrap().get(gen) {
            return Ok(v.clone());
        }
        let v = match (&self.inner.kind, self.algebra) {
            (CharKind::Counit, _) => q_zero(),
            (CharKind::Table(map), _) => map.get(gen).cloned().unwrap_or_else(q_zero),
            (CharKind::Product(a, b), Algebra::Plus) => {
                let cp = delta_plus(ctx, gen, PlusDomain::Plus, self.structure)?;
                let mut acc = q_zero();
                for ((l, r), c) in cp.iter() {
                    let va = a.eval_tree(ctx, l)?;
                    if va.is_zero() {
                        continue;
                    }
                    acc += c * va * b.eval_tree(ctx, r)?;
                }
                acc
            }
            (CharKind::Product(a, b), Algebra::Minus) => {
                // a·b = (b ⊗ a) Δ−.
                let cp = delta_minus_forest(ctx, &Forest::single(gen.clone()), self.structure)?;
                let mut acc = q_zero();
                for ((l, r), c) in cp.iter() {
                    let vb = b.eval_forest(ctx, l)?;
                    if vb.is_zero() {
                        continue;
                    }
                    acc += c * vb * a.eval_forest(ctx, r)?;
                }
                acc
            }
            (CharKind::Inverse(f), Algebra::Plus) => {
                f.eval_lincomb(ctx, &antipode_plus(ctx, gen, self.structure)?)?
            }
            (CharKind::Inverse(g), Algebra::Minus) => {
                let a = antipode_minus(ctx, &Forest::single(gen.clone()), self.structure)?;
                let mut acc = q_zero();
                for (forest, c) in a.iter() {
                    acc += c * g.eval_forest(ctx, forest)?;
                }
                acc
            }
            (CharKind::PullbackForget(g), Algebra::Minus) => {
                g.eval_forest(ctx, &Forest::single(gen.project_reduced()))?
            }
            (CharKind::PullbackEmbed(f), Algebra::Plus) => f.eval_tree(ctx, gen)?,
            (CharKind::Twist(f, g), Algebra::Plus) => {
                let moved = m_g(ctx, g, gen, MinusDomain::Plus)?;
                f.eval_lincomb(ctx, &moved)?
            }
            (kind, _) => {
                let name = match kind {
                    CharKind::PullbackForget(_) => "pullback along decoration forgetting",
                    CharKind::PullbackEmbed(_) => "pullback along reduced embedding",
                    CharKind::Twist(..) => "renormalisation twist",
                    _ => unreachable!(),
                };
                return Err(Error::Invalid(format!(
                    "{name} is not defined on this algebra"
                )));
            }
        };
        self.inner
            .memo
            .write()
            .unwrap()
            .insert(gen.clone(), v.clone());
        Ok(v)
    }

    /// Multiplicative evaluation on a positive-algebra tree
    /// `X^k Π I_m[τ_j]`.
    pub fn eval_tree(&self, ctx: &Context, t: &Tree) -> Result<Q> {
        if self.algebra != Algebra::Plus {
            return Err(Error::FlavorMismatch {
                expected: "positive-algebra character".into(),
                found: "negative-algebra character applied to a tree".into(),
            });
        }
        if !t.ext().is_zero() {
            return Err(Error::FlavorMismatch {
                expected: "tree in the positive algebra".into(),
                found: t.to_string(),
            });
        }
        let mut acc = q_one();
        for (i, &k) in t.poly().entries().iter().enumerate() {
            if k > 0 {
                let v = self.on_generator(ctx, &Tree::poly_tree(MultiIndex::unit(ctx.dim(), i)))?;
                for _ in 0..k {
                    acc *= v.clone();
                    if acc.is_zero() {
                        return Ok(acc);
                    }
                }
            }
        }
        for (e, inner) in t.children() {
            if e.kind == EdgeKind::Noise {
                return Err(Error::FlavorMismatch {
                    expected: "tree in the positive algebra".into(),
                    found: t.to_string(),
                });
            }
            acc *= self.on_generator(ctx, &Tree::kernel(e.deriv.clone(), inner.clone()))?;
            if acc.is_zero() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    /// Multiplicative evaluation on a forest of negative trees.
    pub fn eval_forest(&self, ctx: &Context, f: &Forest) -> Result<Q> {
        if self.algebra != Algebra::Minus {
            return Err(Error::FlavorMismatch {
                expected: "negative-algebra character".into(),
                found: "positive-algebra character applied to a forest".into(),
            });
        }
        let mut acc = q_one();
        for t in f.trees() {
            acc *= self.on_generator(ctx, t)?;
            if acc.is_zero() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    pub fn eval_lincomb(&self, ctx: &Context, x: &LinComb<Tree>) -> Result<Q> {
        let mut acc = q_zero();
        for (t, c) in x.iter() {
            acc += c * self.eval_tree(ctx, t)?;
        }
        Ok(acc)
    }

    pub fn eval_forest_lincomb(&self, ctx: &Context, x: &LinComb<Forest>) -> Result<Q> {
        let mut acc = q_zero();
        for (f, c) in x.iter() {
            acc += c * self.eval_forest(ctx, f)?;
        }
        Ok(acc)
    }
}

fn check_same(a: &Character, b: &Character) -> Result<()> {
    if a.algebra != b.algebra || a.structure != b.structure {
        return Err(Error::FlavorMismatch {
            expected: format!("{:?}/{:?} character", a.algebra, a.structure),
            found: format!("{:?}/{:?} character", b.algebra, b.structure),
        });
    }
    Ok(())
}

/// Group product: `(a ⊗ b) Δ+` on the positive side, `(b ⊗ a) Δ−` on the
/// negative side.
pub fn group_product(a: &Character, b: &Character) -> Result<Character> {
    check_same(a, b)?;
    Ok(Character::make(
        a.algebra,
        a.structure,
        CharKind::Product(a.clone(), b.clone()),
    ))
}

/// Group inverse via the antipode.
pub fn inverse(a: &Character) -> Character {
    Character::make(a.algebra, a.structure, CharKind::Inverse(a.clone()))
}

/// Pullback of a reduced negative character along the decoration-forgetting
/// projection: an embedding of the reduced renormalisation group into the
/// extended one.
pub fn pullback_forget(g: &Character) -> Result<Character> {
    if g.algebra != Algebra::Minus || g.structure != Structure::Reduced {
        return Err(Error::FlavorMismatch {
            expected: "reduced negative character".into(),
            found: format!("{:?}/{:?}", g.algebra, g.structure),
        });
    }
    Ok(Character::make(
        Algebra::Minus,
        Structure::Extended,
        CharKind::PullbackForget(g.clone()),
    ))
}

/// Pullback of an extended positive character along the embedding of
/// reduced trees: the surjection onto the reduced structure group.
pub fn pullback_embed(f: &Character) -> Result<Character> {
    if f.algebra != Algebra::Plus || f.structure != Structure::Extended {
        return Err(Error::FlavorMismatch {
            expected: "extended positive character".into(),
            found: format!("{:?}/{:?}", f.algebra, f.structure),
        });
    }
    Ok(Character::make(
        Algebra::Plus,
        Structure::Reduced,
        CharKind::PullbackEmbed(f.clone()),
    ))
}

/// `f M_g` as a positive character.
pub fn twist(f: &Character, g: &Character) -> Result<Character> {
    if f.algebra != Algebra::Plus || g.algebra != Algebra::Minus || f.structure != g.structure {
        return Err(Error::FlavorMismatch {
            expected: "positive and negative characters of one structure".into(),
            found: "mismatched pair".into(),
        });
    }
    Ok(Character::make(
        f.algebra,
        f.structure,
        CharKind::Twist(f.clone(), g.clone()),
    ))
}

/// The recentring representation `Γ_f = (id ⊗ f) Δ+` on conforming trees.
pub fn gamma_f(ctx: &Context, f: &Character, t: &Tree) -> Result<LinComb<Tree>> {
    let cp = delta_plus(ctx, t, PlusDomain::Model, f.structure)?;
    let mut out = LinComb::new();
    for ((l, r), c) in cp.iter() {
        let v = f.eval_tree(ctx, r)?;
        out.add_term(l.clone(), c * v);
    }
    Ok(out)
}

/// The renormalisation map `M_g = (g ⊗ id) Δ−`.
pub fn m_g(ctx: &Context, g: &Character, t: &Tree, domain: MinusDomain) -> Result<LinComb<Tree>> {
    let cp = delta_minus(ctx, t, domain, g.structure)?;
    let mut out = LinComb::new();
    for ((f, r), c) in cp.iter() {
        let v = g.eval_forest(ctx, f)?;
        out.add_term(r.clone(), c * v);
    }
    Ok(out)
}

/// Linear extension of `m_g`.
pub fn m_g_lincomb(
    ctx: &Context,
    g: &Character,
    x: &LinComb<Tree>,
    domain: MinusDomain,
) -> Result<LinComb<Tree>> {
    let mut out = LinComb::new();
    for (t, c) in x.iter() {
        for (r, cr) in m_g(ctx, g, t, domain)?.iter() {
            out.add_term(r.clone(), c * cr);
        }
    }
    Ok(out)
}

/// The adjoint `M_g*` against the τ!-weighted inner product, computed by
/// scanning a basis: `M_g* σ = Σ_τ ⟨σ, M_g τ⟩ / τ! · τ`. The basis must
/// cover every tree whose renormalisation can reach `σ`; this holds when
/// `σ` lies within the basis cutoffs with enough kernel-edge headroom for
/// one extraction, and is otherwise reported as a cutoff error.
pub fn m_g_star(
    ctx: &Context,
    g: &Character,
    sigma: &Tree,
    basis: &TreeBasis,
) -> Result<LinComb<Tree>> {
    if sigma.kernel_edge_count() > ctx.spec().cutoffs.max_kernel_edges {
        return Err(Error::CutoffExceeded(format!(
            "adjoint target {sigma} has more kernel edges than the enumerated basis"
        )));
    }
    let sig = LinComb::basis(sigma.clone());
    let mut out = LinComb::new();
    for tau in basis.iter() {
        let moved = m_g(ctx, g, tau, MinusDomain::Model)?;
        let pairing = inner_product(&sig, &moved);
        if !pairing.is_zero() {
            out.add_term(tau.clone(), pairing / tau.factorial());
        }
    }
    Ok(out)
}

/// Defect of the recentring covariance at character level:
/// `(g ⊗ id ⊗ fM_g)(Δ− ⊗ id)Δ+ τ  −  Γ_f(M_g τ)`, which vanishes exactly
/// in the extended structure.
pub fn recentring_defect(
    ctx: &Context,
    g: &Character,
    f: &Character,
    t: &Tree,
) -> Result<LinComb<Tree>> {
    let st = f.structure;
    let fg = twist(f, g)?;
    let mut lhs = LinComb::new();
    for ((t1, t2), c) in delta_plus(ctx, t, PlusDomain::Model, st)?.iter() {
        let v = fg.eval_tree(ctx, t2)?;
        if v.is_zero() {
            continue;
        }
        for ((forest, t1m), c1) in delta_minus(ctx, t1, MinusDomain::Model, st)?.iter() {
            let gv = g.eval_forest(ctx, forest)?;
            lhs.add_term(t1m.clone(), c * c1 * gv.clone() * v.clone());
        }
    }
    let rhs = {
        let moved = m_g(ctx, g, t, MinusDomain::Model)?;
        let mut acc = LinComb::new();
        for (tt, c) in moved.iter() {
            for (r, cr) in gamma_f(ctx, f, tt)?.iter() {
                acc.add_term(r.clone(), c * cr);
            }
        }
        acc
    };
    Ok(lhs.sub(&rhs))
}

/// The generators of the positive algebra within the cutoffs: unit-direction
/// polynomials and positive planted trees over the given inner basis.
pub fn plus_generators(ctx: &Context, st: Structure) -> Result<Vec<Tree>> {
    let inner = match st {
        Structure::Reduced => ctx.circ()?,
        Structure::Extended => ctx.circ_ex()?,
    };
    let mode = st.mode();
    let mut out = Vec::new();
    for i in 0..ctx.dim() {
        out.push(Tree::poly_tree(MultiIndex::unit(ctx.dim(), i)));
    }
    for t in inner.iter() {
        if t.kernel_edge_count() + 1 > ctx.spec().cutoffs.max_kernel_edges {
            continue;
        }
        for m in ctx.spec().cutoffs.max_poly.sub_indices() {
            let planted = Tree::kernel(m, t.clone());
            if planted.degree(ctx.params(), mode).is_positive() {
                out.push(planted);
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// A seeded random character: generator values are uniform small rationals.
/// Identities tested with such characters are polynomial in the values, so
/// random evaluation plus exhaustive small-tree coverage is a sound check.
pub fn random_character(
    ctx: &Context,
    algebra: Algebra,
    structure: Structure,
    seed: u64,
) -> Result<Character> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<Tree> = match algebra {
        Algebra::Plus => plus_generators(ctx, structure)?,
        Algebra::Minus => match structure {
            Structure::Reduced => ctx.minus()?.trees.clone(),
            Structure::Extended => ctx.minus_ex()?.trees.clone(),
        },
    };
    let mut values = BTreeMap::new();
    for gen in gens {
        let num = rng.gen_range(-4i64..=4);
        let den = rng.gen_range(1i64..=4);
        let v = q(num, den);
        if !v.is_zero() {
            values.insert(gen, v);
        }
    }
    Ok(Character::table(algebra, structure, values))
}

// ---------------------------------------------------------------------------
// Character files
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct CharacterJson {
    algebra: String,
    structure: String,
    values: Vec<CharacterValueJson>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CharacterValueJson {
    tree: String,
    value: String,
}

/// Loads a character from JSON:
/// `{"algebra":"minus","structure":"extended","values":[{"tree":"I[Xi]*I[Xi]","value":"-3/7"}]}`.
pub fn character_from_json(src: &str, dim: usize) -> Result<Character> {
    let j: CharacterJson = serde_json::from_str(src)?;
    let algebra = match j.algebra.as_str() {
        "plus" => Algebra::Plus,
        "minus" => Algebra::Minus,
        other => return Err(Error::Invalid(format!("unknown algebra `{other}`"))),
    };
    let structure = match j.structure.as_str() {
        "reduced" => Structure::Reduced,
        "extended" => Structure::Extended,
        other => return Err(Error::Invalid(format!("unknown structure `{other}`"))),
    };
    let mut values = BTreeMap::new();
    for v in &j.values {
        let t = crate::trees::parse_tree(&v.tree, dim)?;
        values.insert(t, crate::algebra::parse_q(&v.value)?);
    }
    Ok(Character::table(algebra, structure, values))
}

/// Degree preservation under renormalisation: every tree in the support of
/// `M_g τ` has the same `|·|_+` degree as `τ`.
pub fn degree_preserved(ctx: &Context, g: &Character, t: &Tree) -> Result<bool> {
    let d = ctx.degree(t, DegreeMode::Plus);
    for (r, _) in m_g(ctx, g, t, MinusDomain::Model)?.iter() {
        if ctx.degree(r, DegreeMode::Plus) != d {
            return Ok(false);
        }
    }
    Ok(true)
}
