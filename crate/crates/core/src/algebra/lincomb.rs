//! Finitely supported linear combinations over a canonical basis.

use std::collections::BTreeMap;
use std::fmt;

use num::Zero;

use super::poly::PolyQ;
use super::q::Q;

/// Coefficient ring for linear combinations: ℚ or PolyQ.
pub trait Ring: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn from_q(q: &Q) -> Self;
}

impl Ring for Q {
    fn zero() -> Self {
        <Q as Zero>::zero()
    }
    fn one() -> Self {
        Q::from_integer(1.into())
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self.clone()
    }
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
}

impl Ring for PolyQ {
    fn zero() -> Self {
        PolyQ::zero()
    }
    fn one() -> Self {
        PolyQ::one()
    }
    fn is_zero(&self) -> bool {
        PolyQ::is_zero(self)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn neg_ref(&self) -> Self {
        self.neg()
    }
    fn from_q(q: &Q) -> Self {
        PolyQ::constant(q.clone())
    }
}

/// `Σ c_b · b` with canonical basis keys and no zero coefficients stored.
/// Tensor combinations use tuple bases `(B1, B2)` or `(B1, B2, B3)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LinComb<B: Ord + Clone, C: Ring = Q> {
    terms: BTreeMap<B, C>,
}

impl<B: Ord + Clone, C: Ring> Default for LinComb<B, C> {
    fn default() -> Self {
        LinComb::new()
    }
}

impl<B: Ord + Clone, C: Ring> LinComb<B, C> {
    pub fn new() -> Self {
        LinComb {
            terms: BTreeMap::new(),
        }
    }

    pub fn single(b: B, c: C) -> Self {
        let mut l = LinComb::new();
        l.add_term(b, c);
        l
    }

    pub fn basis(b: B) -> Self {
        LinComb::single(b, C::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&B, &C)> {
        self.terms.iter()
    }

    pub fn into_iter_terms(self) -> impl Iterator<Item = (B, C)> {
        self.terms.into_iter()
    }

    pub fn coeff(&self, b: &B) -> C {
        self.terms.get(b).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, b: B, c: C) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(b) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get().add_ref(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (b, c) in &other.terms {
            out.add_term(b.clone(), c.clone());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (b, c) in &other.terms {
            self.add_term(b.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (b, c) in &other.terms {
            out.add_term(b.clone(), c.neg_ref());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return LinComb::new();
        }
        let mut out = LinComb::new();
        for (b, x) in &self.terms {
            out.add_term(b.clone(), x.mul_ref(c));
        }
        out
    }

    /// Linear extension of a basis map.
    pub fn map_basis<B2: Ord + Clone>(&self, mut f: impl FnMut(&B) -> LinComb<B2, C>) -> LinComb<B2, C> {
        let mut out = LinComb::new();
        for (b, c) in &self.terms {
            for (b2, c2) in f(b).terms {
                out.add_term(b2, c.mul_ref(&c2));
            }
        }
        out
    }

    /// Renames basis elements without touching coefficients.
    pub fn rename<B2: Ord + Clone>(&self, mut f: impl FnMut(&B) -> B2) -> LinComb<B2, C> {
        let mut out = LinComb::new();
        for (b, c) in &self.terms {
            out.add_term(f(b), c.clone());
        }
        out
    }

    /// Drops basis elements failing the predicate.
    pub fn filter(&self, mut keep: impl FnMut(&B) -> bool) -> Self {
        let mut out = LinComb::new();
        for (b, c) in &self.terms {
            if keep(b) {
                out.add_term(b.clone(), c.clone());
            }
        }
        out
    }
}

impl<B: Ord + Clone, C: Ring> FromIterator<(B, C)> for LinComb<B, C> {
    fn from_iter<I: IntoIterator<Item = (B, C)>>(iter: I) -> Self {
        let mut out = LinComb::new();
        for (b, c) in iter {
            out.add_term(b, c);
        }
        out
    }
}

/// Bilinear extension of a basis-level map `f : B1 × B2 → LinComb<B3>`.
pub fn bilinear<B1, B2, B3, C>(
    x: &LinComb<B1, C>,
    y: &LinComb<B2, C>,
    mut f: impl FnMut(&B1, &B2) -> LinComb<B3, C>,
) -> LinComb<B3, C>
where
    B1: Ord + Clone,
    B2: Ord + Clone,
    B3: Ord + Clone,
    C: Ring,
{
    let mut out = LinComb::new();
    for (b1, c1) in x.iter() {
        for (b2, c2) in y.iter() {
            let c = c1.mul_ref(c2);
            for (b3, c3) in f(b1, b2).terms {
                out.add_term(b3, c.mul_ref(&c3));
            }
        }
    }
    out
}

/// Tensor product `x ⊗ y` as a combination over pairs.
pub fn tensor<B1, B2, C>(x: &LinComb<B1, C>, y: &LinComb<B2, C>) -> LinComb<(B1, B2), C>
where
    B1: Ord + Clone,
    B2: Ord + Clone,
    C: Ring,
{
    bilinear(x, y, |a, b| LinComb::basis((a.clone(), b.clone())))
}

impl<B: Ord + Clone + fmt::Display, C: Ring + fmt::Display> fmt::Display for LinComb<B, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (b, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c} {b}")?;
        }
        Ok(())
    }
}
