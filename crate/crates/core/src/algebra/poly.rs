//! Commutative polynomials over ℚ in named atoms.
//!
//! Atoms stand for jet coefficients `u_k`, formal derivatives `f^(α)` taken
//! at the expansion point, and free scalars. Keeping them symbolic makes
//! coherence and counterterm identities exact polynomial equalities.

use std::collections::BTreeMap;
use std::fmt;

use num::Zero;

use super::multiindex::MultiIndex;
use super::q::{format_q, Q};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    /// Coefficient `u_k` of the polynomial part of a jet.
    Coeff(MultiIndex),
    /// `name^(order)` — a formal derivative of a named function, evaluated at
    /// the expansion point; `order` indexes the function's argument list.
    Deriv { name: String, order: Vec<u32> },
    /// A free scalar symbol.
    Scalar(String),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Coeff(k) => write!(f, "u{k}"),
            Atom::Deriv { name, order } => {
                if order.iter().all(|&o| o == 0) {
                    write!(f, "{name}")
                } else if order.len() == 1 {
                    write!(f, "{name}^({})", order[0])
                } else {
                    let parts: Vec<String> = order.iter().map(|o| o.to_string()).collect();
                    write!(f, "{name}^({})", parts.join(","))
                }
            }
            Atom::Scalar(s) => write!(f, "{s}"),
        }
    }
}

/// A multiset of atoms with exponents, kept sorted.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<&Atom, u32> = BTreeMap::new();
        for (a, e) in self.0.iter().chain(&other.0) {
            *map.entry(a).or_insert(0) += e;
        }
        Monomial(map.into_iter().map(|(a, e)| (a.clone(), e)).collect())
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (a, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Polynomial over ℚ in atoms; never stores a zero coefficient.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct PolyQ(BTreeMap<Monomial, Q>);

impl PolyQ {
    pub fn zero() -> Self {
        PolyQ(BTreeMap::new())
    }

    pub fn one() -> Self {
        PolyQ::constant(Q::from_integer(1.into()))
    }

    pub fn constant(c: Q) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(Monomial::one(), c);
        }
        PolyQ(m)
    }

    pub fn atom(a: Atom) -> Self {
        let mut m = BTreeMap::new();
        m.insert(Monomial::atom(a), Q::from_integer(1.into()));
        PolyQ(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.0.iter()
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.0.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &PolyQ) -> PolyQ {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> PolyQ {
        PolyQ(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &PolyQ) -> PolyQ {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PolyQ) -> PolyQ {
        let mut out = PolyQ::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Q) -> PolyQ {
        if c.is_zero() {
            return PolyQ::zero();
        }
        PolyQ(self.0.iter().map(|(m, x)| (m.clone(), x * c)).collect())
    }
}

impl fmt::Display for PolyQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", format_q(c))?;
            } else if c == &Q::from_integer(1.into()) {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_q(c))?;
            }
        }
        Ok(())
    }
}
