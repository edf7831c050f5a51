//! Multi-indices `k ∈ ℕ^d` with scaled degree `|k|_s = Σ k_i s_i`.

use std::fmt;
use std::ops::Index;

use num::bigint::BigInt;
use num::One;

use super::degree::Degree;
use super::q::{int_binomial, int_factorial, Q};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The i-th unit vector `e_i` (0-based).
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] += 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Total number of units, Σ k_i.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference, `None` if any entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        debug_assert_eq!(self.dim(), other.dim());
        let mut v = Vec::with_capacity(self.dim());
        for (a, b) in self.0.iter().zip(&other.0) {
            if a < b {
                return None;
            }
            v.push(a - b);
        }
        Some(MultiIndex(v))
    }

    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `|k|_s = Σ k_i s_i` as a κ-free degree.
    pub fn s_degree(&self, scaling: &[Q]) -> Degree {
        debug_assert_eq!(self.dim(), scaling.len());
        let mut acc = Degree::zero();
        for (k, s) in self.0.iter().zip(scaling) {
            acc += &Degree::from_q(s * Q::from_integer(BigInt::from(*k)));
        }
        acc
    }

    /// `k! = k_1! ⋯ k_d!`.
    pub fn factorial(&self) -> BigInt {
        self.0.iter().map(|&k| int_factorial(k)).product()
    }

    /// `binom(k, n) = Π binom(k_i, n_i)`; zero unless `n ≤ k`.
    pub fn binomial(&self, lower: &MultiIndex) -> BigInt {
        debug_assert_eq!(self.dim(), lower.dim());
        let mut acc = BigInt::one();
        for (k, n) in self.0.iter().zip(&lower.0) {
            acc *= int_binomial(*k, *n);
        }
        acc
    }

    /// All `n` with `0 ≤ n ≤ k` componentwise, in lexicographic order.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(self.dim())];
        for (i, &k) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for base in &out {
                for v in 0..=k {
                    let mut m = base.clone();
                    m.0[i] = v;
                    next.push(m);
                }
            }
            out = next;
        }
        out
    }
}

impl Index<usize> for MultiIndex {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// Enumerates all multi-indices of dimension `dim` whose scaled degree is
/// strictly below `bound`. Requires every scaling entry ≥ 1 so the result is
/// finite.
pub fn indices_below(dim: usize, scaling: &[Q], bound: &Degree) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = MultiIndex::zero(dim);
    fn rec(
        i: usize,
        cur: &mut MultiIndex,
        acc: &Degree,
        scaling: &[Q],
        bound: &Degree,
        out: &mut Vec<MultiIndex>,
    ) {
        if acc >= bound {
            return;
        }
        if i == cur.dim() {
            out.push(cur.clone());
            return;
        }
        let step = Degree::from_q(scaling[i].clone());
        let mut here = acc.clone();
        let mut v = 0;
        loop {
            cur.0[i] = v;
            rec(i + 1, cur, &here, scaling, bound, out);
            here += &step;
            if here >= *bound {
                break;
            }
            v += 1;
        }
        cur.0[i] = 0;
    }
    rec(0, &mut cur, &Degree::zero(), scaling, bound, &mut out);
    out.sort();
    out
}
