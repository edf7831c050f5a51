//! The enlarged tree space: polynomial decorations remember which derivative
//! slot they came from, stored as pairs `J_s[X^t]` at each node.

use std::fmt;
use std::sync::Arc;

use num::BigInt;

use crate::algebra::q::int_factorial;
use crate::algebra::{Degree, MultiIndex, Q};

use super::tree::{EdgeKind, EdgeType, Tree};

#[derive(PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct BNode {
    ext: Degree,
    /// Sorted multiset of `(s, t)` pairs, each one a factor `J_s[X^t]` with
    /// `s ≤ t`, `s ≠ t`.
    jdecos: Vec<(MultiIndex, MultiIndex)>,
    children: Vec<(EdgeType, BTree)>,
}

/// A canonical tree in the enlarged space. Like `Tree`, but nodes carry
/// slot-tagged polynomial factors instead of a plain multi-index.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BTree(Arc<BNode>);

impl BTree {
    pub fn new(
        ext: Degree,
        mut jdecos: Vec<(MultiIndex, MultiIndex)>,
        mut children: Vec<(EdgeType, BTree)>,
    ) -> BTree {
        jdecos.sort();
        children.sort();
        debug_assert!(jdecos.iter().all(|(s, t)| s.leq(t) && s != t));
        debug_assert!(children
            .iter()
            .all(|(e, t)| e.is_kernel() || t.is_bare_leaf()));
        BTree(Arc::new(BNode {
            ext,
            jdecos,
            children,
        }))
    }

    pub fn unit(dim: usize) -> BTree {
        BTree::new(Degree::zero(), Vec::new(), Vec::new())
            .with_dim_hint(dim)
    }

    // Dimension is carried by the multi-indices; a bare unit has none, so
    // nothing to do. Kept so call sites read naturally.
    fn with_dim_hint(self, _dim: usize) -> BTree {
        self
    }

    pub fn noise(l: MultiIndex) -> BTree {
        let dim = l.dim();
        BTree::new(
            Degree::zero(),
            Vec::new(),
            vec![(EdgeType::noise(l), BTree::unit(dim))],
        )
    }

    pub fn kernel(m: MultiIndex, inner: BTree) -> BTree {
        BTree::new(
            Degree::zero(),
            Vec::new(),
            vec![(EdgeType::kernel(m), inner)],
        )
    }

    /// A single `J_s[X^t]` factor at a bare node.
    pub fn jdeco(s: MultiIndex, t: MultiIndex) -> BTree {
        BTree::new(Degree::zero(), vec![(s, t)], Vec::new())
    }

    pub fn ext(&self) -> &Degree {
        &self.0.ext
    }

    pub fn jdecos(&self) -> &[(MultiIndex, MultiIndex)] {
        &self.0.jdecos
    }

    pub fn children(&self) -> &[(EdgeType, BTree)] {
        &self.0.children
    }

    pub fn is_bare_leaf(&self) -> bool {
        self.0.children.is_empty() && self.0.jdecos.is_empty() && self.0.ext.is_zero()
    }

    pub fn is_unit(&self) -> bool {
        self.is_bare_leaf()
    }

    pub fn product(&self, other: &BTree) -> BTree {
        let mut jdecos = self.0.jdecos.clone();
        jdecos.extend(other.0.jdecos.iter().cloned());
        let mut children = self.0.children.clone();
        children.extend(other.0.children.iter().cloned());
        BTree::new(self.0.ext.clone() + other.0.ext.clone(), jdecos, children)
    }

    pub fn with_root_ext(&self, a: Degree) -> BTree {
        BTree::new(a, self.0.jdecos.clone(), self.0.children.clone())
    }

    pub fn edge_count(&self) -> usize {
        self.0
            .children
            .iter()
            .map(|(_, t)| 1 + t.edge_count())
            .sum()
    }

    /// Splits the root into `(ext, jdecos, noises, kernel branches)`.
    pub fn root_parts(&self) -> BRootParts {
        let mut noises = Vec::new();
        let mut branches = Vec::new();
        for (e, t) in &self.0.children {
            match e.kind {
                EdgeKind::Noise => noises.push(e.deriv.clone()),
                EdgeKind::Kernel => branches.push((e.deriv.clone(), t.clone())),
            }
        }
        BRootParts {
            ext: self.0.ext.clone(),
            jdecos: self.0.jdecos.clone(),
            noises,
            branches,
        }
    }

    /// Symmetry factor: `Π (t_k−s_k)!^{γ_k} γ_k! Π α_i! Π (σ_j!)^{β_j} β_j!`
    /// over grouped identical jdecos, noises, and kernel branches.
    pub fn factorial(&self) -> Q {
        Q::from_integer(self.factorial_int())
    }

    fn factorial_int(&self) -> BigInt {
        let mut acc = BigInt::from(1);
        let jd = &self.0.jdecos;
        let mut i = 0;
        while i < jd.len() {
            let mut j = i + 1;
            while j < jd.len() && jd[j] == jd[i] {
                j += 1;
            }
            let mult = (j - i) as u32;
            let diff = jd[i].1.checked_sub(&jd[i].0).unwrap();
            acc *= diff.factorial().pow(mult);
            acc *= int_factorial(mult);
            i = j;
        }
        let ch = &self.0.children;
        let mut i = 0;
        while i < ch.len() {
            let mut j = i + 1;
            while j < ch.len() && ch[j] == ch[i] {
                j += 1;
            }
            let mult = (j - i) as u32;
            acc *= int_factorial(mult);
            if ch[i].0.is_kernel() {
                acc *= ch[i].1.factorial_int().pow(mult);
            }
            i = j;
        }
        acc
    }

    /// Forgets the slot tags: `J_s[X^t] ↦ X^{t−s}`, decorations summed per
    /// node.
    pub fn forget_slots(&self, dim: usize) -> Tree {
        let mut poly = MultiIndex::zero(dim);
        for (s, t) in &self.0.jdecos {
            poly = poly.add(&t.checked_sub(s).unwrap());
        }
        let children = self
            .0
            .children
            .iter()
            .map(|(e, t)| (e.clone(), t.forget_slots(dim)))
            .collect();
        Tree::new(poly, self.0.ext.clone(), children)
    }
}

pub struct BRootParts {
    pub ext: Degree,
    pub jdecos: Vec<(MultiIndex, MultiIndex)>,
    pub noises: Vec<MultiIndex>,
    pub branches: Vec<(MultiIndex, BTree)>,
}

impl fmt::Display for BTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.0.ext.is_zero() {
            parts.push(format!("E^{{{}}}", self.0.ext));
        }
        for (s, t) in &self.0.jdecos {
            parts.push(format!("J_{s}[X^{t}]"));
        }
        for (e, t) in &self.0.children {
            match e.kind {
                EdgeKind::Noise => parts.push(format!("{e}")),
                EdgeKind::Kernel => {
                    let name = if e.deriv.is_zero() {
                        "I".to_string()
                    } else {
                        format!("I_{}", e.deriv)
                    };
                    parts.push(format!("{name}[{t}]"));
                }
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// τ!-weighted inner product on the enlarged space.
pub fn binner_product(
    a: &crate::algebra::LinComb<BTree>,
    b: &crate::algebra::LinComb<BTree>,
) -> Q {
    let mut acc = Q::from_integer(0.into());
    for (t, ca) in a.iter() {
        let cb = b.coeff(t);
        if !num::Zero::is_zero(&cb) {
            acc += ca * cb * t.factorial();
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn slot_forgetting() {
        // J_(1,0)[X^(2,0)] · Ξ  ↦  X^(1,0) · Ξ
        let b = BTree::jdeco(mi(&[1, 0]), mi(&[2, 0])).product(&BTree::noise(mi(&[0, 0])));
        let t = b.forget_slots(2);
        assert_eq!(*t.poly(), mi(&[1, 0]));
        assert_eq!(t.children().len(), 1);
    }

    #[test]
    fn factorial_counts_slot_multiplicities() {
        // (J_0[X^(2,0)])²: (t−s)! = 2 per factor, multiplicity 2! → 2·2·2 = 8
        let one = BTree::jdeco(mi(&[0, 0]), mi(&[2, 0]));
        let sq = one.product(&one);
        assert_eq!(sq.factorial(), Q::from_integer(8.into()));
    }
}
