//! Canonical decorated rooted trees and forests.
//!
//! A tree node carries a polynomial decoration `X^k`, an extended decoration
//! `1^a` (an exact degree, zero on reduced trees), and a multiset of decorated
//! child edges. Children are stored sorted by `(edge kind, edge derivative,
//! child)`, so structural equality is equality of combinatorial decorated
//! trees and no isomorphism search is ever needed.

use std::fmt;
use std::sync::Arc;

use num::BigInt;

use crate::algebra::{Degree, LinComb, MultiIndex, Q};
use crate::algebra::q::int_factorial;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EdgeKind {
    Noise,
    Kernel,
}

/// An edge type `Ξ_p` or `I_p`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EdgeType {
    pub kind: EdgeKind,
    pub deriv: MultiIndex,
}

impl EdgeType {
    pub fn noise(deriv: MultiIndex) -> Self {
        EdgeType {
            kind: EdgeKind::Noise,
            deriv,
        }
    }

    pub fn kernel(deriv: MultiIndex) -> Self {
        EdgeType {
            kind: EdgeKind::Kernel,
            deriv,
        }
    }

    pub fn is_kernel(&self) -> bool {
        self.kind == EdgeKind::Kernel
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            EdgeKind::Noise => "Xi",
            EdgeKind::Kernel => "I",
        };
        if self.deriv.is_zero() {
            write!(f, "{name}")
        } else {
            write!(f, "{name}_{}", self.deriv)
        }
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct Node {
    poly: MultiIndex,
    ext: Degree,
    children: Vec<(EdgeType, Tree)>,
}

/// An immutable canonical decorated rooted tree. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Tree(Arc<Node>);

impl Tree {
    /// Builds a canonical tree; children are sorted, decorations taken as-is.
    /// Noise edges must terminate at bare leaves.
    pub fn new(poly: MultiIndex, ext: Degree, mut children: Vec<(EdgeType, Tree)>) -> Tree {
        children.sort();
        debug_assert!(children
            .iter()
            .all(|(e, t)| e.is_kernel() || t.is_bare_leaf()));
        Tree(Arc::new(Node {
            poly,
            ext,
            children,
        }))
    }

    /// The unit tree `1`: a single node with zero decorations.
    pub fn unit(dim: usize) -> Tree {
        Tree::new(MultiIndex::zero(dim), Degree::zero(), Vec::new())
    }

    /// `X^k`.
    pub fn poly_tree(k: MultiIndex) -> Tree {
        Tree::new(k, Degree::zero(), Vec::new())
    }

    /// `1^a` at a bare node.
    pub fn ext_unit(dim: usize, a: Degree) -> Tree {
        Tree::new(MultiIndex::zero(dim), a, Vec::new())
    }

    /// The single noise edge `Xi_l`.
    pub fn noise(l: MultiIndex) -> Tree {
        let dim = l.dim();
        Tree::new(
            MultiIndex::zero(dim),
            Degree::zero(),
            vec![(EdgeType::noise(l), Tree::unit(dim))],
        )
    }

    /// The planted tree `I_m[inner]`.
    pub fn kernel(m: MultiIndex, inner: Tree) -> Tree {
        let dim = m.dim();
        Tree::new(
            MultiIndex::zero(dim),
            Degree::zero(),
            vec![(EdgeType::kernel(m), inner)],
        )
    }

    pub fn poly(&self) -> &MultiIndex {
        &self.0.poly
    }

    pub fn ext(&self) -> &Degree {
        &self.0.ext
    }

    pub fn children(&self) -> &[(EdgeType, Tree)] {
        &self.0.children
    }

    pub fn dim(&self) -> usize {
        self.0.poly.dim()
    }

    pub fn is_bare_leaf(&self) -> bool {
        self.0.children.is_empty() && self.0.poly.is_zero() && self.0.ext.is_zero()
    }

    /// True for the unit tree `1`.
    pub fn is_unit(&self) -> bool {
        self.is_bare_leaf()
    }

    /// True when every extended decoration vanishes.
    pub fn is_reduced(&self) -> bool {
        self.0.ext.is_zero() && self.0.children.iter().all(|(_, t)| t.is_reduced())
    }

    /// Planted means a single edge at the root and no root decorations other
    /// than the extended one (which is ignored, matching `Q`-projection).
    pub fn is_planted(&self) -> bool {
        self.0.children.len() == 1 && self.0.poly.is_zero()
    }

    /// Number of kernel edges in the whole tree.
    pub fn kernel_edge_count(&self) -> usize {
        self.0
            .children
            .iter()
            .map(|(e, t)| (e.is_kernel() as usize) + t.kernel_edge_count())
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        self.0
            .children
            .iter()
            .map(|(_, t)| 1 + t.edge_count())
            .sum()
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .0
            .children
            .iter()
            .map(|(_, t)| t.node_count())
            .sum::<usize>()
    }

    /// Tree product: joins the roots, adding polynomial and extended
    /// decorations and uniting the child multisets.
    pub fn product(&self, other: &Tree) -> Tree {
        let mut children = self.0.children.clone();
        children.extend(other.0.children.iter().cloned());
        Tree::new(
            self.0.poly.add(&other.0.poly),
            self.0.ext.clone() + other.0.ext.clone(),
            children,
        )
    }

    /// Replaces the root polynomial decoration.
    pub fn with_root_poly(&self, k: MultiIndex) -> Tree {
        Tree::new(k, self.0.ext.clone(), self.0.children.clone())
    }

    /// Replaces the root extended decoration.
    pub fn with_root_ext(&self, a: Degree) -> Tree {
        Tree::new(self.0.poly.clone(), a, self.0.children.clone())
    }

    /// Zeroes every extended decoration (the projection to reduced trees).
    pub fn project_reduced(&self) -> Tree {
        Tree::new(
            self.0.poly.clone(),
            Degree::zero(),
            self.0
                .children
                .iter()
                .map(|(e, t)| (e.clone(), t.project_reduced()))
                .collect(),
        )
    }

    /// Splits the root into `(ext, poly, noise derivs, kernel branches)`.
    pub fn root_parts(&self) -> RootParts {
        let mut noises = Vec::new();
        let mut branches = Vec::new();
        for (e, t) in &self.0.children {
            match e.kind {
                EdgeKind::Noise => noises.push(e.deriv.clone()),
                EdgeKind::Kernel => branches.push((e.deriv.clone(), t.clone())),
            }
        }
        RootParts {
            ext: self.0.ext.clone(),
            poly: self.0.poly.clone(),
            noises,
            branches,
        }
    }

    /// Symmetry factor τ!: with the unique representation
    /// `X^k 1^a Π Ξ_{l_i}^{α_i} Π I_{m_j}[τ_j]^{β_j}` this is
    /// `k! Π α_i! Π (τ_j!)^{β_j} β_j!`.
    pub fn factorial(&self) -> Q {
        Q::from_integer(self.factorial_int())
    }

    fn factorial_int(&self) -> BigInt {
        let mut acc = self.0.poly.factorial();
        let mut i = 0;
        let ch = &self.0.children;
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
}

pub struct RootParts {
    pub ext: Degree,
    pub poly: MultiIndex,
    pub noises: Vec<MultiIndex>,
    pub branches: Vec<(MultiIndex, Tree)>,
}

/// Scaled-degree parameters: the scaling `s` and the degrees of the two edge
/// types.
#[derive(Clone, Debug)]
pub struct DegreeParams {
    pub scaling: Vec<Q>,
    pub deg_noise: Degree,
    pub deg_kernel: Degree,
}

impl DegreeParams {
    /// `|t_p|_s = |t|_s − |p|_s` for an edge type.
    pub fn edge_degree(&self, e: &EdgeType) -> Degree {
        let base = match e.kind {
            EdgeKind::Noise => self.deg_noise.clone(),
            EdgeKind::Kernel => self.deg_kernel.clone(),
        };
        base - e.deriv.s_degree(&self.scaling)
    }
}

/// Which decorations enter a tree degree.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DegreeMode {
    /// `|·|_s`: ignores extended decorations.
    S,
    /// `|·|_+`: adds every extended decoration.
    Plus,
}

impl Tree {
    pub fn degree(&self, params: &DegreeParams, mode: DegreeMode) -> Degree {
        let mut acc = self.0.poly.s_degree(&params.scaling);
        if mode == DegreeMode::Plus {
            acc += &self.0.ext;
        }
        for (e, t) in &self.0.children {
            acc += &params.edge_degree(e);
            acc += &t.degree(params, mode);
        }
        acc
    }
}

/// A multiset of trees; the unit is the empty forest.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Forest(Vec<Tree>);

impl Forest {
    pub fn empty() -> Forest {
        Forest(Vec::new())
    }

    pub fn single(t: Tree) -> Forest {
        Forest(vec![t])
    }

    pub fn from_trees(mut trees: Vec<Tree>) -> Forest {
        trees.sort();
        Forest(trees)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.0
    }

    /// Forest product: multiset union.
    pub fn join(&self, other: &Forest) -> Forest {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        v.sort();
        Forest(v)
    }

    pub fn degree(&self, params: &DegreeParams, mode: DegreeMode) -> Degree {
        self.0.iter().map(|t| t.degree(params, mode)).sum()
    }
}

impl fmt::Display for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " . ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// τ!-weighted inner product making distinct canonical trees orthogonal:
/// `⟨a, b⟩ = Σ_τ a_τ b_τ τ!`.
pub fn inner_product(a: &LinComb<Tree>, b: &LinComb<Tree>) -> Q {
    let mut acc = Q::from_integer(0.into());
    for (t, ca) in a.iter() {
        let cb = b.coeff(t);
        if !num::Zero::is_zero(&cb) {
            acc += ca * cb * t.factorial();
        }
    }
    acc
}
