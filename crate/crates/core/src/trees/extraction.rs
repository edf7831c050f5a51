//! Node-indexed views of trees, and the extraction/contraction operations
//! behind the negative coproduct.
//!
//! Nodes are numbered by preorder traversal with children visited in
//! canonical order, so node ids are stable for a given canonical tree. A
//! subforest is a set of node-disjoint connected subtrees, each given by its
//! node set; two components may be adjacent in the host tree (the edge
//! between them is then a boundary edge of the upper one).

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{Degree, MultiIndex};
use crate::error::{Error, Result};

use super::tree::{DegreeParams, EdgeType, Forest, Tree};

/// A frozen, addressable copy of a tree.
pub struct IndexedTree {
    nodes: Vec<NodeData>,
    dim: usize,
}

pub struct NodeData {
    pub poly: MultiIndex,
    pub ext: Degree,
    /// Parent node id and the decoration of the edge from the parent.
    pub parent: Option<(usize, EdgeType)>,
    pub children: Vec<usize>,
}

impl IndexedTree {
    pub fn new(t: &Tree) -> IndexedTree {
        let mut it = IndexedTree {
            nodes: Vec::with_capacity(t.node_count()),
            dim: t.dim(),
        };
        it.push(t, None);
        it
    }

    fn push(&mut self, t: &Tree, parent: Option<(usize, EdgeType)>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(NodeData {
            poly: t.poly().clone(),
            ext: t.ext().clone(),
            parent,
            children: Vec::new(),
        });
        for (e, c) in t.children() {
            let cid = self.push(c, Some((id, e.clone())));
            self.nodes[id].children.push(cid);
        }
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, id: usize) -> &NodeData {
        &self.nodes[id]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = usize> {
        0..self.nodes.len()
    }

    /// Rebuilds the subtree rooted at `id` (with all decorations).
    pub fn subtree(&self, id: usize) -> Tree {
        let n = &self.nodes[id];
        let children = n
            .children
            .iter()
            .map(|&c| {
                let (_, e) = self.nodes[c].parent.clone().unwrap();
                (e, self.subtree(c))
            })
            .collect();
        Tree::new(n.poly.clone(), n.ext.clone(), children)
    }

    /// The root (topmost node) of a connected node set.
    pub fn component_root(&self, comp: &BTreeSet<usize>) -> usize {
        *comp.iter().next().expect("empty component")
    }
}

/// A choice of subforest with decoration splitting data: `components` are
/// node-disjoint connected subtrees given by node sets, `node_poly` the part
/// of each polynomial decoration carried away, and `edge_deriv` extra
/// derivatives on boundary edges (keyed by the child id of the edge).
#[derive(Clone, Debug, Default)]
pub struct Extraction {
    pub components: Vec<BTreeSet<usize>>,
    pub node_poly: BTreeMap<usize, MultiIndex>,
    pub edge_deriv: BTreeMap<usize, MultiIndex>,
}

impl Extraction {
    pub fn empty() -> Extraction {
        Extraction::default()
    }

    /// All extracted nodes.
    pub fn node_set(&self) -> BTreeSet<usize> {
        self.components.iter().flatten().copied().collect()
    }

    /// Boundary edges: edges from an extracted node to a child that is not
    /// in the same component, identified by the child id.
    pub fn boundary(&self, it: &IndexedTree) -> Vec<usize> {
        let mut out = Vec::new();
        for comp in &self.components {
            for &x in comp {
                for &c in &it.node(x).children {
                    if !comp.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn validate(&self, it: &IndexedTree) -> Result<()> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for comp in &self.components {
            if comp.is_empty() {
                return Err(Error::Invalid("empty subforest component".into()));
            }
            for &x in comp {
                if x >= it.len() {
                    return Err(Error::Invalid(format!("node {x} out of range")));
                }
                if !seen.insert(x) {
                    return Err(Error::Invalid(format!(
                        "subforest components are not node-disjoint at node {x}"
                    )));
                }
            }
            // Connectivity: every non-topmost member's parent must lie in
            // the same component.
            let root = it.component_root(comp);
            for &x in comp {
                if x == root {
                    continue;
                }
                match it.node(x).parent {
                    Some((p, _)) if comp.contains(&p) => {}
                    _ => {
                        return Err(Error::Invalid(format!(
                            "component is not connected at node {x}"
                        )))
                    }
                }
            }
        }
        for (&id, k) in &self.node_poly {
            if !seen.contains(&id) {
                return Err(Error::Invalid(format!(
                    "polynomial split keyed at node {id} outside the subforest"
                )));
            }
            if !k.leq(&it.node(id).poly) {
                return Err(Error::Invalid(format!(
                    "polynomial split at node {id} exceeds the decoration"
                )));
            }
        }
        let boundary: BTreeSet<usize> = self.boundary(it).into_iter().collect();
        for &id in self.edge_deriv.keys() {
            if !boundary.contains(&id) {
                return Err(Error::Invalid(format!(
                    "boundary derivative keyed at edge above node {id}, which is not a boundary edge"
                )));
            }
        }
        Ok(())
    }

    fn split_poly(&self, it: &IndexedTree, id: usize) -> MultiIndex {
        self.node_poly
            .get(&id)
            .cloned()
            .unwrap_or_else(|| MultiIndex::zero(it.dim()))
    }

    /// `Σ` of boundary derivatives on edges leaving node `id` out of its
    /// component.
    fn boundary_poly(&self, it: &IndexedTree, id: usize, comp: &BTreeSet<usize>) -> MultiIndex {
        let mut acc = MultiIndex::zero(it.dim());
        for &c in &it.node(id).children {
            if !comp.contains(&c) {
                if let Some(e) = self.edge_deriv.get(&c) {
                    acc = acc.add(e);
                }
            }
        }
        acc
    }
}

/// The forest of extracted components: decorations restricted to the
/// components, polynomial decorations replaced by the split part plus the
/// boundary derivatives gathered at each node.
pub fn extract(t: &Tree, sel: &Extraction) -> Result<Forest> {
    let it = IndexedTree::new(t);
    sel.validate(&it)?;
    let mut trees = Vec::with_capacity(sel.components.len());
    for comp in &sel.components {
        let root = it.component_root(comp);
        trees.push(build_component(&it, sel, root, comp));
    }
    Ok(Forest::from_trees(trees))
}

fn build_component(
    it: &IndexedTree,
    sel: &Extraction,
    id: usize,
    comp: &BTreeSet<usize>,
) -> Tree {
    let n = it.node(id);
    let children = n
        .children
        .iter()
        .filter(|c| comp.contains(c))
        .map(|&c| {
            let (_, e) = it.node(c).parent.clone().unwrap();
            (e, build_component(it, sel, c, comp))
        })
        .collect();
    Tree::new(
        sel.split_poly(it, id).add(&sel.boundary_poly(it, id, comp)),
        n.ext.clone(),
        children,
    )
}

/// The contracted tree: each component collapses to a single node whose
/// polynomial decoration is the undistributed remainder and whose extended
/// decoration records the degree of what was extracted; non-extracted edges
/// survive (possibly now joining two contracted nodes) and boundary edges
/// gain the chosen extra derivatives.
pub fn contract(t: &Tree, sel: &Extraction, params: &DegreeParams) -> Result<Tree> {
    let it = IndexedTree::new(t);
    sel.validate(&it)?;
    let mut comp_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (ci, comp) in sel.components.iter().enumerate() {
        for &id in comp {
            comp_of.insert(id, ci);
        }
    }
    Ok(contract_node(&it, sel, params, &comp_of, 0))
}

fn contract_node(
    it: &IndexedTree,
    sel: &Extraction,
    params: &DegreeParams,
    comp_of: &BTreeMap<usize, usize>,
    id: usize,
) -> Tree {
    if let Some(&ci) = comp_of.get(&id) {
        let comp = &sel.components[ci];
        debug_assert_eq!(
            it.component_root(comp),
            id,
            "contract_node entered off a component root"
        );
        // Remainder polynomial, extracted degree, and surviving child edges
        // gathered over the whole component.
        let mut poly = MultiIndex::zero(it.dim());
        let mut ext = Degree::zero();
        let mut children = Vec::new();
        for &x in comp {
            let n = it.node(x);
            poly = poly.add(&n.poly.checked_sub(&sel.split_poly(it, x)).unwrap());
            ext += &n.ext;
            ext += &sel
                .split_poly(it, x)
                .add(&sel.boundary_poly(it, x, comp))
                .s_degree(&params.scaling);
            for &c in &n.children {
                if comp.contains(&c) {
                    let (_, e) = it.node(c).parent.clone().unwrap();
                    ext += &params.edge_degree(&e);
                } else {
                    children.push(contract_child(it, sel, params, comp_of, c));
                }
            }
        }
        Tree::new(poly, ext, children)
    } else {
        let n = it.node(id);
        let children = n
            .children
            .iter()
            .map(|&c| contract_child(it, sel, params, comp_of, c))
            .collect();
        Tree::new(n.poly.clone(), n.ext.clone(), children)
    }
}

fn contract_child(
    it: &IndexedTree,
    sel: &Extraction,
    params: &DegreeParams,
    comp_of: &BTreeMap<usize, usize>,
    c: usize,
) -> (EdgeType, Tree) {
    let (_, mut e) = it.node(c).parent.clone().unwrap();
    if let Some(extra) = sel.edge_deriv.get(&c) {
        e.deriv = e.deriv.add(extra);
    }
    (e, contract_node(it, sel, params, comp_of, c))
}
