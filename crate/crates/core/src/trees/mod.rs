//! Decorated rooted trees: canonical forms, products, symmetry factors,
//! extraction/contraction, the enlarged slot-tagged space, parsing and
//! printing.

pub mod btree;
pub mod extraction;
pub mod json;
pub mod parse;
pub mod tree;

pub use btree::{binner_product, BTree};
pub use extraction::{contract, extract, Extraction, IndexedTree};
pub use parse::{parse_btree, parse_tree};
pub use tree::{
    inner_product, DegreeMode, DegreeParams, EdgeKind, EdgeType, Forest, Tree,
};
