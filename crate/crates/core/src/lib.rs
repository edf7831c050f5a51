//! Exact-arithmetic calculus on the decorated rooted trees of singular SPDE
//! theory: spaces generated by rules, positive and negative coproducts with
//! their antipodes, extended decorations and the cointeraction, character
//! groups and renormalisation maps, symbolic non-linearities with the
//! coherence map, counterterms, and a pre-Lie grafting layer.
//!
//! Everything is computed over ℚ + ℚ·κ (κ a formal infinitesimal), so every
//! identity holds or fails exactly.

pub mod algebra;
pub mod characters;
pub mod context;
pub mod coproducts;
pub mod error;
pub mod grafting;
pub mod nonlin;
pub mod rules;
pub mod trees;

pub use algebra::{Degree, LinComb, MultiIndex, PolyQ, Q};
pub use context::Context;
pub use error::{Error, Result};
pub use rules::EquationSpec;
pub use trees::{Forest, Tree};
