//! Symbolic non-linearities, the coherence map, counterterms, and jets.

pub mod expr;
pub mod upsilon;
pub mod jet;

pub use expr::{obeys, parse_nonlin, prelie, Factor, NTerm, NonlinExpr};
pub use upsilon::{counterterms, counterterms_via_adjoint, upsilon, upsilon_lincomb, ExtNonlin};
pub use jet::{coherence_check, lift_coefficients, solve_jet, Jet};
