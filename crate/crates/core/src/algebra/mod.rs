//! Exact arithmetic foundations: rationals, κ-degrees, multi-indices,
//! polynomial coefficients, and generic linear combinations.

pub mod degree;
pub mod lincomb;
pub mod multiindex;
pub mod poly;
pub mod q;

pub use degree::Degree;
pub use lincomb::{bilinear, tensor, LinComb, Ring};
pub use multiindex::{indices_below, MultiIndex};
pub use poly::{Atom, Monomial, PolyQ};
pub use q::{format_q, parse_q, q, q_one, q_zero, qi, Q};
