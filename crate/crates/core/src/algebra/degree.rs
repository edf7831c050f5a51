//! Degrees of the form `q0 + q1·κ` with κ a formal positive infinitesimal.
//!
//! The order is lexicographic in `(q0, q1)`, which is exactly the order of
//! `q0 + q1·κ` for every sufficiently small κ > 0. All degree comparisons in
//! the library ("< 0", truncation bounds, subcriticality intervals) go
//! through this type, so κ never needs a numeric value.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num::Zero;

use super::q::{format_q, parse_q, q_zero, Q};
use crate::error::ParseError;

/// Exact degree `q0 + q1·κ`. Derived `Ord` is lexicographic in `(q0, q1)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Degree {
    pub q0: Q,
    pub q1: Q,
}

impl Degree {
    pub fn new(q0: Q, q1: Q) -> Self {
        Degree { q0, q1 }
    }

    pub fn zero() -> Self {
        Degree {
            q0: q_zero(),
            q1: q_zero(),
        }
    }

    /// A κ-free degree.
    pub fn from_q(q0: Q) -> Self {
        Degree {
            q0,
            q1: q_zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.q0.is_zero() && self.q1.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        *self < Degree::zero()
    }

    pub fn is_positive(&self) -> bool {
        *self > Degree::zero()
    }

    pub fn scale(&self, c: &Q) -> Self {
        Degree {
            q0: &self.q0 * c,
            q1: &self.q1 * c,
        }
    }
}

impl Add for Degree {
    type Output = Degree;
    fn add(self, rhs: Degree) -> Degree {
        Degree {
            q0: self.q0 + rhs.q0,
            q1: self.q1 + rhs.q1,
        }
    }
}

impl Add for &Degree {
    type Output = Degree;
    fn add(self, rhs: &Degree) -> Degree {
        Degree {
            q0: &self.q0 + &rhs.q0,
            q1: &self.q1 + &rhs.q1,
        }
    }
}

impl AddAssign<&Degree> for Degree {
    fn add_assign(&mut self, rhs: &Degree) {
        self.q0 += &rhs.q0;
        self.q1 += &rhs.q1;
    }
}

impl Sub for Degree {
    type Output = Degree;
    fn sub(self, rhs: Degree) -> Degree {
        Degree {
            q0: self.q0 - rhs.q0,
            q1: self.q1 - rhs.q1,
        }
    }
}

impl Sub for &Degree {
    type Output = Degree;
    fn sub(self, rhs: &Degree) -> Degree {
        Degree {
            q0: &self.q0 - &rhs.q0,
            q1: &self.q1 - &rhs.q1,
        }
    }
}

impl Neg for Degree {
    type Output = Degree;
    fn neg(self) -> Degree {
        Degree {
            q0: -self.q0,
            q1: -self.q1,
        }
    }
}

impl Mul<&Q> for &Degree {
    type Output = Degree;
    fn mul(self, rhs: &Q) -> Degree {
        self.scale(rhs)
    }
}

impl Sum for Degree {
    fn sum<I: Iterator<Item = Degree>>(iter: I) -> Degree {
        iter.fold(Degree::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Degree {
    /// Literal grammar `Q(('+'|'-')Q'k')?`, e.g. `-5/2-1k`, `2`, `1/2-3k`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q1.is_zero() {
            return write!(f, "{}", format_q(&self.q0));
        }
        let sign = if self.q1 < q_zero() { '-' } else { '+' };
        let abs = if self.q1 < q_zero() {
            -self.q1.clone()
        } else {
            self.q1.clone()
        };
        write!(f, "{}{}{}k", format_q(&self.q0), sign, format_q(&abs))
    }
}

impl FromStr for Degree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseError::new("empty degree literal", 0));
        }
        if let Some(body) = s.strip_suffix('k') {
            // Split at the last '+'/'-' that is not the leading sign and not
            // part of a numerator/denominator.
            let bytes = body.as_bytes();
            let mut split = None;
            for i in (1..bytes.len()).rev() {
                if bytes[i] == b'+' || bytes[i] == b'-' {
                    if bytes[i - 1] == b'/' {
                        continue;
                    }
                    split = Some(i);
                    break;
                }
            }
            let i = split.ok_or_else(|| ParseError::new("degree literal missing κ sign", 0))?;
            let q0 = parse_q(&body[..i])?;
            let sign = if bytes[i] == b'-' { -1 } else { 1 };
            let q1 = parse_q(&body[i + 1..])?;
            Ok(Degree::new(q0, q1 * super::q::qi(sign)))
        } else {
            Ok(Degree::from_q(parse_q(s)?))
        }
    }
}
