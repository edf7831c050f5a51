//! Exact rational scalars and small combinatorial helpers.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};

use crate::error::ParseError;

/// Arbitrary-precision rational, the coefficient field everywhere.
pub type Q = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn q_zero() -> Q {
    BigRational::zero()
}

pub fn q_one() -> Q {
    BigRational::one()
}

/// `n!` as a big integer.
pub fn int_factorial(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn int_binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Parses a rational literal `[-]int[/int]`, e.g. `-5/2` or `3`.
pub fn parse_q(s: &str) -> Result<Q, ParseError> {
    let s = s.trim();
    let err = |msg: &str| ParseError::new(msg, 0);
    if s.is_empty() {
        return Err(err("empty rational literal"));
    }
    match s.split_once('/') {
        Some((num, den)) => {
            let n: BigInt = num
                .trim()
                .parse()
                .map_err(|_| err("bad numerator in rational literal"))?;
            let d: BigInt = den
                .trim()
                .parse()
                .map_err(|_| err("bad denominator in rational literal"))?;
            if d.is_zero() {
                return Err(err("zero denominator in rational literal"));
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| err("bad integer literal"))?;
            Ok(BigRational::from_integer(n))
        }
    }
}

/// Renders a rational as `p` or `p/q` with positive denominator.
pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(int_factorial(0), BigInt::from(1));
        assert_eq!(int_factorial(5), BigInt::from(120));
        assert_eq!(int_binomial(5, 2), BigInt::from(10));
        assert_eq!(int_binomial(2, 3), BigInt::from(0));
    }

    #[test]
    fn rational_literals_round_trip() {
        for s in ["-5/2", "3", "0", "7/3", "-1"] {
            let x = parse_q(s).unwrap();
            assert_eq!(format_q(&x), s);
        }
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("").is_err());
    }
}
