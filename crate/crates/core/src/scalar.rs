//! Scalar traits shared by the exact and floating-point code paths.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A probability mass type. Implemented for `f32`, `f64` and exact rationals.
pub trait Prob: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync {}

impl<T> Prob for T where T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync {}

/// Mass types that also support logarithms (entropy, mutual information).
pub trait Real: Prob + Float {}

impl<T> Real for T where T: Prob + Float {}

/// Exact rational probabilities.
pub type Exact = BigRational;

/// Converts an `f64` into `P`. For [`Exact`] the conversion is exact because
/// every finite double is a dyadic rational.
pub fn from_f64<P: Prob>(x: f64) -> P {
    P::from_f64(x).unwrap_or_else(|| panic!("{x} is not representable"))
}

pub fn half<P: Prob>() -> P {
    P::one() / (P::one() + P::one())
}

/// `1/d` in `P`.
pub fn recip<P: Prob>(d: u64) -> P {
    P::one() / P::from_u64(d).expect("denominator fits")
}

pub fn to_f64<P: Prob>(x: &P) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn abs_diff<P: Prob>(a: &P, b: &P) -> P {
    if a >= b {
        a.clone() - b.clone()
    } else {
        b.clone() - a.clone()
    }
}

pub fn exact_ratio(num: i64, den: i64) -> Exact {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_conversion_is_exact() {
        let q: Exact = from_f64(0.25);
        assert_eq!(q, exact_ratio(1, 4));
        let third: Exact = from_f64(1.0 / 3.0);
        assert_ne!(third, exact_ratio(1, 3));
    }

    #[test]
    fn helpers() {
        assert_eq!(half::<f64>(), 0.5);
        assert_eq!(recip::<Exact>(6), exact_ratio(1, 6));
        assert_eq!(abs_diff(&0.25f32, &0.75f32), 0.5);
    }
}
