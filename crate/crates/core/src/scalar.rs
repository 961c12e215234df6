//! Scalar abstraction for the linear-algebra side of the crate.
//!
//! Transfer matrices, gain matrices and real-mode simulation work over any
//! signed field-like number type: `f32`, `f64`, or exact rationals
//! (`Ratio<i64>`, `BigRational`). The numerical optimizer and the
//! fixed-point machinery are specialised to `f64`.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// A signed number type the transfer-matrix algebra can run over.
pub trait Scalar:
    Num + Signed + Clone + Debug + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Converts a binary64 coefficient into this scalar type.
    ///
    /// For rational types the conversion is exact.
    fn from_f64_lossless(x: f64) -> Option<Self>;

    /// Lossy conversion for reporting.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_value(&self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Scalar for f64 {
    fn from_f64_lossless(x: f64) -> Option<Self> {
        Some(x)
    }
}

impl Scalar for f32 {
    fn from_f64_lossless(x: f64) -> Option<Self> {
        let y = x as f32;
        (y as f64 == x).then_some(y)
    }
}

impl Scalar for Ratio<i64> {
    fn from_f64_lossless(x: f64) -> Option<Self> {
        Ratio::<i64>::from_f64(x).filter(|r| r.to_f64() == Some(x))
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn from_f64_lossless(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

/// Exact rational with the given numerator and denominator.
pub fn rational(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_conversion_is_exact() {
        let r = BigRational::from_f64_lossless(0.1).unwrap();
        assert_eq!(r.to_f64(), Some(0.1));
        assert_ne!(r, rational(1, 10));
        assert_eq!(BigRational::from_f64_lossless(0.5).unwrap(), rational(1, 2));
    }

    #[test]
    fn f32_rejects_lossy_values() {
        assert_eq!(f32::from_f64_lossless(0.25), Some(0.25));
        assert_eq!(f32::from_f64_lossless(0.1), None);
    }

    #[test]
    fn small_ratio_roundtrip() {
        let r = Ratio::<i64>::from_f64_lossless(-2.75).unwrap();
        assert_eq!(r, Ratio::new(-11, 4));
        assert!(Ratio::<i64>::from_f64_lossless(f64::NAN).is_none());
    }
}
