//! Exact base-`b` fixed-point values.
//!
//! A value is `mantissa * b^-p` with an arbitrary-precision mantissa, so
//! range violations are checked conditions and never wrap. Quantization
//! rounds to the nearest grid point with ties away from zero.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FxpError {
    #[error("value {value} overflows format {format}")]
    Overflow { value: f64, format: FixedPointFormat },
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("operands use different formats ({0} and {1})")]
    FormatMismatch(FixedPointFormat, FixedPointFormat),
    #[error("{coeffs} coefficients for {values} values")]
    LengthMismatch { coeffs: usize, values: usize },
}

/// Base `b`, `P` integer digits and `p` fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub base: u32,
    pub int_digits: u32,
    pub frac_digits: u32,
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(b={}, P={}, p={})", self.base, self.int_digits, self.frac_digits)
    }
}

impl FixedPointFormat {
    pub fn new(base: u32, int_digits: u32, frac_digits: u32) -> Self {
        assert!(base >= 2, "fixed-point base must be at least 2");
        FixedPointFormat {
            base,
            int_digits,
            frac_digits,
        }
    }

    /// `b^p`, the number of grid points per unit.
    pub fn scale(&self) -> BigInt {
        num_traits::pow(BigInt::from(self.base), self.frac_digits as usize)
    }

    /// `b^p` as binary64; this is the factor used for every conversion.
    pub fn scale_f64(&self) -> f64 {
        (self.base as f64).powi(self.frac_digits as i32)
    }

    /// Grid spacing `b^-p`.
    pub fn granularity(&self) -> f64 {
        1.0 / self.scale_f64()
    }

    /// Largest mantissa magnitude, `b^(P+p) - 1`.
    pub fn max_mantissa(&self) -> BigInt {
        num_traits::pow(BigInt::from(self.base), (self.int_digits + self.frac_digits) as usize) - 1
    }

    /// Largest representable magnitude, `b^P - b^-p`.
    pub fn max_value(&self) -> f64 {
        (self.base as f64).powi(self.int_digits as i32) - self.granularity()
    }
}

/// `mantissa * b^-p` in a given format.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixedPointValue {
    format: FixedPointFormat,
    mantissa: BigInt,
}

impl FixedPointValue {
    /// Checked constructor.
    pub fn from_mantissa(format: FixedPointFormat, mantissa: BigInt) -> Result<Self, FxpError> {
        if mantissa.abs() > format.max_mantissa() {
            return Err(FxpError::Overflow {
                value: mantissa.to_f64().unwrap_or(f64::INFINITY) / format.scale_f64(),
                format,
            });
        }
        Ok(FixedPointValue { format, mantissa })
    }

    pub fn zero(format: FixedPointFormat) -> Self {
        FixedPointValue {
            format,
            mantissa: BigInt::zero(),
        }
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn to_f64(&self) -> f64 {
        self.mantissa.to_f64().unwrap_or(f64::NAN) / self.format.scale_f64()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), self.format.scale())
    }

    /// Nearest integer, ties away from zero, computed exactly.
    pub fn round_to_int(&self) -> BigInt {
        let scale = self.format.scale();
        let twice = &self.mantissa * 2 + if self.mantissa.is_negative() { -&scale } else { scale.clone() };
        // (2m +- s) / 2s truncated toward zero
        twice / (scale * 2)
    }
}

impl PartialOrd for FixedPointValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.format == other.format).then(|| self.mantissa.cmp(&other.mantissa))
    }
}

impl fmt::Display for FixedPointValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.format.frac_digits == 0 {
            write!(f, "{}", self.mantissa)
        } else {
            write!(f, "{}", self.to_f64())
        }
    }
}

/// Nearest grid point of `format` to `x`, ties away from zero.
pub fn quantize(x: f64, format: FixedPointFormat) -> Result<FixedPointValue, FxpError> {
    if !x.is_finite() {
        return Err(FxpError::NonFinite(x));
    }
    let r = (x * format.scale_f64()).round();
    let mantissa = BigInt::from_f64(r).ok_or(FxpError::Overflow { value: x, format })?;
    FixedPointValue::from_mantissa(format, mantissa).map_err(|_| FxpError::Overflow { value: x, format })
}

/// `sum coeffs[i] * values[i]` evaluated left to right in binary64, then
/// quantized to `format`.
pub fn linear_combine(
    coeffs: &[f64],
    values: &[FixedPointValue],
    format: FixedPointFormat,
) -> Result<FixedPointValue, FxpError> {
    if coeffs.len() != values.len() {
        return Err(FxpError::LengthMismatch {
            coeffs: coeffs.len(),
            values: values.len(),
        });
    }
    let mut acc = 0.0;
    for (c, v) in coeffs.iter().zip(values) {
        if v.format != format {
            return Err(FxpError::FormatMismatch(v.format, format));
        }
        acc += c * v.to_f64();
    }
    quantize(acc, format)
}

/// Nearest integer, ties away from zero.
pub fn round_to_int(x: f64) -> i64 {
    x.round() as i64
}

/// Rounding error of a left-to-right binary64 dot product, estimated with
/// an error-free (compensated) evaluation.
pub(crate) fn dot_rounding_error(coeffs: &[f64], values: &[f64]) -> f64 {
    let mut naive = 0.0;
    let mut s = 0.0f64;
    let mut comp = 0.0f64;
    for (&a, &b) in coeffs.iter().zip(values) {
        naive += a * b;
        let p = a * b;
        let perr = a.mul_add(b, -p);
        let t = s + p;
        let z = t - s;
        let serr = (s - (t - z)) + (p - z);
        s = t;
        comp += perr + serr;
    }
    (naive - (s + comp)).abs()
}

/// Converts an exact integer message into a fixed-point value.
pub fn from_integer(m: i64, format: FixedPointFormat) -> Result<FixedPointValue, FxpError> {
    FixedPointValue::from_mantissa(format, BigInt::from(m) * format.scale())
}

impl From<&FixedPointValue> for f64 {
    fn from(v: &FixedPointValue) -> f64 {
        v.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(b: u32, big: u32, small: u32) -> FixedPointFormat {
        FixedPointFormat::new(b, big, small)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.3, fmt(2, 4, 3)).unwrap().mantissa(), &BigInt::from(2));
        assert_eq!(quantize(0.3, fmt(2, 4, 3)).unwrap().to_f64(), 0.25);
        assert_eq!(quantize(0.3125, fmt(2, 4, 3)).unwrap().mantissa(), &BigInt::from(3));
        assert_eq!(quantize(-0.3125, fmt(2, 4, 3)).unwrap().mantissa(), &BigInt::from(-3));
        assert_eq!(quantize(5.0, fmt(2, 3, 2)).unwrap().to_f64(), 5.0);
    }

    #[test]
    fn quantize_overflow() {
        let f = fmt(2, 3, 0);
        assert!(quantize(7.0, f).is_ok());
        assert!(matches!(quantize(8.0, f), Err(FxpError::Overflow { .. })));
        assert!(matches!(quantize(-8.0, f), Err(FxpError::Overflow { .. })));
        assert!(matches!(quantize(f64::NAN, f), Err(FxpError::NonFinite(_))));
        assert_eq!(f.max_value(), 7.0);
    }

    #[test]
    fn combine_examples() {
        let f = fmt(2, 8, 4);
        let x = quantize(3.6875, f).unwrap();
        let z = linear_combine(&[1.0, -1.0], &[x.clone(), x.clone()], f).unwrap();
        assert!(z.mantissa().is_zero());
        assert_eq!(linear_combine(&[1.0], std::slice::from_ref(&x), f).unwrap(), x);
        let g = fmt(2, 8, 0);
        let vals: Vec<_> = [6, 4, 2].iter().map(|&m| from_integer(m, g).unwrap()).collect();
        let v = linear_combine(&[0.5, 0.5, -0.5], &vals, g).unwrap();
        assert_eq!(v.to_f64(), 4.0);
    }

    #[test]
    fn combine_rejects_mixed_formats() {
        let a = quantize(1.0, fmt(2, 4, 2)).unwrap();
        let b = quantize(1.0, fmt(2, 4, 3)).unwrap();
        assert!(matches!(
            linear_combine(&[1.0, 1.0], &[a.clone(), b], fmt(2, 4, 2)),
            Err(FxpError::FormatMismatch(..))
        ));
        assert!(matches!(
            linear_combine(&[1.0], &[a.clone(), a], fmt(2, 4, 2)),
            Err(FxpError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rounding_to_integers() {
        assert_eq!(round_to_int(3.4), 3);
        assert_eq!(round_to_int(-0.5), -1);
        assert_eq!(round_to_int(0.5), 1);
        assert_eq!(round_to_int(6.999999), 7);
        let f = fmt(2, 4, 2);
        for (x, want) in [(2.5, 3), (-2.5, -3), (2.25, 2), (-2.75, -3), (0.0, 0)] {
            assert_eq!(quantize(x, f).unwrap().round_to_int(), BigInt::from(want), "{x}");
        }
        let t = fmt(3, 3, 1);
        // 5/3 rounds to 2, -4/3 to -1
        let v = FixedPointValue::from_mantissa(t, BigInt::from(5)).unwrap();
        assert_eq!(v.round_to_int(), BigInt::from(2));
        let v = FixedPointValue::from_mantissa(t, BigInt::from(-4)).unwrap();
        assert_eq!(v.round_to_int(), BigInt::from(-1));
    }

    #[test]
    fn rational_view() {
        let v = quantize(-1.75, fmt(2, 3, 2)).unwrap();
        assert_eq!(v.to_rational(), BigRational::new(BigInt::from(-7), BigInt::from(4)));
    }

    #[test]
    fn compensated_error_estimate() {
        assert_eq!(dot_rounding_error(&[1.0, 2.0], &[3.0, 4.0]), 0.0);
        let e = dot_rounding_error(&[1.0, 1e-17, -1.0], &[1.0, 1.0, 1.0]);
        assert!(e > 0.0 && e < 1e-16);
    }

    fn base() -> impl Strategy<Value = u32> {
        prop_oneof![Just(2u32), Just(3u32), Just(10u32)]
    }

    proptest! {
        #[test]
        fn error_within_half_step(b in base(), p in 0u32..12, x in -1.0e4f64..1.0e4) {
            let f = fmt(b, 17, p);
            let q = quantize(x, f).unwrap();
            let err = (q.to_f64() - x).abs();
            prop_assert!(err <= f.granularity() / 2.0 * (1.0 + 1e-9) + 1e-12 * x.abs());
        }

        #[test]
        fn idempotent(b in base(), p in 0u32..12, x in -1.0e4f64..1.0e4) {
            let f = fmt(b, 17, p);
            let q = quantize(x, f).unwrap();
            prop_assert_eq!(quantize(q.to_f64(), f).unwrap(), q);
        }

        #[test]
        fn integers_exact(b in base(), p in 0u32..10, n in -100_000i64..100_000) {
            let f = fmt(b, 17, p);
            let q = quantize(n as f64, f).unwrap();
            prop_assert_eq!(q.to_rational(), BigRational::from_integer(BigInt::from(n)));
            prop_assert_eq!(q, from_integer(n, f).unwrap());
        }

        #[test]
        fn monotone(b in base(), p in 0u32..12, x in -1.0e4f64..1.0e4, y in -1.0e4f64..1.0e4) {
            let f = fmt(b, 17, p);
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(quantize(lo, f).unwrap() <= quantize(hi, f).unwrap());
        }
    }
}
