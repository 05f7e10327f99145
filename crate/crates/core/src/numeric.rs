//! Floating-point helpers shared across the crate: rational-exponent powers
//! with exact dyadic fast paths, compensated summation, and a product-of-powers
//! accumulator that keeps exponent bookkeeping in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact binary exponent of `x` when `x` is a positive power of two.
///
/// Returns `Some(k)` iff `x == 2^k` exactly (normal doubles only).
pub fn exact_log2(x: f64) -> Option<i64> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let bits = x.to_bits();
    let mantissa = bits & ((1u64 << 52) - 1);
    let biased = (bits >> 52) & 0x7ff;
    if mantissa == 0 && biased != 0 {
        Some(biased as i64 - 1023)
    } else {
        None
    }
}

/// Convert a rational to the nearest f64.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("rational exponent out of f64 range")
}

/// `base^exp` with an exact rational exponent.
///
/// Exact paths: exponent zero or one, and dyadic bases whose combined binary
/// exponent is an integer (`8^(1/3) = 2` exactly). Everything else goes through
/// `powf` on the rounded exponent.
pub fn pow_rational(base: f64, exp: &BigRational) -> f64 {
    if base == 1.0 || exp.is_zero() {
        return 1.0;
    }
    if exp.is_one() {
        return base;
    }
    if let Some(k) = exact_log2(base) {
        let combined = exp * BigRational::from_integer(BigInt::from(k));
        if combined.is_integer() {
            if let Some(n) = combined.to_integer().to_i32() {
                return f64::exp2(n as f64);
            }
        }
    }
    base.powf(rational_to_f64(exp))
}

/// Product of `base^exponent` factors with exact rational exponents.
///
/// Powers of two are folded into a single exact binary exponent, so products
/// like `2^(-6) * (1/2)^4 * 3^(-5/3)` collapse to one inexact `powf` and an
/// exact `exp2` scaling.
#[derive(Debug, Clone, Default)]
pub struct PowerProduct {
    two_exp: BigRational,
    factors: Vec<(f64, BigRational)>,
}

impl PowerProduct {
    pub fn new() -> Self {
        Self {
            two_exp: BigRational::zero(),
            factors: Vec::new(),
        }
    }

    pub fn push(&mut self, base: f64, exp: BigRational) {
        if base == 1.0 || exp.is_zero() {
            return;
        }
        if let Some(k) = exact_log2(base) {
            self.two_exp += exp * BigRational::from_integer(BigInt::from(k));
        } else {
            self.factors.push((base, exp));
        }
    }

    pub fn value(&self) -> f64 {
        let mut v = if self.two_exp.is_integer() {
            match self.two_exp.to_integer().to_i32() {
                Some(n) => f64::exp2(n as f64),
                None => f64::INFINITY,
            }
        } else {
            2f64.powf(rational_to_f64(&self.two_exp))
        };
        for (base, exp) in &self.factors {
            v *= pow_rational(*base, exp);
        }
        v
    }
}

/// Neumaier-compensated sum; deterministic left-to-right order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Rational from an integer.
pub fn ratio_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational `n/d`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// True iff `q > 0`.
pub fn is_positive(q: &BigRational) -> bool {
    q.is_positive()
}
