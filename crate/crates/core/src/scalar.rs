//! Scalar abstraction for probability computations.
//!
//! Every closed form in [`crate::subspace`] is a ratio of integers, so a
//! probability scalar only has to be constructible from a big-integer ratio
//! and closed under `+` and `*`. Exact work uses [`BigRational`]; sweeps that
//! do not need bit-exact normalization can use `f64` or `f32`.

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub trait Probability:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Hashable identity used to group equal values (exact for rationals,
    /// bitwise for floats).
    type Key: Hash + Eq + Clone + Debug + Send + Sync;

    fn from_ratio(numer: &BigUint, denom: &BigUint) -> Self;
    fn from_rational(value: &BigRational) -> Self;
    fn to_f64(&self) -> f64;
    fn key(&self) -> Self::Key;

    fn from_u64(v: u64) -> Self {
        Self::from_ratio(&BigUint::from(v), &BigUint::one())
    }
}

impl Probability for BigRational {
    type Key = BigRational;

    fn from_ratio(numer: &BigUint, denom: &BigUint) -> Self {
        BigRational::new(BigInt::from(numer.clone()), BigInt::from(denom.clone()))
    }

    fn from_rational(value: &BigRational) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn key(&self) -> Self::Key {
        self.clone()
    }
}

macro_rules! impl_float_probability {
    ($t:ty, $bits:ty) => {
        impl Probability for $t {
            type Key = $bits;

            fn from_ratio(numer: &BigUint, denom: &BigUint) -> Self {
                let r = BigRational::new(BigInt::from(numer.clone()), BigInt::from(denom.clone()));
                ratio_to_f64(&r) as $t
            }

            fn from_rational(value: &BigRational) -> Self {
                ratio_to_f64(value) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn key(&self) -> Self::Key {
                // -0.0 and 0.0 compare equal and must share a key
                if *self == 0.0 {
                    0
                } else {
                    self.to_bits()
                }
            }
        }
    };
}

impl_float_probability!(f64, u64);
impl_float_probability!(f32, u32);

/// Converts a rational to the nearest `f64` without overflowing on huge
/// numerators and denominators.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 && n.abs() < 1e300 && d < 1e300 {
            return n / d;
        }
    }
    // scale both sides down to 64 significant bits
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n - shift_d) as i32)
}

/// Parses the shortest decimal representation of `x` into an exact rational,
/// so configuration values like `0.05` become exactly `1/20`.
pub fn decimal_to_ratio(x: f64) -> BigRational {
    let text = format!("{x}");
    let (mantissa, exponent) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m.to_string(), e.parse::<i32>().unwrap_or(0)),
        None => (text.clone(), 0),
    };
    let negative = mantissa.starts_with('-');
    let digits = mantissa.trim_start_matches('-');
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all.parse().unwrap_or_else(|_| BigInt::zero());
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    }
}
