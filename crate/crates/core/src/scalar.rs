//! Coefficient domains shared by the whole crate.
//!
//! All polynomial and symmetric-function code is generic over [`Coeff`], a
//! field-like scalar with two implementations: arbitrary-precision rationals
//! ([`Rat`]) for every verification path, and binary floats for the numeric
//! solver. The float-only pipeline (residuals, Levenberg-Marquardt) uses the
//! narrower [`Real`] bound.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, Div, MulAssign, Neg, Sub, SubAssign};

use num_bigint::{BigInt, Sign};
use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Exact rational scalar: reduced fraction with positive denominator.
pub type Rat = num_rational::BigRational;

/// Field scalar usable as a polynomial coefficient.
///
/// `EXACT` distinguishes the rational domain (bit-exact arithmetic, slow)
/// from floats; operations that are only sound in exact arithmetic check it
/// at run time.
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Display
    + Zero
    + One
    + Neg<Output = Self>
    + Sub<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_int(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Parse the serialized form: `p/q` or `p` for rationals, a decimal
    /// literal for floats.
    fn parse(s: &str) -> Option<Self>;

    /// Serialized form: `p/q` (or `p` when the denominator is 1) for
    /// rationals, shortest round-trip decimal for floats.
    fn render(&self) -> String;

    /// Size of the representation in bits, used by resource caps on exact
    /// computations. Floats report 0 (they never grow).
    fn bit_size(&self) -> u64;

    /// Lossy conversion for handing exact data to the numeric pipeline.
    fn approx_f64(&self) -> f64;

    fn is_finite_coeff(&self) -> bool;
}

impl Coeff for Rat {
    const EXACT: bool = true;

    fn from_int(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rat::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse(s: &str) -> Option<Self> {
        s.parse().ok()
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn bit_size(&self) -> u64 {
        self.numer().bits() + self.denom().bits()
    }

    fn approx_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_finite_coeff(&self) -> bool {
        true
    }
}

macro_rules! impl_coeff_float {
    ($f:ty) => {
        impl Coeff for $f {
            const EXACT: bool = false;

            fn from_int(v: i64) -> Self {
                v as $f
            }

            fn from_ratio(num: i64, den: i64) -> Self {
                num as $f / den as $f
            }

            fn parse(s: &str) -> Option<Self> {
                s.parse().ok()
            }

            fn render(&self) -> String {
                format!("{}", self)
            }

            fn bit_size(&self) -> u64 {
                0
            }

            fn approx_f64(&self) -> f64 {
                *self as f64
            }

            fn is_finite_coeff(&self) -> bool {
                self.is_finite()
            }
        }
    };
}

impl_coeff_float!(f32);
impl_coeff_float!(f64);

/// Floating-point scalar for the numeric pipeline (f32 or f64).
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Coeff
    + Display
    + LowerExp
    + Debug
    + Default
{
    fn c(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact square root of a non-negative rational, when one exists.
pub fn rat_sqrt(v: &Rat) -> Option<Rat> {
    if v.is_negative() {
        return None;
    }
    let num = v.numer();
    let den = v.denom();
    let sn = num.sqrt();
    let sd = den.sqrt();
    if &(&sn * &sn) == num && &(&sd * &sd) == den {
        Some(Rat::new(sn, sd))
    } else {
        None
    }
}

/// Integer-part helpers used when clearing denominators.
pub fn rat_is_integer(v: &Rat) -> bool {
    v.denom().is_one()
}

/// Sign of a rational as -1, 0, or 1.
pub fn rat_signum(v: &Rat) -> i32 {
    match v.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}
