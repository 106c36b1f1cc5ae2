//! Configurable-precision reals.
//!
//! Every probabilistic quantity in the crate is an [`ExtReal`]: an MPFR float
//! carrying the decimal-digit [`Precision`] it was created at. MPFR rounds
//! correctly, so identical inputs at identical precision give bit-identical
//! results.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::Float;
use serde::{Serialize, Serializer};

use crate::error::{EpiError, Result};

/// Working precision in significant decimal digits.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const DEFAULT_DIGITS: u32 = 50;
    /// Below this the comparison tolerance `10^-(P-10)` is meaningless.
    pub const MIN_DIGITS: u32 = 12;

    pub fn new(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(EpiError::InvalidArgument(format!(
                "precision must be at least {} digits, got {digits}",
                Self::MIN_DIGITS
            )));
        }
        Ok(Precision(digits))
    }

    pub fn digits(self) -> u32 {
        self.0
    }

    /// Binary precision handed to MPFR: enough bits for the requested
    /// digits plus eight guard bits.
    pub fn bits(self) -> u32 {
        (f64::from(self.0) * std::f64::consts::LOG2_10).ceil() as u32 + 8
    }

    /// Comparison tolerance `10^-(P-10)`.
    pub fn epsilon(self) -> ExtReal {
        ExtReal::from_i64(10, self).powi(-(self.0 as i32 - 10))
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(Self::DEFAULT_DIGITS)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} digits", self.0)
    }
}

/// A real number carried at an explicit decimal precision.
#[derive(Clone, Debug)]
pub struct ExtReal {
    value: Float,
    precision: Precision,
}

impl ExtReal {
    fn wrap(value: Float, precision: Precision) -> Self {
        ExtReal { value, precision }
    }

    pub fn zero(precision: Precision) -> Self {
        Self::wrap(Float::new(precision.bits()), precision)
    }

    pub fn one(precision: Precision) -> Self {
        Self::from_i64(1, precision)
    }

    pub fn from_i64(v: i64, precision: Precision) -> Self {
        Self::wrap(Float::with_val(precision.bits(), v), precision)
    }

    pub fn from_u64(v: u64, precision: Precision) -> Self {
        Self::wrap(Float::with_val(precision.bits(), v), precision)
    }

    /// Exact conversion of the binary value of `v`; `0.1_f64` is not one tenth.
    /// Use [`ExtReal::parse`] or [`ExtReal::from_ratio`] for decimal inputs.
    pub fn from_f64(v: f64, precision: Precision) -> Self {
        Self::wrap(Float::with_val(precision.bits(), v), precision)
    }

    pub fn from_ratio(num: i64, den: i64, precision: Precision) -> Self {
        Self::from_i64(num, precision) / den
    }

    pub fn from_bigint(v: &BigInt, precision: Precision) -> Self {
        let int = rug::Integer::from_str_radix(&v.to_str_radix(16), 16).expect("BigInt renders valid hex");
        Self::wrap(Float::with_val(precision.bits(), int), precision)
    }

    pub fn from_rational(v: &BigRational, precision: Precision) -> Self {
        Self::from_bigint(v.numer(), precision) / &Self::from_bigint(v.denom(), precision)
    }

    /// Parses a decimal literal such as `"0.3"` or `"1e-3"`, rounded once.
    pub fn parse(s: &str, precision: Precision) -> Result<Self> {
        let parsed = Float::parse(s.trim())
            .map_err(|e| EpiError::InvalidArgument(format!("cannot parse {s:?} as a real: {e}")))?;
        Ok(Self::wrap(Float::with_val(precision.bits(), parsed), precision))
    }

    pub fn ln2(precision: Precision) -> Self {
        Self::wrap(Float::with_val(precision.bits(), Constant::Log2), precision)
    }

    pub fn pi(precision: Precision) -> Self {
        Self::wrap(Float::with_val(precision.bits(), Constant::Pi), precision)
    }

    /// Euler's number.
    pub fn e(precision: Precision) -> Self {
        Self::one(precision).exp()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn zero_like(&self) -> Self {
        Self::zero(self.precision)
    }

    pub fn one_like(&self) -> Self {
        Self::one(self.precision)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_sign_negative() && !self.value.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.value.is_sign_positive() && !self.value.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn ln(&self) -> Self {
        Self::wrap(self.value.clone().ln(), self.precision)
    }

    pub fn exp(&self) -> Self {
        Self::wrap(self.value.clone().exp(), self.precision)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.value.clone().sqrt(), self.precision)
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.value.clone().abs(), self.precision)
    }

    pub fn square(&self) -> Self {
        Self::wrap(self.value.clone().square(), self.precision)
    }

    pub fn recip(&self) -> Self {
        Self::wrap(self.value.clone().recip(), self.precision)
    }

    pub fn powi(&self, k: i32) -> Self {
        Self::wrap(self.value.clone().pow(k), self.precision)
    }

    pub fn pow(&self, exponent: &ExtReal) -> Self {
        Self::wrap(self.value.clone().pow(&exponent.value), self.precision)
    }

    /// `-x ln x` with the convention `0 ln 0 = 0`.
    pub fn neg_x_ln_x(&self) -> Self {
        if self.is_zero() {
            self.zero_like()
        } else {
            -(self * &self.ln())
        }
    }

    /// Fused `self += a * b`.
    pub fn add_mul(&mut self, a: &ExtReal, b: &ExtReal) {
        self.value += &a.value * &b.value;
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Smallest integer not below the value. `None` for non-finite or
    /// out-of-range values.
    pub fn ceil_i64(&self) -> Option<i64> {
        self.value.clone().ceil().to_integer().and_then(|i| i.to_i64())
    }

    pub fn floor_i64(&self) -> Option<i64> {
        self.value.clone().floor().to_integer().and_then(|i| i.to_i64())
    }

    /// Sum at a given precision; the empty sum is zero.
    pub fn sum<'a, I>(items: I, precision: Precision) -> Self
    where
        I: IntoIterator<Item = &'a ExtReal>,
    {
        let mut acc = Self::zero(precision);
        for x in items {
            acc += x;
        }
        acc
    }

    /// Decimal string with `digits` significant digits: positional for
    /// magnitudes in `[1e-20, 1e40)`, scientific otherwise.
    pub fn to_decimal(&self, digits: u32) -> String {
        if self.value.is_zero() {
            return "0".to_string();
        }
        if !self.value.is_finite() {
            return self.value.to_string();
        }
        let (negative, mantissa, exp) =
            self.value.to_sign_string_exp_round(10, Some(digits.max(1) as usize), Round::Nearest);
        // value = 0.mantissa × 10^exp
        let exp = exp.expect("finite nonzero value has an exponent");
        let sign = if negative { "-" } else { "" };
        let body = if (-19..=40).contains(&exp) {
            if exp <= 0 {
                format!("0.{}{}", "0".repeat((-exp) as usize), mantissa)
            } else if exp as usize >= mantissa.len() {
                format!("{}{}", mantissa, "0".repeat(exp as usize - mantissa.len()))
            } else {
                let (int, frac) = mantissa.split_at(exp as usize);
                format!("{int}.{frac}")
            }
        } else {
            let (first, rest) = mantissa.split_at(1);
            format!("{first}.{rest}e{}", exp - 1)
        };
        format!("{sign}{body}")
    }

    /// Decimal string at the value's own precision.
    pub fn to_decimal_full(&self) -> String {
        self.to_decimal(self.precision.digits())
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl PartialEq<i64> for ExtReal {
    fn eq(&self, other: &i64) -> bool {
        self.value == *other
    }
}

impl PartialOrd<i64> for ExtReal {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.value.partial_cmp(other)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(d) => write!(f, "{}", self.to_decimal(d.max(1) as u32)),
            None => write!(f, "{}", self.to_decimal_full()),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_full())
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        ExtReal::wrap(-self.value, self.precision)
    }
}

impl Neg for &ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        ExtReal::wrap(-self.value.clone(), self.precision)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl $assign_trait<&ExtReal> for ExtReal {
            fn $assign_method(&mut self, rhs: &ExtReal) {
                self.value $op &rhs.value;
            }
        }
        impl $assign_trait<ExtReal> for ExtReal {
            fn $assign_method(&mut self, rhs: ExtReal) {
                self.value $op rhs.value;
            }
        }
        impl $assign_trait<i64> for ExtReal {
            fn $assign_method(&mut self, rhs: i64) {
                self.value $op rhs;
            }
        }
        impl $trait<&ExtReal> for &ExtReal {
            type Output = ExtReal;
            fn $method(self, rhs: &ExtReal) -> ExtReal {
                let mut out = self.clone();
                out.value $op &rhs.value;
                out
            }
        }
        impl $trait<ExtReal> for &ExtReal {
            type Output = ExtReal;
            fn $method(self, rhs: ExtReal) -> ExtReal {
                let mut out = self.clone();
                out.value $op rhs.value;
                out
            }
        }
        impl $trait<&ExtReal> for ExtReal {
            type Output = ExtReal;
            fn $method(mut self, rhs: &ExtReal) -> ExtReal {
                self.value $op &rhs.value;
                self
            }
        }
        impl $trait<ExtReal> for ExtReal {
            type Output = ExtReal;
            fn $method(mut self, rhs: ExtReal) -> ExtReal {
                self.value $op rhs.value;
                self
            }
        }
        impl $trait<i64> for ExtReal {
            type Output = ExtReal;
            fn $method(mut self, rhs: i64) -> ExtReal {
                self.value $op rhs;
                self
            }
        }
        impl $trait<i64> for &ExtReal {
            type Output = ExtReal;
            fn $method(self, rhs: i64) -> ExtReal {
                let mut out = self.clone();
                out.value $op rhs;
                out
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, +=);
binop!(Sub, sub, SubAssign, sub_assign, -=);
binop!(Mul, mul, MulAssign, mul_assign, *=);
binop!(Div, div, DivAssign, div_assign, /=);
