//! Exact scalar arithmetic for prices and money.
//!
//! Every price and currency amount in the engine is a rational number;
//! binary floating point never enters a money path. The [`Scalar`] trait
//! abstracts the concrete rational representation: arbitrary precision by
//! default, fixed-width ratios where input magnitudes permit.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, One, Signed, Zero};
use std::fmt::{Debug, Display};
use thiserror::Error;

/// An exact, totally ordered rational scalar. Parsing, arithmetic, and
/// formatting never lose precision.
pub trait Scalar: Num + Signed + Clone + Ord + Debug + Display + 'static {
    fn from_int(n: i64) -> Self;

    /// Value of `mantissa / 10^scale`, or `None` when it does not fit the
    /// representation.
    fn from_decimal(mantissa: i128, scale: u32) -> Option<Self>;

    /// Numerator and denominator of the reduced fraction, denominator > 0.
    fn numer_denom(&self) -> (BigInt, BigInt);

    /// Decimal string with exactly `dp` fraction digits, rounding half away
    /// from zero.
    fn to_decimal_string(&self, dp: u32) -> String {
        let (n, d) = self.numer_denom();
        let scaled = n * num_traits::pow(BigInt::from(10), dp as usize);
        let (mut q, r) = scaled.div_rem(&d);
        // div_rem truncates toward zero, so the remainder carries the sign.
        if r.abs() * BigInt::from(2) >= d {
            if r.is_negative() {
                q -= BigInt::one();
            } else {
                q += BigInt::one();
            }
        }
        format_scaled(&q, dp)
    }

    /// Exact decimal string; `None` when the denominator has a prime factor
    /// other than 2 or 5 (no finite decimal expansion).
    fn to_exact_decimal_string(&self) -> Option<String> {
        let (n, d) = self.numer_denom();
        let mut rest = d.clone();
        let (two, five) = (BigInt::from(2), BigInt::from(5));
        let mut twos = 0u32;
        while (&rest % &two).is_zero() {
            rest /= &two;
            twos += 1;
        }
        let mut fives = 0u32;
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return None;
        }
        let dp = twos.max(fives);
        let scaled = n * num_traits::pow(BigInt::from(10), dp as usize) / d;
        Some(format_scaled(&scaled, dp))
    }
}

/// Renders `scaled / 10^dp` by inserting a decimal point.
fn format_scaled(scaled: &BigInt, dp: u32) -> String {
    let neg = scaled.is_negative();
    let mut digits = scaled.abs().to_string();
    let dp = dp as usize;
    if digits.len() <= dp {
        digits = format!("{}{}", "0".repeat(dp + 1 - digits.len()), digits);
    }
    let point = digits.len() - dp;
    let mut out = String::new();
    if neg && !scaled.is_zero() {
        out.push('-');
    }
    out.push_str(&digits[..point]);
    if dp > 0 {
        out.push('.');
        out.push_str(&digits[point..]);
    }
    out
}

impl Scalar for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_decimal(mantissa: i128, scale: u32) -> Option<Self> {
        let denom = num_traits::pow(BigInt::from(10), scale as usize);
        Some(Ratio::new(BigInt::from(mantissa), denom))
    }

    fn numer_denom(&self) -> (BigInt, BigInt) {
        (self.numer().clone(), self.denom().clone())
    }
}

macro_rules! fixed_ratio_scalar {
    ($int:ty) => {
        impl Scalar for Ratio<$int> {
            fn from_int(n: i64) -> Self {
                Ratio::from_integer(n as $int)
            }

            fn from_decimal(mantissa: i128, scale: u32) -> Option<Self> {
                let mantissa: $int = mantissa.try_into().ok()?;
                let denom = (10 as $int).checked_pow(scale)?;
                Some(Ratio::new(mantissa, denom))
            }

            fn numer_denom(&self) -> (BigInt, BigInt) {
                (BigInt::from(*self.numer()), BigInt::from(*self.denom()))
            }
        }
    };
}

fixed_ratio_scalar!(i64);
fixed_ratio_scalar!(i128);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("malformed decimal literal")]
    Malformed,
    #[error("decimal literal out of range for this scalar")]
    OutOfRange,
}

/// Parses a plain decimal literal (`digits`, `digits.digits`, `.digits`,
/// optional sign) into an exact scalar. No exponents, no separators.
pub fn parse_decimal<S: Scalar>(text: &str) -> Result<S, DecimalError> {
    let t = text.trim();
    let unsigned = t.strip_prefix('+').unwrap_or(t);
    let (neg, body) = match unsigned.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, unsigned),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Malformed);
    }
    let mut mantissa: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let digit = c.to_digit(10).ok_or(DecimalError::Malformed)? as i128;
        mantissa = mantissa
            .checked_mul(10)
            .and_then(|m| m.checked_add(digit))
            .ok_or(DecimalError::OutOfRange)?;
    }
    if neg {
        mantissa = -mantissa;
    }
    S::from_decimal(mantissa, frac_part.len() as u32).ok_or(DecimalError::OutOfRange)
}

/// Energy in Wh expressed in kWh, for money = price × kWh.
pub fn wh_to_kwh<S: Scalar>(wh: u64) -> S {
    debug_assert!(wh <= i64::MAX as u64);
    S::from_int(wh as i64) / S::from_int(1000)
}
