//! Tagged scalar: an exact rational when the whole computation stayed exact,
//! a complex binary64 once anything numeric entered.
//!
//! Arithmetic contaminates: `Exact ∘ Exact` stays exact, every mixed
//! combination degrades to `Approx`. Haar values, transfer matrices of
//! rational states and free-product evaluations stay in `Exact`; rotated
//! morphisms and traces of UCP maps live in `Approx`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Approx(Complex64),
}

impl Value {
    pub fn zero() -> Self {
        Value::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Value::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Value::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Value::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_f64(x: f64) -> Self {
        Value::Approx(Complex64::new(x, 0.0))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(r) => r.is_zero(),
            Value::Approx(c) => c.re == 0.0 && c.im == 0.0,
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Value::Exact(r) => Complex64::new(rational_to_f64(r), 0.0),
            Value::Approx(c) => *c,
        }
    }

    /// Real part as f64; exact values convert, approx values drop their
    /// (asserted tiny) imaginary component.
    pub fn to_f64_real(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r),
            Value::Approx(c) => c.re,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }

    /// Modulus as f64, for tolerance comparisons.
    pub fn abs_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r).abs(),
            Value::Approx(c) => c.norm(),
        }
    }

    pub fn conj(&self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(r.clone()),
            Value::Approx(c) => Value::Approx(c.conj()),
        }
    }

    /// Exact absolute value when exact, else `None`.
    pub fn abs_exact(&self) -> Option<BigRational> {
        self.as_exact().map(|r| r.abs())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Out-of-range numerator/denominator; fall back to the quotient of
        // truncated floats, which is good enough for display and tolerances.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        match (self, rhs) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a + b),
            (a, b) => Value::Approx(a.to_c64() + b.to_c64()),
        }
    }
}

impl Sub for Value {
    type Output = Value;
    fn sub(self, rhs: Value) -> Value {
        match (self, rhs) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a - b),
            (a, b) => Value::Approx(a.to_c64() - b.to_c64()),
        }
    }
}

impl Mul for Value {
    type Output = Value;
    fn mul(self, rhs: Value) -> Value {
        match (self, rhs) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a * b),
            (a, b) => Value::Approx(a.to_c64() * b.to_c64()),
        }
    }
}

impl Neg for Value {
    type Output = Value;
    fn neg(self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(-r),
            Value::Approx(c) => Value::Approx(-c),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Value::Approx(c) => {
                if c.im == 0.0 {
                    write!(f, "{}", c.re)
                } else if c.im < 0.0 {
                    write!(f, "{}{}i", c.re, c.im)
                } else {
                    write!(f, "{}+{}i", c.re, c.im)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Value::from_ratio(1, 3);
        let b = Value::from_ratio(1, 6);
        match a.clone() + b {
            Value::Exact(r) => assert_eq!(r, BigRational::new(1.into(), 2.into())),
            _ => panic!("expected exact"),
        }
        assert!((a * Value::from_int(3)).is_zero() == false);
    }

    #[test]
    fn mixed_arithmetic_degrades() {
        let a = Value::from_ratio(1, 2);
        let b = Value::from_f64(0.25);
        match a + b {
            Value::Approx(c) => assert_eq!(c.re, 0.75),
            _ => panic!("expected approx"),
        }
    }

    #[test]
    fn display_forms() {
        assert_eq!(Value::from_ratio(3, 8).to_string(), "3/8");
        assert_eq!(Value::from_int(2).to_string(), "2");
        assert_eq!(Value::from_f64(0.5).to_string(), "0.5");
    }
}
