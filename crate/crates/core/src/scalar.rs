//! Exact scalar types usable as constraint coefficients.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A signed exact number that can appear in a linear constraint.
pub trait Scalar: Signed + Clone + Debug + Display + Send + Sync + 'static {
    fn to_rational(&self) -> BigRational;

    /// Inverse of [`Scalar::to_rational`]; `None` when not representable.
    fn from_rational(r: &BigRational) -> Option<Self>;

    fn from_i64(v: i64) -> Self;

    /// SMT-LIB2 literal, e.g. `3`, `(- 3)`, `(/ 1 2)`.
    fn to_smt(&self) -> String {
        rational_to_smt(&self.to_rational())
    }

    fn is_integral(&self) -> bool {
        self.to_rational().is_integer()
    }
}

pub(crate) fn rational_to_smt(r: &BigRational) -> String {
    let lit = |n: &BigInt| n.abs().to_string();
    let body = if r.is_integer() {
        lit(r.numer())
    } else {
        format!("(/ {} {})", lit(r.numer()), lit(r.denom()))
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

macro_rules! prim_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn to_rational(&self) -> BigRational {
                BigRational::from_integer(BigInt::from(*self))
            }

            fn from_rational(r: &BigRational) -> Option<Self> {
                if r.is_integer() { r.numer().to_i128().and_then(|v| <$t>::try_from(v).ok()) } else { None }
            }

            fn from_i64(v: i64) -> Self {
                v as $t
            }

            fn to_smt(&self) -> String {
                if *self < 0 { format!("(- {})", self.unsigned_abs()) } else { self.to_string() }
            }

            fn is_integral(&self) -> bool {
                true
            }
        }
    )*};
}

prim_scalar!(i32, i64, i128);

impl Scalar for BigInt {
    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.clone())
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        r.is_integer().then(|| r.numer().clone())
    }

    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }

    fn is_integral(&self) -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// Least common multiple of the denominators, as an integer scale factor.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| {
        num_integer::lcm(acc, v.denom().clone())
    })
}

pub(crate) fn is_zero<S: Scalar>(s: &S) -> bool {
    Zero::is_zero(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(3i64.to_smt(), "3");
        assert_eq!((-3i64).to_smt(), "(- 3)");
        assert_eq!(i64::MIN.to_smt(), "(- 9223372036854775808)");
        let half = BigRational::new(BigInt::from(-1), BigInt::from(2));
        assert_eq!(half.to_smt(), "(- (/ 1 2))");
        assert_eq!(BigInt::from(-7).to_smt(), "(- 7)");
        assert_eq!(i64::from_rational(&half), None);
        assert_eq!(
            i32::from_rational(&BigRational::from_integer(BigInt::from(5))),
            Some(5)
        );
    }

    #[test]
    fn lcm_of_denominators() {
        let vs = [
            BigRational::new(1.into(), 2.into()),
            BigRational::new(1.into(), 3.into()),
            BigRational::from_integer(4.into()),
        ];
        assert_eq!(common_denominator(&vs), BigInt::from(6));
    }
}
