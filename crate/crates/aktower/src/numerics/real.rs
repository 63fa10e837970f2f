//! Arbitrary-precision real scalars with explicit, value-carried precision.
//!
//! `Real` wraps an MPFR float. Every value knows its precision in bits;
//! binary operations produce results at the *maximum* precision of the two
//! operands, so precision never silently degrades when mixed-precision
//! values meet. Values are always finite: NaN or infinity aborts in debug
//! builds and is treated as a logic error everywhere.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Minimum supported precision in bits.
pub const MIN_PRECISION: u32 = 64;
/// Default working precision in bits.
pub const DEFAULT_PRECISION: u32 = 256;

/// Exact big rational, reduced, positive denominator (canonical form is
/// maintained by the backing GMP type).
pub type BigRational = Rational;
/// Arbitrary-size integer.
pub type BigInt = Integer;

/// Clamp a requested precision to the supported floor.
pub fn clamp_prec(prec: u32) -> u32 {
    prec.max(MIN_PRECISION)
}

/// An arbitrary-precision real number carrying its precision.
#[derive(Clone, PartialEq)]
pub struct Real(Float);

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real[{}b]({:e})", self.prec(), self.0.to_f64())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::LowerExp for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.0, f)
    }
}

fn checked(f: Float) -> Real {
    debug_assert!(f.is_finite(), "non-finite Real produced");
    Real(f)
}

impl Real {
    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    pub fn zero(prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), 0))
    }

    pub fn one(prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), 1))
    }

    pub fn from_u64(prec: u32, v: u64) -> Real {
        Real(Float::with_val(clamp_prec(prec), v))
    }

    pub fn from_i64(prec: u32, v: i64) -> Real {
        Real(Float::with_val(clamp_prec(prec), v))
    }

    pub fn from_f64(prec: u32, v: f64) -> Real {
        assert!(v.is_finite());
        Real(Float::with_val(clamp_prec(prec), v))
    }

    pub fn from_int(prec: u32, v: &Integer) -> Real {
        Real(Float::with_val(clamp_prec(prec), v))
    }

    /// Round a rational into `prec` bits.
    pub fn from_rat(prec: u32, v: &Rational) -> Real {
        Real(Float::with_val(clamp_prec(prec), v))
    }

    /// 2^e, exact at any precision.
    pub fn pow2(prec: u32, e: i32) -> Real {
        let mut f = Float::with_val(clamp_prec(prec), 1);
        f <<= e;
        checked(f)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// Exact dyadic value as a rational.
    pub fn to_rational(&self) -> Rational {
        self.0.to_rational().expect("finite Real")
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    pub fn floor_int(&self) -> Integer {
        let f = Float::with_val(self.prec(), self.0.floor_ref());
        f.to_integer().expect("finite Real")
    }

    pub fn ceil_int(&self) -> Integer {
        let f = Float::with_val(self.prec(), self.0.ceil_ref());
        f.to_integer().expect("finite Real")
    }

    pub fn abs(&self) -> Real {
        checked(Float::with_val(self.prec(), self.0.abs_ref()))
    }

    pub fn neg(&self) -> Real {
        checked(Float::with_val(self.prec(), -&self.0))
    }

    pub fn square(&self) -> Real {
        checked(Float::with_val(self.prec(), self.0.square_ref()))
    }

    pub fn recip(&self) -> Real {
        assert!(!self.0.is_zero(), "division by zero");
        checked(Float::with_val(self.prec(), self.0.recip_ref()))
    }

    pub fn sqrt(&self) -> Real {
        assert!(!self.is_sign_negative(), "sqrt of negative");
        checked(Float::with_val(self.prec(), self.0.sqrt_ref()))
    }

    pub fn exp(&self) -> Real {
        checked(Float::with_val(self.prec(), self.0.exp_ref()))
    }

    pub fn ln(&self) -> Result<Real> {
        if self.0 <= 0 {
            return Err(Error::Domain(format!("ln of non-positive value {self}")));
        }
        Ok(checked(Float::with_val(self.prec(), self.0.ln_ref())))
    }

    /// Natural log base-2 of |self|, as f64 (diagnostics only).
    pub fn log2_f64(&self) -> f64 {
        let (_, exp) = self.0.to_f64_exp();
        let mant = self.0.to_f64_exp().0.abs();
        mant.log2() + exp as f64
    }

    pub fn powi(&self, e: i32) -> Real {
        checked(Float::with_val(self.prec(), (&self.0).pow(e)))
    }

    pub fn pow(&self, e: &Real) -> Real {
        assert!(
            !self.is_sign_negative(),
            "real power of negative base is undefined here"
        );
        let prec = self.prec().max(e.prec());
        checked(Float::with_val(prec, (&self.0).pow(&e.0)))
    }

    /// self^(num/den) for a rational exponent, at this value's precision.
    pub fn pow_rat(&self, e: &Rational) -> Real {
        let er = Real::from_rat(self.prec(), e);
        self.pow(&er)
    }

    /// Exact multiplication by 2^e.
    pub fn mul_2exp(&self, e: i32) -> Real {
        let mut f = self.0.clone();
        f <<= e;
        checked(f)
    }

    pub fn min(&self, other: &Real) -> Real {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn max(&self, other: &Real) -> Real {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Total order; values are always finite so this cannot fail.
    pub fn cmp_total(&self, other: &Real) -> Ordering {
        self.0.partial_cmp(&other.0).expect("finite Reals")
    }

    /// Fractional reduction to [0, 1): x - floor(x), exact.
    pub fn mod1(&self) -> Real {
        let k = self.floor_int();
        let f = Float::with_val(self.prec(), &self.0 - &k);
        // Guard against rounding placing us at 1.0 exactly.
        if f >= 1 {
            checked(Float::with_val(self.prec(), &f - 1u32))
        } else {
            checked(f)
        }
    }

    /// Distance on the circle R/Z: min(frac, 1 - frac) of |self - other|.
    pub fn circle_dist(&self, other: &Real) -> Real {
        let d = (self - other).abs().mod1();
        let one_minus = &Real::one(d.prec()) - &d;
        d.min(&one_minus)
    }

    /// Exact hex-mantissa serialization: `{mantissa_hex}p{exp}` with
    /// self = mantissa * 2^exp. Reload with [`Real::from_hex`].
    pub fn to_hex(&self) -> String {
        if self.0.is_zero() {
            return "0p0".to_string();
        }
        let (m, e) = self.0.to_integer_exp().expect("finite Real");
        format!("{}p{}", m.to_string_radix(16), e)
    }

    /// Parse the exact hex form produced by [`Real::to_hex`].
    pub fn from_hex(prec: u32, s: &str) -> Result<Real> {
        let (m_str, e_str) = s
            .split_once('p')
            .ok_or_else(|| Error::Parse(format!("bad hex float {s:?}")))?;
        let m = Integer::from_str_radix(m_str, 16)
            .map_err(|e| Error::Parse(format!("bad hex mantissa {m_str:?}: {e}")))?;
        let e: i32 = e_str
            .parse()
            .map_err(|e| Error::Parse(format!("bad hex exponent {e_str:?}: {e}")))?;
        let bits = m.significant_bits().max(1);
        let mut f = Float::with_val(clamp_prec(prec).max(bits), &m);
        f <<= e;
        Ok(checked(f))
    }

}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl PartialEq<Rational> for Real {
    fn eq(&self, other: &Rational) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<Rational> for Real {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl PartialEq<u32> for Real {
    fn eq(&self, other: &u32) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<u32> for Real {
    fn partial_cmp(&self, other: &u32) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

macro_rules! real_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let prec = self.prec().max(rhs.prec());
                checked(Float::with_val(prec, &self.0 $op &rhs.0))
            }
        }
        impl std::ops::$trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self $op &rhs
            }
        }
        impl std::ops::$trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                &self $op rhs
            }
        }
        impl std::ops::$trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                &self $op &rhs
            }
        }
        impl std::ops::$trait<u32> for &Real {
            type Output = Real;
            fn $method(self, rhs: u32) -> Real {
                checked(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
        impl std::ops::$trait<u32> for Real {
            type Output = Real;
            fn $method(self, rhs: u32) -> Real {
                &self $op rhs
            }
        }
        impl std::ops::$trait<&Rational> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Rational) -> Real {
                checked(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
        impl std::ops::$trait<&Integer> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Integer) -> Real {
                checked(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
    };
}

real_binop!(Add, add, +);
real_binop!(Sub, sub, -);
real_binop!(Mul, mul, *);
real_binop!(Div, div, /);

impl std::ops::Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::neg(self)
    }
}

impl std::ops::Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::neg(&self)
    }
}

impl std::ops::AddAssign<&Real> for Real {
    fn add_assign(&mut self, rhs: &Real) {
        if rhs.prec() > self.prec() {
            self.0.set_prec(rhs.prec());
        }
        self.0 += &rhs.0;
        debug_assert!(self.0.is_finite());
    }
}

impl std::ops::SubAssign<&Real> for Real {
    fn sub_assign(&mut self, rhs: &Real) {
        if rhs.prec() > self.prec() {
            self.0.set_prec(rhs.prec());
        }
        self.0 -= &rhs.0;
        debug_assert!(self.0.is_finite());
    }
}

impl std::ops::MulAssign<&Real> for Real {
    fn mul_assign(&mut self, rhs: &Real) {
        if rhs.prec() > self.prec() {
            self.0.set_prec(rhs.prec());
        }
        self.0 *= &rhs.0;
        debug_assert!(self.0.is_finite());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_carries_max_of_operands() {
        let a = Real::from_u64(64, 1);
        let b = Real::from_u64(320, 3);
        let c = &a / &b;
        assert_eq!(c.prec(), 320);
        let d = &b + &a;
        assert_eq!(d.prec(), 320);
    }

    #[test]
    fn hex_round_trip_is_exact() {
        let x = Real::from_u64(256, 1) / 3u32;
        let s = x.to_hex();
        let y = Real::from_hex(256, &s).unwrap();
        assert_eq!(x, y);
        let z = Real::zero(128);
        assert_eq!(Real::from_hex(128, &z.to_hex()).unwrap(), z);
        let n = -(Real::from_u64(192, 7) / 11u32);
        assert_eq!(Real::from_hex(192, &n.to_hex()).unwrap(), n);
    }

    #[test]
    fn mod1_and_floor() {
        let x = Real::from_f64(128, 2.75);
        assert_eq!(x.floor_int(), Integer::from(2));
        assert_eq!(x.mod1().to_f64(), 0.75);
        let y = Real::from_f64(128, -0.25);
        assert_eq!(y.mod1().to_f64(), 0.75);
    }

    #[test]
    fn rational_comparison_is_exact() {
        let third = Rational::from((1, 3));
        let x = Real::from_rat(256, &third);
        // The 256-bit rounding of 1/3 is not exactly 1/3.
        assert!(x != third);
        assert!((Real::from_u64(64, 1) / 3u32).partial_cmp(&third).is_some());
    }

    #[test]
    fn pow2_exact() {
        let p = Real::pow2(64, -200);
        assert_eq!(Real::from_hex(64, &p.to_hex()).unwrap(), p);
        assert_eq!(&p * &Real::pow2(64, 200), Real::one(64));
    }
}
