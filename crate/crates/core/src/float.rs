//! Thin helpers over `astro_float` for the conversions this crate needs.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as IntSign};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

pub const RM: RoundingMode = RoundingMode::ToEven;

pub fn consts() -> Consts {
    Consts::new().expect("astro-float constant cache")
}

pub fn from_bigint(x: &BigInt, p: usize) -> BigFloat {
    if x.is_zero() {
        return BigFloat::from_u64(0, p);
    }
    let words = x.magnitude().to_u64_digits();
    let sign = if x.sign() == IntSign::Minus { Sign::Neg } else { Sign::Pos };
    let e = (words.len() * 64) as i32;
    let mut f = BigFloat::from_words(&words, sign, e);
    f.set_precision(p, RM).expect("precision in range");
    f
}

pub fn from_rational(q: &BigRational, p: usize) -> BigFloat {
    let num = from_bigint(q.numer(), p + 2);
    let den = from_bigint(q.denom(), p + 2);
    num.div(&den, p, RM)
}

pub fn from_u64(n: u64, p: usize) -> BigFloat {
    BigFloat::from_u64(n, p)
}

/// `2^e` in `f64` without overflowing intermediate powers.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

/// Nearest `f64` (rounded through the top mantissa word).
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    let Some((words, _, sign, exp, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let top = *words.last().unwrap_or(&0);
    // value = 0.m * 2^exp with the top word holding the leading bits
    let v = ldexp(top as f64, exp as i64 - 64);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

pub fn ln(x: &BigFloat, p: usize, cc: &mut Consts) -> BigFloat {
    x.ln(p, RM, cc)
}

/// `x^k` for a rational `k`; integer exponents use repeated squaring.
pub fn pow_rational(x: &BigFloat, k: &BigRational, p: usize, cc: &mut Consts) -> BigFloat {
    if k.is_integer() {
        let e: i64 = k.to_integer().try_into().unwrap_or(i64::MAX);
        let base = if e < 0 { x.reciprocal(p + 8, RM) } else { x.clone() };
        return base.powi(e.unsigned_abs() as usize, p, RM);
    }
    if k.denom() == &BigInt::from(2) {
        let root = x.sqrt(p + 8, RM);
        let e: i64 = k.numer().try_into().unwrap_or(i64::MAX);
        let base = if e < 0 { root.reciprocal(p + 8, RM) } else { root };
        return base.powi(e.unsigned_abs() as usize, p, RM);
    }
    // exp(k ln x); the exponent is rounded, so carry extra bits for ln|x| growth
    let extra = 64;
    let kf = from_rational(k, p + extra);
    x.pow(&kf, p + extra, RM, cc).round_to(p)
}

trait RoundTo {
    fn round_to(self, p: usize) -> BigFloat;
}

impl RoundTo for BigFloat {
    fn round_to(mut self, p: usize) -> BigFloat {
        let _ = self.set_precision(p, RM);
        self
    }
}

pub fn round(x: BigFloat, p: usize) -> BigFloat {
    x.round_to(p)
}

pub fn is_positive(x: &BigFloat) -> bool {
    x.is_positive() && !x.is_zero()
}

/// Relative difference `|a - b| / |b|` as `f64` (absolute when `b` is zero).
pub fn rel_diff(a: &BigFloat, b: &BigFloat, p: usize) -> f64 {
    let d = a.sub(b, p, RM).abs();
    if b.is_zero() {
        return to_f64(&d);
    }
    to_f64(&d.div(&b.abs(), p, RM))
}

/// Exact value of a rational as `f64` (nearest).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let f = to_f64(&from_rational(q, 64));
    if q.is_negative() == (f < 0.0) {
        f
    } else {
        -f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bigint_round_trip_through_f64() {
        let x = BigInt::from(3u64) << 200u32;
        let f = to_f64(&from_bigint(&x, 128));
        assert_eq!(f, 3.0 * 2f64.powi(200));
        assert_eq!(to_f64(&from_bigint(&BigInt::from(-7), 64)), -7.0);
    }

    #[test]
    fn rational_conversion() {
        let q = BigRational::new(1.into(), 3.into());
        assert_eq!(rational_to_f64(&q), 1.0 / 3.0);
        assert_eq!(rational_to_f64(&-q), -1.0 / 3.0);
    }

    #[test]
    fn fractional_powers() {
        let mut cc = consts();
        let two = from_u64(2, 128);
        let half = BigRational::new(1.into(), 2.into());
        let third = BigRational::new(1.into(), 3.into());
        assert!((to_f64(&pow_rational(&two, &half, 128, &mut cc)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((to_f64(&pow_rational(&two, &third, 128, &mut cc)) - 2f64.cbrt()).abs() < 1e-15);
        let m3 = BigRational::from_integer((-3).into());
        assert_eq!(to_f64(&pow_rational(&two, &m3, 128, &mut cc)), 0.125);
    }
}
