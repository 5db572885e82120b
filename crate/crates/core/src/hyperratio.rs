//! Exact consecutive-term ratios `|a_n / a_{n+1}|` for hypergeometric terms.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{Exponent, Node, TermExpr};
use crate::poly::Poly;
use crate::rules::{RaabeValue, RatioLimit, UndefinedReason};

/// `P(n) / Q(n)` in lowest terms with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFn {
    num: Poly,
    den: Poly,
    valid_from: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RatioError {
    #[error("not hypergeometric: {0}")]
    NotHypergeometric(String),
}

impl RationalFn {
    /// Normalizes `num / den`: clears denominators, cancels the gcd and the
    /// joint content, makes the leading denominator coefficient positive.
    pub fn new(num: Poly, den: Poly, valid_from: u64) -> RationalFn {
        assert!(!den.is_zero(), "zero denominator");
        let g = Poly::gcd(&num, &den);
        let (mut p, _) = num.div_rem(&g);
        let (mut q, _) = den.div_rem(&g);
        let l = p.denominator_lcm().lcm(&q.denominator_lcm());
        let lq = BigRational::from_integer(l);
        p = p.scale(&lq);
        q = q.scale(&lq);
        let c = p.numerator_gcd().gcd(&q.numerator_gcd());
        let mut inv = BigRational::new(BigInt::one(), c);
        if q.leading().is_negative() {
            inv = -inv;
        }
        RationalFn { num: p.scale(&inv), den: q.scale(&inv), valid_from }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    /// First `n` from which the function equals the term ratio. Past the
    /// start index this can only differ when a polynomial factor changes
    /// sign between two integers.
    pub fn valid_from(&self) -> u64 {
        self.valid_from
    }

    pub fn eval(&self, n: u64) -> BigRational {
        self.num.eval_int(n) / self.den.eval_int(n)
    }

    /// `lim_{n -> inf} P(n)/Q(n)`.
    pub fn limit(&self) -> RatioLimit {
        let dp = self.num.degree().unwrap_or(0);
        let dq = self.den.degree().unwrap_or(0);
        if self.num.is_zero() || dp < dq {
            RatioLimit::Zero
        } else if dp > dq {
            RatioLimit::Infinite
        } else {
            RatioLimit::Finite(self.num.leading() / self.den.leading())
        }
    }
}

impl fmt::Display for RationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/({})", self.num, self.den)
    }
}

fn not_hyper(node: &Node, why: &str) -> RatioError {
    RatioError::NotHypergeometric(format!("{} in `{}`", why, node))
}

/// Accumulates `|x_n / x_{n+1}|` as an unreduced fraction.
struct Acc {
    num: Poly,
    den: Poly,
    /// Polynomial factors whose sign may change; they bound `valid_from`.
    sign_sensitive: Vec<Poly>,
}

impl Acc {
    fn walk(&mut self, node: &Node, power: i64) -> Result<(), RatioError> {
        if power == 0 {
            return Ok(());
        }
        if let Some(h) = node.to_poly() {
            if h.is_constant() {
                return Ok(());
            }
            let shifted = h.shift_one();
            self.mul_ratio(&h, &shifted, power);
            self.sign_sensitive.push(h);
            return Ok(());
        }
        match node {
            Node::Const(_) | Node::AltSign => Ok(()),
            Node::Neg(a) | Node::Abs(a) => self.walk(a, power),
            Node::Mul(a, b) => {
                self.walk(a, power)?;
                self.walk(b, power)
            }
            Node::Div(a, b) => {
                self.walk(a, power)?;
                self.walk(b, -power)
            }
            Node::Pow(b, Exponent::Rational(k)) => {
                if !k.is_integer() {
                    return Err(not_hyper(node, "non-integer exponent"));
                }
                let k: i64 = k
                    .to_integer()
                    .try_into()
                    .map_err(|_| not_hyper(node, "exponent too large"))?;
                self.walk(b, power.checked_mul(k).ok_or_else(|| not_hyper(node, "exponent too large"))?)
            }
            Node::Pow(b, Exponent::Affine(e)) => {
                let c = b.const_value().ok_or_else(|| not_hyper(node, "non-constant base"))?;
                // c^(an+b) / c^(a(n+1)+b) = c^(-a)
                let a: i32 = (&e.slope).try_into().map_err(|_| not_hyper(node, "slope too large"))?;
                let r = num_traits::pow::Pow::pow(&c.abs(), -a);
                let r = Poly::constant(r);
                self.mul_ratio(&r, &Poly::one(), power);
                Ok(())
            }
            Node::Factorial(a) => {
                // (an+b)! / (a(n+1)+b)! = 1 / prod_{j=1..a} (an+b+j)
                let slope: u32 = (&a.slope).try_into().map_err(|_| not_hyper(node, "slope too large"))?;
                let mut prod = Poly::one();
                for j in 1..=slope {
                    prod = &prod * &Poly::linear(a.slope.clone(), &a.offset + BigInt::from(j));
                }
                self.mul_ratio(&Poly::one(), &prod, power);
                Ok(())
            }
            Node::Log(_) => Err(not_hyper(node, "logarithm")),
            Node::Add(..) | Node::Sub(..) => Err(not_hyper(node, "sum of non-polynomial parts")),
            Node::Var => unreachable!("variables are polynomials"),
        }
    }

    fn mul_ratio(&mut self, num: &Poly, den: &Poly, power: i64) {
        let k = power.unsigned_abs() as u32;
        let (n, d) = if power > 0 { (num.pow(k), den.pow(k)) } else { (den.pow(k), num.pow(k)) };
        self.num = &self.num * &n;
        self.den = &self.den * &d;
    }
}

/// First `n >= start` from which `h(m)` and `h(m+1)` share a sign for all
/// `m >= n`.
fn same_sign_from(h: &Poly, start: u64) -> u64 {
    let bound: u64 = h.positive_root_bound().try_into().unwrap_or(u64::MAX).min(start.saturating_add(1_000_000));
    let mut from = start;
    let mut n = start;
    while n < bound {
        let s0 = h.eval_int(n).signum();
        let s1 = h.eval_int(n + 1).signum();
        if s0 * s1 <= BigRational::zero() {
            from = n + 1;
        }
        n += 1;
    }
    from
}

/// `|a_n / a_{n+1}|` as an exact rational function of `n`.
pub fn ratio_rational_fn(expr: &TermExpr) -> Result<RationalFn, RatioError> {
    node_ratio(expr.root(), expr.start_index())
}

/// As [`ratio_rational_fn`] for a bare subtree, valid from `start` on up to
/// sign changes of polynomial factors.
pub(crate) fn node_ratio(node: &Node, start: u64) -> Result<RationalFn, RatioError> {
    let mut acc = Acc { num: Poly::one(), den: Poly::one(), sign_sensitive: Vec::new() };
    acc.walk(node, 1)?;
    let valid_from = acc
        .sign_sensitive
        .iter()
        .map(|h| same_sign_from(h, start))
        .max()
        .unwrap_or(start);
    Ok(RationalFn::new(acc.num, acc.den, valid_from))
}

/// Raabe value read off the two leading coefficients of `P` and `Q`.
pub fn raabe_from_ratio(r: &RationalFn) -> RaabeValue {
    let (p, q) = (r.numerator(), r.denominator());
    if p.degree() == q.degree() && p.leading() == q.leading() {
        let d = p.degree().unwrap_or(0);
        let value = if d == 0 {
            BigRational::zero()
        } else {
            (p.coeff(d - 1) - q.coeff(d - 1)) / p.leading()
        };
        return RaabeValue::Exact(value);
    }
    let limit = r.limit();
    RaabeValue::Undefined {
        detail: format!("|a_n/a_(n+1)| = {} tends to {}, not 1", r, limit),
        reason: UndefinedReason::RatioLimitNotOne(limit),
    }
}
