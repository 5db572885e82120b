//! Pointwise evaluation of a term, exactly or at a chosen binary precision.

use astro_float::{BigFloat, Consts};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::parse::rational_power;
use super::{Exponent, Node, TermExpr};
use crate::float::{self, RM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Rational arithmetic; fails on logarithms and irrational powers.
    Exact,
    /// Binary floating point with this many mantissa bits in the result.
    Float(usize),
}

#[derive(Clone, Debug)]
pub enum Value {
    Exact(BigRational),
    Float(BigFloat),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(q) => float::rational_to_f64(q),
            Value::Float(f) => float::to_f64(f),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(q) => q.is_zero(),
            Value::Float(f) => f.is_zero(),
        }
    }

    /// The value as a float with `p` bits.
    pub fn to_float(&self, p: usize) -> BigFloat {
        match self {
            Value::Exact(q) => float::from_rational(q, p),
            Value::Float(f) => float::round(f.clone(), p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no exact value: `{0}` is irrational")]
    ExactUnavailable(String),
    #[error("the term evaluates to zero at n = {0}")]
    EvaluatesToZero(u64),
    #[error("undefined at n = {n}: {reason}")]
    Undefined { n: u64, reason: String },
    #[error("n = {n} is below the start index {start}")]
    BelowStartIndex { n: u64, start: u64 },
}

/// `a_n` for `n >= start_index`.
pub fn eval(expr: &TermExpr, n: u64, mode: EvalMode) -> Result<Value, EvalError> {
    if n < expr.start_index() {
        return Err(EvalError::BelowStartIndex { n, start: expr.start_index() });
    }
    let v = eval_node(expr.root(), n, mode)?;
    if v.is_zero() {
        return Err(EvalError::EvaluatesToZero(n));
    }
    Ok(v)
}

/// Evaluates any subtree at `n`, without the start-index and nonzero checks.
pub fn eval_node(node: &Node, n: u64, mode: EvalMode) -> Result<Value, EvalError> {
    match mode {
        EvalMode::Exact => exact(node, n).map(Value::Exact),
        EvalMode::Float(bits) => {
            let wp = bits + 2 * node.depth() + 24;
            let mut cx = FloatCx { n, wp, cc: float::consts() };
            let v = cx.eval(node)?;
            Ok(Value::Float(float::round(v, bits)))
        }
    }
}

fn undefined(n: u64, reason: impl Into<String>) -> EvalError {
    EvalError::Undefined { n, reason: reason.into() }
}

fn alt_sign(n: u64) -> i64 {
    if n % 2 == 1 {
        1
    } else {
        -1
    }
}

/// `m!` by a balanced product tree.
pub fn factorial(m: u64) -> BigUint {
    fn range(lo: u64, hi: u64) -> BigUint {
        if hi - lo < 16 {
            let mut acc = BigUint::one();
            for k in lo..=hi {
                acc *= k;
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        range(lo, mid) * range(mid + 1, hi)
    }
    if m < 2 {
        BigUint::one()
    } else {
        range(2, m)
    }
}

fn factorial_arg(a: &super::Affine, n: u64) -> Result<u64, EvalError> {
    a.at(n)
        .to_u64()
        .ok_or_else(|| undefined(n, format!("factorial of {}", a.at(n))))
}

fn exact(node: &Node, n: u64) -> Result<BigRational, EvalError> {
    Ok(match node {
        Node::Const(c) => c.clone(),
        Node::Var => BigRational::from_integer(n.into()),
        Node::AltSign => BigRational::from_integer(alt_sign(n).into()),
        Node::Neg(a) => -exact(a, n)?,
        Node::Abs(a) => exact(a, n)?.abs(),
        Node::Add(a, b) => exact(a, n)? + exact(b, n)?,
        Node::Sub(a, b) => exact(a, n)? - exact(b, n)?,
        Node::Mul(a, b) => exact(a, n)? * exact(b, n)?,
        Node::Div(a, b) => {
            let d = exact(b, n)?;
            if d.is_zero() {
                return Err(undefined(n, format!("division by zero in `{}`", node)));
            }
            exact(a, n)? / d
        }
        Node::Factorial(a) => BigRational::from_integer(factorial(factorial_arg(a, n)?).into()),
        Node::Pow(b, Exponent::Rational(k)) => {
            let base = exact(b, n)?;
            if base.is_zero() && !k.is_positive() {
                return Err(undefined(n, format!("zero to the power {}", k)));
            }
            if base.is_negative() && !k.is_integer() {
                return Err(undefined(n, format!("negative base in `{}`", node)));
            }
            rational_power(&base, k).ok_or_else(|| EvalError::ExactUnavailable(node.to_string()))?
        }
        Node::Pow(b, Exponent::Affine(e)) => {
            let base = exact(b, n)?;
            let k = e.at(n);
            let k: i32 = k
                .to_i32()
                .ok_or_else(|| undefined(n, format!("exponent {} too large for exact evaluation", k)))?;
            if base.is_zero() && k <= 0 {
                return Err(undefined(n, "zero to a non-positive power"));
            }
            num_traits::pow::Pow::pow(&base, k)
        }
        Node::Log(_) => return Err(EvalError::ExactUnavailable(node.to_string())),
    })
}

struct FloatCx {
    n: u64,
    wp: usize,
    cc: Consts,
}

/// Below this argument factorials are formed exactly before rounding.
const EXACT_FACTORIAL_LIMIT: u64 = 64;

impl FloatCx {
    fn eval(&mut self, node: &Node) -> Result<BigFloat, EvalError> {
        let (n, wp) = (self.n, self.wp);
        Ok(match node {
            Node::Const(c) => float::from_rational(c, wp),
            Node::Var => float::from_u64(n, wp),
            Node::AltSign => BigFloat::from_i64(alt_sign(n), wp),
            Node::Neg(a) => self.eval(a)?.neg(),
            Node::Abs(a) => self.eval(a)?.abs(),
            Node::Add(a, b) => self.eval(a)?.add(&self.eval(b)?, wp, RM),
            Node::Sub(a, b) => self.eval(a)?.sub(&self.eval(b)?, wp, RM),
            Node::Mul(a, b) => self.eval(a)?.mul(&self.eval(b)?, wp, RM),
            Node::Div(a, b) => {
                let d = self.eval(b)?;
                if d.is_zero() {
                    return Err(undefined(n, format!("division by zero in `{}`", node)));
                }
                self.eval(a)?.div(&d, wp, RM)
            }
            Node::Factorial(a) => self.factorial(factorial_arg(a, n)?),
            Node::Pow(b, Exponent::Rational(k)) => {
                if let Some(q) = b.const_value() {
                    if let Some(v) = rational_power(&q, k) {
                        return Ok(float::from_rational(&v, wp));
                    }
                }
                let base = self.eval(b)?;
                if base.is_zero() {
                    if k.is_positive() {
                        return Ok(BigFloat::from_u64(0, wp));
                    }
                    return Err(undefined(n, format!("zero to the power {}", k)));
                }
                if base.is_negative() {
                    if !k.is_integer() {
                        return Err(undefined(n, format!("negative base in `{}`", node)));
                    }
                    let mag = float::pow_rational(&base.abs(), k, wp, &mut self.cc);
                    let odd = !(k.to_integer() % BigInt::from(2)).is_zero();
                    if odd {
                        mag.neg()
                    } else {
                        mag
                    }
                } else {
                    float::pow_rational(&base, k, wp, &mut self.cc)
                }
            }
            Node::Pow(b, Exponent::Affine(e)) => {
                let k = e.at(n);
                let c = b
                    .const_value()
                    .ok_or_else(|| undefined(n, format!("non-constant base in `{}`", node)))?;
                self.const_power(&c, &k)?
            }
            Node::Log(a) => {
                let x = self.eval(a)?;
                if x.is_zero() || x.is_negative() {
                    return Err(undefined(n, format!("logarithm of a non-positive value in `{}`", node)));
                }
                float::ln(&x, wp, &mut self.cc)
            }
        })
    }

    /// `c^k` for rational `c` and a possibly huge integer `k`: numerator and
    /// denominator are exact integers, so only the squarings round.
    fn const_power(&mut self, c: &BigRational, k: &BigInt) -> Result<BigFloat, EvalError> {
        let n = self.n;
        if c.is_zero() {
            return Err(undefined(n, "zero base with an n-dependent exponent"));
        }
        let e = k
            .abs()
            .to_usize()
            .ok_or_else(|| undefined(n, format!("exponent {} out of range", k)))?;
        let p = self.wp + (usize::BITS - e.leading_zeros()) as usize + 8;
        let num = float::from_bigint(c.numer(), p).powi(e, p, RM);
        let den = float::from_bigint(c.denom(), p).powi(e, p, RM);
        let v = if k.is_negative() { den.div(&num, self.wp, RM) } else { num.div(&den, self.wp, RM) };
        Ok(v)
    }

    fn factorial(&self, m: u64) -> BigFloat {
        if m <= EXACT_FACTORIAL_LIMIT {
            return float::from_bigint(&factorial(m).into(), self.wp);
        }
        // chunks of small factors fit a u64 before touching the big float
        let p = self.wp + 2 * (64 - m.leading_zeros() as usize) + 8;
        let mut acc = float::from_bigint(&factorial(EXACT_FACTORIAL_LIMIT).into(), p);
        let mut chunk: u64 = 1;
        for k in EXACT_FACTORIAL_LIMIT + 1..=m {
            match chunk.checked_mul(k) {
                Some(c) => chunk = c,
                None => {
                    acc = acc.mul(&BigFloat::from_u64(chunk, 64), p, RM);
                    chunk = k;
                }
            }
        }
        acc = acc.mul(&BigFloat::from_u64(chunk, 64), p, RM);
        float::round(acc, self.wp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn exact_values() {
        let t = parse("alt*(2n)!/(4^n*(n!)^2)").unwrap();
        let v = eval(&t, 2, EvalMode::Exact).unwrap();
        assert!(matches!(v, Value::Exact(ref x) if *x == q(-3, 8)));
        let t = parse("sqrt(4*n^2)").unwrap();
        assert!(matches!(eval(&t, 3, EvalMode::Exact).unwrap(), Value::Exact(ref x) if *x == q(6, 1)));
    }

    #[test]
    fn exact_refuses_irrational() {
        let t = parse("1/(n*log(n))").unwrap();
        assert!(matches!(eval(&t, 3, EvalMode::Exact), Err(EvalError::ExactUnavailable(_))));
        let t = parse("n^(1/2)").unwrap();
        assert!(matches!(eval(&t, 2, EvalMode::Exact), Err(EvalError::ExactUnavailable(_))));
        assert!(eval(&t, 4, EvalMode::Exact).is_ok());
    }

    #[test]
    fn float_values() {
        let t = parse("1/(n*log(n)^2)").unwrap();
        let v = eval(&t, 10, EvalMode::Float(128)).unwrap().to_f64();
        let want = 1.0 / (10.0 * 10f64.ln().powi(2));
        assert!((v - want).abs() < 1e-15 * want);
    }

    #[test]
    fn start_index_and_zero_checks() {
        let t = parse("1/log(n)").unwrap();
        assert!(matches!(eval(&t, 1, EvalMode::Float(64)), Err(EvalError::BelowStartIndex { .. })));
    }

    #[test]
    fn large_factorials_in_float_mode() {
        // 3000! against its exact value
        let node = Node::factorial(1, 0);
        let v = eval_node(&node, 3000, EvalMode::Float(200)).unwrap().to_float(200);
        let exact = float::from_bigint(&factorial(3000).into(), 400);
        assert!(float::rel_diff(&v, &exact, 400) < 1e-55);
    }

    #[test]
    fn huge_affine_powers() {
        let node = Node::pow_affine(Node::ratio(3, 2), crate::expr::Affine::new(2, 0));
        let v = eval_node(&node, 1 << 16, EvalMode::Float(128)).unwrap().to_float(128);
        let exact = float::from_bigint(&(num_traits::pow(BigInt::from(3), 1 << 17)), 4096)
            .div(&float::from_bigint(&(num_traits::pow(BigInt::from(2), 1 << 17)), 4096), 256, RM);
        assert!(float::rel_diff(&v, &exact, 256) < 1e-35);
    }
}
