//! Where a term is defined and nonzero: the start-index scan and its
//! structural certificate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::eval::{eval_node, EvalMode, Value};
use super::{Exponent, Node};
use crate::float::{self, RM};
use crate::poly::Poly;

pub(crate) const SCAN_TO: u64 = 1000;
const SCAN_CAP: u64 = 1_000_000;

/// Least `n >= 1` from which the term is defined and nonzero, plus whether
/// that holds provably beyond the scanned range.
pub(super) fn start_index(root: &Node) -> Result<(u64, bool), super::DomainError> {
    let bound = eventually_nonzero(root);
    let scan_to = match bound {
        Some(b) if b <= SCAN_CAP => b.max(SCAN_TO),
        _ => SCAN_TO,
    };
    let mut last_bad = 0;
    for n in 1..=scan_to {
        if !defined_nonzero(root, n) {
            last_bad = n;
        }
    }
    if last_bad == scan_to {
        return Err(super::DomainError::NoValidStart(scan_to));
    }
    let certified = bound.is_some_and(|b| b <= scan_to);
    Ok((last_bad + 1, certified))
}

fn bound_to_u64(b: BigInt) -> Option<u64> {
    b.max(BigInt::one()).to_u64()
}

/// `B` such that the subtree is defined and nonzero for every `n >= B`.
pub(crate) fn eventually_nonzero(node: &Node) -> Option<u64> {
    if let Some(p) = node.to_poly() {
        return match p.degree() {
            None => None,
            Some(0) => Some(1),
            Some(_) => bound_to_u64(p.positive_root_bound()),
        };
    }
    match node {
        Node::Var | Node::AltSign | Node::Factorial(_) => Some(1),
        Node::Pow(b, Exponent::Affine(_)) => matches!(**b, Node::Const(_)).then_some(1),
        Node::Const(c) => (!c.is_zero()).then_some(1),
        Node::Neg(a) | Node::Abs(a) => eventually_nonzero(a),
        Node::Mul(a, b) | Node::Div(a, b) => Some(eventually_nonzero(a)?.max(eventually_nonzero(b)?)),
        Node::Pow(b, Exponent::Rational(k)) => {
            if k.is_integer() {
                eventually_nonzero(b)
            } else {
                eventually_positive(b)
            }
        }
        Node::Log(x) => eventually_above_one(x),
        Node::Add(..) | Node::Sub(..) => None,
    }
}

/// `B` such that the subtree is positive for every `n >= B`.
pub(crate) fn eventually_positive(node: &Node) -> Option<u64> {
    if let Some(p) = node.to_poly() {
        if !p.leading().is_positive() {
            return None;
        }
        return match p.degree() {
            Some(0) => Some(1),
            _ => bound_to_u64(p.positive_root_bound()),
        };
    }
    match node {
        Node::Var | Node::Factorial(_) | Node::Pow(_, Exponent::Affine(_)) => Some(1),
        Node::Const(c) => c.is_positive().then_some(1),
        Node::Abs(a) => eventually_nonzero(a),
        Node::Mul(a, b) | Node::Div(a, b) | Node::Add(a, b) => {
            Some(eventually_positive(a)?.max(eventually_positive(b)?))
        }
        Node::Pow(b, Exponent::Rational(k)) => {
            let even = k.is_integer() && (k.to_integer() % BigInt::from(2)).is_zero();
            if even {
                eventually_nonzero(b)
            } else {
                eventually_positive(b)
            }
        }
        Node::Log(x) => eventually_above_one(x),
        _ => None,
    }
}

fn eventually_above_one(x: &Node) -> Option<u64> {
    let p = x.to_poly()?;
    let shifted = &p - &Poly::one();
    match p.degree() {
        Some(0) => (p.leading() > BigRational::one()).then_some(1),
        Some(_) if p.leading().is_positive() => bound_to_u64(shifted.positive_root_bound()),
        _ => None,
    }
}

/// Cheap local information about a subtree at one `n`.
enum Local {
    Exact(BigRational),
    /// Nonzero with the given sign; the value itself was not needed.
    Signed(i8),
}

impl Local {
    fn sign(&self) -> i8 {
        match self {
            Local::Exact(v) => {
                if v.is_zero() {
                    0
                } else if v.is_positive() {
                    1
                } else {
                    -1
                }
            }
            Local::Signed(s) => *s,
        }
    }
}

fn sign_of(v: &Value) -> i8 {
    match v {
        Value::Exact(q) => Local::Exact(q.clone()).sign(),
        Value::Float(f) => {
            if f.is_zero() {
                0
            } else if f.is_positive() {
                1
            } else {
                -1
            }
        }
    }
}

/// Evaluates a subtree whose value (not just sign) is needed.
fn value_of(node: &Node, n: u64) -> Option<Local> {
    match eval_node(node, n, EvalMode::Exact) {
        Ok(Value::Exact(q)) => Some(Local::Exact(q)),
        Ok(v) => Some(Local::Signed(sign_of(&v))),
        Err(super::EvalError::ExactUnavailable(_)) => {
            let v = eval_node(node, n, EvalMode::Float(128)).ok()?;
            match sign_of(&v) {
                0 => Some(Local::Exact(BigRational::zero())),
                s => Some(Local::Signed(s)),
            }
        }
        Err(_) => None,
    }
}

/// Sign of `a +- b` from 192-bit evaluations of both sides, when the sum is
/// far enough from cancellation to trust it.
fn float_sum_sign(a: &Node, b: &Node, is_sub: bool, n: u64) -> Option<i8> {
    const P: usize = 192;
    let x = eval_node(a, n, EvalMode::Float(P)).ok()?.to_float(P);
    let mut y = eval_node(b, n, EvalMode::Float(P)).ok()?.to_float(P);
    if is_sub {
        y = y.neg();
    }
    let s = x.add(&y, P, RM);
    let scale = x.abs().add(&y.abs(), P, RM);
    if s.is_zero() || float::to_f64(&s.abs().div(&scale, P, RM)) < 2f64.powi(-150) {
        return None;
    }
    Some(if s.is_positive() { 1 } else { -1 })
}

/// `None` when the subtree is undefined at `n`.
fn probe(node: &Node, n: u64) -> Option<Local> {
    Some(match node {
        Node::Const(c) => Local::Exact(c.clone()),
        Node::Var => Local::Exact(BigRational::from_integer(n.into())),
        Node::AltSign => Local::Exact(BigRational::from_integer(if n % 2 == 1 { 1.into() } else { (-1).into() })),
        Node::Factorial(a) => {
            if a.at(n).is_negative() {
                return None;
            }
            Local::Signed(1)
        }
        Node::Neg(a) => match probe(a, n)? {
            Local::Exact(v) => Local::Exact(-v),
            Local::Signed(s) => Local::Signed(-s),
        },
        Node::Abs(a) => match probe(a, n)? {
            Local::Exact(v) => Local::Exact(v.abs()),
            Local::Signed(_) => Local::Signed(1),
        },
        Node::Mul(a, b) | Node::Div(a, b) => {
            let is_div = matches!(node, Node::Div(..));
            let (x, y) = (probe(a, n)?, probe(b, n)?);
            if is_div && y.sign() == 0 {
                return None;
            }
            match (x, y) {
                (Local::Exact(x), Local::Exact(y)) => Local::Exact(if is_div { x / y } else { x * y }),
                (x, y) => match x.sign() * y.sign() {
                    0 => Local::Exact(BigRational::zero()),
                    s => Local::Signed(s),
                },
            }
        }
        Node::Pow(b, Exponent::Affine(_)) => {
            probe(b, n)?;
            Local::Signed(1)
        }
        Node::Pow(b, Exponent::Rational(k)) => {
            let base = probe(b, n)?;
            let s = base.sign();
            if s == 0 {
                return if k.is_positive() { Some(Local::Exact(BigRational::zero())) } else { None };
            }
            if k.is_integer() {
                let odd = !(k.to_integer() % BigInt::from(2)).is_zero();
                match base {
                    Local::Exact(v) if k.abs() <= BigRational::from_integer(64.into()) => {
                        let e: i32 = k.to_integer().try_into().ok()?;
                        Local::Exact(num_traits::pow::Pow::pow(&v, e))
                    }
                    _ => Local::Signed(if odd { s } else { 1 }),
                }
            } else {
                if s < 0 {
                    return None;
                }
                Local::Signed(1)
            }
        }
        Node::Log(x) => {
            let arg = match probe(x, n)? {
                Local::Exact(v) => Local::Exact(v),
                Local::Signed(_) => value_of(x, n)?,
            };
            match arg {
                Local::Exact(v) => {
                    if !v.is_positive() {
                        return None;
                    }
                    if v.is_one() {
                        Local::Exact(BigRational::zero())
                    } else if v > BigRational::one() {
                        Local::Signed(1)
                    } else {
                        Local::Signed(-1)
                    }
                }
                Local::Signed(s) if s > 0 => {
                    // argument is irrational here, so it is not exactly one
                    let v = eval_node(node, n, EvalMode::Float(128)).ok()?;
                    Local::Signed(sign_of(&v))
                }
                Local::Signed(_) => return None,
            }
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let (x, y) = (probe(a, n)?, probe(b, n)?);
            let is_sub = matches!(node, Node::Sub(..));
            let (sx, sy) = (x.sign(), if is_sub { -y.sign() } else { y.sign() });
            match (x, y) {
                (Local::Exact(x), Local::Exact(y)) => Local::Exact(if is_sub { x - y } else { x + y }),
                _ if sx == 0 && sy == 0 => Local::Exact(BigRational::zero()),
                _ if sx == sy || sy == 0 => Local::Signed(sx),
                _ if sx == 0 => Local::Signed(sy),
                _ => match float_sum_sign(a, b, is_sub, n) {
                    Some(s) => Local::Signed(s),
                    None => value_of(node, n)?,
                },
            }
        }
    })
}

pub(crate) fn defined_nonzero(node: &Node, n: u64) -> bool {
    probe(node, n).is_some_and(|l| l.sign() != 0)
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn start_index_skips_zeros_and_poles() {
        assert_eq!(parse("1/n^2").unwrap().start_index(), 1);
        assert_eq!(parse("1/log(n)").unwrap().start_index(), 2);
        assert_eq!(parse("(n-3)*(n-5)").unwrap().start_index(), 6);
        assert_eq!(parse("1/(n^2-10*n+9)").unwrap().start_index(), 10);
        assert_eq!(parse("sqrt(n-4)").unwrap().start_index(), 5);
        assert!(parse("1/(n-2000)").unwrap().start_certified());
        assert_eq!(parse("1/(n-2000)").unwrap().start_index(), 2001);
    }

    #[test]
    fn vanishing_terms_are_rejected() {
        assert!(parse("n-n").is_err());
        assert!(parse("0*n").is_err());
    }

    #[test]
    fn certification_flags() {
        let t = parse("alt*(2n)!/(4^n*(n!)^2)").unwrap();
        assert_eq!(t.start_index(), 1);
        assert!(t.start_certified());
        // sums of non-polynomial parts are only scanned
        assert!(!parse("1 + alt/n").unwrap().start_certified());
    }
}
