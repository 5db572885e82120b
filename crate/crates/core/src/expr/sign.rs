//! Splitting a term into a sign pattern and a positive part.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{domain, Exponent, Node, TermExpr};
use crate::poly::Poly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignPattern {
    ConstantPositive,
    ConstantNegative,
    /// Signs alternate; the payload is the sign at the start index.
    Alternating(Sign),
    Unknown,
}

impl std::fmt::Display for SignPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignPattern::ConstantPositive => "ConstantPositive",
            SignPattern::ConstantNegative => "ConstantNegative",
            SignPattern::Alternating(Sign::Plus) => "Alternating(+)",
            SignPattern::Alternating(Sign::Minus) => "Alternating(-)",
            SignPattern::Unknown => "Unknown",
        })
    }
}

impl std::str::FromStr for SignPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ConstantPositive" => SignPattern::ConstantPositive,
            "ConstantNegative" => SignPattern::ConstantNegative,
            "Alternating(+)" => SignPattern::Alternating(Sign::Plus),
            "Alternating(-)" => SignPattern::Alternating(Sign::Minus),
            "Unknown" => SignPattern::Unknown,
            _ => return Err(format!("unknown sign pattern `{}`", s)),
        })
    }
}

/// Scan span used when checking a polynomial's positivity past its roots.
const POSITIVITY_SCAN: u64 = 1_000_000;

/// Decomposes `a_n = s_n * b_n` with `b_n > 0` from the start index on, when
/// that is provable from the tree's shape. Otherwise returns
/// [`SignPattern::Unknown`] with `abs(a_n)`.
pub fn sign_split(expr: &TermExpr) -> (SignPattern, TermExpr) {
    let start = expr.start_index();
    let mut parts = Factors::default();
    parts.collect(expr.root(), false);
    let provable = parts.factors.iter().all(|(f, _)| positive_from(f, start));
    if !provable {
        let abs = Node::abs(expr.root().clone());
        let t = TermExpr::new(abs).unwrap_or_else(|_| expr.clone());
        return (SignPattern::Unknown, t);
    }
    let alternating = parts.alt_count % 2 == 1;
    if !alternating && parts.negative == 0 && parts.alt_count == 0 {
        return (SignPattern::ConstantPositive, expr.clone());
    }
    let positive = parts.rebuild();
    let positive = TermExpr::new(positive).expect("a provably positive part is nonzero");
    let negative_first = {
        // alt is +1 at odd n, -1 at even n
        let alt_flip = alternating && start % 2 == 0;
        (parts.negative % 2 == 1) != alt_flip
    };
    let pattern = match (alternating, negative_first) {
        (true, false) => SignPattern::Alternating(Sign::Plus),
        (true, true) => SignPattern::Alternating(Sign::Minus),
        (false, false) => SignPattern::ConstantPositive,
        (false, true) => SignPattern::ConstantNegative,
    };
    (pattern, positive)
}

#[derive(Default)]
struct Factors {
    /// Remaining factors and whether each sits in a denominator.
    factors: Vec<(Node, bool)>,
    negative: u32,
    alt_count: u32,
}

impl Factors {
    fn collect(&mut self, node: &Node, inverted: bool) {
        match node {
            Node::Mul(a, b) => {
                self.collect(a, inverted);
                self.collect(b, inverted);
            }
            Node::Div(a, b) => {
                self.collect(a, inverted);
                self.collect(b, !inverted);
            }
            Node::Neg(a) => {
                self.negative += 1;
                self.collect(a, inverted);
            }
            Node::Const(c) => {
                if c.is_negative() {
                    self.negative += 1;
                }
                if !c.abs().is_one() {
                    self.factors.push((Node::Const(c.abs()), inverted));
                }
            }
            Node::AltSign => self.alt_count += 1,
            Node::Pow(b, Exponent::Rational(k)) if **b == Node::AltSign && k.is_integer() => {
                if !(k.to_integer() % BigInt::from(2)).is_zero() {
                    self.alt_count += 1;
                }
            }
            other => self.factors.push((other.clone(), inverted)),
        }
    }

    fn rebuild(&self) -> Node {
        let product = |inv: bool| {
            self.factors
                .iter()
                .filter(|(_, i)| *i == inv)
                .map(|(f, _)| f.clone())
                .reduce(Node::mul)
        };
        let num = product(false).unwrap_or_else(|| Node::int(1));
        match product(true) {
            Some(den) => Node::div(num, den),
            None => num,
        }
    }
}

fn is_even_integer(k: &BigRational) -> bool {
    k.is_integer() && (k.to_integer() % BigInt::from(2)).is_zero()
}

/// Whether the subtree is provably positive for every `n >= start`.
pub(crate) fn positive_from(node: &Node, start: u64) -> bool {
    if let Some(p) = node.to_poly() {
        return p.positive_from(start, POSITIVITY_SCAN);
    }
    match node {
        Node::Const(c) => c.is_positive(),
        Node::Var | Node::Factorial(_) => true,
        Node::Pow(b, Exponent::Affine(_)) => matches!(&**b, Node::Const(c) if c.is_positive()),
        Node::AltSign | Node::Neg(_) | Node::Sub(..) => false,
        Node::Abs(a) => nonzero_from(a, start),
        Node::Mul(a, b) | Node::Div(a, b) | Node::Add(a, b) => positive_from(a, start) && positive_from(b, start),
        Node::Pow(b, Exponent::Rational(k)) => {
            if is_even_integer(k) {
                nonzero_from(b, start)
            } else {
                positive_from(b, start)
            }
        }
        Node::Log(x) => match x.to_poly() {
            Some(p) => (&p - &Poly::one()).positive_from(start, POSITIVITY_SCAN),
            None => false,
        },
    }
}

fn nonzero_from(node: &Node, start: u64) -> bool {
    if let Some(p) = node.to_poly() {
        if p.is_zero() {
            return false;
        }
        let bound = domain::eventually_nonzero(node).unwrap_or(u64::MAX);
        if bound.saturating_sub(start) > POSITIVITY_SCAN {
            return false;
        }
        return (start..bound.max(start + 1)).all(|n| !p.eval_int(n).is_zero());
    }
    if positive_from(node, start) {
        return true;
    }
    match node {
        Node::Neg(a) | Node::Abs(a) => nonzero_from(a, start),
        Node::AltSign => true,
        Node::Mul(a, b) | Node::Div(a, b) => nonzero_from(a, start) && nonzero_from(b, start),
        Node::Pow(b, Exponent::Rational(_)) => nonzero_from(b, start),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn split(s: &str) -> (SignPattern, String) {
        let (p, t) = sign_split(&parse(s).unwrap());
        (p, t.to_string())
    }

    #[test]
    fn alternating_terms() {
        assert_eq!(split("alt/n^(1/2)"), (SignPattern::Alternating(Sign::Plus), "1/n^(1/2)".into()));
        assert_eq!(split("-alt/n"), (SignPattern::Alternating(Sign::Minus), "1/n".into()));
        assert_eq!(split("(-1)^n/n"), (SignPattern::Alternating(Sign::Minus), "1/n".into()));
        assert_eq!(
            split("alt*(2n)!/(4^n*(n!)^2)"),
            (SignPattern::Alternating(Sign::Plus), "(2n)!/(4^n*n!^2)".into())
        );
    }

    #[test]
    fn constant_signs() {
        assert_eq!(split("1/n^2"), (SignPattern::ConstantPositive, "1/n^2".into()));
        assert_eq!(split("-3/n^2"), (SignPattern::ConstantNegative, "3/n^2".into()));
        assert_eq!(split("1/((n-3)*(n-5))").0, SignPattern::ConstantPositive);
        assert_eq!(split("alt^2/n").0, SignPattern::ConstantPositive);
    }

    #[test]
    fn unprovable_signs() {
        assert_eq!(split("1 + alt/n"), (SignPattern::Unknown, "abs(1 + alt/n)".into()));
        assert_eq!(split("(2*n-7)/n^3").0, SignPattern::Unknown);
    }
}
