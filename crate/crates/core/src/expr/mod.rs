//! General-term expressions `a_n`: syntax tree, parser, printer, evaluator
//! and sign analysis.

mod domain;
mod eval;
mod parse;
mod print;
mod sign;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::poly::Poly;

pub use eval::{eval, eval_node, EvalError, EvalMode, Value};
pub use parse::{parse, rational_power, ParseError};
pub use sign::{sign_split, Sign, SignPattern};

/// `slope * n + offset` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Affine {
    pub slope: BigInt,
    pub offset: BigInt,
}

impl Affine {
    pub fn new(slope: impl Into<BigInt>, offset: impl Into<BigInt>) -> Self {
        Affine { slope: slope.into(), offset: offset.into() }
    }

    pub fn at(&self, n: u64) -> BigInt {
        &self.slope * BigInt::from(n) + &self.offset
    }

    pub fn to_poly(&self) -> Poly {
        Poly::linear(self.slope.clone(), self.offset.clone())
    }

    pub fn is_constant(&self) -> bool {
        self.slope.is_zero()
    }
}

/// Exponent of a [`Node::Pow`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Exponent {
    /// Constant rational exponent.
    Rational(BigRational),
    /// Exponent depending on `n`; only paired with a positive rational base.
    Affine(Affine),
}

/// One node of a general-term expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Const(BigRational),
    /// The summation index `n`.
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Exponent),
    Factorial(Affine),
    /// Natural logarithm.
    Log(Box<Node>),
    /// `(-1)^(n-1)`.
    AltSign,
    Abs(Box<Node>),
}

impl Node {
    pub fn int(v: i64) -> Node {
        Node::Const(BigRational::from_integer(v.into()))
    }

    pub fn ratio(num: i64, den: i64) -> Node {
        Node::Const(BigRational::new(num.into(), den.into()))
    }

    pub fn neg(a: Node) -> Node {
        Node::Neg(Box::new(a))
    }

    pub fn add(a: Node, b: Node) -> Node {
        Node::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Node, b: Node) -> Node {
        Node::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Node, b: Node) -> Node {
        Node::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Node, b: Node) -> Node {
        Node::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(base: Node, k: BigRational) -> Node {
        Node::Pow(Box::new(base), Exponent::Rational(k))
    }

    pub fn powi(base: Node, k: i64) -> Node {
        Node::pow(base, BigRational::from_integer(k.into()))
    }

    pub fn pow_affine(base: Node, e: Affine) -> Node {
        Node::Pow(Box::new(base), Exponent::Affine(e))
    }

    pub fn factorial(slope: i64, offset: i64) -> Node {
        Node::Factorial(Affine::new(slope, offset))
    }

    pub fn log(a: Node) -> Node {
        Node::Log(Box::new(a))
    }

    pub fn abs(a: Node) -> Node {
        Node::Abs(Box::new(a))
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Const(_) | Node::Var | Node::Factorial(_) | Node::AltSign => vec![],
            Node::Neg(a) | Node::Pow(a, _) | Node::Log(a) | Node::Abs(a) => vec![a],
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
        }
    }

    pub fn count_nodes(&self) -> usize {
        1 + self.children().iter().map(|c| c.count_nodes()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Whether the subtree mentions `n` (factorials and `alt` count).
    pub fn depends_on_n(&self) -> bool {
        match self {
            Node::Var | Node::AltSign => true,
            Node::Factorial(a) => !a.is_constant(),
            Node::Pow(b, Exponent::Affine(e)) => !e.is_constant() || b.depends_on_n(),
            _ => self.children().iter().any(|c| c.depends_on_n()),
        }
    }

    pub fn contains_log(&self) -> bool {
        matches!(self, Node::Log(_)) || self.children().iter().any(|c| c.contains_log())
    }

    /// The subtree as a polynomial in `n` with rational coefficients, when it
    /// is one syntactically.
    pub fn to_poly(&self) -> Option<Poly> {
        match self {
            Node::Const(c) => Some(Poly::constant(c.clone())),
            Node::Var => Some(Poly::var()),
            Node::Neg(a) => a.to_poly().map(|p| -&p),
            Node::Add(a, b) => Some(&a.to_poly()? + &b.to_poly()?),
            Node::Sub(a, b) => Some(&a.to_poly()? - &b.to_poly()?),
            Node::Mul(a, b) => Some(&a.to_poly()? * &b.to_poly()?),
            Node::Div(a, b) => {
                let d = b.to_poly()?;
                if d.degree() == Some(0) {
                    Some(a.to_poly()?.scale(&d.leading().recip()))
                } else {
                    None
                }
            }
            Node::Pow(a, Exponent::Rational(k)) if k.is_integer() && !k.is_negative() => {
                let e: u32 = k.to_integer().try_into().ok()?;
                Some(a.to_poly()?.pow(e))
            }
            _ => None,
        }
    }

    /// Constant value of an `n`-free rational subtree.
    pub fn const_value(&self) -> Option<BigRational> {
        let p = self.to_poly()?;
        if p.is_constant() {
            Some(p.coeff(0))
        } else {
            None
        }
    }

    /// Affine form with integer coefficients, when the subtree is one.
    pub fn to_affine(&self) -> Option<Affine> {
        let p = self.to_poly()?;
        if p.degree().unwrap_or(0) > 1 || !p.is_integral() {
            return None;
        }
        Some(Affine::new(p.coeff(1).to_integer(), p.coeff(0).to_integer()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("factorial argument `{0}` must be a*n+b with integer a >= 0 and a*n+b >= 0 for all n >= 1")]
    FactorialArgument(String),
    #[error("exponent `{0}` must be a rational constant or integer-affine in n with a positive constant base")]
    Exponent(String),
    #[error("{0}")]
    Undefined(String),
    #[error("nested logarithms are not supported")]
    LogTower,
    #[error("the term is zero or undefined for every n in 1..={0}")]
    NoValidStart(u64),
}

/// A general term `a_n` together with the least index from which it is
/// defined and nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TermExpr {
    root: Node,
    start_index: u64,
    certified: bool,
}

impl TermExpr {
    /// Wraps a tree, computing its start index.
    pub fn new(root: Node) -> Result<TermExpr, DomainError> {
        let (start_index, certified) = domain::start_index(&root)?;
        Ok(TermExpr { root, start_index, certified })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    /// True when nonvanishing past the scanned range was proven structurally
    /// rather than only observed.
    pub fn start_certified(&self) -> bool {
        self.certified
    }

    /// Rewraps a subtree, e.g. for recursive rule dispatch.
    pub fn subterm(&self, node: &Node) -> Result<TermExpr, DomainError> {
        TermExpr::new(node.clone())
    }
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}
