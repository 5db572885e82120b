use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Affine, Exponent, Node};

// Binding strength, loosest first; mirrors the parser's grammar levels.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const POSTFIX: u8 = 5;
const ATOM: u8 = 6;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        Node::Const(c) if !c.is_integer() => PRODUCT,
        Node::Const(c) if c.is_negative() => UNARY,
        Node::Neg(_) => UNARY,
        Node::Pow(..) => POWER,
        Node::Factorial(_) => POSTFIX,
        _ => ATOM,
    }
}

pub(crate) fn fmt_affine(a: &Affine) -> String {
    let mut s = String::new();
    if !a.slope.is_zero() {
        if a.slope.is_one() {
            s.push('n');
        } else {
            s.push_str(&format!("{}n", a.slope));
        }
        if a.offset.is_positive() {
            s.push_str(&format!("+{}", a.offset));
        } else if a.offset.is_negative() {
            s.push_str(&format!("{}", a.offset));
        }
    } else {
        s.push_str(&a.offset.to_string());
    }
    s
}

fn fmt_exponent(e: &Exponent) -> String {
    match e {
        Exponent::Rational(k) if k.is_integer() => k.to_string(),
        Exponent::Rational(k) => format!("({})", k),
        Exponent::Affine(a) if a.slope.is_one() && a.offset.is_zero() => "n".to_string(),
        Exponent::Affine(a) => format!("({})", fmt_affine(a)),
    }
}

fn fmt_const(c: &BigRational) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, node: &Node, min: u8) -> fmt::Result {
    if precedence(node) < min {
        write!(f, "(")?;
        write_node(f, node)?;
        write!(f, ")")
    } else {
        write_node(f, node)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Const(c) => write!(f, "{}", fmt_const(c)),
        Node::Var => write!(f, "n"),
        Node::AltSign => write!(f, "alt"),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_at(f, a, POWER)
        }
        Node::Add(a, b) => {
            write_at(f, a, SUM)?;
            write!(f, " + ")?;
            write_at(f, b, PRODUCT)
        }
        Node::Sub(a, b) => {
            write_at(f, a, SUM)?;
            write!(f, " - ")?;
            write_at(f, b, PRODUCT)
        }
        Node::Mul(a, b) => {
            write_at(f, a, PRODUCT)?;
            write!(f, "*")?;
            write_at(f, b, UNARY)
        }
        Node::Div(a, b) => {
            write_at(f, a, PRODUCT)?;
            write!(f, "/")?;
            write_at(f, b, UNARY)
        }
        Node::Pow(base, e) => {
            write_at(f, base, POSTFIX)?;
            write!(f, "^{}", fmt_exponent(e))
        }
        Node::Factorial(a) => {
            if (a.slope.is_one() && a.offset.is_zero()) || (a.slope.is_zero() && !a.offset.is_negative()) {
                write!(f, "{}!", fmt_affine(a))
            } else {
                write!(f, "({})!", fmt_affine(a))
            }
        }
        Node::Log(a) => {
            write!(f, "log(")?;
            write_node(f, a)?;
            write!(f, ")")
        }
        Node::Abs(a) => {
            write!(f, "abs(")?;
            write_node(f, a)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, self)
    }
}
