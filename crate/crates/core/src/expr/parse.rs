//! Recursive-descent parser for general-term expressions.
//!
//! Precedence, tightest first: postfix `!`, `^`, unary minus, `*` `/`,
//! `+` `-`. Implicit multiplication such as `2n` is only accepted inside a
//! parenthesized factorial argument or a parenthesized exponent.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::{Affine, DomainError, Exponent, Node, TermExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("domain error at byte {offset}: {source}")]
    Domain {
        offset: usize,
        #[source]
        source: DomainError,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::Domain { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    /// Integer literal immediately followed by `n`, e.g. `2n`.
    NumVar(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Bang,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(q) => format!("number `{}`", q),
            Tok::NumVar(c) => format!("`{}n`", c),
            Tok::Ident(s) => format!("`{}`", s),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

const OPERATORS: &[&str] = &["`+`", "`-`", "`*`", "`/`", "`^`", "`)`", "end of input"];
const ATOM_START: &[&str] = &["number", "`n`", "`alt`", "`log`", "`sqrt`", "`abs`", "`(`"];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' | '\u{2212}' => Some(Tok::Minus),
            '*' | '\u{00b7}' | '\u{00d7}' | '\u{22c5}' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '!' => Some(Tok::Bang),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, off));
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[start..i].iter().map(|p| p.1).collect();
            let mut frac_part = String::new();
            let mut has_dot = false;
            if i < chars.len() && chars[i].1 == '.' {
                has_dot = true;
                i += 1;
                let fs = i;
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
                frac_part = chars[fs..i].iter().map(|p| p.1).collect();
            }
            if int_part.is_empty() && frac_part.is_empty() {
                return Err(ParseError::Syntax {
                    offset: off,
                    expected: vec!["digit"],
                    found: "`.`".into(),
                });
            }
            let followed_by_n = i < chars.len()
                && chars[i].1 == 'n'
                && !chars.get(i + 1).is_some_and(|p| p.1.is_alphanumeric() || p.1 == '_');
            if followed_by_n && !has_dot {
                let coef: BigInt = int_part.parse().expect("digits");
                out.push((Tok::NumVar(coef), off));
                i += 1;
                continue;
            }
            let digits = format!("{}{}", int_part, frac_part);
            let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().expect("digits") };
            let denom = num_traits::pow(BigInt::from(10), frac_part.len());
            out.push((Tok::Num(BigRational::new(numer, denom)), off));
            continue;
        }
        if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().map(|p| p.1).collect();
            out.push((Tok::Ident(word), off));
            continue;
        }
        return Err(ParseError::Syntax {
            offset: off,
            expected: ATOM_START.to_vec(),
            found: format!("`{}`", c),
        });
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    /// Offsets of implicit multiplications not yet licensed by a factorial
    /// or exponent context.
    implicit: Vec<usize>,
}

fn domain(offset: usize, source: DomainError) -> ParseError {
    ParseError::Domain { offset, source }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let is_div = match self.peek() {
                Tok::Star => false,
                Tok::Slash => true,
                _ => return Ok(lhs),
            };
            let (_, off) = self.bump();
            let rhs = self.factor()?;
            lhs = match (lhs, rhs) {
                (Node::Const(a), Node::Const(b)) => {
                    if is_div {
                        if b.is_zero() {
                            return Err(domain(off, DomainError::Undefined("division by zero".into())));
                        }
                        Node::Const(a / b)
                    } else {
                        Node::Const(a * b)
                    }
                }
                (a, b) if is_div => Node::div(a, b),
                (a, b) => Node::mul(a, b),
            };
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.power()? {
                Node::Const(c) => Node::Const(-c),
                other => Node::neg(other),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.postfix()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        let (_, off) = self.bump();
        let e = self.exponent()?;
        build_pow(base, e).map_err(|d| domain(off, d))
    }

    fn postfix(&mut self) -> Result<Node, ParseError> {
        let start = self.offset();
        let atom = self.atom()?;
        if *self.peek() != Tok::Bang {
            return Ok(atom);
        }
        self.bump();
        if *self.peek() == Tok::Bang {
            return Err(self.unexpected(OPERATORS));
        }
        let arg = match atom.to_affine() {
            Some(a) if !a.slope.is_negative() && !(&a.slope + &a.offset).is_negative() => a,
            _ => return Err(domain(start, DomainError::FactorialArgument(atom.to_string()))),
        };
        Ok(Node::Factorial(arg))
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let off = self.offset();
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Node::Const(q))
            }
            Tok::NumVar(c) => {
                self.bump();
                self.implicit.push(off);
                Ok(Node::mul(Node::Const(BigRational::from_integer(c)), Node::Var))
            }
            Tok::Ident(word) => {
                self.bump();
                match word.as_str() {
                    "n" => Ok(Node::Var),
                    "alt" => Ok(Node::AltSign),
                    "log" | "ln" | "sqrt" | "abs" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let inner = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        match word.as_str() {
                            "sqrt" => build_pow(inner, Exponent::Rational(BigRational::new(1.into(), 2.into())))
                                .map_err(|d| domain(off, d)),
                            "abs" => Ok(Node::abs(inner)),
                            _ => {
                                if inner.contains_log() {
                                    return Err(domain(off, DomainError::LogTower));
                                }
                                Ok(Node::log(inner))
                            }
                        }
                    }
                    _ => Err(ParseError::Syntax {
                        offset: off,
                        expected: ATOM_START.to_vec(),
                        found: format!("`{}`", word),
                    }),
                }
            }
            Tok::LParen => {
                self.bump();
                let mark = self.implicit.len();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                if *self.peek() == Tok::Bang {
                    self.implicit.truncate(mark);
                }
                Ok(inner)
            }
            _ => Err(self.unexpected(ATOM_START)),
        }
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Num(q) => {
                        self.bump();
                        Ok(Exponent::Rational(-q))
                    }
                    _ => Err(self.unexpected(&["number"])),
                }
            }
            Tok::Num(q) => {
                self.bump();
                Ok(Exponent::Rational(q))
            }
            Tok::Ident(w) if w == "n" => {
                self.bump();
                Ok(Exponent::Affine(Affine::new(1, 0)))
            }
            Tok::LParen => {
                let off = self.offset();
                self.bump();
                let mark = self.implicit.len();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.implicit.truncate(mark);
                if let Some(k) = inner.const_value() {
                    Ok(Exponent::Rational(k))
                } else if let Some(a) = inner.to_affine() {
                    Ok(Exponent::Affine(a))
                } else {
                    Err(domain(off, DomainError::Exponent(inner.to_string())))
                }
            }
            _ => Err(self.unexpected(&["number", "`-`", "`n`", "`(`"])),
        }
    }
}

/// Exact `c^k` when it is rational.
pub fn rational_power(c: &BigRational, k: &BigRational) -> Option<BigRational> {
    let root: u32 = k.denom().try_into().ok()?;
    let e: i32 = k.numer().try_into().ok()?;
    let base = if root == 1 {
        c.clone()
    } else {
        if c.is_negative() {
            return None;
        }
        let rn = c.numer().nth_root(root);
        let rd = c.denom().nth_root(root);
        if num_traits::pow(rn.clone(), root as usize) != *c.numer()
            || num_traits::pow(rd.clone(), root as usize) != *c.denom()
        {
            return None;
        }
        BigRational::new(rn, rd)
    };
    if base.is_zero() && e < 0 {
        return None;
    }
    Some(num_traits::pow::Pow::pow(&base, e))
}

/// Applies the exponent invariants and the `(-1)^(a*n+b)` normalization.
pub(crate) fn build_pow(base: Node, e: Exponent) -> Result<Node, DomainError> {
    let e = match e {
        Exponent::Affine(a) if a.is_constant() => Exponent::Rational(BigRational::from_integer(a.offset)),
        other => other,
    };
    match e {
        Exponent::Rational(k) => {
            if let Node::Const(c) = &base {
                if c.is_zero() && !k.is_positive() {
                    return Err(DomainError::Undefined("zero raised to a non-positive power".into()));
                }
                if c.is_negative() && !k.is_integer() {
                    return Err(DomainError::Undefined(format!(
                        "negative base {} with fractional exponent {}",
                        c, k
                    )));
                }
                if let Some(v) = rational_power(c, &k) {
                    return Ok(Node::Const(v));
                }
            }
            Ok(Node::Pow(Box::new(base), Exponent::Rational(k)))
        }
        Exponent::Affine(a) => {
            let Node::Const(c) = &base else {
                return Err(DomainError::Exponent(format!("{}^({})", base, super::print::fmt_affine(&a))));
            };
            if c.is_zero() {
                return Err(DomainError::Undefined("0^n vanishes identically".into()));
            }
            let mag = c.abs();
            let magnitude_part = if mag.is_one() {
                None
            } else {
                Some(Node::pow_affine(Node::Const(mag), a.clone()))
            };
            if !c.is_negative() {
                return Ok(magnitude_part.unwrap_or_else(|| Node::int(1)));
            }
            // (-1)^(a n + b): alternating iff a is odd; (-1)^(n-1) * (-1)^((a-1)n + b + 1)
            let two = BigInt::from(2);
            let sign_part = if (&a.slope % &two).is_zero() {
                let s = if (&a.offset % &two).is_zero() { 1 } else { -1 };
                Node::int(s)
            } else if ((&a.offset + BigInt::from(1)) % &two).is_zero() {
                Node::AltSign
            } else {
                Node::neg(Node::AltSign)
            };
            Ok(match magnitude_part {
                None => sign_part,
                Some(m) => Node::mul(sign_part, m),
            })
        }
    }
}

/// Parses a general term and computes its start index.
pub fn parse(text: &str) -> Result<TermExpr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, implicit: Vec::new() };
    let root = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected(OPERATORS));
    }
    if let Some(&off) = p.implicit.first() {
        return Err(ParseError::Syntax {
            offset: off,
            expected: vec!["`*` (implicit products like `2n` are only allowed in `(…)!` and `^(…)`)"],
            found: "implicit product".into(),
        });
    }
    TermExpr::new(root).map_err(|d| domain(0, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(s: &str) -> Node {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}")).root().clone()
    }

    #[test]
    fn central_binomial_series_shape() {
        let expected = Node::mul(
            Node::AltSign,
            Node::div(
                Node::factorial(2, 0),
                Node::mul(
                    Node::pow_affine(Node::int(4), Affine::new(1, 0)),
                    Node::powi(Node::factorial(1, 0), 2),
                ),
            ),
        );
        // `alt * X / Y` is left-associative: (alt * X) / Y
        let got = tree("alt * (2n)! / (4^n * (n!)^2)");
        let left_assoc = Node::div(
            Node::mul(Node::AltSign, Node::factorial(2, 0)),
            Node::mul(Node::pow_affine(Node::int(4), Affine::new(1, 0)), Node::powi(Node::factorial(1, 0), 2)),
        );
        assert_eq!(got, left_assoc);
        assert_eq!(tree("alt * ((2n)! / (4^n * (n!)^2))"), expected);
    }

    #[test]
    fn reciprocal_square() {
        assert_eq!(tree("1/n^2"), Node::div(Node::int(1), Node::powi(Node::Var, 2)));
    }

    #[test]
    fn double_factorial_rejected_at_second_bang() {
        let err = parse("n!!").unwrap_err();
        match err {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minus_one_powers_normalize() {
        assert_eq!(tree("(-1)^(n-1)"), Node::AltSign);
        assert_eq!(tree("(-1)^(n+1)"), Node::AltSign);
        assert_eq!(tree("(-1)^n"), Node::neg(Node::AltSign));
        assert_eq!(tree("(-1)^(2n)/n"), Node::div(Node::int(1), Node::Var));
        assert_eq!(
            tree("(-2)^n"),
            Node::mul(Node::neg(Node::AltSign), Node::pow_affine(Node::int(2), Affine::new(1, 0)))
        );
    }

    #[test]
    fn sugar_and_literals() {
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(tree("sqrt(n)"), Node::pow(Node::Var, half.clone()));
        assert_eq!(tree("n^0.5"), Node::pow(Node::Var, half.clone()));
        assert_eq!(tree("n^(1/2)"), Node::pow(Node::Var, half));
        assert_eq!(tree("1/2"), Node::ratio(1, 2));
        assert_eq!(tree("n^-2"), Node::powi(Node::Var, -2));
        assert_eq!(tree("sqrt(4)"), Node::int(2));
        assert_eq!(tree("2^(2n+1)"), Node::pow_affine(Node::int(2), Affine::new(2, 1)));
    }

    #[test]
    fn implicit_product_outside_affine_context() {
        // `6n^4` is rejected: implicit multiplication belongs to factorial and exponent arguments
        assert!(matches!(parse("6n^4"), Err(ParseError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("2n!"), Err(ParseError::Syntax { offset: 0, .. })));
        assert!(parse("(2n+1)!").is_ok());
        assert!(parse("3^(2n)").is_ok());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            parse("(n^2)!"),
            Err(ParseError::Domain { source: DomainError::FactorialArgument(_), .. })
        ));
        assert!(matches!(
            parse("(n-2)!"),
            Err(ParseError::Domain { source: DomainError::FactorialArgument(_), .. })
        ));
        assert!(matches!(parse("n^n"), Err(ParseError::Domain { source: DomainError::Exponent(_), .. })));
        assert!(matches!(parse("log(log(n+2))"), Err(ParseError::Domain { source: DomainError::LogTower, .. })));
        assert!(matches!(parse("(-2)^(1/2)"), Err(ParseError::Domain { .. })));
    }

    #[test]
    fn syntax_errors_report_expected_tokens() {
        let ParseError::Syntax { offset, expected, .. } = parse("1 + * n").unwrap_err() else {
            panic!("expected syntax error");
        };
        assert_eq!(offset, 4);
        assert!(expected.contains(&"`(`"));
        assert!(parse("foo(n)").is_err());
        assert!(parse("(n+1").is_err());
        assert!(parse("n)").is_err());
    }
}
