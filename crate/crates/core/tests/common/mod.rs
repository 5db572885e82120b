#![allow(dead_code)]

//! Term generators whose Raabe values are known in closed form, independent
//! of the library's ratio machinery.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use raabe::poly::Poly;

pub fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// A term together with its value read off its asymptotics `|a_n| ~ C n^-p`.
#[derive(Clone, Debug)]
pub struct Known {
    pub text: String,
    pub p: BigRational,
}

/// One factor of a hypergeometric term.
///
/// - `(n+c)^k` behaves like `n^k`;
/// - `(2n+b)!/(4^n (n!)^2)` like `n^(b-1/2)`;
/// - `(n+d)!/(n+c)!` like `n^(d-c)`;
/// - constants contribute nothing.
pub fn atom() -> impl Strategy<Value = Known> {
    prop_oneof![
        (1i64..=4, prop_oneof![-3i64..=-1, 1i64..=3])
            .prop_map(|(c, k)| Known { text: format!("(n+{})^({})", c, k), p: q(-k, 1) }),
        (-1i64..=2).prop_map(|b| {
            let arg = match b {
                0 => "2n".to_string(),
                b if b < 0 => format!("2n-{}", -b),
                b => format!("2n+{}", b),
            };
            Known { text: format!("({})!/(4^n*(n!)^2)", arg), p: q(1, 2) - q(b, 1) }
        }),
        (0i64..=3, 0i64..=3)
            .prop_filter("distinct shifts", |(c, d)| c != d)
            .prop_map(|(c, d)| Known { text: format!("(n+{})!/(n+{})!", d, c), p: q(c - d, 1) }),
        (2i64..=9).prop_map(|k| Known { text: k.to_string(), p: q(0, 1) }),
    ]
}

/// Products of one to three atoms.
pub fn hyper_term() -> impl Strategy<Value = Known> {
    prop::collection::vec(atom(), 1..=3).prop_map(|atoms| {
        let text = atoms.iter().map(|a| format!("({})", a.text)).collect::<Vec<_>>().join("*");
        let p = atoms.iter().fold(q(0, 1), |acc, a| acc + &a.p);
        Known { text, p }
    })
}

/// As [`hyper_term`], optionally with an alternating sign.
pub fn signed_hyper_term() -> impl Strategy<Value = Known> {
    (hyper_term(), any::<bool>()).prop_map(|(k, alt)| {
        if alt {
            Known { text: format!("alt*{}", k.text), p: k.p }
        } else {
            k
        }
    })
}

/// `c * prod (n + c_i)^(k_i)` kept as numerator and denominator polynomials,
/// positive for every `n >= 1`.
#[derive(Clone, Debug)]
pub struct RationalTerm {
    pub num: Poly,
    pub den: Poly,
    pub text: String,
    pub p: BigRational,
}

pub fn rational_term() -> impl Strategy<Value = RationalTerm> {
    (1i64..=5, prop::collection::vec((1i64..=4, prop_oneof![-3i64..=-1, 1i64..=3]), 1..=3)).prop_map(
        |(c, factors)| {
            let mut num = Poly::from_i64s(&[c]);
            let mut den = Poly::one();
            let mut parts = vec![c.to_string()];
            let mut p = q(0, 1);
            for (shift, k) in factors {
                let lin = Poly::from_i64s(&[shift, 1]);
                if k > 0 {
                    num = &num * &lin.pow(k as u32);
                } else {
                    den = &den * &lin.pow((-k) as u32);
                }
                parts.push(format!("(n+{})^({})", shift, k));
                p -= q(k, 1);
            }
            RationalTerm { num, den, text: parts.join("*"), p }
        },
    )
}

/// `A + B` or `A - B` as a single fraction, for an oracle that never sees the
/// syntactic sum.
pub fn combined_fraction(a: &RationalTerm, b: &RationalTerm, subtract: bool) -> String {
    let left = &a.num * &b.den;
    let right = &b.num * &a.den;
    let num = if subtract { &left - &right } else { &left + &right };
    format!("({})/({})", num, &a.den * &b.den)
}

/// Terms with known Raabe value used throughout the suites.
pub const HYPER_FIXTURES: &[(&str, i64, i64)] = &[
    ("(2n-1)!/(4^n*(n!)^2)", 3, 2),
    ("(2n)!/(4^n*(n!)^2)", 1, 2),
    ("(2n+1)!/(4^n*(n!)^2)", -1, 2),
    ("alt*(2n)!/(4^n*(n!)^2)", 1, 2),
    ("6*n^4-11*n^3-3*n^2+7*n+5", -4, 1),
    ("1/n^2", 2, 1),
    ("1/n", 1, 1),
    ("alt/n", 1, 1),
    ("n^3", -3, 1),
    ("(n+1)!/(n+3)!", 2, 1),
    ("(2n-1)!/(4^n*(n!)^2)*(n+2)!/(n+1)!", 1, 2),
];

/// Terms outside the hypergeometric class, with their values.
pub const NON_HYPER_FIXTURES: &[(&str, i64, i64)] = &[
    ("1/n^(1/2)", 1, 2),
    ("alt/n^(1/4)", 1, 4),
    ("1/n^(3/4)", 3, 4),
    ("alt*sqrt((n^2-2*n+3)/(5*n^3-7*n^2+11*n+13))", 1, 2),
    ("1/((n+1)*log(n+1)^2)", 1, 1),
    ("1/log(n+1)", 0, 1),
];
