//! Compositional calculus for Raabe values with a replayable derivation
//! trace.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{sign_split, Exponent, Node, SignPattern, TermExpr};
use crate::float::rational_to_f64;
use crate::hyperratio::{raabe_from_ratio, ratio_rational_fn};
use crate::numeric::{estimate_raabe, EstimatorConfig};

/// `lim |a_n / a_{n+1}|` when it is not 1.
#[derive(Clone, Debug, PartialEq)]
pub enum RatioLimit {
    Zero,
    Infinite,
    Finite(BigRational),
    /// Observed only numerically.
    Approx(f64),
}

impl fmt::Display for RatioLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioLimit::Zero => write!(f, "0"),
            RatioLimit::Infinite => write!(f, "inf"),
            RatioLimit::Finite(q) => write!(f, "{}", q),
            RatioLimit::Approx(x) => write!(f, "~{}", x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UndefinedReason {
    RatioLimitNotOne(RatioLimit),
    OscillatingRatio,
    NotApplicable,
}

impl UndefinedReason {
    pub fn code(&self) -> &'static str {
        match self {
            UndefinedReason::RatioLimitNotOne(_) => "RatioLimitNotOne",
            UndefinedReason::OscillatingRatio => "OscillatingRatio",
            UndefinedReason::NotApplicable => "NotApplicable",
        }
    }
}

/// Direction of a sequence that decays too slowly to extrapolate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Decreasing,
    Increasing,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RaabeValue {
    Exact(BigRational),
    Numeric {
        estimate: f64,
        error_bound: f64,
        /// Set when successive extrapolants did not contract.
        slow_trend: Option<Trend>,
    },
    Undefined {
        reason: UndefinedReason,
        detail: String,
    },
}

impl RaabeValue {
    pub fn numeric(estimate: f64, error_bound: f64) -> RaabeValue {
        RaabeValue::Numeric { estimate, error_bound, slow_trend: None }
    }

    pub fn undefined(reason: UndefinedReason, detail: impl Into<String>) -> RaabeValue {
        RaabeValue::Undefined { reason, detail: detail.into() }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            RaabeValue::Exact(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, RaabeValue::Undefined { .. })
    }

    /// Closed interval known to contain the value (a point for `Exact`).
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self {
            RaabeValue::Exact(q) => {
                let v = rational_to_f64(q);
                Some((v, v))
            }
            RaabeValue::Numeric { estimate, error_bound, .. } => Some((estimate - error_bound, estimate + error_bound)),
            RaabeValue::Undefined { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RaabeValue::Exact(_) => "Exact",
            RaabeValue::Numeric { .. } => "Numeric",
            RaabeValue::Undefined { .. } => "Undefined",
        }
    }
}

impl fmt::Display for RaabeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RaabeValue::Exact(q) => write!(f, "{}", q),
            RaabeValue::Numeric { estimate, error_bound, .. } => write!(f, "{} +/- {:.3e}", estimate, error_bound),
            RaabeValue::Undefined { reason, detail } => write!(f, "undefined ({}): {}", reason.code(), detail),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule not applicable: {0}")]
    RuleNotApplicable(String),
}

fn not_applicable(why: impl Into<String>) -> RuleError {
    RuleError::RuleNotApplicable(why.into())
}

/// Value of `a_n * b_n` from the values of the factors.
pub fn combine_product(p: &RaabeValue, q: &RaabeValue) -> RaabeValue {
    match (p, q) {
        (RaabeValue::Exact(a), RaabeValue::Exact(b)) => RaabeValue::Exact(a + b),
        (RaabeValue::Undefined { .. }, _) | (_, RaabeValue::Undefined { .. }) => {
            RaabeValue::undefined(UndefinedReason::NotApplicable, "a factor has no Raabe value")
        }
        _ => {
            let ((a_lo, a_hi), (b_lo, b_hi)) = (p.interval().unwrap(), q.interval().unwrap());
            let (a, ea) = ((a_lo + a_hi) / 2.0, (a_hi - a_lo) / 2.0);
            let (b, eb) = ((b_lo + b_hi) / 2.0, (b_hi - b_lo) / 2.0);
            RaabeValue::numeric(a + b, ea + eb)
        }
    }
}

/// Value of `a_n^k`.
pub fn combine_power(p: &RaabeValue, k: &BigRational) -> RaabeValue {
    match p {
        RaabeValue::Exact(a) => RaabeValue::Exact(a * k),
        RaabeValue::Numeric { estimate, error_bound, slow_trend } => {
            let kf = rational_to_f64(k);
            let trend = slow_trend.map(|t| match (t, kf < 0.0) {
                (Trend::Decreasing, true) => Trend::Increasing,
                (Trend::Increasing, true) => Trend::Decreasing,
                (t, false) => t,
            });
            if k.is_zero() {
                return RaabeValue::Exact(BigRational::zero());
            }
            RaabeValue::Numeric { estimate: kf * estimate, error_bound: kf.abs() * error_bound, slow_trend: trend }
        }
        RaabeValue::Undefined { .. } => p.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumOp {
    Add,
    Sub,
}

/// Value of `a_n + b_n` or `a_n - b_n` for certified-positive summands with
/// distinct values: the smaller of the two.
pub fn combine_sum(
    p: &RaabeValue,
    q: &RaabeValue,
    _op: SumOp,
    signs: [SignPattern; 2],
) -> Result<RaabeValue, RuleError> {
    if signs.iter().any(|s| *s != SignPattern::ConstantPositive) {
        return Err(not_applicable(format!(
            "summands must both be certified positive, got {:?} and {:?}",
            signs[0], signs[1]
        )));
    }
    match (p, q) {
        (RaabeValue::Exact(a), RaabeValue::Exact(b)) => {
            if a == b {
                Err(not_applicable(format!("both summands have value {}", a)))
            } else {
                Ok(RaabeValue::Exact(a.min(b).clone()))
            }
        }
        (RaabeValue::Undefined { .. }, _) | (_, RaabeValue::Undefined { .. }) => {
            Err(not_applicable("a summand has no Raabe value"))
        }
        _ => {
            let (a_lo, a_hi) = p.interval().unwrap();
            let (b_lo, b_hi) = q.interval().unwrap();
            if a_hi < b_lo {
                Ok(p.clone())
            } else if b_hi < a_lo {
                Ok(q.clone())
            } else {
                Err(not_applicable("summand value intervals overlap"))
            }
        }
    }
}

/// Value of `log(a*n+b)^k`, which is 0 for every rational `k`.
pub fn log_factor_value(factor: &Node) -> Result<RaabeValue, RuleError> {
    let arg = match factor {
        Node::Log(x) => x,
        Node::Pow(b, Exponent::Rational(_)) => match &**b {
            Node::Log(x) => x,
            _ => return Err(not_applicable(format!("`{}` is not a power of a logarithm", factor))),
        },
        Node::Div(one, b) if **one == Node::int(1) => return log_factor_value(b),
        _ => return Err(not_applicable(format!("`{}` is not a logarithm factor", factor))),
    };
    match arg.to_affine() {
        Some(a) if a.slope.is_positive() => Ok(RaabeValue::Exact(BigRational::zero())),
        _ => Err(not_applicable(format!("log argument `{}` is not a*n+b with a > 0", arg))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    PSeries,
    Hypergeometric,
    Product,
    Power,
    Sum,
    LogFactor,
    NumericFallback,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::PSeries => "PSeries",
            Rule::Hypergeometric => "Hypergeometric",
            Rule::Product => "Product",
            Rule::Power => "Power",
            Rule::Sum => "Sum",
            Rule::LogFactor => "LogFactor",
            Rule::NumericFallback => "NumericFallback",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuleParams {
    None,
    Power(BigRational),
    Sum(SumOp, [SignPattern; 2]),
}

/// One rule application; children are its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationTrace {
    pub rule: Rule,
    pub expr: String,
    pub value: RaabeValue,
    pub params: RuleParams,
    pub note: Option<String>,
    pub children: Vec<DerivationTrace>,
}

impl DerivationTrace {
    fn leaf(rule: Rule, node: &Node, value: RaabeValue) -> Self {
        DerivationTrace { rule, expr: node.to_string(), value, params: RuleParams::None, note: None, children: vec![] }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Recomputes this node's value from its children's recorded values.
    /// Leaves return their recorded value.
    pub fn replay(&self) -> RaabeValue {
        if self.children.is_empty() {
            return self.value.clone();
        }
        let vals: Vec<RaabeValue> = self.children.iter().map(|c| c.value.clone()).collect();
        match (&self.rule, &self.params) {
            (Rule::Product, _) => {
                let mut acc = vals[0].clone();
                for v in &vals[1..] {
                    acc = combine_product(&acc, v);
                }
                acc
            }
            (Rule::Power, RuleParams::Power(k)) => combine_power(&vals[0], k),
            (Rule::Sum, RuleParams::Sum(op, signs)) => combine_sum(&vals[0], &vals[1], *op, *signs)
                .unwrap_or_else(|e| RaabeValue::undefined(UndefinedReason::NotApplicable, e.to_string())),
            _ => self.value.clone(),
        }
    }

    /// Every node of the tree, parents before children.
    pub fn nodes(&self) -> Vec<&DerivationTrace> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }
}

/// Derives the Raabe value of `expr` with the default estimator settings.
pub fn derive_value(expr: &TermExpr) -> (RaabeValue, DerivationTrace) {
    derive_value_with(expr, &EstimatorConfig::default(), true)
}

/// As [`derive_value`]; `numeric` allows the estimator as a fallback.
pub fn derive_value_with(expr: &TermExpr, config: &EstimatorConfig, numeric: bool) -> (RaabeValue, DerivationTrace) {
    let d = Deriver { config, numeric };
    let trace = d.node(expr, expr.root());
    (trace.value.clone(), trace)
}

struct Deriver<'a> {
    config: &'a EstimatorConfig,
    numeric: bool,
}

impl Deriver<'_> {
    fn node(&self, whole: &TermExpr, node: &Node) -> DerivationTrace {
        let sub = if node == whole.root() { Ok(whole.clone()) } else { whole.subterm(node) };
        let sub = match sub {
            Ok(t) => t,
            Err(e) => {
                let v = RaabeValue::undefined(UndefinedReason::NotApplicable, format!("subterm `{}`: {}", node, e));
                return DerivationTrace::leaf(Rule::NumericFallback, node, v);
            }
        };
        if let Ok(r) = ratio_rational_fn(&sub) {
            return DerivationTrace::leaf(Rule::Hypergeometric, node, raabe_from_ratio(&r))
                .with_note(format!("|a_n/a_(n+1)| = {}", r));
        }
        if !node.depends_on_n() {
            return DerivationTrace::leaf(Rule::Hypergeometric, node, RaabeValue::Exact(BigRational::zero()))
                .with_note("n-free factor; ratio identically 1");
        }
        if let Some(t) = self.structural(&sub, node) {
            if !t.value.is_undefined() {
                return t;
            }
            if !self.numeric {
                return t;
            }
        }
        self.fallback(&sub, node)
    }

    fn fallback(&self, sub: &TermExpr, node: &Node) -> DerivationTrace {
        if !self.numeric {
            let v = RaabeValue::undefined(UndefinedReason::NotApplicable, "no symbolic rule applies");
            return DerivationTrace::leaf(Rule::NumericFallback, node, v).with_note("numeric estimation disabled");
        }
        let v = estimate_raabe(sub, self.config);
        DerivationTrace::leaf(Rule::NumericFallback, node, v)
    }

    fn structural(&self, whole: &TermExpr, node: &Node) -> Option<DerivationTrace> {
        match node {
            Node::Neg(a) | Node::Abs(a) => Some(self.node(whole, a)),
            Node::Pow(b, Exponent::Rational(k)) if **b == Node::Var => {
                Some(DerivationTrace::leaf(Rule::PSeries, node, RaabeValue::Exact(-k.clone())))
            }
            Node::Log(_) => {
                let v = log_factor_value(node).ok()?;
                Some(DerivationTrace::leaf(Rule::LogFactor, node, v))
            }
            Node::Mul(a, b) => Some(self.product(node, vec![self.node(whole, a), self.node(whole, b)])),
            Node::Div(a, b) => {
                let num = self.node(whole, a);
                let den = self.power(b, self.node(whole, b), -BigRational::one());
                Some(self.product(node, vec![num, den]))
            }
            Node::Pow(b, Exponent::Rational(k)) => {
                let inner = self.node(whole, b);
                Some(self.power(node, inner, k.clone()))
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                let op = if matches!(node, Node::Add(..)) { SumOp::Add } else { SumOp::Sub };
                let (ta, tb) = (whole.subterm(a).ok()?, whole.subterm(b).ok()?);
                let signs = [sign_split(&ta).0, sign_split(&tb).0];
                if signs.iter().any(|s| *s != SignPattern::ConstantPositive) {
                    return None;
                }
                let (ca, cb) = (self.node(whole, a), self.node(whole, b));
                let value = combine_sum(&ca.value, &cb.value, op, signs).ok()?;
                Some(DerivationTrace {
                    rule: Rule::Sum,
                    expr: node.to_string(),
                    value,
                    params: RuleParams::Sum(op, signs),
                    note: None,
                    children: vec![ca, cb],
                })
            }
            _ => None,
        }
    }

    fn product(&self, node: &Node, children: Vec<DerivationTrace>) -> DerivationTrace {
        let value = combine_product(&children[0].value, &children[1].value);
        DerivationTrace { rule: Rule::Product, expr: node.to_string(), value, params: RuleParams::None, note: None, children }
    }

    fn power(&self, node: &Node, inner: DerivationTrace, k: BigRational) -> DerivationTrace {
        let value = combine_power(&inner.value, &k);
        let unit = k.abs().is_one();
        let note = (inner.rule == Rule::LogFactor && !unit)
            .then(|| format!("log rule extended to exponent {} via the power rule", k));
        let expr = if k == -BigRational::one() && !matches!(node, Node::Pow(..)) {
            format!("1/({})", node)
        } else {
            node.to_string()
        };
        DerivationTrace { rule: Rule::Power, expr, value, params: RuleParams::Power(k), note, children: vec![inner] }
    }
}

/// Exponent `k` as a rational, for callers building power terms.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
