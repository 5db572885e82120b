//! Numerical estimation of the Raabe value from `r_n = n(|a_n/a_{n+1}| - 1)`
//! and `n log|a_n/a_{n+1}|`, sampled on a geometric grid.

use astro_float::{BigFloat, Consts};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{eval_node, rational_power, EvalError, EvalMode, Exponent, Node, TermExpr};
use crate::float::{self, RM};
use crate::hyperratio::{node_ratio, RationalFn};
use crate::rules::{RaabeValue, RatioLimit, Trend, UndefinedReason};

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub precision_bits: usize,
    /// Grid `n = 2^min_exponent ..= 2^max_exponent`.
    pub min_exponent: u32,
    pub max_exponent: u32,
    pub richardson_levels: usize,
    /// Consecutive indices inspected for oscillation at the top of the grid.
    pub oscillation_window: usize,
    pub tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            precision_bits: 256,
            min_exponent: 10,
            max_exponent: 20,
            richardson_levels: 4,
            oscillation_window: 64,
            tolerance: 1e-9,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), NumericError> {
        if self.precision_bits < 64 {
            return Err(NumericError::InvalidConfig(format!("precision {} < 64 bits", self.precision_bits)));
        }
        if self.max_exponent > 40 || self.min_exponent + 2 > self.max_exponent {
            return Err(NumericError::InvalidConfig(format!(
                "grid 2^{}..2^{} needs at least 3 points and n <= 2^40",
                self.min_exponent, self.max_exponent
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(NumericError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.oscillation_window < 4 {
            return Err(NumericError::InvalidConfig("oscillation window must be at least 4".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<u64> {
        (self.min_exponent..=self.max_exponent).map(|k| 1u64 << k).collect()
    }

    pub fn max_n(&self) -> u64 {
        1u64 << self.max_exponent
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum NumericError {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {need} samples, have {have}")]
    InsufficientSamples { have: usize, need: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

enum Factor {
    /// Exact `P/Q`; absolute value taken at evaluation.
    Rational(RationalFn),
    /// Evaluated pointwise at `n` and `n + 1`.
    Direct(Node),
}

/// `|a_n / a_{n+1}|` as a product of factor ratios raised to rational powers,
/// so that factorials are never evaluated and cancellation stays local.
pub struct RatioPlan {
    factors: Vec<(Factor, BigRational)>,
    start: u64,
}

impl RatioPlan {
    pub fn new(expr: &TermExpr) -> RatioPlan {
        let mut factors = Vec::new();
        collect(expr.root(), BigRational::one(), expr.start_index(), &mut factors);
        RatioPlan { factors, start: expr.start_index() }
    }

    /// The exact ratio when the whole term is hypergeometric.
    pub fn rational(&self) -> Option<&RationalFn> {
        match self.factors.as_slice() {
            [(Factor::Rational(r), k)] if k.is_one() => Some(r),
            _ => None,
        }
    }

    /// `lim |a_n / a_{n+1}|` read off the factors when each one's limit is
    /// known: rational factors exactly, `log(a*n+b)` factors tend to 1.
    pub fn structural_limit(&self) -> Option<RatioLimit> {
        let mut acc = RatioLimit::Finite(BigRational::one());
        for (f, k) in &self.factors {
            let base = match f {
                Factor::Rational(r) => r.limit(),
                Factor::Direct(Node::Log(x)) if x.to_affine().is_some_and(|a| a.slope.is_positive()) => {
                    RatioLimit::Finite(BigRational::one())
                }
                Factor::Direct(_) => return None,
            };
            acc = limit_product(&acc, &limit_power(&base, k))?;
        }
        Some(acc)
    }

    fn check(&self, n: u64) -> Result<(), EvalError> {
        if n < self.start {
            return Err(EvalError::BelowStartIndex { n, start: self.start });
        }
        Ok(())
    }

    /// `|a_n / a_{n+1}|` exactly, when the term is hypergeometric.
    pub fn exact_ratio(&self, n: u64) -> Option<BigRational> {
        self.rational().map(|r| r.eval(n).abs())
    }

    /// `ln |a_n / a_{n+1}|` with `wp` working bits.
    pub fn log_ratio(&self, n: u64, wp: usize, cc: &mut Consts) -> Result<BigFloat, EvalError> {
        self.check(n)?;
        let mut acc = BigFloat::from_u64(0, wp);
        for (f, k) in &self.factors {
            let ratio = match f {
                Factor::Rational(r) => float::from_rational(&r.eval(n).abs(), wp),
                Factor::Direct(node) => {
                    let a = eval_node(node, n, EvalMode::Float(wp))?.to_float(wp);
                    let b = eval_node(node, n + 1, EvalMode::Float(wp))?.to_float(wp);
                    if a.is_zero() || b.is_zero() {
                        return Err(EvalError::EvaluatesToZero(if a.is_zero() { n } else { n + 1 }));
                    }
                    a.abs().div(&b.abs(), wp, RM)
                }
            };
            let l = float::ln(&ratio, wp, cc);
            let term = if k.is_one() { l } else { l.mul(&float::from_rational(k, wp), wp, RM) };
            acc = acc.add(&term, wp, RM);
        }
        Ok(acc)
    }

    /// `|a_n / a_{n+1}|` with `wp` working bits.
    pub fn ratio(&self, n: u64, wp: usize, cc: &mut Consts) -> Result<BigFloat, EvalError> {
        self.check(n)?;
        if let Some(q) = self.exact_ratio(n) {
            return Ok(float::from_rational(&q, wp));
        }
        Ok(self.log_ratio(n, wp, cc)?.exp(wp, RM, cc))
    }

    /// `(r_n, s_n)`: the Raabe and Schlömilch sequence values at `n`.
    pub fn sample(&self, n: u64, precision_bits: usize) -> Result<(BigFloat, BigFloat), EvalError> {
        self.check(n)?;
        let wp = working_bits(n, precision_bits);
        let mut cc = float::consts();
        let nf = float::from_u64(n, wp);
        if let Some(q) = self.exact_ratio(n) {
            let r = (q.clone() - BigRational::one()) * BigRational::from_integer(BigInt::from(n));
            let s = float::ln(&float::from_rational(&q, wp), wp, &mut cc).mul(&nf, wp, RM);
            return Ok((float::from_rational(&r, precision_bits), float::round(s, precision_bits)));
        }
        let l = self.log_ratio(n, wp, &mut cc)?;
        let one = BigFloat::from_u64(1, wp);
        let r = l.exp(wp, RM, &mut cc).sub(&one, wp, RM).mul(&nf, wp, RM);
        let s = l.mul(&nf, wp, RM);
        Ok((float::round(r, precision_bits), float::round(s, precision_bits)))
    }
}

fn limit_power(l: &RatioLimit, k: &BigRational) -> RatioLimit {
    match l {
        RatioLimit::Zero if k.is_negative() => RatioLimit::Infinite,
        RatioLimit::Infinite if k.is_negative() => RatioLimit::Zero,
        RatioLimit::Zero | RatioLimit::Infinite => l.clone(),
        RatioLimit::Finite(c) => match rational_power(&c.abs(), k) {
            Some(v) => RatioLimit::Finite(v),
            None => RatioLimit::Approx(float::rational_to_f64(c).abs().powf(float::rational_to_f64(k))),
        },
        RatioLimit::Approx(x) => RatioLimit::Approx(x.powf(float::rational_to_f64(k))),
    }
}

fn limit_product(a: &RatioLimit, b: &RatioLimit) -> Option<RatioLimit> {
    use RatioLimit::*;
    Some(match (a, b) {
        (Zero, Infinite) | (Infinite, Zero) => return None,
        (Zero, _) | (_, Zero) => Zero,
        (Infinite, _) | (_, Infinite) => Infinite,
        (Finite(x), Finite(y)) => Finite(x * y),
        (Finite(x), Approx(y)) | (Approx(y), Finite(x)) => Approx(float::rational_to_f64(x) * y),
        (Approx(x), Approx(y)) => Approx(x * y),
    })
}

/// Bits needed so that `ratio - 1 ~ p/n` keeps the requested precision.
fn working_bits(n: u64, precision_bits: usize) -> usize {
    let log_n = 64 - n.leading_zeros() as usize;
    precision_bits + 2 * log_n + 64
}

fn collect(node: &Node, k: BigRational, start: u64, out: &mut Vec<(Factor, BigRational)>) {
    if k.is_zero() || !node.depends_on_n() {
        return;
    }
    if let Ok(r) = node_ratio(node, start) {
        out.push((Factor::Rational(r), k));
        return;
    }
    match node {
        Node::Neg(a) | Node::Abs(a) => collect(a, k, start, out),
        Node::Mul(a, b) => {
            collect(a, k.clone(), start, out);
            collect(b, k, start, out);
        }
        Node::Div(a, b) => {
            collect(a, k.clone(), start, out);
            collect(b, -k, start, out);
        }
        Node::Pow(b, Exponent::Rational(e)) => collect(b, k * e, start, out),
        other => out.push((Factor::Direct(other.clone()), k)),
    }
}

fn sequence(expr: &TermExpr, ns: &[u64], precision_bits: usize) -> Result<Vec<(u64, BigFloat, BigFloat)>, NumericError> {
    let plan = RatioPlan::new(expr);
    let out: Result<Vec<_>, EvalError> = ns
        .par_iter()
        .map(|&n| plan.sample(n, precision_bits).map(|(r, s)| (n, r, s)))
        .collect();
    Ok(out?)
}

/// `(n, r_n)` with `r_n = n(|a_n/a_{n+1}| - 1)`.
pub fn raabe_sequence(expr: &TermExpr, ns: &[u64], precision_bits: usize) -> Result<Vec<(u64, BigFloat)>, NumericError> {
    Ok(sequence(expr, ns, precision_bits)?.into_iter().map(|(n, r, _)| (n, r)).collect())
}

/// `(n, n log|a_n/a_{n+1}|)`.
pub fn schlomilch_sequence(
    expr: &TermExpr,
    ns: &[u64],
    precision_bits: usize,
) -> Result<Vec<(u64, BigFloat)>, NumericError> {
    Ok(sequence(expr, ns, precision_bits)?.into_iter().map(|(n, _, s)| (n, s)).collect())
}

/// Sign-alternating first differences whose magnitude does not shrink: the
/// mean over the later half of the window is at least the earlier half's.
pub fn is_oscillating(values: &[f64]) -> bool {
    if values.len() < 4 {
        return false;
    }
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if d.iter().any(|x| *x == 0.0 || !x.is_finite()) {
        return false;
    }
    if d.windows(2).any(|w| (w[0] > 0.0) == (w[1] > 0.0)) {
        return false;
    }
    let half = d.len() / 2;
    let mean = |xs: &[f64]| xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
    let (early, late) = (mean(&d[..half]), mean(&d[d.len() - half..]));
    late >= early * (1.0 - 1e-12)
}

/// Richardson table in powers of `1/n` over a ratio-2 grid; returns the
/// diagonal extrapolants.
fn richardson(values: &[f64], levels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        let mut row = vec![v];
        for j in 1..=levels.min(k) {
            let f = (1u64 << j) as f64;
            let prev = &table[k - 1];
            row.push((f * row[j - 1] - prev[j - 1]) / (f - 1.0));
        }
        table.push(row);
    }
    let diag = table.iter().map(|r| *r.last().unwrap()).collect();
    (diag, table)
}

/// Limit estimate from samples on a ratio-2 grid.
pub fn extrapolate(samples: &[(u64, f64)], config: &EstimatorConfig) -> Result<RaabeValue, NumericError> {
    let levels = config.richardson_levels;
    if samples.len() < levels + 1 || samples.len() < 3 {
        return Err(NumericError::InsufficientSamples { have: samples.len(), need: (levels + 1).max(3) });
    }
    let values: Vec<f64> = samples.iter().map(|(_, v)| *v).collect();
    let tail = &values[values.len().saturating_sub(config.oscillation_window)..];
    if is_oscillating(tail) {
        return Ok(RaabeValue::undefined(
            UndefinedReason::OscillatingRatio,
            "successive values alternate without shrinking",
        ));
    }
    let (diag, _) = richardson(&values, levels);
    let k = diag.len() - 1;
    let d_last = (diag[k] - diag[k - 1]).abs();
    let d_prev = (diag[k - 1] - diag[k - 2]).abs();
    let scale = values.iter().fold(0f64, |m, v| m.max(v.abs()));
    // rounding in the table is amplified by at most prod (2^j+1)/(2^j-1) < 8
    let floor = (64.0 * f64::EPSILON * scale).max(f64::MIN_POSITIVE);
    let contracting = d_last <= config.tolerance || d_last <= d_prev / 2.0;
    if contracting {
        return Ok(RaabeValue::numeric(diag[k], d_last + floor));
    }
    // logarithmic-type decay: bracket by the raw tail, the extrapolant and a
    // fit in 1/log n, and report the spread honestly
    let (n1, v1) = samples[samples.len() - 2];
    let (n2, v2) = samples[samples.len() - 1];
    let (l1, l2) = ((n1 as f64).ln(), (n2 as f64).ln());
    let log_fit = (v2 * l2 - v1 * l1) / (l2 - l1);
    let candidates = [v2, diag[k], log_fit];
    let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = values.len() / 2;
    let tail = &values[half..];
    let trend = if tail.windows(2).all(|w| w[1] < w[0]) {
        Some(Trend::Decreasing)
    } else if tail.windows(2).all(|w| w[1] > w[0]) {
        Some(Trend::Increasing)
    } else {
        None
    };
    Ok(RaabeValue::Numeric { estimate: (lo + hi) / 2.0, error_bound: (hi - lo) / 2.0 + d_last + floor, slow_trend: trend })
}

/// Everything the estimator computed, for tables and diagnostics.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub raabe: Vec<(u64, f64)>,
    pub schlomilch: Vec<(u64, f64)>,
    pub raabe_limit: RaabeValue,
    pub schlomilch_limit: RaabeValue,
    pub value: RaabeValue,
}

/// Detects a ratio limit other than 1 from the log-ratios at the top of the
/// grid: a genuine Raabe limit makes `ln R_n` decay like `1/n`.
fn ratio_limit_check(samples: &[(u64, f64)]) -> Option<RatioLimit> {
    let k = samples.len();
    let log_ratio = |(n, s): (u64, f64)| s / n as f64;
    let (l1, l2) = (log_ratio(samples[k - 2]), log_ratio(samples[k - 1]));
    if l2.abs() < 1e-2 || l2.abs() < 0.9 * l1.abs() {
        return None;
    }
    if (l2 - l1).abs() <= 1e-3 * l2.abs().max(1.0) {
        Some(RatioLimit::Approx(l2.exp()))
    } else if l2 > l1 {
        Some(RatioLimit::Infinite)
    } else {
        Some(RatioLimit::Zero)
    }
}

/// Runs both sequences on the configured grid and extrapolates them.
pub fn estimate(expr: &TermExpr, config: &EstimatorConfig) -> Result<Estimate, NumericError> {
    config.validate()?;
    let grid: Vec<u64> = config.grid().into_iter().filter(|&n| n >= expr.start_index()).collect();
    let need = (config.richardson_levels + 1).max(3);
    if grid.len() < need {
        return Err(NumericError::InsufficientSamples { have: grid.len(), need });
    }
    let seq = sequence(expr, &grid, config.precision_bits)?;
    let raabe: Vec<(u64, f64)> = seq.iter().map(|(n, r, _)| (*n, float::to_f64(r))).collect();
    let schlomilch: Vec<(u64, f64)> = seq.iter().map(|(n, _, s)| (*n, float::to_f64(s))).collect();

    if let Some(limit) = ratio_limit_check(&schlomilch) {
        let v = RaabeValue::undefined(
            UndefinedReason::RatioLimitNotOne(limit.clone()),
            format!("|a_n/a_(n+1)| appears to tend to {}", limit),
        );
        return Ok(Estimate { raabe, schlomilch, raabe_limit: v.clone(), schlomilch_limit: v.clone(), value: v });
    }

    let top = config.max_n();
    let first = top.saturating_sub(config.oscillation_window as u64 - 1).max(expr.start_index());
    let window: Vec<u64> = (first..=top).collect();
    let tail = sequence(expr, &window, config.precision_bits)?;
    let tail_r: Vec<f64> = tail.iter().map(|(_, r, _)| float::to_f64(r)).collect();
    let tail_s: Vec<f64> = tail.iter().map(|(_, _, s)| float::to_f64(s)).collect();
    if is_oscillating(&tail_r) || is_oscillating(&tail_s) {
        let (lo, hi) = tail_r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let v = RaabeValue::undefined(
            UndefinedReason::OscillatingRatio,
            format!("r_n alternates between about {:.4} and {:.4} for n in {}..={}", lo, hi, first, top),
        );
        return Ok(Estimate { raabe, schlomilch, raabe_limit: v.clone(), schlomilch_limit: v.clone(), value: v });
    }

    let raabe_limit = extrapolate(&raabe, config)?;
    let schlomilch_limit = extrapolate(&schlomilch, config)?;
    let value = merge(&raabe_limit, &schlomilch_limit);
    Ok(Estimate { raabe, schlomilch, raabe_limit, schlomilch_limit, value })
}

/// Combines the two extrapolations; the bound widens to cover both when they
/// disagree.
fn merge(a: &RaabeValue, b: &RaabeValue) -> RaabeValue {
    match (a, b) {
        (
            RaabeValue::Numeric { estimate: e1, error_bound: b1, slow_trend: t1 },
            RaabeValue::Numeric { estimate: e2, error_bound: b2, .. },
        ) => {
            if (e1 - e2).abs() <= b1 + b2 {
                RaabeValue::Numeric { estimate: *e1, error_bound: b1.max(*b2), slow_trend: *t1 }
            } else {
                let lo = (e1 - b1).min(e2 - b2);
                let hi = (e1 + b1).max(e2 + b2);
                RaabeValue::Numeric { estimate: (lo + hi) / 2.0, error_bound: (hi - lo) / 2.0, slow_trend: *t1 }
            }
        }
        (u @ RaabeValue::Undefined { .. }, _) | (_, u @ RaabeValue::Undefined { .. }) => u.clone(),
        _ => a.clone(),
    }
}

/// Numerical Raabe value; estimator failures become `Undefined`.
pub fn estimate_raabe(expr: &TermExpr, config: &EstimatorConfig) -> RaabeValue {
    match estimate(expr, config) {
        Ok(e) => e.value,
        Err(e) => RaabeValue::undefined(UndefinedReason::NotApplicable, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn term(s: &str) -> TermExpr {
        parse(s).unwrap()
    }

    fn numeric(v: &RaabeValue) -> (f64, f64) {
        match v {
            RaabeValue::Numeric { estimate, error_bound, .. } => (*estimate, *error_bound),
            other => panic!("expected a numeric value, got {:?}", other),
        }
    }

    #[test]
    fn raabe_sequence_values() {
        let r = raabe_sequence(&term("1/n"), &[1, 7, 1000], 128).unwrap();
        assert!(r.iter().all(|(_, v)| float::to_f64(v) == 1.0));
        let r = raabe_sequence(&term("1/n^2"), &[10], 128).unwrap();
        assert_eq!(float::to_f64(&r[0].1), 2.1);
        let r = raabe_sequence(&term("1"), &[5, 500], 128).unwrap();
        assert!(r.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn schlomilch_values() {
        let s = schlomilch_sequence(&term("1/n"), &[10], 128).unwrap();
        // 10*log(11/10) to 20 digits, from an independent multiprecision run
        assert!((float::to_f64(&s[0].1) - 0.953_101_798_043_248_600_4).abs() < 1e-16);
        let s = schlomilch_sequence(&term("1"), &[10], 128).unwrap();
        assert!(s[0].1.is_zero());
    }

    #[test]
    fn one_level_recovers_linear_model() {
        let samples: Vec<(u64, f64)> = (4..12).map(|k| 1u64 << k).map(|n| (n, 0.75 + 3.0 / n as f64)).collect();
        let cfg = EstimatorConfig { richardson_levels: 1, ..Default::default() };
        let (e, b) = numeric(&extrapolate(&samples, &cfg).unwrap());
        assert!((e - 0.75).abs() < 1e-14 && b < 1e-13);
        assert!(matches!(extrapolate(&samples[..1], &cfg), Err(NumericError::InsufficientSamples { .. })));
    }

    #[test]
    fn square_root_term() {
        let (e, b) = numeric(&estimate_raabe(&term("1/sqrt(n)"), &EstimatorConfig::default()));
        assert!((e - 0.5).abs() <= b && b < 1e-8, "{} {}", e, b);
    }

    #[test]
    fn cubic_and_central_binomial() {
        let (e, b) = numeric(&estimate_raabe(&term("1/n^3"), &EstimatorConfig::default()));
        assert!((e - 3.0).abs() <= b && b < 1e-8);
        let (e, b) = numeric(&estimate_raabe(&term("alt*(2n)!/(4^n*(n!)^2)"), &EstimatorConfig::default()));
        assert!((e - 0.5).abs() <= b && b < 1e-6);
    }

    #[test]
    fn oscillation_is_reported() {
        let v = estimate_raabe(&term("1 + alt/n"), &EstimatorConfig::default());
        assert!(matches!(v, RaabeValue::Undefined { reason: UndefinedReason::OscillatingRatio, .. }), "{:?}", v);
        let samples: Vec<(u64, f64)> = (1..=20).map(|n| (n, if n % 2 == 1 { 2.0 } else { -2.0 })).collect();
        let v = extrapolate(&samples, &EstimatorConfig::default()).unwrap();
        assert!(matches!(v, RaabeValue::Undefined { reason: UndefinedReason::OscillatingRatio, .. }));
    }

    #[test]
    fn logarithmic_decay_gets_a_wide_bound() {
        let v = estimate_raabe(&term("1/log(n+1)"), &EstimatorConfig::default());
        let (e, b) = numeric(&v);
        assert!(e > 0.0 && e.abs() <= b, "{} {}", e, b);
        assert!(matches!(v, RaabeValue::Numeric { slow_trend: Some(Trend::Decreasing), .. }));
    }

    #[test]
    fn non_unit_ratio_limits() {
        let v = estimate_raabe(&term("1/(2^n*log(n+1))"), &EstimatorConfig::default());
        match v {
            RaabeValue::Undefined { reason: UndefinedReason::RatioLimitNotOne(RatioLimit::Approx(l)), .. } => {
                assert!((l - 2.0).abs() < 1e-3)
            }
            other => panic!("{:?}", other),
        }
    }
}
