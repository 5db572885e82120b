//! Brute-force evidence about a series: partial sums, alternating brackets
//! and the growth rate of absolute partial sums.

use astro_float::BigFloat;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::classify::Verdict;
use crate::expr::{eval, sign_split, EvalError, EvalMode, Sign, SignPattern, TermExpr, Value};
use crate::float::{self, RM};
use crate::numeric::RatioPlan;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("the series is not certified alternating")]
    NotAlternating,
    #[error("|a_n| is not decreasing over n in {from}..={to}")]
    NotDecreasing { from: u64, to: u64 },
    #[error("range {lo}..{hi} must span at least two decades")]
    RangeTooShort { lo: u64, hi: u64 },
    #[error("m = {m} is below the start index {start}")]
    BelowStart { m: u64, start: u64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub m_max: u64,
    pub precision_bits: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { m_max: 100_000, precision_bits: 128 }
    }
}

/// Compensated (Neumaier) accumulator.
struct Sum {
    s: BigFloat,
    c: BigFloat,
    p: usize,
}

impl Sum {
    fn new(p: usize) -> Sum {
        Sum { s: BigFloat::from_u64(0, p), c: BigFloat::from_u64(0, p), p }
    }

    fn add(&mut self, x: &BigFloat) {
        let t = self.s.add(x, self.p, RM);
        let err = if self.s.abs().cmp(&x.abs()).unwrap_or(0) >= 0 {
            self.s.sub(&t, self.p, RM).add(x, self.p, RM)
        } else {
            x.sub(&t, self.p, RM).add(&self.s, self.p, RM)
        };
        self.c = self.c.add(&err, self.p, RM);
        self.s = t;
    }

    fn value(&self) -> BigFloat {
        self.s.add(&self.c, self.p, RM)
    }
}

/// Terms `a_n` for consecutive `n`, by the ratio recurrence when the sign
/// pattern is known and by direct evaluation otherwise.
struct Terms<'a> {
    expr: &'a TermExpr,
    plan: Option<RatioPlan>,
    pattern: SignPattern,
    n: u64,
    magnitude: Option<BigFloat>,
    p: usize,
    cc: astro_float::Consts,
}

impl<'a> Terms<'a> {
    fn new(expr: &'a TermExpr, p: usize) -> Terms<'a> {
        let (pattern, _) = sign_split(expr);
        let plan = (pattern != SignPattern::Unknown).then(|| RatioPlan::new(expr));
        Terms { expr, plan, pattern, n: expr.start_index(), magnitude: None, p, cc: float::consts() }
    }

    fn sign_at(&self, n: u64) -> bool {
        let offset = n - self.expr.start_index();
        match self.pattern {
            SignPattern::ConstantPositive => true,
            SignPattern::ConstantNegative => false,
            SignPattern::Alternating(first) => (first == Sign::Plus) == (offset % 2 == 0),
            SignPattern::Unknown => true,
        }
    }

    /// `(n, a_n, |a_n|)` for the next index.
    fn next_term(&mut self) -> Result<(u64, BigFloat, BigFloat), EvalError> {
        let n = self.n;
        let wp = self.p + 32;
        let value = match (&self.plan, &self.magnitude) {
            (Some(plan), Some(prev)) => {
                let mag = match plan.exact_ratio(n - 1) {
                    Some(q) => prev.div(&float::from_rational(&q, wp), wp, RM),
                    None => prev.div(&plan.ratio(n - 1, wp, &mut self.cc)?, wp, RM),
                };
                if self.sign_at(n) {
                    mag
                } else {
                    mag.neg()
                }
            }
            _ => eval(self.expr, n, EvalMode::Float(wp))?.to_float(wp),
        };
        let mag = value.abs();
        if self.plan.is_some() {
            self.magnitude = Some(mag.clone());
        }
        self.n += 1;
        Ok((n, value, mag))
    }
}

/// Partial sums, absolute partial sums and term magnitudes at chosen `m`.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub m: u64,
    pub sum: BigFloat,
    pub abs_sum: BigFloat,
    pub term: BigFloat,
}

struct Scan {
    points: Vec<Checkpoint>,
    /// `|a_n|` over the last `tail_len` indices up to the largest checkpoint.
    tail: Vec<f64>,
    tail_from: u64,
}

fn scan(expr: &TermExpr, checkpoints: &[u64], p: usize, tail_len: u64) -> Result<Scan, OracleError> {
    let start = expr.start_index();
    let mut cps: Vec<u64> = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if let Some(&m) = cps.first() {
        if m < start {
            return Err(OracleError::BelowStart { m, start });
        }
    }
    let last = *cps.last().unwrap_or(&start);
    let tail_from = last.saturating_sub(tail_len).max(start);
    let mut terms = Terms::new(expr, p);
    let (mut sum, mut abs_sum) = (Sum::new(p + 32), Sum::new(p + 32));
    let mut points = Vec::with_capacity(cps.len());
    let mut tail = Vec::new();
    let mut next = cps.iter().peekable();
    while let Some(&&m) = next.peek() {
        let (n, a, mag) = terms.next_term()?;
        sum.add(&a);
        abs_sum.add(&mag);
        if n >= tail_from {
            tail.push(float::to_f64(&mag));
        }
        if n == m {
            points.push(Checkpoint {
                m,
                sum: float::round(sum.value(), p),
                abs_sum: float::round(abs_sum.value(), p),
                term: float::round(mag, p),
            });
            next.next();
        }
    }
    Ok(Scan { points, tail, tail_from })
}

/// `S_m = sum_{n=start..m} a_n` for every `m` up to `m_max`.
pub fn partial_sums(expr: &TermExpr, m_max: u64, mode: EvalMode) -> Result<Vec<(u64, Value)>, OracleError> {
    let ms: Vec<u64> = (expr.start_index()..=m_max).collect();
    partial_sums_at(expr, &ms, mode)
}

/// `S_m` at the given `m` only.
pub fn partial_sums_at(expr: &TermExpr, ms: &[u64], mode: EvalMode) -> Result<Vec<(u64, Value)>, OracleError> {
    match mode {
        EvalMode::Exact => {
            let mut out = Vec::new();
            let mut s = BigRational::zero();
            let last = ms.iter().copied().max().unwrap_or(0);
            for n in expr.start_index()..=last {
                match eval(expr, n, EvalMode::Exact)? {
                    Value::Exact(q) => s += q,
                    Value::Float(_) => unreachable!("exact mode yields rationals"),
                }
                if ms.contains(&n) {
                    out.push((n, Value::Exact(s.clone())));
                }
            }
            Ok(out)
        }
        EvalMode::Float(p) => {
            let scan = scan(expr, ms, p, 0)?;
            Ok(scan.points.into_iter().map(|c| (c.m, Value::Float(c.sum))).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub m: u64,
}

impl Bracket {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Length of the tail on which `|a_n|` must decrease for a bracket.
const BRACKET_TAIL: u64 = 1000;

/// `S_m` and `S_{m+1}`, which enclose the sum of an alternating series with
/// decreasing terms.
pub fn alternating_bracket(expr: &TermExpr, m: u64) -> Result<Bracket, OracleError> {
    brackets(expr, &[m]).map(|mut v| v.remove(0))
}

fn brackets(expr: &TermExpr, ms: &[u64]) -> Result<Vec<Bracket>, OracleError> {
    let (pattern, _) = sign_split(expr);
    if !matches!(pattern, SignPattern::Alternating(_)) {
        return Err(OracleError::NotAlternating);
    }
    let mut cps: Vec<u64> = ms.iter().flat_map(|&m| [m, m + 1]).collect();
    cps.sort_unstable();
    let s = scan(expr, &cps, 128, BRACKET_TAIL)?;
    if s.tail.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OracleError::NotDecreasing { from: s.tail_from, to: s.tail_from + s.tail.len() as u64 - 1 });
    }
    let at = |m: u64| s.points.iter().find(|c| c.m == m).expect("checkpoint");
    Ok(ms
        .iter()
        .map(|&m| {
            let (a, b) = (float::to_f64(&at(m).sum), float::to_f64(&at(m + 1).sum));
            Bracket { lower: a.min(b), upper: a.max(b), width: float::to_f64(&at(m + 1).term), m }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    /// Fitted exponent `s` in `T_m ~ m^s`.
    pub slope: f64,
    /// Root-mean-square residual of the fit in `log T`.
    pub residual: f64,
    /// `T` fits `a + b log m` with `b > 0` markedly better than a power law.
    pub log_like: bool,
    /// `T_hi / T_lo - 1` across the fitted window.
    pub relative_increase: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

fn log_grid(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let k = ((b - a) * per_decade as f64).ceil() as usize;
    let mut v: Vec<u64> = (0..=k).map(|i| 10f64.powf(a + (b - a) * i as f64 / k as f64).round() as u64).collect();
    v.dedup();
    v
}

/// Least-squares slope of `log T_m` against `log m`, `T_m = sum |a_n|`,
/// over the top two decades of `lo..=hi`.
pub fn abs_growth_slope(expr: &TermExpr, lo: u64, hi: u64) -> Result<GrowthFit, OracleError> {
    if hi < lo.saturating_mul(100) {
        return Err(OracleError::RangeTooShort { lo, hi });
    }
    let from = (hi / 100).max(expr.start_index());
    let grid = log_grid(from, hi, 20);
    let s = scan(expr, &grid, 128, 0)?;
    Ok(fit_growth(&s.points))
}

fn fit_growth(points: &[Checkpoint]) -> GrowthFit {
    let xs: Vec<f64> = points.iter().map(|c| (c.m as f64).ln()).collect();
    let ts: Vec<f64> = points.iter().map(|c| float::to_f64(&c.abs_sum)).collect();
    let ys: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let (slope, _, residual) = least_squares(&xs, &ys);
    // T = a + b log m, residual measured in log T like the power law
    let (b, a, _) = least_squares(&xs, &ts);
    let log_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let model = a + b * x;
            if model > 0.0 {
                (y - model.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    let relative_increase = ts[ts.len() - 1] / ts[0] - 1.0;
    let log_like = b > 0.0 && relative_increase > GROWTH_MIN && log_rms < residual / 2.0;
    GrowthFit { slope, residual, log_like, relative_increase }
}

/// Absolute sums rising less than this (relatively) over two decades count as
/// bounded.
const BOUNDED_MAX: f64 = 0.01;
/// ... and rising more than this count as growing.
const GROWTH_MIN: f64 = 0.05;
const SLOPE_MIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalVerdict {
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl EmpiricalVerdict {
    /// Always "Empirical": evidence, not a theorem.
    pub fn confidence(&self) -> &'static str {
        "Empirical"
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub partial_sums: Vec<(u64, f64)>,
    pub bracket: Option<Bracket>,
    pub growth: GrowthFit,
    pub empirical: EmpiricalVerdict,
}

/// Gathers all evidence in one pass up to `config.m_max` and reads a verdict
/// from it.
pub fn oracle_report(expr: &TermExpr, config: &OracleConfig) -> Result<OracleReport, OracleError> {
    let hi = config.m_max;
    let from = (hi / 100).max(expr.start_index());
    let mut grid = log_grid(from, hi, 20);
    let alternating = matches!(sign_split(expr).0, SignPattern::Alternating(_));
    let bracket_ms = [hi / 10, hi - 1];
    if alternating {
        grid.extend(bracket_ms.iter().flat_map(|&m| [m, m + 1]));
    }
    grid.sort_unstable();
    grid.dedup();
    let grid: Vec<u64> = grid.into_iter().filter(|&m| m >= expr.start_index()).collect();
    let s = scan(expr, &grid, config.precision_bits, BRACKET_TAIL)?;
    let at = |m: u64| s.points.iter().find(|c| c.m == m);

    let fit_points: Vec<Checkpoint> =
        s.points.iter().filter(|c| c.m >= from && c.m <= hi).cloned().collect();
    let growth = fit_growth(&fit_points);
    let mut notes = Vec::new();

    let first_term = float::to_f64(&fit_points[0].term);
    let last_term = float::to_f64(&fit_points[fit_points.len() - 1].term);
    let vanishing = last_term < 0.5 * first_term;
    notes.push(format!("|a_m| falls from {:.3e} to {:.3e} over m in {}..={}", first_term, last_term, from, hi));

    let decreasing_tail = s.tail.windows(2).all(|w| w[1] < w[0]);
    let bracket = if alternating && decreasing_tail {
        let mk = |m: u64| -> Option<Bracket> {
            let (a, b) = (float::to_f64(&at(m)?.sum), float::to_f64(&at(m + 1)?.sum));
            Some(Bracket { lower: a.min(b), upper: a.max(b), width: float::to_f64(&at(m + 1)?.term), m })
        };
        match (mk(bracket_ms[0]), mk(bracket_ms[1])) {
            (Some(wide), Some(narrow)) => {
                let nested = wide.lower <= narrow.lower && narrow.upper <= wide.upper && narrow.width < wide.width;
                notes.push(format!(
                    "brackets at m = {} and {} are {}nested",
                    wide.m,
                    narrow.m,
                    if nested { "" } else { "not " }
                ));
                nested.then_some(narrow)
            }
            _ => None,
        }
    } else {
        None
    };

    let bounded = growth.relative_increase < BOUNDED_MAX;
    let growing = growth.relative_increase > GROWTH_MIN && (growth.slope > SLOPE_MIN || growth.log_like);
    notes.push(format!(
        "sum |a_n| grows like m^{:.3} (residual {:.1e}, relative increase {:.3e}{})",
        growth.slope,
        growth.residual,
        growth.relative_increase,
        if growth.log_like { ", logarithmic" } else { "" }
    ));

    let pattern = sign_split(expr).0;
    let verdict = if !vanishing {
        Verdict::Divergent
    } else if bounded {
        Verdict::AbsolutelyConvergent
    } else if growing && bracket.is_some() {
        Verdict::ConditionallyConvergent
    } else if growing && matches!(pattern, SignPattern::ConstantPositive | SignPattern::ConstantNegative) {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };

    let partial_sums = fit_points.iter().map(|c| (c.m, float::to_f64(&c.sum))).collect();
    Ok(OracleReport { partial_sums, bracket, growth, empirical: EmpiricalVerdict { verdict, notes } })
}

/// Evidence-based verdict; never merged with theorem-backed ones.
pub fn empirical_classify(expr: &TermExpr, config: &OracleConfig) -> Result<EmpiricalVerdict, OracleError> {
    Ok(oracle_report(expr, config)?.empirical)
}
