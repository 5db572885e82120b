//! Convergence verdicts from a Raabe value and a sign pattern.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::expr::{SignPattern, TermExpr};
use crate::numeric::{estimate, EstimatorConfig, RatioPlan};
use crate::rules::{RaabeValue, RatioLimit, UndefinedReason};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    AbsolutelyConvergent,
    ConditionallyConvergent,
    Divergent,
    ConditionallyConvergentOrDivergent,
    ConvergentTypeUnknown,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::AbsolutelyConvergent => "AbsolutelyConvergent",
            Verdict::ConditionallyConvergent => "ConditionallyConvergent",
            Verdict::Divergent => "Divergent",
            Verdict::ConditionallyConvergentOrDivergent => "ConditionallyConvergentOrDivergent",
            Verdict::ConvergentTypeUnknown => "ConvergentTypeUnknown",
            Verdict::Inconclusive => "Inconclusive",
        }
    }

    /// Verdicts that commit to convergence or divergence.
    pub fn is_hard(&self) -> bool {
        !matches!(self, Verdict::Inconclusive | Verdict::ConditionallyConvergentOrDivergent)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// Raabe's test for general series.
    Raabe,
    /// The alternating-series form, for `0 < p <= 1`.
    AlternatingRaabe,
    RatioTest,
    None,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::Raabe => "RaabeTest",
            Theorem::AlternatingRaabe => "AlternatingRaabeTest",
            Theorem::RatioTest => "RatioTest",
            Theorem::None => "None",
        }
    }
}

/// Decision boundary a numeric interval straddles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub theorem: Theorem,
    /// The value the verdict was read from.
    pub p: RaabeValue,
    pub boundary: Option<Boundary>,
    pub note: Option<String>,
}

impl Classification {
    pub fn p_kind(&self) -> &'static str {
        self.p.kind()
    }
}

/// Where `p` lies relative to the two decision boundaries.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Region {
    Negative,
    Zero,
    Between,
    One,
    Above,
}

fn region_verdict(r: Region, alternating: bool) -> (Verdict, Theorem, Option<String>) {
    match r {
        Region::Above => (Verdict::AbsolutelyConvergent, Theorem::Raabe, None),
        Region::Negative => (Verdict::Divergent, Theorem::Raabe, None),
        Region::One if alternating => (Verdict::ConvergentTypeUnknown, Theorem::AlternatingRaabe, None),
        Region::One => (Verdict::Inconclusive, Theorem::Raabe, Some("p = 1: the test gives no information".into())),
        Region::Between if alternating => (Verdict::ConditionallyConvergent, Theorem::AlternatingRaabe, None),
        Region::Between | Region::Zero => (Verdict::ConditionallyConvergentOrDivergent, Theorem::Raabe, None),
    }
}

/// `lim |a_{n+1}/a_n|` from the backward ratio limit.
fn forward(limit: &RatioLimit) -> RatioLimit {
    match limit {
        RatioLimit::Zero => RatioLimit::Infinite,
        RatioLimit::Infinite => RatioLimit::Zero,
        RatioLimit::Finite(c) => RatioLimit::Finite(c.recip()),
        RatioLimit::Approx(x) => RatioLimit::Approx(1.0 / x),
    }
}

/// Ratio-test verdict from `lim |a_{n+1}/a_n|`; `None` at 1 or too close to
/// call.
fn ratio_test(forward_limit: &RatioLimit) -> Option<Verdict> {
    match forward_limit {
        RatioLimit::Zero => Some(Verdict::AbsolutelyConvergent),
        RatioLimit::Infinite => Some(Verdict::Divergent),
        RatioLimit::Finite(c) if *c < BigRational::one() => Some(Verdict::AbsolutelyConvergent),
        RatioLimit::Finite(c) if *c > BigRational::one() => Some(Verdict::Divergent),
        RatioLimit::Approx(x) if *x < 1.0 - 1e-6 => Some(Verdict::AbsolutelyConvergent),
        RatioLimit::Approx(x) if *x > 1.0 + 1e-6 => Some(Verdict::Divergent),
        _ => None,
    }
}

/// Maps a Raabe value and sign pattern to a verdict.
pub fn classify(p: &RaabeValue, sign: SignPattern) -> Classification {
    let alternating = matches!(sign, SignPattern::Alternating(_));
    let mk = |verdict, theorem, boundary, note| Classification { verdict, theorem, p: p.clone(), boundary, note };
    match p {
        RaabeValue::Exact(q) => {
            let region = if q.is_zero() {
                Region::Zero
            } else if q.is_one() {
                Region::One
            } else if *q < BigRational::zero() {
                Region::Negative
            } else if *q < BigRational::one() {
                Region::Between
            } else {
                Region::Above
            };
            let (v, t, note) = region_verdict(region, alternating);
            mk(v, t, None, note)
        }
        RaabeValue::Numeric { estimate, error_bound, .. } => {
            let (lo, hi) = (estimate - error_bound, estimate + error_bound);
            let straddles = |b: f64| lo <= b && b <= hi;
            if straddles(0.0) || straddles(1.0) || !lo.is_finite() || !hi.is_finite() {
                let boundary = if straddles(0.0) { Boundary::Zero } else { Boundary::One };
                let note = format!("interval [{:.3e}, {:.3e}] touches p = {}", lo, hi, if boundary == Boundary::Zero { 0 } else { 1 });
                return mk(Verdict::Inconclusive, Theorem::None, Some(boundary), Some(note));
            }
            let region = if lo > 1.0 {
                Region::Above
            } else if hi < 0.0 {
                Region::Negative
            } else {
                Region::Between
            };
            let (v, t, note) = region_verdict(region, alternating);
            mk(v, t, None, note)
        }
        RaabeValue::Undefined { reason: UndefinedReason::RatioLimitNotOne(limit), .. } => {
            let fwd = forward(limit);
            match ratio_test(&fwd) {
                Some(v) => mk(v, Theorem::RatioTest, None, Some(format!("lim |a_(n+1)/a_n| = {}", fwd))),
                None => mk(Verdict::Inconclusive, Theorem::None, None, Some(format!("lim |a_(n+1)/a_n| = {}", fwd))),
            }
        }
        RaabeValue::Undefined { reason, detail } => {
            mk(Verdict::Inconclusive, Theorem::None, None, Some(format!("{}: {}", reason.code(), detail)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermLimit {
    TermsVanish,
    TermsUnbounded,
    Unknown,
}

impl TermLimit {
    pub fn name(&self) -> &'static str {
        match self {
            TermLimit::TermsVanish => "TermsVanish",
            TermLimit::TermsUnbounded => "TermsUnbounded",
            TermLimit::Unknown => "Unknown",
        }
    }
}

/// What the value says about `a_n` itself: `p > 0` forces `a_n -> 0`, `p < 0`
/// forces `|a_n|` unbounded.
pub fn term_limit_diagnosis(p: &RaabeValue) -> TermLimit {
    match p.interval() {
        Some((lo, _)) if lo > 0.0 => TermLimit::TermsVanish,
        Some((_, hi)) if hi < 0.0 => TermLimit::TermsUnbounded,
        _ => TermLimit::Unknown,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PrecheckOutcome {
    Proceed,
    DecidedByRatioTest(Verdict),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Precheck {
    pub outcome: PrecheckOutcome,
    /// `lim |a_{n+1}/a_n|` when known.
    pub limit: Option<RatioLimit>,
    /// True when the limit was obtained symbolically.
    pub certified: bool,
    pub warning: Option<String>,
}

impl Precheck {
    /// The backward limit `lim |a_n/a_{n+1}|` as a Raabe value carrying it.
    pub fn as_raabe_value(&self) -> Option<RaabeValue> {
        let PrecheckOutcome::DecidedByRatioTest(_) = self.outcome else {
            return None;
        };
        let back = forward(self.limit.as_ref()?);
        Some(RaabeValue::undefined(
            UndefinedReason::RatioLimitNotOne(back),
            format!("lim |a_(n+1)/a_n| = {}", self.limit.as_ref()?),
        ))
    }
}

fn decide(limit: RatioLimit, certified: bool, warning: Option<String>) -> Precheck {
    let outcome = match ratio_test(&limit) {
        Some(v) => PrecheckOutcome::DecidedByRatioTest(v),
        None => PrecheckOutcome::Proceed,
    };
    Precheck { outcome, limit: Some(limit), certified, warning }
}

/// The ratio test, run before Raabe's test: only a ratio limit of 1 leaves
/// anything for the latter to decide.
pub fn ratio_precheck(expr: &TermExpr) -> Precheck {
    ratio_precheck_with(expr, &EstimatorConfig::default())
}

/// The precheck without numerical evidence: the limit is known only when
/// every factor's limit is.
pub fn ratio_precheck_symbolic(expr: &TermExpr) -> Precheck {
    match RatioPlan::new(expr).structural_limit() {
        Some(back) => decide(forward(&back), true, None),
        None => Precheck {
            outcome: PrecheckOutcome::Proceed,
            limit: None,
            certified: false,
            warning: Some("ratio limit not known symbolically".into()),
        },
    }
}

pub fn ratio_precheck_with(expr: &TermExpr, config: &EstimatorConfig) -> Precheck {
    let plan = RatioPlan::new(expr);
    if let Some(back) = plan.structural_limit() {
        return decide(forward(&back), true, None);
    }
    // numeric: the log-ratio at the top of the grid
    let cfg = EstimatorConfig {
        min_exponent: config.max_exponent.saturating_sub(2),
        richardson_levels: 2,
        ..config.clone()
    };
    match estimate(expr, &cfg) {
        Ok(e) => {
            if let RaabeValue::Undefined { reason: UndefinedReason::RatioLimitNotOne(back), .. } = &e.value {
                decide(forward(back), false, None)
            } else if let RaabeValue::Undefined { reason: UndefinedReason::OscillatingRatio, .. } = &e.value {
                Precheck {
                    outcome: PrecheckOutcome::Proceed,
                    limit: None,
                    certified: false,
                    warning: Some("ratio oscillates; no limit observed".into()),
                }
            } else {
                Precheck {
                    outcome: PrecheckOutcome::Proceed,
                    limit: Some(RatioLimit::Approx(1.0)),
                    certified: false,
                    warning: Some("ratio limit 1 observed numerically, not proven".into()),
                }
            }
        }
        Err(err) => Precheck {
            outcome: PrecheckOutcome::Proceed,
            limit: None,
            certified: false,
            warning: Some(format!("ratio limit unknown: {}", err)),
        },
    }
}
