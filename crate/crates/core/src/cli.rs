//! Command-line front end and the JSON report schema.

use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    classify, ratio_precheck_symbolic, ratio_precheck_with, term_limit_diagnosis, Boundary, Classification, Precheck,
    PrecheckOutcome, Verdict,
};
use crate::expr::{parse, sign_split, ParseError, TermExpr};
use crate::numeric::{estimate, estimate_raabe, EstimatorConfig, NumericError};
use crate::oracle::{oracle_report, OracleConfig, OracleError, OracleReport};
use crate::rules::{
    derive_value_with, DerivationTrace, RaabeValue, RatioLimit, Rule, RuleParams, SumOp, Trend, UndefinedReason,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(#[from] NumericError),
    #[error("{0}")]
    Oracle(#[from] OracleError),
}

#[derive(Parser, Debug)]
#[command(name = "raabe", version, about = "Raabe values and convergence verdicts for series given by a general term")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub analyze: AnalyzeArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Full pipeline: ratio test, Raabe value, verdict (the default)
    Analyze(AnalyzeArgs),
    /// Raabe value only
    Value(AnalyzeArgs),
    /// Raabe and Schlömilch sequences on the sampling grid
    Table(AnalyzeArgs),
    /// Empirical evidence from partial sums only
    Oracle(AnalyzeArgs),
    /// Run the built-in fixture suite
    Selftest {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct AnalyzeArgs {
    /// General term a_n, e.g. "alt*(2n)!/(4^n*(n!)^2)"
    #[arg(allow_hyphen_values = true)]
    pub expr: Option<String>,
    #[arg(long)]
    pub json: bool,
    /// Skip the symbolic rules
    #[arg(long, conflicts_with = "symbolic_only")]
    pub numeric_only: bool,
    /// Never fall back to numerical estimation
    #[arg(long)]
    pub symbolic_only: bool,
    /// Largest sample index, a power of two
    #[arg(long, value_name = "2^k")]
    pub max_n: Option<u64>,
    #[arg(long, value_name = "BITS")]
    pub precision_bits: Option<usize>,
    /// Exit with status 2 when the Raabe value is undefined
    #[arg(long)]
    pub strict: bool,
    /// Attach the empirical partial-sum report
    #[arg(long)]
    pub oracle: bool,
    /// Print the derivation trace (always present in JSON)
    #[arg(long)]
    pub trace: bool,
}

impl AnalyzeArgs {
    pub fn config(&self) -> Result<EstimatorConfig, CliError> {
        let mut cfg = EstimatorConfig::default();
        if let Some(n) = self.max_n {
            if !n.is_power_of_two() {
                return Err(CliError::Usage(format!("--max-n {} is not a power of two", n)));
            }
            cfg.max_exponent = n.trailing_zeros();
            let span = cfg.richardson_levels as u32 + 1;
            cfg.min_exponent = cfg.min_exponent.min(cfg.max_exponent.saturating_sub(span));
        }
        if let Some(p) = self.precision_bits {
            cfg.precision_bits = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn term(&self) -> Result<(String, TermExpr), CliError> {
        let text = self.expr.clone().ok_or_else(|| CliError::Usage("missing expression argument".into()))?;
        let t = parse(&text)?;
        Ok((text, t))
    }
}

// ---- JSON schema ----

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl RationalJson {
    pub fn from_rational(q: &BigRational) -> Self {
        RationalJson { num: q.numer().to_string(), den: q.denom().to_string() }
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        let n: BigInt = self.num.parse().ok()?;
        let d: BigInt = self.den.parse().ok()?;
        (d != BigInt::from(0)).then(|| BigRational::new(n, d))
    }
}

fn float_str(x: f64) -> String {
    format!("{:e}", x)
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct LimitJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<RationalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx: Option<String>,
}

impl LimitJson {
    pub fn from_limit(l: &RatioLimit) -> Self {
        let (kind, value, approx) = match l {
            RatioLimit::Zero => ("Zero", None, None),
            RatioLimit::Infinite => ("Infinite", None, None),
            RatioLimit::Finite(q) => ("Finite", Some(RationalJson::from_rational(q)), None),
            RatioLimit::Approx(x) => ("Approx", None, Some(float_str(*x))),
        };
        LimitJson { kind: kind.into(), value, approx }
    }

    pub fn to_limit(&self) -> Option<RatioLimit> {
        Some(match self.kind.as_str() {
            "Zero" => RatioLimit::Zero,
            "Infinite" => RatioLimit::Infinite,
            "Finite" => RatioLimit::Finite(self.value.as_ref()?.to_rational()?),
            "Approx" => RatioLimit::Approx(self.approx.as_ref()?.parse().ok()?),
            _ => return None,
        })
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct RaabeJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<RationalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bound: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl RaabeJson {
    pub fn from_value(v: &RaabeValue) -> Self {
        let mut out = RaabeJson {
            kind: v.kind().into(),
            value: None,
            estimate: None,
            error_bound: None,
            trend: None,
            reason: None,
            limit: None,
            detail: None,
        };
        match v {
            RaabeValue::Exact(q) => out.value = Some(RationalJson::from_rational(q)),
            RaabeValue::Numeric { estimate, error_bound, slow_trend } => {
                out.estimate = Some(float_str(*estimate));
                out.error_bound = Some(float_str(*error_bound));
                out.trend = slow_trend.map(|t| format!("{:?}", t));
            }
            RaabeValue::Undefined { reason, detail } => {
                out.reason = Some(reason.code().into());
                if let UndefinedReason::RatioLimitNotOne(l) = reason {
                    out.limit = Some(LimitJson::from_limit(l));
                }
                out.detail = Some(detail.clone());
            }
        }
        out
    }

    /// Rebuilds the value; `None` when the JSON is malformed.
    pub fn to_value(&self) -> Option<RaabeValue> {
        Some(match self.kind.as_str() {
            "Exact" => RaabeValue::Exact(self.value.as_ref()?.to_rational()?),
            "Numeric" => RaabeValue::Numeric {
                estimate: self.estimate.as_ref()?.parse().ok()?,
                error_bound: self.error_bound.as_ref()?.parse().ok()?,
                slow_trend: match self.trend.as_deref() {
                    None => None,
                    Some("Decreasing") => Some(Trend::Decreasing),
                    Some("Increasing") => Some(Trend::Increasing),
                    Some(_) => return None,
                },
            },
            "Undefined" => {
                let reason = match self.reason.as_deref()? {
                    "RatioLimitNotOne" => UndefinedReason::RatioLimitNotOne(self.limit.as_ref()?.to_limit()?),
                    "OscillatingRatio" => UndefinedReason::OscillatingRatio,
                    "NotApplicable" => UndefinedReason::NotApplicable,
                    _ => return None,
                };
                RaabeValue::Undefined { reason, detail: self.detail.clone().unwrap_or_default() }
            }
            _ => return None,
        })
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ParamsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<RationalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TraceJson {
    pub rule: String,
    pub expr: String,
    pub value: RaabeJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TraceJson>,
}

impl TraceJson {
    pub fn from_trace(t: &DerivationTrace) -> Self {
        let params = match &t.params {
            RuleParams::None => None,
            RuleParams::Power(k) => {
                Some(ParamsJson { exponent: Some(RationalJson::from_rational(k)), op: None, signs: None })
            }
            RuleParams::Sum(op, signs) => Some(ParamsJson {
                exponent: None,
                op: Some(match op {
                    SumOp::Add => "Add".into(),
                    SumOp::Sub => "Sub".into(),
                }),
                signs: Some(signs.iter().map(|s| s.to_string()).collect()),
            }),
        };
        TraceJson {
            rule: t.rule.name().into(),
            expr: t.expr.clone(),
            value: RaabeJson::from_value(&t.value),
            params,
            note: t.note.clone(),
            children: t.children.iter().map(TraceJson::from_trace).collect(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct PrecheckJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitJson>,
    /// `Proceed`, or the ratio test's verdict.
    pub verdict: String,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl PrecheckJson {
    fn from_precheck(p: &Precheck) -> Self {
        PrecheckJson {
            limit: p.limit.as_ref().map(LimitJson::from_limit),
            verdict: match &p.outcome {
                PrecheckOutcome::Proceed => "Proceed".into(),
                PrecheckOutcome::DecidedByRatioTest(v) => v.name().into(),
            },
            certified: p.certified,
            warning: p.warning.clone(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct ClassificationJson {
    pub verdict: String,
    pub theorem: String,
    pub p_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ClassificationJson {
    pub fn from_classification(c: &Classification) -> Self {
        ClassificationJson {
            verdict: c.verdict.name().into(),
            theorem: c.theorem.name().into(),
            p_kind: c.p_kind().into(),
            boundary: c.boundary.map(|b| match b {
                Boundary::Zero => "0".into(),
                Boundary::One => "1".into(),
            }),
            note: c.note.clone(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TableRow {
    pub n: u64,
    pub raabe: String,
    pub schlomilch: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct NumericTable {
    pub rows: Vec<TableRow>,
    pub raabe_limit: RaabeJson,
    pub schlomilch_limit: RaabeJson,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct BracketJson {
    pub m: u64,
    pub lower: String,
    pub upper: String,
    pub width: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct GrowthJson {
    pub slope: String,
    pub residual: String,
    pub log_like: bool,
    pub relative_increase: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct EmpiricalJson {
    pub verdict: String,
    pub confidence: String,
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SumJson {
    pub m: u64,
    pub sum: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct OracleJson {
    pub partial_sums: Vec<SumJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<BracketJson>,
    pub abs_growth: GrowthJson,
    pub empirical: EmpiricalJson,
}

impl OracleJson {
    pub fn from_report(r: &OracleReport) -> Self {
        OracleJson {
            partial_sums: r.partial_sums.iter().map(|(m, s)| SumJson { m: *m, sum: float_str(*s) }).collect(),
            bracket: r.bracket.as_ref().map(|b| BracketJson {
                m: b.m,
                lower: float_str(b.lower),
                upper: float_str(b.upper),
                width: float_str(b.width),
            }),
            abs_growth: GrowthJson {
                slope: float_str(r.growth.slope),
                residual: float_str(r.growth.residual),
                log_like: r.growth.log_like,
                relative_increase: float_str(r.growth.relative_increase),
            },
            empirical: EmpiricalJson {
                verdict: r.empirical.verdict.name().into(),
                confidence: r.empirical.confidence().into(),
                notes: r.empirical.notes.clone(),
            },
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub input: String,
    pub normalized: String,
    pub start_index: u64,
    pub ratio_precheck: PrecheckJson,
    pub raabe: RaabeJson,
    pub trace: Vec<TraceJson>,
    pub sign_pattern: String,
    pub classification: ClassificationJson,
    pub term_diagnosis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_table: Option<NumericTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleJson>,
    pub version: String,
}

// ---- pipeline ----

fn numeric_table(expr: &TermExpr, cfg: &EstimatorConfig) -> Result<NumericTable, CliError> {
    let e = estimate(expr, cfg)?;
    let rows = e
        .raabe
        .iter()
        .zip(&e.schlomilch)
        .map(|((n, r), (_, s))| TableRow { n: *n, raabe: float_str(*r), schlomilch: float_str(*s) })
        .collect();
    Ok(NumericTable {
        rows,
        raabe_limit: RaabeJson::from_value(&e.raabe_limit),
        schlomilch_limit: RaabeJson::from_value(&e.schlomilch_limit),
    })
}

/// Runs the full analysis; the second value is the domain-level Raabe value.
pub fn analyze(args: &AnalyzeArgs) -> Result<(AnalysisReport, RaabeValue), CliError> {
    let cfg = args.config()?;
    let (input, expr) = args.term()?;
    let (pattern, _) = sign_split(&expr);
    let precheck =
        if args.symbolic_only { ratio_precheck_symbolic(&expr) } else { ratio_precheck_with(&expr, &cfg) };

    let (value, trace) = match precheck.as_raabe_value() {
        Some(v) => (v, None),
        None if args.numeric_only => {
            let v = estimate_raabe(&expr, &cfg);
            let t = DerivationTrace {
                rule: Rule::NumericFallback,
                expr: expr.to_string(),
                value: v.clone(),
                params: RuleParams::None,
                note: Some("symbolic rules skipped".into()),
                children: vec![],
            };
            (v, Some(t))
        }
        None => {
            let (v, t) = derive_value_with(&expr, &cfg, !args.symbolic_only);
            (v, Some(t))
        }
    };

    let classification = classify(&value, pattern);
    let used_numeric = trace.as_ref().is_some_and(|t| t.nodes().iter().any(|n| n.rule == Rule::NumericFallback));
    let numeric_table = if used_numeric && !args.symbolic_only { numeric_table(&expr, &cfg).ok() } else { None };
    let oracle = if args.oracle {
        Some(OracleJson::from_report(&oracle_report(&expr, &OracleConfig::default())?))
    } else {
        None
    };

    let report = AnalysisReport {
        input,
        normalized: expr.to_string(),
        start_index: expr.start_index(),
        ratio_precheck: PrecheckJson::from_precheck(&precheck),
        raabe: RaabeJson::from_value(&value),
        trace: trace.iter().map(TraceJson::from_trace).collect(),
        sign_pattern: pattern.to_string(),
        classification: ClassificationJson::from_classification(&classification),
        term_diagnosis: term_limit_diagnosis(&value).name().into(),
        numeric_table,
        oracle,
        version: VERSION.into(),
    };
    Ok((report, value))
}

// ---- text rendering ----

fn raabe_text(r: &RaabeJson) -> String {
    match r.kind.as_str() {
        "Exact" => {
            let v = r.value.as_ref().expect("exact value");
            if v.den == "1" {
                format!("{} (exact)", v.num)
            } else {
                format!("{}/{} (exact)", v.num, v.den)
            }
        }
        "Numeric" => format!(
            "{} +/- {} (numeric{})",
            r.estimate.as_deref().unwrap_or("?"),
            r.error_bound.as_deref().unwrap_or("?"),
            r.trend.as_ref().map(|t| format!(", slowly {}", t.to_lowercase())).unwrap_or_default()
        ),
        _ => format!(
            "undefined: {} ({})",
            r.reason.as_deref().unwrap_or("?"),
            r.detail.as_deref().unwrap_or("")
        ),
    }
}

fn limit_text(l: &LimitJson) -> String {
    match (l.kind.as_str(), &l.value, &l.approx) {
        ("Finite", Some(v), _) if v.den == "1" => v.num.clone(),
        ("Finite", Some(v), _) => format!("{}/{}", v.num, v.den),
        ("Approx", _, Some(x)) => format!("~{}", x),
        ("Zero", ..) => "0".into(),
        ("Infinite", ..) => "inf".into(),
        _ => "?".into(),
    }
}

fn trace_text(t: &TraceJson, depth: usize, out: &mut String) {
    let _ = write!(out, "{}{} `{}` => {}", "  ".repeat(depth + 1), t.rule, t.expr, raabe_text(&t.value));
    if let Some(note) = &t.note {
        let _ = write!(out, "  [{}]", note);
    }
    out.push('\n');
    for c in &t.children {
        trace_text(c, depth + 1, out);
    }
}

fn oracle_text(o: &OracleJson, out: &mut String) {
    let _ = writeln!(out, "empirical:      {} ({})", o.empirical.verdict, o.empirical.confidence);
    if let Some(b) = &o.bracket {
        let _ = writeln!(out, "  bracket at m = {}: [{}, {}]", b.m, b.lower, b.upper);
    }
    for n in &o.empirical.notes {
        let _ = writeln!(out, "  {}", n);
    }
}

pub fn report_text(r: &AnalysisReport, with_trace: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "input:          {}", r.input);
    let _ = writeln!(out, "normalized:     {}", r.normalized);
    let _ = writeln!(out, "start index:    {}", r.start_index);
    let p = &r.ratio_precheck;
    let _ = writeln!(
        out,
        "ratio test:     lim |a(n+1)/a(n)| = {}{} => {}",
        p.limit.as_ref().map(limit_text).unwrap_or_else(|| "?".into()),
        if p.certified { "" } else { " (uncertified)" },
        p.verdict
    );
    if let Some(w) = &p.warning {
        let _ = writeln!(out, "  warning: {}", w);
    }
    let _ = writeln!(out, "raabe value:    {}", raabe_text(&r.raabe));
    let _ = writeln!(out, "sign pattern:   {}", r.sign_pattern);
    let c = &r.classification;
    let _ = writeln!(out, "verdict:        {} (by {})", c.verdict, c.theorem);
    if let Some(note) = &c.note {
        let _ = writeln!(out, "  {}", note);
    }
    let _ = writeln!(out, "terms:          {}", r.term_diagnosis);
    if with_trace {
        out.push_str("trace:\n");
        for t in &r.trace {
            trace_text(t, 0, &mut out);
        }
    }
    if let Some(o) = &r.oracle {
        oracle_text(o, &mut out);
    }
    out
}

// ---- self test ----

/// `(term, expected verdict, expected exact value)`.
pub const FIXTURES: &[(&str, Verdict, Option<(i64, i64)>)] = &[
    ("alt*(2n-1)!/(4^n*(n!)^2)", Verdict::AbsolutelyConvergent, Some((3, 2))),
    ("alt*(2n)!/(4^n*(n!)^2)", Verdict::ConditionallyConvergent, Some((1, 2))),
    ("alt*(2n+1)!/(4^n*(n!)^2)", Verdict::Divergent, Some((-1, 2))),
    ("6*n^4-11*n^3-3*n^2+7*n+5", Verdict::Divergent, Some((-4, 1))),
    ("alt*sqrt((n^2-2*n+3)/(5*n^3-7*n^2+11*n+13))", Verdict::ConditionallyConvergent, Some((1, 2))),
    ("1/((n+1)*log(n+1)^2)", Verdict::Inconclusive, Some((1, 1))),
    ("alt/n^(1/4)", Verdict::ConditionallyConvergent, Some((1, 4))),
    ("alt/n^(1/2)", Verdict::ConditionallyConvergent, Some((1, 2))),
    ("alt/n^(3/4)", Verdict::ConditionallyConvergent, Some((3, 4))),
    ("1/n^(1/4)", Verdict::ConditionallyConvergentOrDivergent, Some((1, 4))),
    ("1/n^(1/2)", Verdict::ConditionallyConvergentOrDivergent, Some((1, 2))),
    ("1/n^(3/4)", Verdict::ConditionallyConvergentOrDivergent, Some((3, 4))),
    ("1/n", Verdict::Inconclusive, Some((1, 1))),
    ("alt/n", Verdict::ConvergentTypeUnknown, Some((1, 1))),
    ("1/log(n+1)", Verdict::ConditionallyConvergentOrDivergent, Some((0, 1))),
    ("1/2^n", Verdict::AbsolutelyConvergent, None),
    ("n!", Verdict::Divergent, None),
];

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SelftestRow {
    pub input: String,
    pub expected: String,
    pub got: String,
    pub pass: bool,
}

pub fn selftest() -> Vec<SelftestRow> {
    FIXTURES
        .iter()
        .map(|(text, verdict, value)| {
            let args = AnalyzeArgs { expr: Some(text.to_string()), ..Default::default() };
            let want_value = value.map(|(a, b)| RaabeValue::Exact(BigRational::new(a.into(), b.into())));
            let expected = match &want_value {
                Some(v) => format!("{} {}", v, verdict.name()),
                None => verdict.name().to_string(),
            };
            let (got, pass) = match analyze(&args) {
                Ok((r, v)) => {
                    let value_ok = want_value.as_ref().is_none_or(|w| *w == v);
                    let shown = match v {
                        RaabeValue::Exact(_) => format!("{} {}", v, r.classification.verdict),
                        _ => r.classification.verdict.clone(),
                    };
                    (shown, value_ok && r.classification.verdict == verdict.name())
                }
                Err(e) => (format!("error: {}", e), false),
            };
            SelftestRow { input: text.to_string(), expected, got, pass }
        })
        .collect()
}

// ---- entry point ----

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn dispatch(cli: Cli) -> Result<(i32, String), CliError> {
    match cli.command {
        None => run_analyze(&cli.analyze),
        Some(Command::Analyze(a)) => run_analyze(&a),
        Some(Command::Value(a)) => {
            let (r, v) = analyze(&a)?;
            let code = if a.strict && v.is_undefined() { 2 } else { 0 };
            let text = if a.json {
                json(&serde_json::json!({ "input": r.input, "raabe": r.raabe, "version": r.version }))
            } else {
                raabe_text(&r.raabe) + "\n"
            };
            Ok((code, text))
        }
        Some(Command::Table(a)) => {
            let cfg = a.config()?;
            let (_, expr) = a.term()?;
            let t = numeric_table(&expr, &cfg)?;
            if a.json {
                return Ok((0, json(&t)));
            }
            let mut out = format!("{:>10}  {:>24}  {:>24}\n", "n", "r_n", "s_n");
            for row in &t.rows {
                let _ = writeln!(out, "{:>10}  {:>24}  {:>24}", row.n, row.raabe, row.schlomilch);
            }
            let _ = writeln!(out, "r limit: {}", raabe_text(&t.raabe_limit));
            let _ = writeln!(out, "s limit: {}", raabe_text(&t.schlomilch_limit));
            Ok((0, out))
        }
        Some(Command::Oracle(a)) => {
            let (_, expr) = a.term()?;
            let o = OracleJson::from_report(&oracle_report(&expr, &OracleConfig::default())?);
            if a.json {
                return Ok((0, json(&o)));
            }
            let mut out = String::new();
            oracle_text(&o, &mut out);
            Ok((0, out))
        }
        Some(Command::Selftest { json: as_json }) => {
            let rows = selftest();
            let code = if rows.iter().all(|r| r.pass) { 0 } else { 1 };
            if as_json {
                return Ok((code, json(&rows)));
            }
            let mut out = String::new();
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{} {:<48} {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.input,
                    if r.pass { r.got.clone() } else { format!("expected {}, got {}", r.expected, r.got) }
                );
            }
            Ok((code, out))
        }
    }
}

fn run_analyze(a: &AnalyzeArgs) -> Result<(i32, String), CliError> {
    let (r, v) = analyze(a)?;
    let code = if a.strict && v.is_undefined() { 2 } else { 0 };
    let out = if a.json { json(&r) } else { report_text(&r, a.trace) };
    Ok((code, out))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output { code, stdout: text, stderr: String::new() }
            } else {
                Output { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match dispatch(cli) {
        Ok((code, stdout)) => Output { code, stdout, stderr: String::new() },
        Err(e) => Output { code: 1, stdout: String::new(), stderr: format!("error: {}\n", e) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(expr: &str) -> AnalyzeArgs {
        AnalyzeArgs { expr: Some(expr.into()), ..Default::default() }
    }

    #[test]
    fn report_round_trips() {
        for text in ["alt*(2n)!/(4^n*(n!)^2)", "1/2^n", "1/log(n+1)"] {
            let (r, v) = analyze(&args(text)).unwrap();
            let s = serde_json::to_string(&r).unwrap();
            let back: AnalysisReport = serde_json::from_str(&s).unwrap();
            assert_eq!(back, r);
            assert_eq!(back.raabe.to_value().unwrap(), v);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["raabe", "n+"]).code, 1);
        assert_eq!(run(["raabe", "n-n"]).code, 1);
        assert_eq!(run(["raabe", "--strict", "1/2^n"]).code, 2);
        assert_eq!(run(["raabe", "1/2^n"]).code, 0);
        assert_eq!(run(["raabe", "--max-n", "1000", "1/n"]).code, 1);
        let out = run(["raabe", "analyze", "--json", "6*n^4-11*n^3-3*n^2+7*n+5"]);
        assert_eq!(out.code, 0);
        let r: AnalysisReport = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(r.raabe.value, Some(RationalJson { num: "-4".into(), den: "1".into() }));
        assert_eq!(r.classification.verdict, "Divergent");
    }

    #[test]
    fn fixtures_pass() {
        for row in selftest() {
            assert!(row.pass, "{:?}", row);
        }
    }
}
