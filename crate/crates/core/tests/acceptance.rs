//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints its PASS/FAIL line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use raabe::classify::{classify, ratio_precheck, PrecheckOutcome, Verdict};
use raabe::cli::{analyze, AnalyzeArgs, FIXTURES};
use raabe::expr::{eval, parse, sign_split, EvalMode, TermExpr};
use raabe::float::{self, RM};
use raabe::hyperratio::{raabe_from_ratio, ratio_rational_fn};
use raabe::numeric::{estimate, estimate_raabe, raabe_sequence, EstimatorConfig};
use raabe::oracle::{abs_growth_slope, alternating_bracket, empirical_classify, OracleConfig};
use raabe::rules::{combine_sum, derive_value, RaabeValue, RatioLimit, Rule, RuleParams, SumOp, UndefinedReason};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn term(s: &str) -> TermExpr {
    parse(s).unwrap_or_else(|e| panic!("`{}`: {}", s, e))
}

fn verdict_of(s: &str) -> (RaabeValue, Verdict) {
    let t = term(s);
    let (v, _) = derive_value(&t);
    let c = classify(&v, sign_split(&t).0);
    (v, c.verdict)
}

fn expect(s: &str, p: Option<BigRational>, verdict: Verdict) -> Result<(), String> {
    let (v, got) = verdict_of(s);
    if let Some(p) = p {
        ensure(v == RaabeValue::Exact(p.clone()), || format!("{}: value {} != {}", s, v, p))?;
    }
    ensure(got == verdict, || format!("{}: verdict {:?} != {:?}", s, got, verdict))
}

fn central_binomial_triple() -> Check {
    expect("alt*(2n-1)!/(4^n*(n!)^2)", Some(q(3, 2)), Verdict::AbsolutelyConvergent)?;
    expect("alt*(2n)!/(4^n*(n!)^2)", Some(q(1, 2)), Verdict::ConditionallyConvergent)?;
    expect("alt*(2n+1)!/(4^n*(n!)^2)", Some(q(-1, 2)), Verdict::Divergent)?;
    Ok("3/2, 1/2, -1/2 exact".into())
}

fn polynomial_and_radical() -> Check {
    expect("6*n^4-11*n^3-3*n^2+7*n+5", Some(q(-4, 1)), Verdict::Divergent)?;
    let s = "alt*sqrt((n^2-2*n+3)/(5*n^3-7*n^2+11*n+13))";
    expect(s, Some(q(1, 2)), Verdict::ConditionallyConvergent)?;
    let (_, trace) = derive_value(&term(s));
    let via_power = trace.nodes().iter().any(|n| {
        n.rule == Rule::Power
            && n.params == RuleParams::Power(q(1, 2))
            && n.children[0].value == RaabeValue::Exact(q(1, 1))
    });
    ensure(via_power, || format!("no power step from quotient value 1:\n{:#?}", trace))?;
    Ok("-4 divergent; 1/2 via power rule on 1".into())
}

fn boundary_fixtures() -> Check {
    expect("1/((n+1)*log(n+1)^2)", Some(q(1, 1)), Verdict::Inconclusive)?;
    for (a, b) in [(1, 4), (1, 2), (3, 4)] {
        expect(&format!("alt/n^({}/{})", a, b), Some(q(a, b)), Verdict::ConditionallyConvergent)?;
        expect(&format!("1/n^({}/{})", a, b), Some(q(a, b)), Verdict::ConditionallyConvergentOrDivergent)?;
    }
    expect("1/n", Some(q(1, 1)), Verdict::Inconclusive)?;
    Ok("log-squared and p-series fixtures".into())
}

fn estimator_accuracy() -> Check {
    let mut worst = 0f64;
    for (s, p) in [("n^2", -2.0), ("1/n^(1/2)", 0.5), ("1/n", 1.0), ("1/n^3", 3.0)] {
        let t = term(s);
        let RaabeValue::Numeric { estimate: est, .. } = estimate_raabe(&t, &EstimatorConfig::default()) else {
            return Err(format!("{}: not numeric", s));
        };
        ensure((est - p).abs() < 1e-6, || format!("{}: {} vs {}", s, est, p))?;
        worst = worst.max((est - p).abs());
        let e = estimate(&t, &EstimatorConfig::default()).map_err(|e| e.to_string())?;
        let ((r_lo, r_hi), (s_lo, s_hi)) = (e.raabe_limit.interval().unwrap(), e.schlomilch_limit.interval().unwrap());
        let gap = ((r_lo + r_hi) / 2.0 - (s_lo + s_hi) / 2.0).abs();
        ensure(gap <= (r_hi - r_lo) / 2.0 + (s_hi - s_lo) / 2.0, || format!("{}: forms disagree by {}", s, gap))?;
    }
    Ok(format!("max error {:.1e}", worst))
}

fn oscillation_guard() -> Check {
    let t = term("1+alt/n");
    let v = estimate_raabe(&t, &EstimatorConfig::default());
    ensure(matches!(v, RaabeValue::Undefined { reason: UndefinedReason::OscillatingRatio, .. }), || {
        format!("estimator gave {}", v)
    })?;
    let parts = [sign_split(&term("1")).0, sign_split(&term("alt/n")).0];
    let (p1, _) = derive_value(&term("1"));
    let (p2, _) = derive_value(&term("alt/n"));
    ensure(combine_sum(&p1, &p2, SumOp::Add, parts).is_err(), || "sum rule accepted".into())?;
    let (dv, trace) = derive_value(&t);
    ensure(trace.nodes().iter().all(|n| n.rule != Rule::Sum), || "pipeline used the sum rule".into())?;
    ensure(dv.is_undefined(), || format!("pipeline gave {}", dv))?;
    Ok("undefined, sum rule refused".into())
}

fn log_regime() -> Check {
    let t = term("1/log(n+1)");
    ensure(derive_value(&t).0 == RaabeValue::Exact(q(0, 1)), || "symbolic value is not 0".into())?;
    let cfg = EstimatorConfig::default();
    let seq = raabe_sequence(&t, &cfg.grid(), cfg.precision_bits).map_err(|e| e.to_string())?;
    let r: Vec<f64> = seq.iter().map(|(_, v)| float::to_f64(v)).collect();
    ensure(r.iter().all(|x| *x > 0.0), || format!("non-positive r_n: {:?}", r))?;
    ensure(r.windows(2).all(|w| w[1] < w[0]), || format!("r_n not decreasing: {:?}", r))?;
    let top = *r.last().unwrap();
    ensure(top < 0.08, || format!("r at 2^20 = {}", top))?;
    let (lo, hi) = estimate_raabe(&t, &cfg).interval().ok_or("no interval")?;
    ensure(lo <= 0.0 && 0.0 <= hi, || format!("bound [{}, {}] excludes 0", lo, hi))?;
    Ok(format!("r(2^20) = {:.4}, bound [{:.4}, {:.4}]", top, lo, hi))
}

fn hyper_value(t: &TermExpr) -> Result<BigRational, String> {
    let r = ratio_rational_fn(t).map_err(|e| e.to_string())?;
    match raabe_from_ratio(&r) {
        RaabeValue::Exact(p) => Ok(p),
        other => Err(format!("{}: {}", t, other)),
    }
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn rule_properties() -> Check {
    let mut runner = TestRunner::new(Config { rng_seed: proptest::test_runner::RngSeed::Fixed(7), ..Config::default() });
    let cases = 200;
    for _ in 0..cases {
        let (a, b) = (sample(&mut runner, &hyper_term()), sample(&mut runner, &hyper_term()));
        let (ta, tb) = (term(&a.text), term(&b.text));
        let (p, qv) = (hyper_value(&ta)?, hyper_value(&tb)?);
        let prod = term(&format!("({})*({})", a.text, b.text));
        let want = RaabeValue::Exact(&p + &qv);
        ensure(derive_value(&prod).0 == want, || format!("product of {} and {}", a.text, b.text))?;
        ensure(hyper_value(&prod)? == &p + &qv, || format!("product ratio of {} and {}", a.text, b.text))?;
    }
    for _ in 0..cases {
        let a = sample(&mut runner, &hyper_term());
        let (num, den) = sample(&mut runner, &(-3i64..=3, 1i64..=4));
        let k = q(num, den);
        if k.is_zero() {
            continue;
        }
        let p = hyper_value(&term(&a.text))?;
        let t = term(&format!("({})^({}/{})", a.text, num, den));
        let want = &p * &k;
        ensure(derive_value(&t).0 == RaabeValue::Exact(want.clone()), || format!("power {} of {}", k, a.text))?;
        if k.is_integer() {
            ensure(hyper_value(&t)? == want, || format!("power ratio {} of {}", k, a.text))?;
        }
    }
    let mut sums = 0;
    while sums < cases {
        let (a, b) = (sample(&mut runner, &rational_term()), sample(&mut runner, &rational_term()));
        let (p, qv) = (hyper_value(&term(&a.text))?, hyper_value(&term(&b.text))?);
        if p == qv {
            continue;
        }
        let (low, high, p_low) = if p < qv { (&a, &b, p) } else { (&b, &a, qv) };
        for (op, subtract) in [("+", false), ("-", true)] {
            let t = term(&format!("({}){}({})", low.text, op, high.text));
            ensure(derive_value(&t).0 == RaabeValue::Exact(p_low.clone()), || {
                format!("{} {} {}", low.text, op, high.text)
            })?;
            let whole = term(&combined_fraction(low, high, subtract));
            ensure(hyper_value(&whole)? == p_low, || format!("fraction form of {} {} {}", low.text, op, high.text))?;
        }
        sums += 1;
    }
    Ok(format!("{} product, power and sum cases each", cases))
}

const SCAN: u64 = 10_000;

fn eventual_decrease() -> Check {
    let mut runner = TestRunner::new(Config { rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..Config::default() });
    let mut done = 0;
    let mut min_drop = f64::INFINITY;
    while done < 50 {
        let k = sample(&mut runner, &signed_hyper_term());
        let t = term(&k.text);
        let p = hyper_value(&t)?;
        if p < q(1, 2) {
            continue;
        }
        let r = ratio_rational_fn(&t).map_err(|e| e.to_string())?;
        let start = t.start_index().max(r.valid_from());
        // last index of the scan where |a_n| does not drop
        let n_star = (start..start + SCAN).filter(|&n| r.eval(n).abs() <= BigRational::one()).last().map_or(start, |n| n + 1);

        let p_bits = 128;
        let mut mag = eval(&t, n_star, EvalMode::Float(p_bits)).map_err(|e| e.to_string())?.to_float(p_bits).abs();
        for n in n_star..n_star + SCAN {
            let next = mag.div(&float::from_rational(&r.eval(n).abs(), p_bits), p_bits, RM);
            ensure(next.cmp(&mag).is_some_and(|c| c < 0), || format!("{}: |a_n| rises at n = {}", k.text, n))?;
            if (n + 1 - n_star) % 2500 == 0 {
                let direct = eval(&t, n + 1, EvalMode::Float(p_bits)).map_err(|e| e.to_string())?.to_float(p_bits).abs();
                ensure(float::rel_diff(&next, &direct, p_bits) < 1e-20, || {
                    format!("{}: recurrence drifts from direct evaluation at n = {}", k.text, n + 1)
                })?;
            }
            mag = next;
        }

        // ln|a_(10^6)| - ln|a_(10^3)| = -sum ln R(n)
        let lo = 1_000u64.max(n_star);
        let (num, den) = (r.numerator(), r.denominator());
        let drop: f64 = (lo..1_000_000).map(|n| (num.eval_f64(n as f64) / den.eval_f64(n as f64)).abs().ln()).sum();
        ensure(drop >= 10f64.ln(), || format!("{}: terms fall only by e^{:.3}", k.text, drop))?;
        min_drop = min_drop.min(drop / 10f64.ln());
        done += 1;
    }
    Ok(format!("50 terms, smallest drop 10^{:.2}", min_drop))
}

fn oracle_agreement() -> Check {
    let t = term("alt*(2n)!/(4^n*(n!)^2)");
    let target = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    let b = alternating_bracket(&t, 10_000).map_err(|e| e.to_string())?;
    ensure(b.contains(target), || format!("bracket {:?} misses {}", b, target))?;
    ensure(b.upper - b.lower < 1e-2, || format!("bracket width {}", b.upper - b.lower))?;
    let approx = 1.0 / (std::f64::consts::PI * 10_001.0).sqrt();
    ensure((b.width / approx - 1.0).abs() < 1e-3, || format!("|a_(m+1)| = {} vs {}", b.width, approx))?;
    let g = abs_growth_slope(&t, 1_000, 100_000).map_err(|e| e.to_string())?;
    ensure((g.slope - 0.5).abs() <= 0.05, || format!("slope {}", g.slope))?;
    let e = empirical_classify(&t, &OracleConfig::default()).map_err(|e| e.to_string())?;
    let theorem = classify(&derive_value(&t).0, sign_split(&t).0).verdict;
    ensure(e.verdict == Verdict::ConditionallyConvergent && theorem == e.verdict, || {
        format!("empirical {:?}, theorem {:?}", e.verdict, theorem)
    })?;
    Ok(format!("bracket [{:.6}, {:.6}], slope {:.3}", b.lower, b.upper, g.slope))
}

fn ratio_prefilter() -> Check {
    for (s, v) in [("1/2^n", Verdict::AbsolutelyConvergent), ("n!", Verdict::Divergent)] {
        let pre = ratio_precheck(&term(s));
        ensure(pre.outcome == PrecheckOutcome::DecidedByRatioTest(v) && pre.certified, || format!("{}: {:?}", s, pre))?;
        let (report, value) = analyze(&AnalyzeArgs { expr: Some(s.into()), ..Default::default() }).map_err(|e| e.to_string())?;
        ensure(report.trace.is_empty(), || format!("{}: rules ran", s))?;
        ensure(report.classification.verdict == v.name(), || format!("{}: {}", s, report.classification.verdict))?;
        ensure(matches!(value, RaabeValue::Undefined { reason: UndefinedReason::RatioLimitNotOne(_), .. }), || {
            format!("{}: {}", s, value)
        })?;
    }
    let raabe_fixtures = FIXTURES
        .iter()
        .filter(|(_, _, v)| v.is_some())
        .map(|(s, _, _)| *s)
        .chain(HYPER_FIXTURES.iter().chain(NON_HYPER_FIXTURES).map(|(s, _, _)| *s));
    let mut count = 0;
    for s in raabe_fixtures {
        let pre = ratio_precheck(&term(s));
        ensure(pre.certified && pre.limit == Some(RatioLimit::Finite(BigRational::one())), || {
            format!("{}: {:?}", s, pre)
        })?;
        count += 1;
    }
    Ok(format!("geometric and factorial decided early; {} fixtures certified at 1", count))
}

fn main() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("central binomial triple", central_binomial_triple),
        ("polynomial and radical terms", polynomial_and_radical),
        ("boundary fixtures", boundary_fixtures),
        ("numeric estimator accuracy", estimator_accuracy),
        ("oscillation guard", oscillation_guard),
        ("logarithmic regime", log_regime),
        ("product, power and sum rules", rule_properties),
        ("eventual decrease of terms", eventual_decrease),
        ("oracle agreement", oracle_agreement),
        ("ratio prefilter", ratio_prefilter),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {} ({:.1}s): {}", i + 1, name, secs, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {} ({:.1}s): {}", i + 1, name, secs, why)
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
