use raabe::classify::Verdict;
use raabe::cli::FIXTURES;
use raabe::expr::parse;
use raabe::oracle::{abs_growth_slope, alternating_bracket, empirical_classify, OracleConfig};

const ALTERNATING: &[&str] = &[
    "alt*(2n)!/(4^n*(n!)^2)",
    "alt*(2n-1)!/(4^n*(n!)^2)",
    "alt/n",
    "alt/n^(1/4)",
    "alt*sqrt((n^2-2*n+3)/(5*n^3-7*n^2+11*n+13))",
];

#[test]
fn later_brackets_nest_inside_earlier_ones() {
    for text in ALTERNATING {
        let t = parse(text).unwrap();
        let early = alternating_bracket(&t, 1_000).unwrap();
        let late = alternating_bracket(&t, 10_000).unwrap();
        assert!(late.lower >= early.lower - 1e-12 && late.upper <= early.upper + 1e-12, "{}: {:?} vs {:?}", text, early, late);
        assert!(late.width < early.width, "{}", text);
    }
}

#[test]
fn growth_slope_tracks_value() {
    // |a_n| ~ n^-p gives partial sums of |a_n| growing like n^(1-p)
    for (text, p) in [("(2n)!/(4^n*(n!)^2)", 0.5), ("5", 0.0), ("(2n-1)!/(4^n*(n!)^2)*(n+2)!/(n+1)!", 0.5), ("1/n^(3/4)", 0.75)] {
        let t = parse(text).unwrap();
        let g = abs_growth_slope(&t, 1_000, 100_000).unwrap();
        assert!((g.slope - (1.0 - p)).abs() < 0.05, "{}: slope {}", text, g.slope);
    }
}

fn converges(v: Verdict) -> Option<bool> {
    match v {
        Verdict::AbsolutelyConvergent | Verdict::ConditionallyConvergent | Verdict::ConvergentTypeUnknown => Some(true),
        Verdict::Divergent => Some(false),
        _ => None,
    }
}

#[test]
fn empirical_verdicts_never_contradict_hard_ones() {
    let cfg = OracleConfig { m_max: 20_000, ..Default::default() };
    for (text, verdict, _) in FIXTURES {
        let t = parse(text).unwrap();
        let Ok(e) = empirical_classify(&t, &cfg) else { continue };
        if let (Some(a), Some(b)) = (converges(*verdict), converges(e.verdict)) {
            assert_eq!(a, b, "{}: {} vs empirical {} {:?}", text, verdict.name(), e.verdict.name(), e.notes);
        }
        if *verdict == Verdict::AbsolutelyConvergent && e.verdict != Verdict::Inconclusive {
            assert_eq!(e.verdict, Verdict::AbsolutelyConvergent, "{}", text);
        }
    }
}
