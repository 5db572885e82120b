//! Byte-for-byte comparison of `raabe --json` against stored reports.
//! Run with `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;
use std::process::Command;

use raabe::classify::classify;
use raabe::cli::AnalysisReport;
use raabe::expr::SignPattern;

const CASES: &[(&str, &[&str])] = &[
    ("central_binomial_alt", &["alt*(2n)!/(4^n*(n!)^2)"]),
    ("quartic", &["6*n^4-11*n^3-3*n^2+7*n+5"]),
    ("sqrt_rational_alt", &["alt*sqrt((n^2-2*n+3)/(5*n^3-7*n^2+11*n+13))"]),
    ("log_squared", &["1/((n+1)*log(n+1)^2)"]),
    ("harmonic_alt", &["alt/n"]),
    ("quarter_power", &["1/n^(1/4)"]),
    ("geometric", &["1/2^n"]),
    ("factorial", &["n!"]),
    ("numeric_only", &["--numeric-only", "--max-n", "65536", "1/n^(3/4)"]),
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_raabe"))
}

fn run(args: &[&str]) -> String {
    let out = bin().arg("--json").args(args).output().unwrap();
    assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{}.json", name))
}

#[test]
fn reports_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, args) in CASES {
        let got = run(args);
        let path = golden_path(name);
        if update {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e));
        assert_eq!(got, want, "{} differs from {}", name, path.display());
    }
}

#[test]
fn reports_are_deterministic() {
    for (_, args) in CASES.iter().take(3) {
        assert_eq!(run(args), run(args));
    }
}

#[test]
fn stored_classification_follows_stored_value() {
    for (name, _) in CASES {
        let Ok(text) = std::fs::read_to_string(golden_path(name)) else { continue };
        let report: AnalysisReport = serde_json::from_str(&text).unwrap();
        let value = report.raabe.to_value().unwrap();
        let sign: SignPattern = report.sign_pattern.parse().unwrap();
        let c = classify(&value, sign);
        assert_eq!(c.verdict.name(), report.classification.verdict, "{}", name);
        assert_eq!(c.theorem.name(), report.classification.theorem, "{}", name);
    }
}

#[test]
fn bad_input_exits_nonzero() {
    let out = bin().arg("1/(").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
