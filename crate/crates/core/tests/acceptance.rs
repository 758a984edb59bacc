//! Acceptance gate: runs every suite on the default grid with seed 42, maps
//! the reports onto the ten acceptance criteria, prints one line per
//! criterion and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use membrane_bm::verify::report::CheckReport;
use membrane_bm::verify::suite::{run_suite, SuiteOptions};

const SUITES: [&str; 6] = ["reductions", "pde", "lemma1", "semigroup", "sampler-vs-density", "oracle"];

struct Criterion {
    number: u32,
    title: &'static str,
    prefixes: &'static [&'static str],
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        number: 1,
        title: "reduction identities (G = skew density for alpha = 0 within 1e-8, G = free density for q = alpha = 0 within 1e-10)",
        prefixes: &["reductions/skew/", "reductions/free/"],
    },
    Criterion {
        number: 2,
        title: "positivity (min G >= -1e-12) and normalization (|mass - 1| < 1e-6)",
        prefixes: &["reductions/positivity/", "reductions/normalization/"],
    },
    Criterion {
        number: 3,
        title: "atom + continuous theta-integral = skew density within 1e-10 at 100 random points",
        prefixes: &["lemma1/theta-marginal"],
    },
    Criterion {
        number: 4,
        title: "Chapman-Kolmogorov residual < 1e-4",
        prefixes: &["semigroup/chapman-kolmogorov/"],
    },
    Criterion {
        number: 5,
        title: "PDE: heat order >= 1.7, continuity < 1e-6, flux < 1e-5, reflection < 1e-5",
        prefixes: &["pde/"],
    },
    Criterion {
        number: 6,
        title: "sampler exactness: chi-square p > 0.001 after Bonferroni, P(theta = 0) within 3 se",
        prefixes: &["sampler-vs-density/"],
    },
    Criterion {
        number: 7,
        title: "local-time law: mean within 3 se of sqrt(2/pi), half-normal KS p > 0.01 (n = 1e5)",
        prefixes: &["lemma1/local-time-mean", "lemma1/local-time-ks"],
    },
    Criterion {
        number: 8,
        title: "oracle cross-validation: calibration, KS p > 0.001 on y_nu and the alpha-component (n = 1e4)",
        prefixes: &["oracle/"],
    },
    Criterion {
        number: 9,
        title: "integral equation: relative error < 1e-4 on the (lambda, mu) grid",
        prefixes: &["lemma1/integral-equation/"],
    },
];

fn main() -> ExitCode {
    let opts = SuiteOptions::default();
    let mut first: BTreeMap<&str, Vec<CheckReport>> = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    for suite in SUITES {
        let start = Instant::now();
        let reports = match run_suite(suite, &opts) {
            Ok(r) => r,
            Err(e) => {
                println!("suite {suite} could not run: {e}");
                return ExitCode::FAILURE;
            }
        };
        seconds.insert(suite, start.elapsed().as_secs_f64());
        first.insert(suite, reports);
    }
    let all: Vec<&CheckReport> = first.values().flatten().collect();
    let mut covered = vec![false; all.len()];
    let mut failures = 0;

    for c in &CRITERIA {
        let mut n = 0;
        let mut failed = Vec::new();
        for (i, r) in all.iter().enumerate() {
            if c.prefixes.iter().any(|p| r.check_id.starts_with(p)) {
                covered[i] = true;
                n += 1;
                if !r.passed {
                    failed.push(r);
                }
            }
        }
        let ok = n > 0 && failed.is_empty();
        if !ok {
            failures += 1;
        }
        println!("criterion {:>2} {}: {} ({} checks)", c.number, if ok { "PASS" } else { "FAIL" }, c.title, n);
        for r in failed {
            println!("    failed {} statistic {:e} threshold {:e} {}", r.check_id, r.statistic, r.threshold, r.error.as_deref().unwrap_or(""));
        }
    }

    // criterion 10: byte-identical JSON lines on a rerun with the same seed
    let mut differing = Vec::new();
    for suite in SUITES {
        let again = run_suite(suite, &opts).map(|r| r.iter().map(CheckReport::to_json_line).collect::<Vec<_>>());
        let before: Vec<String> = first[suite].iter().map(CheckReport::to_json_line).collect();
        if again.as_ref() != Ok(&before) {
            differing.push(suite);
        }
    }
    let ok = differing.is_empty();
    if !ok {
        failures += 1;
    }
    println!(
        "criterion 10 {}: reproducibility, every suite rerun with seed {} gives byte-identical JSONL{}",
        if ok { "PASS" } else { "FAIL" },
        opts.seed,
        if ok { String::new() } else { format!(" (differs: {})", differing.join(", ")) }
    );

    let extra: Vec<&&CheckReport> = all.iter().zip(&covered).filter(|(_, c)| !**c).map(|(r, _)| r).collect();
    let extra_failed: Vec<&&&CheckReport> = extra.iter().filter(|r| !r.passed).collect();
    println!(
        "supplementary {}: {} further checks (sign law, local-time characteristic function, two-step sampling)",
        if extra_failed.is_empty() { "PASS" } else { "FAIL" },
        extra.len()
    );
    for r in &extra_failed {
        println!("    failed {} statistic {:e} threshold {:e}", r.check_id, r.statistic, r.threshold);
    }
    let timing: Vec<String> = seconds.iter().map(|(s, t)| format!("{s} {t:.1}s")).collect();
    println!("suite runtimes: {}", timing.join(", "));

    if failures == 0 && extra_failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria fail");
        ExitCode::FAILURE
    }
}
