//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero on any FAIL only when `ACCEPTANCE_STRICT=1`; otherwise the
//! lines and the summary are the result.

use std::time::{Duration, Instant};

use anisokrr::basis::verify_factorization;
use anisokrr::covariance::{loglog_slope, CovarianceSpec};
use anisokrr::experiment::{theory_prediction, RiskRow};
use anisokrr::krr::{make_target, TargetKind};
use anisokrr::spectral::{full_spectrum, spectral_gaps, KernelSpec};
use anisokrr::theory::TheoryMode;
use anisokrr_cli::config::{Config, RiskSettings};
use anisokrr_cli::risk::risk_rows;
use anisokrr_cli::validate::{
    exp_coefficients, fast_path_gap, linear_ridge_gap, monomial_expansion_error, orthonormality_error,
    run_suite, square_expansion_error, ORACLE_ALPHAS,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn run(id: &str, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let passed = out.passed && in_time;
    println!(
        "{} [{id}] {title}: {} ({:.2} s{})",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        if in_time { String::new() } else { format!(", over the {} s limit", limit.as_secs()) }
    );
    passed
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn c1_eigen_oracle() -> Outcome {
    let (mut ok, mut bare_fail, mut worst_rel) = (true, Vec::new(), 0.0f64);
    for d in [2usize, 3] {
        for degree in [2usize, 3] {
            for alpha in ORACLE_ALPHAS {
                let cov = CovarianceSpec::build(d, alpha).unwrap();
                let rep = verify_factorization(d, degree, &exp_coefficients(degree), &cov, 50, 1).unwrap();
                ok &= rep.feature_bound_holds;
                if !rep.bare_bound_holds {
                    bare_fail.push(format!("({d},{degree},{alpha})"));
                }
                worst_rel = worst_rel.max(rep.closed_form_max_rel_deviation);
            }
        }
    }
    Outcome {
        passed: ok,
        detail: format!(
            "bound with C_beta = h multinomial sigma^beta holds on all 12 cases: {ok}; bare sigma^beta form fails on {} ({}); closed-form values deviate by up to {:.1}% (finding)",
            bare_fail.len(),
            bare_fail.join(" "),
            100.0 * worst_rel
        ),
    }
}

fn c2_fig3_slope() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.01, 1.5, 2.0] {
        let cov = CovarianceSpec::build(100, alpha).unwrap();
        let s = full_spectrum(&KernelSpec::monomial(3), &cov).unwrap();
        let ranks: Vec<f64> = (10..=1000).map(|m| m as f64).collect();
        let lams: Vec<f64> = (10..=1000).map(|m| s[m - 1].lambda).collect();
        let slope = loglog_slope(&ranks, &lams).unwrap();
        ok &= (slope + alpha).abs() <= 0.15;
        parts.push(format!("alpha={alpha}: {slope:.3}"));
    }
    Outcome { passed: ok, detail: format!("slopes over ranks 10-1000 {} (target -alpha +- 0.15)", parts.join(", ")) }
}

fn c3_fig2_structure() -> Outcome {
    let spec = KernelSpec::polynomial(vec![1.0, 3.0, 3.0, 1.0]).unwrap();
    let s = full_spectrum(&spec, &CovarianceSpec::build(100, 0.0).unwrap()).unwrap();
    // plateaus: runs of eigenvalues within 1e-9 relative of the run's first value
    let mut plateaus: Vec<(f64, f64)> = Vec::new();
    for e in &s {
        match plateaus.last_mut() {
            Some((top, low)) if (*top - e.lambda).abs() <= 1e-9 * *top => *low = e.lambda,
            _ => plateaus.push((e.lambda, e.lambda)),
        }
    }
    let spread = plateaus.iter().map(|(t, l)| (t - l) / t).fold(0.0, f64::max);
    let min_ratio = plateaus.windows(2).map(|w| w[0].1 / w[1].0).fold(f64::INFINITY, f64::min);
    let a_ok = plateaus.len() == 4 && spread <= 1e-9 && min_ratio >= 10.0;

    let mut b_ok = true;
    let mut ratio200 = f64::NAN;
    let mut sets = Vec::new();
    for d in [100usize, 200] {
        let gaps = spectral_gaps(&spec, &CovarianceSpec::build(d, 0.7).unwrap()).unwrap();
        let levels: Vec<usize> = gaps.iter().filter(|g| g.predicted_finite_d).map(|g| g.level).collect();
        b_ok &= levels == [0];
        if d == 200 {
            ratio200 = gaps.iter().find(|g| g.level == 0).and_then(|g| g.empirical_ratio).unwrap_or(f64::NAN);
        }
        sets.push(format!("d={d} gaps at {levels:?}"));
    }
    b_ok &= ratio200 > 1.0;
    Outcome {
        passed: a_ok && b_ok,
        detail: format!(
            "(a) {} plateaus, spread {spread:.1e}, min ratio {min_ratio:.1}; (b) alpha=0.7 {}, level-0 ratio at d=200 {ratio200:.3}",
            plateaus.len(),
            sets.join(", ")
        ),
    }
}

fn c4_counting() -> Outcome {
    let r = run_suite("counting").unwrap();
    Outcome { passed: r.passed, detail: format!("{}: mismatches {}", r.checks[0].name, r.checks[0].deviation) }
}

fn c5_hermite() -> Outcome {
    let (o, s, m) = (orthonormality_error().unwrap(), square_expansion_error().unwrap(), monomial_expansion_error().unwrap());
    Outcome {
        passed: o <= 1e-8 && s <= 1e-9 && m <= 1e-10,
        detail: format!("orthonormality {o:.1e} (<= 1e-8), square expansion {s:.1e} (<= 1e-9), monomial to Hermite {m:.1e} (<= 1e-10)"),
    }
}

fn c6_krr() -> Outcome {
    let (lin, fast) = (linear_ridge_gap().unwrap(), fast_path_gap().unwrap());
    Outcome {
        passed: lin <= 1e-8 && fast <= 1e-10,
        detail: format!("linear ridge gap {lin:.1e} (<= 1e-8), fast vs direct {fast:.1e} (<= 1e-10)"),
    }
}

/// The fig4 preset grid at α ∈ {0, 0.6, 0.9}, both targets, through the budget gate.
fn fig4_rows() -> Vec<RiskRow> {
    let mut cfg = Config::preset("fig4").unwrap();
    cfg.alpha = Some(vec![0.0, 0.6, 0.9]);
    cfg.budget = Some(600.0);
    let settings = RiskSettings::resolve(&cfg).unwrap();
    risk_rows(&settings).unwrap()
}

fn row<'a>(rows: &'a [RiskRow], target: &str, alpha: f64, n: usize) -> &'a RiskRow {
    rows.iter().find(|r| r.target == target && r.alpha == alpha && r.n == n).unwrap()
}

fn grid_ns(rows: &[RiskRow]) -> Vec<usize> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

fn c7_alignment_helps(rows: &[RiskRow]) -> Outcome {
    let n = *grid_ns(rows).last().unwrap();
    let (a, b) = (row(rows, "first", 0.9, n), row(rows, "first", 0.0, n));
    let gap = b.mean_risk - a.mean_risk;
    let se = combined(a.std_err, b.std_err);
    Outcome {
        passed: a.mean_risk < 0.5 * b.mean_risk && gap > 3.0 * se,
        detail: format!(
            "n={n}: risk(0.9) {:.4} +- {:.4} vs risk(0) {:.4} +- {:.4}; gap {:.1} combined SE",
            a.mean_risk,
            a.std_err,
            b.mean_risk,
            b.std_err,
            gap / se
        ),
    }
}

fn c8_alignment_absent(rows: &[RiskRow]) -> Outcome {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for n in grid_ns(rows) {
        let (a, b) = (row(rows, "last", 0.9, n), row(rows, "last", 0.0, n));
        let z = (a.mean_risk - b.mean_risk).abs() / combined(a.std_err, b.std_err);
        worst = worst.max(z);
        if z > 2.0 {
            bad.push(format!("n={n} ({:.3} vs {:.3}, {z:.2} SE)", a.mean_risk, b.mean_risk));
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: format!(
            "largest |risk(0.9) - risk(0)| = {worst:.2} combined SE (limit 2){}",
            if bad.is_empty() { String::new() } else { format!("; exceeded at {}", bad.join(", ")) }
        ),
    }
}

fn c9_theory(rows: &[RiskRow]) -> Outcome {
    let ns = grid_ns(rows);
    let preset = RiskSettings::resolve(&Config::preset("fig4").unwrap()).unwrap().grid;
    let spec = KernelSpec::hermite(preset.xi.clone()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.6, 0.9] {
        let cov = CovarianceSpec::build(preset.d, alpha).unwrap();
        let target = make_target(&TargetKind::FirstCoord, &cov).unwrap();
        for &n in &ns[ns.len() - 2..] {
            let r = row(rows, "first", alpha, n);
            let literal = theory_prediction(&preset, &spec, &cov, &target, n, TheoryMode::Literal).unwrap();
            let band = (0.25 * r.mean_risk).max(3.0 * r.std_err);
            let good = (r.theory_risk - r.mean_risk).abs() <= band;
            ok &= good;
            parts.push(format!(
                "alpha={alpha} n={n}: mc {:.4} +- {:.4}, theory {:.4} ({}), literal {:.4}",
                r.mean_risk,
                r.std_err,
                r.theory_risk,
                if good { "ok" } else { "off" },
                literal
            ));
        }
    }
    Outcome { passed: ok, detail: parts.join("; ") }
}

fn c10_effective_dimension() -> Outcome {
    let ds = [100usize, 1000, 10_000];
    let fd: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.0, 0.3, 0.5, 0.7, 0.9] {
        let r0: Vec<f64> = ds.iter().map(|&d| CovarianceSpec::build(d, alpha).unwrap().r0()).collect();
        let slope = loglog_slope(&fd, &r0).unwrap();
        ok &= (slope - (1.0 - alpha)).abs() <= 0.1;
        parts.push(format!("{alpha}: {slope:.3}"));
    }
    let r = CovarianceSpec::build(10_000, 1.5).unwrap().r0() / CovarianceSpec::build(100, 1.5).unwrap().r0();
    ok &= r <= 3.0;
    Outcome { passed: ok, detail: format!("r0 exponents {} (target 1 - alpha +- 0.1); alpha=1.5 ratio {r:.3} (<= 3)", parts.join(", ")) }
}

fn c11_low_set() -> Outcome {
    let r = run_suite("partition").unwrap();
    let sizes: Vec<String> = r
        .checks
        .iter()
        .filter(|c| c.name.ends_with("|Low| / n"))
        .map(|c| format!("{:.3}", c.deviation))
        .collect();
    Outcome {
        passed: r.passed,
        detail: format!(
            "|Low|/n = [{}] (<= 1), degree cap holds on all: {}; warnings: {}",
            sizes.join(", "),
            r.checks.iter().filter(|c| c.name.ends_with("degree cap")).all(|c| c.passed),
            if r.findings.is_empty() { "none".to_string() } else { r.findings.join("; ") }
        ),
    }
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let secs = Duration::from_secs;
    let mut results = vec![
        run("1", "eigenvalue oracle", secs(5), c1_eigen_oracle),
        run("2", "monomial-3 decay slope", secs(30), c2_fig3_slope),
        run("3", "plateaus and gaps", secs(60), c3_fig2_structure),
        run("4", "counting oracle", secs(10), c4_counting),
        run("5", "Hermite suite", secs(5), c5_hermite),
        run("6", "KRR equivalences", secs(10), c6_krr),
    ];
    let start = Instant::now();
    let rows = fig4_rows();
    println!("     fig4 grid (alpha 0, 0.6, 0.9; 10 seeds; both targets) ran in {:.1} s", start.elapsed().as_secs_f64());
    let long = secs(600);
    results.push(run("7", "first-coordinate target, alignment helps", long, || c7_alignment_helps(&rows)));
    results.push(run("8", "last-coordinate target, no alignment gain", long, || c8_alignment_absent(&rows)));
    results.push(run("9", "theory vs Monte Carlo", long, || c9_theory(&rows)));
    results.push(run("10", "effective-dimension scaling", secs(1), c10_effective_dimension));
    results.push(run("11", "low-set bound", secs(5), c11_low_set));
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
