//! Self-checks run by the `validate` experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::inversion::{invert, ObjectiveSpec};
use crate::linalg::Tridiagonal;
use crate::measurement::{MeasurementSet, SGrid};
use crate::model::{ChainConfig, DefectHypothesis};
use crate::spectral::{analytic_x1, direct_solve_x1, green_kernel, lambda_of_s};
use crate::timedomain::{integrate_chain, numerical_laplace, DEFAULT_DURATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, max_error: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: max_error <= tolerance,
            max_error,
            tolerance,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Closed form against direct solve over random `(N, j, k*, s)`.
pub fn oracle_equivalence(draws: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..draws {
        let n = [5usize, 20, 100][rng.gen_range(0..3)];
        let j = rng.gen_range(2..=n);
        let k = rng.gen_range(0.1..=5.0);
        let s = 10f64.powf(rng.gen_range(-3.0..=2.0));
        let chain = ChainConfig::new(n, 0.1, 1.0).expect("valid chain");
        match (analytic_x1(j, k, s, &chain), direct_solve_x1(j, k, s, &chain)) {
            (Ok(a), Ok(d)) => worst = worst.max(rel(a, d)),
            _ => failures += 1,
        }
    }
    let mut c = CheckResult::new(
        "oracle_equivalence",
        worst,
        1e-10,
        format!("{draws} draws, {failures} solver failures"),
    );
    c.passed &= failures == 0;
    c
}

/// Kernel finiteness at `N = 1000` and agreement of the kernel with columns
/// of the inverse homogeneous matrix, including its symmetry.
pub fn kernel_symmetry(draws: usize, seed: u64) -> CheckResult {
    let big = ChainConfig::new(1000, 0.1, 1.0).expect("valid chain");
    let sp = lambda_of_s(100.0, &big);
    let finite = [(1, 1), (1, 1000), (500, 500), (1000, 1000), (3, 998)]
        .iter()
        .all(|&(m, p)| {
            let v = green_kernel(m, p, &sp, 1000);
            v.is_finite() && v >= 0.0
        });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let n = [5usize, 20, 100][rng.gen_range(0..3)];
        let chain = ChainConfig::new(n, 0.1, 1.0).expect("valid chain");
        let m = rng.gen_range(1..=n);
        let p = rng.gen_range(1..=n);
        let s = 10f64.powf(rng.gen_range(-3.0..=2.0));
        let sp = lambda_of_s(s, &chain);
        let h = sp.h;
        let a = Tridiagonal::new(vec![1.0; n - 1], vec![h; n], vec![1.0; n - 1]);
        let unit = |i: usize| {
            let mut e = vec![0.0; n];
            e[i - 1] = 1.0;
            e
        };
        let (Ok(col_p), Ok(col_m)) = (a.solve(&unit(p)), a.solve(&unit(m))) else {
            worst = f64::INFINITY;
            continue;
        };
        let r_mp = -green_kernel(m, p, &sp, n);
        let r_pm = -green_kernel(p, m, &sp, n);
        let scale = col_p[m - 1].abs().max(1e-300);
        worst = worst
            .max((r_mp - col_p[m - 1]).abs() / scale)
            .max((col_p[m - 1] - col_m[p - 1]).abs() / scale)
            .max(rel(r_mp, r_pm));
    }
    let mut c = CheckResult::new(
        "kernel_symmetry",
        worst,
        1e-12,
        format!("{draws} draws; N = 1000, s = 100 finite: {finite}"),
    );
    c.passed &= finite;
    c
}

/// Time-domain integration plus numerical Laplace transform against the
/// direct solve at the baseline configuration.
pub fn time_domain_cross_check(probes: &[f64]) -> CheckResult {
    let chain = ChainConfig::baseline();
    let defect = DefectHypothesis::new(40, 1.3, &chain).expect("valid defect");
    let trace = match integrate_chain(&chain, &defect, 1e-3, DEFAULT_DURATION) {
        Ok(t) => t,
        Err(e) => return CheckResult::new("time_domain_cross_check", f64::INFINITY, 1e-3, e.to_string()),
    };
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for &s in probes {
        let err = match (numerical_laplace(&trace, s, 1e-8), direct_solve_x1(40, 1.3, s, &chain)) {
            (Ok(num), Ok(d)) => rel(num, d),
            _ => f64::INFINITY,
        };
        detail.push(format!("s={s}: {err:.2e}"));
        worst = worst.max(err);
    }
    CheckResult::new("time_domain_cross_check", worst, 1e-3, detail.join(", "))
}

/// Save/load of a measurement file is bit-exact.
pub fn measurement_round_trip() -> CheckResult {
    let chain = ChainConfig::baseline();
    let defect = DefectHypothesis::new(40, 1.3, &chain).expect("valid defect");
    let grid = SGrid::new(0.0, 100.0, 101).expect("valid grid");
    let ok = MeasurementSet::generate(&chain, &defect, &grid, 1e-5, 3)
        .and_then(|m| MeasurementSet::parse(&m.to_text()).map(|b| b == m))
        .unwrap_or(false);
    CheckResult::new(
        "measurement_round_trip",
        if ok { 0.0 } else { 1.0 },
        0.0,
        "text format, 101 nodes".into(),
    )
}

/// Noise-free baseline inversion finds the exact index and the stiffness.
pub fn noise_free_inversion() -> CheckResult {
    let chain = ChainConfig::baseline();
    let defect = DefectHypothesis::new(40, 1.3, &chain).expect("valid defect");
    let spec = ObjectiveSpec::default();
    let outcome = MeasurementSet::generate(&chain, &defect, &spec.grid, 0.0, 0)
        .and_then(|m| invert(&m, &spec));
    match outcome {
        Ok(r) => {
            let err = if r.j_hat == 40 { rel(r.k_hat, 1.3) } else { f64::INFINITY };
            CheckResult::new(
                "noise_free_inversion",
                err,
                1e-4,
                format!("j_hat = {}, k_hat = {}", r.j_hat, r.k_hat),
            )
        }
        Err(e) => CheckResult::new("noise_free_inversion", f64::INFINITY, 1e-4, e.to_string()),
    }
}

/// All checks in a fixed order.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        oracle_equivalence(100, seed),
        kernel_symmetry(1000, seed ^ 1),
        time_domain_cross_check(&[0.5, 1.0, 2.0, 5.0, 10.0]),
        measurement_round_trip(),
        noise_free_inversion(),
    ]
}
