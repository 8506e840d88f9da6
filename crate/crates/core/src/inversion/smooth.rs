//! Perturbation-averaged objective and Monte Carlo aggregation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_table, full_squared_norm, search, InversionResult, KernelTable, ObjectiveSpec, ResidualModel};
use crate::error::{Error, Result};
use crate::measurement::{synthesize, MeasurementSet, SGrid};
use crate::model::{ChainConfig, DefectHypothesis};
use crate::seeds::delta_seed;

/// Share of failed Monte Carlo runs above which a warning is logged.
pub const FAILURE_WARN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSmoothSpec {
    pub sigma_smooth: f64,
    pub n_delta: usize,
    pub n_mc: usize,
    pub base_seed: u64,
}

impl Default for SigmaSmoothSpec {
    fn default() -> Self {
        Self {
            sigma_smooth: 1e-4,
            n_delta: 50,
            n_mc: 100,
            base_seed: 0,
        }
    }
}

impl SigmaSmoothSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_smooth >= 0.0 && self.sigma_smooth.is_finite()) {
            return Err(Error::invalid("smooth.sigma_smooth", "must be >= 0"));
        }
        if self.n_delta == 0 {
            return Err(Error::invalid("smooth.n_delta", "need at least one draw"));
        }
        if self.n_mc == 0 {
            return Err(Error::invalid("smooth.n_mc", "need at least one run"));
        }
        Ok(())
    }
}

/// `n` frozen draws from `N(0, σ²)`.
pub fn draw_deltas(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let normal = Normal::new(0.0, sigma).expect("finite nonnegative sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

fn smoothed<Q: Fn(f64) -> f64>(q: Q, k: f64, deltas: &[f64], spec: &ObjectiveSpec) -> f64 {
    let (lo, hi) = spec.k_bounds;
    let sum: f64 = deltas
        .iter()
        .map(|d| 0.5 * q((k + d).clamp(lo, hi)).max(spec.log_floor).ln())
        .sum();
    sum / deltas.len() as f64
}

/// Reference σ-smooth objective on the full grid with draws from `draw_seed`.
pub fn sigma_smooth_objective(
    j: usize,
    k: f64,
    meas: &MeasurementSet,
    spec: &ObjectiveSpec,
    smooth: &SigmaSmoothSpec,
    draw_seed: u64,
) -> Result<f64> {
    spec.check_measurement(meas)?;
    spec.check_hypothesis(j, k, meas)?;
    smooth.validate()?;
    let deltas = draw_deltas(smooth.sigma_smooth, smooth.n_delta, draw_seed);
    Ok(smoothed(|kk| full_squared_norm(j, kk, meas), k, &deltas, spec))
}

/// Inversion of the σ-smooth objective with the given frozen draws.
pub fn invert_smoothed(
    table: &KernelTable,
    meas: &MeasurementSet,
    spec: &ObjectiveSpec,
    deltas: &[f64],
) -> Result<InversionResult> {
    spec.check_measurement(meas)?;
    check_table(table, meas)?;
    if deltas.is_empty() {
        return Err(Error::invalid("smooth.n_delta", "need at least one draw"));
    }
    let model = ResidualModel::new(table, meas);
    Ok(search(meas.chain.n_masses(), spec, |j, k| {
        smoothed(|kk| model.squared_norm(j, kk), k, deltas, spec)
    }))
}

/// Median with the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub run: usize,
    pub noise_seed: u64,
    pub delta_seed: u64,
    pub j_hat: usize,
    pub k_hat: f64,
    pub residual: f64,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McFailure {
    pub run: usize,
    pub noise_seed: u64,
    pub reason: String,
}

/// Per-run estimates and their medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub noise_level: f64,
    pub smooth: SigmaSmoothSpec,
    pub runs: Vec<McRun>,
    pub failures: Vec<McFailure>,
    /// `None` when every run failed.
    pub median_j: Option<f64>,
    pub median_k: Option<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl McSummary {
    fn from_runs(
        noise_level: f64,
        smooth: SigmaSmoothSpec,
        runs: Vec<McRun>,
        failures: Vec<McFailure>,
        wall_time: f64,
    ) -> Self {
        let total = runs.len() + failures.len();
        if total > 0 && failures.len() as f64 > FAILURE_WARN_FRACTION * total as f64 {
            log::warn!(
                "{} of {} Monte Carlo runs failed at noise level {noise_level:e}",
                failures.len(),
                total
            );
        }
        let js: Vec<f64> = runs.iter().map(|r| r.j_hat as f64).collect();
        let ks: Vec<f64> = runs.iter().map(|r| r.k_hat).collect();
        Self {
            noise_level,
            smooth,
            median_j: median(&js),
            median_k: median(&ks),
            runs,
            failures,
            wall_time,
        }
    }
}

/// Runs `smooth.n_mc` σ-smooth inversions on independent noise realizations.
///
/// Run `r` uses noise seed `base_seed + r` and perturbation draws seeded by
/// [`delta_seed`] of that noise seed. Runs whose best residual is not finite
/// are recorded as failures and left out of the medians.
pub fn mc_invert(
    chain: &ChainConfig,
    truth: &DefectHypothesis,
    grid: &SGrid,
    noise_level: f64,
    spec: &ObjectiveSpec,
    smooth: &SigmaSmoothSpec,
) -> Result<McSummary> {
    let table = KernelTable::new(chain, grid, spec.k_bounds);
    mc_invert_with_table(&table, truth, noise_level, spec, smooth)
}

/// [`mc_invert`] reusing a precomputed kernel table.
pub fn mc_invert_with_table(
    table: &KernelTable,
    truth: &DefectHypothesis,
    noise_level: f64,
    spec: &ObjectiveSpec,
    smooth: &SigmaSmoothSpec,
) -> Result<McSummary> {
    spec.validate()?;
    smooth.validate()?;
    let start = std::time::Instant::now();
    let chain = table.chain();
    let clean = synthesize(chain, truth, table.grid())?;
    let template = MeasurementSet {
        chain: *chain,
        grid: *table.grid(),
        values: clean.clone(),
        noise_level: 0.0,
        seed: 0,
        truth: Some(*truth),
    };

    let mut runs = Vec::with_capacity(smooth.n_mc);
    let mut failures = Vec::new();
    for run in 0..smooth.n_mc {
        let noise_seed = smooth.base_seed.wrapping_add(run as u64);
        let dseed = delta_seed(noise_seed);
        let meas = MeasurementSet::renoised(&clean, &template, noise_level, noise_seed)?;
        let deltas = draw_deltas(smooth.sigma_smooth, smooth.n_delta, dseed);
        let result = invert_smoothed(table, &meas, spec, &deltas)?;
        if result.residual.is_finite() {
            runs.push(McRun {
                run,
                noise_seed,
                delta_seed: dseed,
                j_hat: result.j_hat,
                k_hat: result.k_hat,
                residual: result.residual,
                tie: result.tie,
            });
        } else {
            failures.push(McFailure {
                run,
                noise_seed,
                reason: "no finite residual for any hypothesis".into(),
            });
        }
    }
    Ok(McSummary::from_runs(
        noise_level,
        *smooth,
        runs,
        failures,
        start.elapsed().as_secs_f64(),
    ))
}
