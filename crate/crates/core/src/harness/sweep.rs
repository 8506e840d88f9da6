//! Parameter sweeps: one Monte Carlo inversion per swept value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::relative_error;
use crate::error::Result;
use crate::inversion::{mc_invert_with_table, KernelTable, McSummary, ObjectiveSpec, SigmaSmoothSpec};
use crate::model::{ChainConfig, DefectHypothesis};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    NoiseLevel,
    DefectIndex,
    DefectStiffness,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::NoiseLevel => "noise_level",
            Self::DefectIndex => "defect_index",
            Self::DefectStiffness => "defect_stiffness",
        }
    }
}

/// Result at one swept value. Errors are recorded, not propagated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub truth_index: usize,
    pub truth_stiffness: f64,
    pub noise_level: f64,
    pub base_seed: u64,
    pub location_error: Option<f64>,
    pub size_error: Option<f64>,
    pub summary: Option<McSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub swept_parameter: SweptParameter,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Fixed settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepBase<'a> {
    pub chain: &'a ChainConfig,
    pub defect: &'a DefectHypothesis,
    pub noise_level: f64,
    pub objective: &'a ObjectiveSpec,
    pub smooth: &'a SigmaSmoothSpec,
    /// Point `i` uses Monte Carlo base seed `derive_seed(seed, i)`.
    pub seed: u64,
}

/// Runs the sweep; `on_point` sees each point as soon as it completes.
pub fn run_sweep<F>(
    parameter: SweptParameter,
    values: &[f64],
    base: SweepBase<'_>,
    on_point: F,
) -> Result<SweepReport>
where
    F: Fn(usize, &SweepPoint) -> Result<()> + Sync,
{
    let table = KernelTable::new(base.chain, &base.objective.grid, base.objective.k_bounds);
    let points = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let (j, k, eta) = match parameter {
                SweptParameter::NoiseLevel => (base.defect.index(), base.defect.stiffness(), value),
                SweptParameter::DefectIndex => (value as usize, base.defect.stiffness(), base.noise_level),
                SweptParameter::DefectStiffness => (base.defect.index(), value, base.noise_level),
            };
            let seed = derive_seed(base.seed, i as u64);
            let smooth = SigmaSmoothSpec {
                base_seed: seed,
                ..*base.smooth
            };
            let outcome = DefectHypothesis::new(j, k, base.chain)
                .and_then(|truth| mc_invert_with_table(&table, &truth, eta, base.objective, &smooth));
            let point = match outcome {
                Ok(summary) => SweepPoint {
                    value,
                    truth_index: j,
                    truth_stiffness: k,
                    noise_level: eta,
                    base_seed: seed,
                    location_error: summary.median_j.map(|m| relative_error(m, j as f64)),
                    size_error: summary.median_k.map(|m| relative_error(m, k)),
                    summary: Some(summary),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep point {} = {value} failed: {e}", parameter.name());
                    SweepPoint {
                        value,
                        truth_index: j,
                        truth_stiffness: k,
                        noise_level: eta,
                        base_seed: seed,
                        location_error: None,
                        size_error: None,
                        summary: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            on_point(i, &point)?;
            Ok(point)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        swept_parameter: parameter,
        values: values.to_vec(),
        points,
    })
}

pub fn sweep_noise(levels: &[f64], base: SweepBase<'_>) -> Result<SweepReport> {
    run_sweep(SweptParameter::NoiseLevel, levels, base, |_, _| Ok(()))
}

pub fn sweep_location(indices: &[usize], base: SweepBase<'_>) -> Result<SweepReport> {
    let values: Vec<f64> = indices.iter().map(|&j| j as f64).collect();
    run_sweep(SweptParameter::DefectIndex, &values, base, |_, _| Ok(()))
}

pub fn sweep_size(stiffnesses: &[f64], base: SweepBase<'_>) -> Result<SweepReport> {
    run_sweep(SweptParameter::DefectStiffness, stiffnesses, base, |_, _| Ok(()))
}

impl SweepReport {
    /// CSV rows `value,median_j,median_k,location_error,size_error,runs,failures`.
    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        self.points
            .iter()
            .map(|p| {
                let (mj, mk, runs, fails) = match &p.summary {
                    Some(s) => (s.median_j, s.median_k, s.runs.len(), s.failures.len()),
                    None => (None, None, 0, 0),
                };
                format!(
                    "{:e},{},{},{},{},{runs},{fails}",
                    p.value,
                    opt(mj),
                    opt(mk),
                    opt(p.location_error),
                    opt(p.size_error)
                )
            })
            .collect()
    }
}

pub const SWEEP_CSV_HEADER: &str = "value,median_j,median_k,location_error,size_error,runs,failures";
