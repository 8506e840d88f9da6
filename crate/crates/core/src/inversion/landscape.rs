//! Dense residual evaluation over a `(j, k)` grid.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::linspace;
use super::{KernelTable, ObjectiveSpec, ResidualModel};
use crate::error::{Error, Result};
use crate::measurement::{write_atomic, MeasurementSet};

/// `log_residual[a][b] = f(j_values[a], k_values[b])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub j_values: Vec<usize>,
    pub k_values: Vec<f64>,
    pub log_residual: Vec<Vec<f64>>,
}

impl Landscape {
    /// Display scale `10^f`.
    pub fn linear(&self) -> Vec<Vec<f64>> {
        self.log_residual
            .iter()
            .map(|row| row.iter().map(|f| 10f64.powf(*f)).collect())
            .collect()
    }

    /// Smallest `f` as `(j, k, f)`; ties go to the first row, then column.
    pub fn argmin(&self) -> (usize, f64, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (a, row) in self.log_residual.iter().enumerate() {
            for (b, &f) in row.iter().enumerate() {
                if f < best.2 {
                    best = (a, b, f);
                }
            }
        }
        (self.j_values[best.0], self.k_values[best.1], best.2)
    }

    pub fn k_step(&self) -> f64 {
        self.k_values[1] - self.k_values[0]
    }

    /// Long-format rows `j,k,f,residual` with `residual = 10^f`.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::with_capacity(self.j_values.len() * self.k_values.len());
        for (a, row) in self.log_residual.iter().enumerate() {
            for (b, f) in row.iter().enumerate() {
                rows.push(format!(
                    "{},{:e},{:e},{:e}",
                    self.j_values[a],
                    self.k_values[b],
                    f,
                    10f64.powf(*f)
                ));
            }
        }
        rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = format!("{LANDSCAPE_CSV_HEADER}\n");
        for r in self.csv_rows() {
            out.push_str(&r);
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

pub const LANDSCAPE_CSV_HEADER: &str = "j,k,f,residual";

/// Evaluates the deterministic objective on `j_range × linspace(k_range, k_steps)`.
pub fn landscape(
    meas: &MeasurementSet,
    spec: &ObjectiveSpec,
    j_range: std::ops::RangeInclusive<usize>,
    k_range: (f64, f64),
    k_steps: usize,
) -> Result<Landscape> {
    spec.check_measurement(meas)?;
    let n = meas.chain.n_masses();
    let (j_lo, j_hi) = (*j_range.start(), *j_range.end());
    if j_lo < 2 || j_hi > n || j_hi <= j_lo {
        return Err(Error::invalid(
            "landscape.j_range",
            format!("need 2 <= j_lo < j_hi <= {n}, got {j_lo}..={j_hi}"),
        ));
    }
    if !(k_range.0 > 0.0 && k_range.1 > k_range.0) || k_steps < 2 {
        return Err(Error::invalid(
            "landscape.k_range",
            "need 0 < k_lo < k_hi and at least two steps",
        ));
    }
    let table = KernelTable::new(&meas.chain, &meas.grid, k_range);
    let model = ResidualModel::new(&table, meas);
    let k_values = linspace(k_range.0, k_range.1, k_steps);
    let j_values: Vec<usize> = j_range.collect();
    let log_residual = j_values
        .par_iter()
        .map(|&j| {
            k_values
                .iter()
                .map(|&k| model.squared_norm(j, k).max(spec.log_floor).ln())
                .collect()
        })
        .collect();
    Ok(Landscape {
        j_values,
        k_values,
        log_residual,
    })
}
