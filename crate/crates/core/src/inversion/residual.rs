//! Cached residual evaluation for the per-index search.
//!
//! For a fixed chain and grid, the Green's-kernel entries at every node
//! depend on the defect index but not on the trial stiffness, so they are
//! computed once per index. The defect correction to `x̃₁` at node `s` is
//! bounded by `3 a_max |γ| (|R[1][j-1]| + |R[1][j]|)²` once the diagonal
//! kernel entries satisfy `a_max |R| <= 0.05`. Those entries decay like
//! `e^{-λ(s) j}`, so beyond a per-index cutoff node the correction is below
//! `TRUNCATION_EPS` times the trace scale and the residual there equals the
//! homogeneous residual, whose suffix sums are precomputed per measurement.

use rayon::prelude::*;

use crate::measurement::{MeasurementSet, SGrid};
use crate::model::ChainConfig;
use crate::spectral::{lambda_of_s, DefectKernels};

/// Relative size of the defect correction treated as zero.
pub const TRUNCATION_EPS: f64 = 1e-32;

/// Kernel entries of one defect index up to its truncation cutoff.
#[derive(Debug, Clone)]
struct IndexKernels {
    kernels: Vec<DefectKernels>,
}

/// Stiffness-independent part of the forward map on one grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    chain: ChainConfig,
    grid: SGrid,
    weights: Vec<f64>,
    homogeneous: Vec<f64>,
    per_index: Vec<IndexKernels>,
}

impl KernelTable {
    /// Tabulates kernels for every defect index, truncated for contrasts
    /// `|k - k*|` with `k*` inside `k_range`.
    pub fn new(chain: &ChainConfig, grid: &SGrid, k_range: (f64, f64)) -> Self {
        let nodes = grid.nodes();
        let points: Vec<_> = nodes.iter().map(|&s| lambda_of_s(s, chain)).collect();
        let gamma = chain.impulse();
        let k = chain.base_stiffness();
        let a_max = (k - k_range.0).abs().max((k - k_range.1).abs()).max(f64::MIN_POSITIVE);
        let homogeneous: Vec<f64> = points
            .iter()
            .map(|sp| -gamma * DefectKernels::new(2, sp, chain).r_11)
            .collect();
        let scale = homogeneous.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let threshold = TRUNCATION_EPS * scale;

        let per_index = chain
            .defect_indices()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&j| {
                let all: Vec<DefectKernels> =
                    points.iter().map(|sp| DefectKernels::new(j, sp, chain)).collect();
                let negligible = |kn: &DefectKernels| {
                    let diag = kn.r_pp.abs().max(kn.r_pj.abs()).max(kn.r_jj.abs());
                    let s1 = kn.r_1p.abs() + kn.r_1j.abs();
                    a_max * diag <= 0.05 && 3.0 * a_max * gamma.abs() * s1 * s1 <= threshold
                };
                let mut cutoff = all.len();
                while cutoff > 0 && negligible(&all[cutoff - 1]) {
                    cutoff -= 1;
                }
                let mut kernels = all;
                kernels.truncate(cutoff);
                IndexKernels { kernels }
            })
            .collect();

        Self {
            chain: *chain,
            grid: *grid,
            weights: grid.weights(),
            homogeneous,
            per_index,
        }
    }

    pub fn chain(&self) -> &ChainConfig {
        &self.chain
    }

    pub fn grid(&self) -> &SGrid {
        &self.grid
    }

    /// Number of grid nodes evaluated explicitly for index `j`.
    pub fn cutoff(&self, j: usize) -> usize {
        self.per_index[j - 2].kernels.len()
    }

    /// Homogeneous response `x̃₁` at every node.
    pub fn homogeneous(&self) -> &[f64] {
        &self.homogeneous
    }
}

/// A kernel table bound to one measured trace.
#[derive(Debug, Clone)]
pub struct ResidualModel<'a> {
    table: &'a KernelTable,
    measured: &'a [f64],
    /// `tail[i] = Σ_{l >= i} w_l (x_hom,l - meas_l)²`
    tail: Vec<f64>,
}

impl<'a> ResidualModel<'a> {
    pub fn new(table: &'a KernelTable, meas: &'a MeasurementSet) -> Self {
        assert_eq!(meas.values.len(), table.grid.n_nodes());
        let n = meas.values.len();
        let mut tail = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let d = table.homogeneous[i] - meas.values[i];
            tail[i] = tail[i + 1] + table.weights[i] * d * d;
        }
        Self {
            table,
            measured: &meas.values,
            tail,
        }
    }

    /// Quadrature of the squared residual for the hypothesis `(j, k)`;
    /// `+∞` when the adjacent-pair system is singular at some node.
    pub fn squared_norm(&self, j: usize, k: f64) -> f64 {
        let kernels = &self.table.per_index[j - 2].kernels;
        let a = self.table.chain.base_stiffness() - k;
        let gamma = self.table.chain.impulse();
        let mut acc = 0.0;
        for (i, kn) in kernels.iter().enumerate() {
            match kn.x1_raw(a, gamma) {
                Some(x) => {
                    let d = x - self.measured[i];
                    acc += self.table.weights[i] * d * d;
                }
                None => return f64::INFINITY,
            }
        }
        let q = acc + self.tail[kernels.len()];
        if q.is_nan() {
            f64::INFINITY
        } else {
            q
        }
    }

    pub fn table(&self) -> &KernelTable {
        self.table
    }
}
