//! Single-defect imaging for a damped spring–mass chain.
//!
//! The chain is the lumped model of a clamped elastic bar: `N` unit masses,
//! unit springs, uniform viscous damping, and one spring (index `j`, coupling
//! masses `j-1` and `j`) whose stiffness `k*` differs from the baseline. The
//! only observation is the Laplace-domain response `x̃₁(s)` of the first mass
//! to an impulse. Given that trace, the crate recovers `(j, k*)` by minimizing
//! a log-residual between an analytic Green's-kernel forward map and the data.
//!
//! Module map:
//!
//! - [`model`]: chain and defect configuration, bar ↔ chain identifications,
//!   physical unit conversions.
//! - [`spectral`]: the Laplace-domain forward maps (closed-form kernel and the
//!   direct tridiagonal solve used as data generator and oracle).
//! - [`timedomain`]: an independent ODE integration of the chain plus a
//!   numerical Laplace transform, used to validate [`spectral`] end to end.
//! - [`measurement`]: synthetic traces on an `s` grid, seeded noise, file IO.
//! - [`inversion`]: the residual objective, per-index search, σ-smooth
//!   Monte Carlo variant and dense residual landscapes.
//! - [`harness`]: experiment configuration, drivers and report output.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod inversion;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod quadrature;
pub mod seeds;
pub mod spectral;
pub mod timedomain;

pub use error::{Error, Result};
pub use inversion::{
    invert, landscape, mc_invert, objective, sigma_smooth_objective, InversionResult,
    ObjectiveSpec, SigmaSmoothSpec,
};
pub use measurement::{MeasurementSet, SGrid};
pub use model::{ChainConfig, DefectHypothesis, PhysicalUnits};
