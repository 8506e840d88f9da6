//! Time-domain integration of the defective chain and a numerical Laplace
//! transform of the first-mass trajectory.
//!
//! This is an oracle for [`crate::spectral`] that shares none of its
//! algebra: the chain ODEs are integrated with classical RK4 (fourth order)
//! and the resulting `x₁(t)` is transformed by composite Simpson quadrature.
//! The impulse `γ δ(t)` on mass 1 is realized exactly as the initial velocity
//! `x₁'(0⁺) = γ / m`.
//!
//! RK4 is stable for `ω dt < 2.78`; the step bound enforced here,
//! `dt <= 0.05 · 2π / ω_max` with `ω_max = 2 sqrt(k_max / m)`, keeps every
//! mode far inside that region.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::model::{ChainConfig, DefectHypothesis};
use crate::quadrature::simpson_weights;

/// Magnitude (in units of γ) beyond which a trajectory is declared unstable.
pub const INSTABILITY_FACTOR: f64 = 1e6;

/// Default integration window for d = 0.1 (tail factor e^{-20} as s → 0⁺).
pub const DEFAULT_DURATION: f64 = 400.0;

/// Sampled first-mass trajectory `x₁(t_i)`, `t_i = i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    dt: f64,
    duration: f64,
    samples: Vec<f64>,
    /// Weighted mechanical energy at each sample (empty for external traces).
    energy: Vec<f64>,
    /// Envelope decay rate `d / 2m` used for the truncation bound.
    decay_rate: f64,
}

impl TimeTrace {
    /// Wraps externally produced samples. `samples[0]` must be zero.
    pub fn from_samples(dt: f64, samples: Vec<f64>, decay_rate: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::invalid("samples", "need at least two samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "non-finite sample"));
        }
        if samples[0] != 0.0 {
            return Err(Error::invalid("samples", "x1(0) must be 0"));
        }
        if !(decay_rate >= 0.0) {
            return Err(Error::invalid("decay_rate", "must be >= 0"));
        }
        Ok(Self {
            dt,
            duration: dt * (samples.len() - 1) as f64,
            samples,
            energy: Vec::new(),
            decay_rate,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| i as f64 * self.dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Two-column CSV `t,x1`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,x1").map_err(io)?;
        for (t, x) in self.times().zip(&self.samples) {
            writeln!(w, "{t:e},{x:e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Largest admissible step, `0.05 · 2π / ω_max`.
pub fn max_stable_step(chain: &ChainConfig, defect: &DefectHypothesis) -> f64 {
    let k_max = chain.base_stiffness().max(defect.stiffness());
    let omega_max = 2.0 * (k_max / chain.base_mass()).sqrt();
    0.05 * std::f64::consts::TAU / omega_max
}

/// Stiffness operator of the chain equations (restoring force `= -S x`).
fn stiffness_operator(chain: &ChainConfig, defect: &DefectHypothesis) -> Tridiagonal {
    let n = chain.n_masses();
    let k = chain.base_stiffness();
    let ks = defect.stiffness();
    let j = defect.index();
    let mut diag = vec![2.0 * k; n];
    diag[j - 2] = k + ks;
    diag[j - 1] = k + ks;
    let upper = vec![-k; n - 1];
    let mut lower = vec![-k; n - 1];
    lower[j - 2] = -ks;
    Tridiagonal::new(lower, diag, upper)
}

/// Per-mass weights that symmetrize the stiffness operator: `W S` is
/// symmetric for `w_i = 1` (i < j) and `w_i = k / k*` (i ≥ j), so
/// `E = ½ Σ w m v² + ½ xᵀ W S x` satisfies `dE/dt = -d Σ w v² ≤ 0`.
fn energy_weights(chain: &ChainConfig, defect: &DefectHypothesis) -> Vec<f64> {
    let ratio = chain.base_stiffness() / defect.stiffness();
    (1..=chain.n_masses())
        .map(|i| if i < defect.index() { 1.0 } else { ratio })
        .collect()
}

/// Integrates the chain after an impulse on mass 1 with fixed step RK4.
///
/// Returns `x₁` and the weighted energy at every step, `t ∈ [0, T]`.
pub fn integrate_chain(
    chain: &ChainConfig,
    defect: &DefectHypothesis,
    dt: f64,
    duration: f64,
) -> Result<TimeTrace> {
    let bound = max_stable_step(chain, defect);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    integrate_unchecked(chain, defect, dt, duration)
}

fn integrate_unchecked(
    chain: &ChainConfig,
    defect: &DefectHypothesis,
    dt: f64,
    duration: f64,
) -> Result<TimeTrace> {
    if !(duration >= dt && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("need T >= dt, got {duration}")));
    }
    assert!(
        defect.index() <= chain.n_masses(),
        "defect index outside the chain"
    );
    let n = chain.n_masses();
    let m = chain.base_mass();
    let damp = chain.damping();
    let gamma = chain.impulse();
    let limit = INSTABILITY_FACTOR * gamma.abs().max(f64::MIN_POSITIVE);
    let stiff = stiffness_operator(chain, defect);
    let weights = energy_weights(chain, defect);
    let steps = (duration / dt).round() as usize;

    // y = (x, v); dy/dt = (v, -(d v + S x) / m)
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    v[0] = gamma / m;

    let mut sx = vec![0.0; n];
    let energy_of = |x: &[f64], v: &[f64], sx: &mut [f64]| {
        stiff.apply_into(x, sx);
        let mut e = 0.0;
        for i in 0..n {
            e += weights[i] * (m * v[i] * v[i] + x[i] * sx[i]);
        }
        0.5 * e
    };

    let mut samples = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    samples.push(0.0);
    energy.push(energy_of(&x, &v, &mut sx));

    let mut kx = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut kv = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut xs = vec![0.0; n];
    let mut vs = vec![0.0; n];

    let accel = |x: &[f64], v: &[f64], sx: &mut [f64], out: &mut [f64]| {
        stiff.apply_into(x, sx);
        for i in 0..n {
            out[i] = -(damp * v[i] + sx[i]) / m;
        }
    };

    for step in 1..=steps {
        // Stage 1
        kx[0].copy_from_slice(&v);
        accel(&x, &v, &mut sx, &mut kv[0]);
        // Stages 2-4
        for (stage, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                xs[i] = x[i] + c * dt * kx[stage - 1][i];
                vs[i] = v[i] + c * dt * kv[stage - 1][i];
            }
            kx[stage].copy_from_slice(&vs);
            let (_, rest) = kv.split_at_mut(stage);
            accel(&xs, &vs, &mut sx, &mut rest[0]);
        }
        let h6 = dt / 6.0;
        for i in 0..n {
            x[i] += h6 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            v[i] += h6 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
        }
        let x1 = x[0];
        if !(x1.abs() <= limit) {
            return Err(Error::UnstableStep {
                t: step as f64 * dt,
                value: x1.abs(),
            });
        }
        samples.push(x1);
        energy.push(energy_of(&x, &v, &mut sx));
    }

    Ok(TimeTrace {
        dt,
        duration: steps as f64 * dt,
        samples,
        energy,
        decay_rate: damp / (2.0 * m),
    })
}

/// Truncation bound `e^{-(s + d/2m) T} max|x₁|` for transforming over `[0, T]`.
pub fn truncation_bound(trace: &TimeTrace, s: f64) -> f64 {
    (-(s + trace.decay_rate) * trace.duration).exp() * trace.max_abs()
}

/// Window length at which the truncation bound for a trajectory of peak
/// `amplitude` falls to `tolerance`.
pub fn required_duration(s: f64, decay_rate: f64, amplitude: f64, tolerance: f64) -> f64 {
    (amplitude / tolerance).ln().max(0.0) / (s + decay_rate)
}

/// `∫₀ᵀ e^{-st} x₁(t) dt` by composite Simpson on the sample grid.
pub fn numerical_laplace(trace: &TimeTrace, s: f64, tolerance: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", format!("need s > 0, got {s}")));
    }
    let bound = truncation_bound(trace, s);
    if bound > tolerance {
        return Err(Error::TailTooLarge {
            s,
            bound,
            tolerance,
        });
    }
    let w = simpson_weights(trace.samples.len(), trace.dt);
    Ok(trace
        .samples
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(i, (x, w))| w * x * (-s * i as f64 * trace.dt).exp())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::direct_solve_x1;
    use std::f64::consts::PI;

    // Undamped homogeneous chain: normal modes sin(i n π / (N+1)),
    // ω_n = 2 sqrt(k/m) sin(n π / 2(N+1)).
    fn closed_form_x1(n: usize, gamma: f64, t: f64) -> f64 {
        let np1 = (n + 1) as f64;
        (1..=n)
            .map(|mode| {
                let theta = mode as f64 * PI / np1;
                let omega = 2.0 * (theta / 2.0).sin();
                2.0 / np1 * theta.sin().powi(2) * gamma * (omega * t).sin() / omega
            })
            .sum()
    }

    fn max_error_vs_closed_form(n: usize, dt: f64, t_end: f64) -> f64 {
        let chain = ChainConfig::new(n, 0.0, 1.0).unwrap();
        let defect = DefectHypothesis::new(2, 1.0, &chain).unwrap();
        let tr = integrate_chain(&chain, &defect, dt, t_end).unwrap();
        tr.times()
            .zip(tr.samples())
            .map(|(t, x)| (x - closed_form_x1(n, 1.0, t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn undamped_chain_matches_normal_modes() {
        let err = max_error_vs_closed_form(3, 0.005, 10.0);
        assert!(err < 1e-6, "max error {err}");
        let err = max_error_vs_closed_form(8, 0.005, 10.0);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn fourth_order_convergence() {
        let coarse = max_error_vs_closed_form(3, 0.1, 10.0);
        let fine = max_error_vs_closed_form(3, 0.05, 10.0);
        let ratio = coarse / fine;
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn damped_energy_is_nonincreasing() {
        let chain = ChainConfig::baseline();
        for (j, k) in [(40, 1.3), (10, 0.2), (70, 4.0)] {
            let defect = DefectHypothesis::new(j, k, &chain).unwrap();
            let tr = integrate_chain(&chain, &defect, 0.01, 100.0).unwrap();
            let e = tr.energy();
            assert!((e[0] - 0.5).abs() < 1e-15);
            for w in e.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "energy rose: {} -> {}", w[0], w[1]);
            }
            assert!(e[e.len() - 1] < e[0]);
        }
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let chain = ChainConfig::new(30, 0.0, 1.0).unwrap();
        let defect = DefectHypothesis::new(12, 2.5, &chain).unwrap();
        let tr = integrate_chain(&chain, &defect, 0.01, 50.0).unwrap();
        let e = tr.energy();
        let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8 * e[0], "drift {drift}");
    }

    #[test]
    fn response_is_linear_in_impulse() {
        let chain = ChainConfig::new(20, 0.1, 1.0).unwrap();
        let defect = DefectHypothesis::new(7, 1.6, &chain).unwrap();
        let a = integrate_chain(&chain, &defect, 0.01, 20.0).unwrap();
        let b = integrate_chain(&chain.with_impulse(2.0), &defect, 0.01, 20.0).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn step_bound_enforced() {
        let chain = ChainConfig::baseline();
        let defect = DefectHypothesis::new(40, 4.0, &chain).unwrap();
        let bound = max_stable_step(&chain, &defect);
        assert!((bound - 0.05 * PI / 2.0).abs() < 1e-15);
        assert!(matches!(
            integrate_chain(&chain, &defect, bound * 1.01, 10.0),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(integrate_chain(&chain, &defect, 0.0, 10.0).is_err());
    }

    #[test]
    fn instability_is_detected() {
        let chain = ChainConfig::new(10, 0.0, 1.0).unwrap();
        let defect = DefectHypothesis::new(5, 1.0, &chain).unwrap();
        // ω_max dt ≈ 4 lies outside the RK4 stability region.
        let err = integrate_unchecked(&chain, &defect, 2.0, 1000.0).unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }));
    }

    #[test]
    fn laplace_of_exponential() {
        let dt = 1e-3;
        let samples: Vec<f64> = (0..=40_000).map(|i| {
            let t = i as f64 * dt;
            // x(0) = 0 is required, so use e^{-t} - e^{-2t}; L = 1/(s+1) - 1/(s+2).
            (-t).exp() - (-2.0 * t).exp()
        }).collect();
        let tr = TimeTrace::from_samples(dt, samples, 0.0).unwrap();
        let v = numerical_laplace(&tr, 1.0, 1e-6).unwrap();
        assert!((v - (0.5 - 1.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn laplace_of_pure_exponential_value() {
        // e^{-t} itself (nonzero at the origin) through the raw quadrature.
        let dt = 1e-3;
        let samples: Vec<f64> = (0..=40_000).map(|i| (-(i as f64) * dt).exp()).collect();
        let w = simpson_weights(samples.len(), dt);
        let v: f64 = samples.iter().zip(&w).enumerate()
            .map(|(i, (x, w))| w * x * (-(i as f64) * dt).exp())
            .sum();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn tail_too_large() {
        let samples: Vec<f64> = (0..=100).map(|i| (i as f64 * 0.01).sin()).collect();
        let tr = TimeTrace::from_samples(0.01, samples, 0.0).unwrap();
        assert!(matches!(
            numerical_laplace(&tr, 0.5, 1e-6),
            Err(Error::TailTooLarge { .. })
        ));
        assert!(numerical_laplace(&tr, 0.0, 1.0).is_err());
    }

    #[test]
    fn doubling_s_halves_required_window() {
        let t1 = required_duration(1.5, 0.0, 1.0, 1e-9);
        let t2 = required_duration(3.0, 0.0, 1.0, 1e-9);
        assert!((t1 - 2.0 * t2).abs() < 1e-12);
    }

    #[test]
    fn baseline_cross_check_at_s2() {
        let chain = ChainConfig::baseline();
        let defect = DefectHypothesis::new(40, 1.3, &chain).unwrap();
        let tr = integrate_chain(&chain, &defect, 1e-3, DEFAULT_DURATION).unwrap();
        let num = numerical_laplace(&tr, 2.0, 1e-8).unwrap();
        let direct = direct_solve_x1(40, 1.3, 2.0, &chain).unwrap();
        assert!((num - direct).abs() / direct.abs() < 1e-3, "{num} vs {direct}");
    }

    #[test]
    fn rejects_bad_external_traces() {
        assert!(TimeTrace::from_samples(0.0, vec![0.0, 1.0], 0.0).is_err());
        assert!(TimeTrace::from_samples(0.1, vec![1.0, 1.0], 0.0).is_err());
        assert!(TimeTrace::from_samples(0.1, vec![0.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn csv_export() {
        let tr = TimeTrace::from_samples(0.5, vec![0.0, 1.0, 0.25], 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        tr.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "5e-1,1e0");
    }
}
