//! Experiment drivers behind the command-line frontend.
//!
//! [`run`] executes one [`ExperimentConfig`] and writes its artifacts to
//! `output_dir`:
//!
//! | kind             | artifacts                                               |
//! |------------------|---------------------------------------------------------|
//! | `simulate`       | `measurement.txt`, `trace.csv`, `simulate.json`         |
//! | `invert`         | `invert.json`, `residual_curve.csv`                     |
//! | `mc-invert`      | `mc_invert.json`, `mc_runs.csv`                         |
//! | `sweep-*`        | `sweep.json`, `sweep.csv`, `points/point-<i>.json`      |
//! | `landscape`      | `landscape.json`, `landscape.csv`                       |
//! | `validate`       | `validate.json`                                         |
//!
//! Every run also writes `config.toml` (the resolved configuration, loadable
//! as-is) and `timing.json` (wall-clock seconds, the only nondeterministic
//! output).
//!
//! Seeds: experiment seed `S`; the noise seed of a single measurement and the
//! Monte Carlo base seed of a single aggregate are `derive_seed(S, 0)`; sweep
//! point `i` uses base seed `derive_seed(S, i)`; Monte Carlo run `r` uses noise
//! seed `base + r` and perturbation seed `delta_seed(base + r)`.

pub mod config;
pub mod report;
pub mod sweep;
pub mod validate;

use std::path::PathBuf;

use serde_json::json;

use crate::error::{Error, Result};
use crate::inversion::{
    invert, landscape, mc_invert, InversionResult, McSummary, ObjectiveSpec, SigmaSmoothSpec,
};
use crate::measurement::MeasurementSet;
use crate::seeds::derive_seed;

pub use config::{ExperimentConfig, ExperimentKind, Resolved, PRESETS};
use report::{relative_error, write_json, ArtifactSink};
pub use sweep::{SweepBase, SweepPoint, SweepReport, SweptParameter};

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    /// `false` only when a `validate` check failed.
    pub passed: bool,
}

/// Process exit code for a run result: 0 success, 1 failed validation or
/// runtime error, 2 configuration error.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(Error::Config { .. } | Error::InvalidParameter { .. }) => 2,
        Err(_) => 1,
    }
}

/// Default worker count: all available cores.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Runs one experiment on a pool of `config.workers` threads.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let workers = config.workers.unwrap_or_else(default_workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config {
            path: "workers".into(),
            reason: e.to_string(),
        })?;
    pool.install(|| run_resolved(config, &resolved))
}

fn run_resolved(config: &ExperimentConfig, res: &Resolved) -> Result<RunOutcome> {
    let start = std::time::Instant::now();
    let echo = serde_json::to_value(config)?;
    let mut sink = ArtifactSink::new(&config.output_dir, echo)?;
    let toml_path = sink.path("config.toml");
    crate::measurement::write_atomic(&toml_path, config.to_toml().as_bytes())?;
    sink.record(toml_path);

    let seed = config.seed;
    let noise_seed = derive_seed(seed, 0);
    let mut passed = true;

    match res.kind {
        ExperimentKind::Simulate => {
            let meas = MeasurementSet::generate(
                &res.chain,
                &res.defect,
                &res.grid,
                config.noise.level,
                noise_seed,
            )?;
            let path = sink.path("measurement.txt");
            meas.save(&path)?;
            sink.record(path);
            let rows: Vec<String> = res
                .grid
                .nodes()
                .iter()
                .zip(&meas.values)
                .map(|(s, v)| format!("{s:e},{v:e}"))
                .collect();
            sink.csv("trace.csv", "s,value", &rows)?;
            let max_abs = meas.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            sink.json(
                "simulate.json",
                json!({
                    "kind": "simulate",
                    "seeds": { "experiment": seed, "noise": noise_seed },
                    "measurement": "measurement.txt",
                    "n_nodes": meas.values.len(),
                    "max_abs": max_abs,
                    "noise_std": config.noise.level * max_abs,
                    "truth": meas.truth,
                }),
            )?;
        }

        ExperimentKind::Invert => {
            let (meas, source) = match &config.measurement {
                Some(path) => (MeasurementSet::load(path)?, path.display().to_string()),
                None => (
                    MeasurementSet::generate(
                        &res.chain,
                        &res.defect,
                        &res.grid,
                        config.noise.level,
                        noise_seed,
                    )?,
                    "synthesized".to_string(),
                ),
            };
            // A loaded file fixes the chain and grid.
            let spec = ObjectiveSpec {
                grid: meas.grid,
                ..res.objective
            };
            let result = invert(&meas, &spec)?;
            sink.time("invert", result.wall_time);
            let rows: Vec<String> = result
                .per_index_residuals
                .iter()
                .zip(&result.per_index_stiffness)
                .enumerate()
                .map(|(i, (f, k))| format!("{},{f:e},{k:e}", i + 2))
                .collect();
            sink.csv("residual_curve.csv", "j,residual,k_best", &rows)?;
            sink.json(
                "invert.json",
                json!({
                    "kind": "invert",
                    "seeds": { "experiment": seed, "noise": meas.seed },
                    "measurement_source": source,
                    "truth": meas.truth,
                    "errors": meas.truth.map(|t| errors_of(&result, t.index(), t.stiffness())),
                    "physical": physical(res, &result),
                    "result": result,
                }),
            )?;
        }

        ExperimentKind::McInvert => {
            let smooth = SigmaSmoothSpec {
                base_seed: noise_seed,
                ..res.smooth
            };
            let summary = mc_invert(
                &res.chain,
                &res.defect,
                &res.grid,
                config.noise.level,
                &res.objective,
                &smooth,
            )?;
            sink.time("mc_invert", summary.wall_time);
            let rows: Vec<String> = summary
                .runs
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{:e},{:e}",
                        r.run, r.noise_seed, r.delta_seed, r.j_hat, r.k_hat, r.residual
                    )
                })
                .collect();
            sink.csv(
                "mc_runs.csv",
                "run,noise_seed,delta_seed,j_hat,k_hat,residual",
                &rows,
            )?;
            sink.json(
                "mc_invert.json",
                json!({
                    "kind": "mc-invert",
                    "seeds": { "experiment": seed, "base": noise_seed },
                    "truth": res.defect,
                    "errors": mc_errors(&summary, res.defect.index(), res.defect.stiffness()),
                    "summary": summary,
                }),
            )?;
        }

        ExperimentKind::SweepNoise | ExperimentKind::SweepLocation | ExperimentKind::SweepSize => {
            let (parameter, values): (SweptParameter, Vec<f64>) = match res.kind {
                ExperimentKind::SweepNoise => (SweptParameter::NoiseLevel, config.sweep.levels.clone()),
                ExperimentKind::SweepLocation => (
                    SweptParameter::DefectIndex,
                    config.sweep.indices.iter().map(|&j| j as f64).collect(),
                ),
                _ => (SweptParameter::DefectStiffness, config.sweep.stiffnesses.clone()),
            };
            let points_dir = sink.path("points");
            std::fs::create_dir_all(&points_dir).map_err(|e| Error::io(&points_dir, e))?;
            let echo = sink.config().clone();
            let base = SweepBase {
                chain: &res.chain,
                defect: &res.defect,
                noise_level: config.noise.level,
                objective: &res.objective,
                smooth: &res.smooth,
                seed,
            };
            let report = sweep::run_sweep(parameter, &values, base, |i, point| {
                let mut payload = serde_json::to_value(point)?;
                payload["config"] = echo.clone();
                write_json(&points_dir.join(format!("point-{i}.json")), &payload)
            })?;
            for i in 0..values.len() {
                sink.record(points_dir.join(format!("point-{i}.json")));
            }
            sink.csv("sweep.csv", sweep::SWEEP_CSV_HEADER, &report.csv_rows())?;
            sink.json(
                "sweep.json",
                json!({
                    "kind": res.kind.name(),
                    "seeds": { "experiment": seed },
                    "report": report,
                }),
            )?;
        }

        ExperimentKind::Landscape => {
            let meas = MeasurementSet::generate(
                &res.chain,
                &res.defect,
                &res.grid,
                config.noise.level,
                noise_seed,
            )?;
            let l = &config.landscape;
            let map = landscape(
                &meas,
                &res.objective,
                res.landscape_j.0..=res.landscape_j.1,
                (l.k_min, l.k_max),
                l.k_steps,
            )?;
            let inverted = invert(&meas, &res.objective)?;
            let (j_min, k_min, f_min) = map.argmin();
            sink.csv("landscape.csv", crate::inversion::LANDSCAPE_CSV_HEADER, &map.csv_rows())?;
            sink.json(
                "landscape.json",
                json!({
                    "kind": "landscape",
                    "seeds": { "experiment": seed, "noise": noise_seed },
                    "truth": res.defect,
                    "argmin": { "j": j_min, "k": k_min, "log_residual": f_min, "residual": 10f64.powf(f_min) },
                    "k_step": map.k_step(),
                    "invert": inverted,
                    "j_values": map.j_values,
                    "k_values": map.k_values,
                }),
            )?;
        }

        ExperimentKind::Validate => {
            let checks = validate::run_all(seed);
            passed = checks.iter().all(|c| c.passed);
            for c in &checks {
                log::info!(
                    "{} {}: max error {:.3e} (tolerance {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_error,
                    c.tolerance
                );
            }
            sink.json(
                "validate.json",
                json!({ "kind": "validate", "passed": passed, "checks": checks }),
            )?;
        }
    }

    sink.time("total", start.elapsed().as_secs_f64());
    Ok(RunOutcome {
        artifacts: sink.finish()?,
        passed,
    })
}

fn errors_of(r: &InversionResult, j: usize, k: f64) -> serde_json::Value {
    json!({
        "location": relative_error(r.j_hat as f64, j as f64),
        "size": relative_error(r.k_hat, k),
    })
}

fn mc_errors(s: &McSummary, j: usize, k: f64) -> serde_json::Value {
    json!({
        "location": s.median_j.map(|m| relative_error(m, j as f64)),
        "size": s.median_k.map(|m| relative_error(m, k)),
    })
}

/// Estimated defect position and modulus in physical units, when configured.
fn physical(res: &Resolved, r: &InversionResult) -> serde_json::Value {
    match &res.units {
        None => serde_json::Value::Null,
        Some(u) => json!({
            // Spring j spans cell j - 1 of length L / N.
            "position_m": (r.j_hat as f64 - 1.5) * u.cell_length(&res.chain),
            "youngs_modulus_pa": u.modulus_for_stiffness(r.k_hat),
            "max_resolved_frequency_hz": crate::model::max_resolved_frequency(u, &res.chain),
        }),
    }
}
