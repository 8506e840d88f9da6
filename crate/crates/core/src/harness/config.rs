//! Experiment configuration files.
//!
//! A config is a TOML document whose every field has a default, so an empty
//! file plus a subcommand is a valid experiment. Unknown keys are rejected.
//! The fully resolved form is written next to every result and loads back to
//! the same experiment.
//!
//! ```toml
//! kind = "invert"
//! seed = 7
//! output_dir = "out"
//!
//! [chain]
//! n_masses = 100
//! damping = 0.1
//!
//! [defect]
//! index = 40
//! stiffness = 1.3
//!
//! [noise]
//! level = 1e-6
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{ObjectiveSpec, SigmaSmoothSpec};
use crate::measurement::SGrid;
use crate::model::{ChainConfig, DefectHypothesis, PhysicalUnits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Invert,
    McInvert,
    SweepNoise,
    SweepLocation,
    SweepSize,
    Landscape,
    Validate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Simulate,
        Self::Invert,
        Self::McInvert,
        Self::SweepNoise,
        Self::SweepLocation,
        Self::SweepSize,
        Self::Landscape,
        Self::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Invert => "invert",
            Self::McInvert => "mc-invert",
            Self::SweepNoise => "sweep-noise",
            Self::SweepLocation => "sweep-location",
            Self::SweepSize => "sweep-size",
            Self::Landscape => "landscape",
            Self::Validate => "validate",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                path: "kind".into(),
                reason: format!("unknown experiment kind `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub n_masses: usize,
    pub damping: f64,
    pub impulse: f64,
    pub base_stiffness: f64,
    pub base_mass: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            n_masses: 100,
            damping: 0.1,
            impulse: 1.0,
            base_stiffness: 1.0,
            base_mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefectSection {
    pub index: usize,
    pub stiffness: f64,
}

impl Default for DefectSection {
    fn default() -> Self {
        Self {
            index: 40,
            stiffness: 1.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Relative level η; noise std is η max|x̃₁|.
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub s_min: f64,
    pub s_max: f64,
    pub n_nodes: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = SGrid::default();
        Self {
            s_min: g.s_min(),
            s_max: g.s_max(),
            n_nodes: g.n_nodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub log_floor: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_tol: f64,
    pub coarse_k_nodes: usize,
    pub max_evaluations: usize,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        let o = ObjectiveSpec::default();
        Self {
            log_floor: o.log_floor,
            k_min: o.k_bounds.0,
            k_max: o.k_bounds.1,
            k_tol: o.k_tol,
            coarse_k_nodes: o.coarse_k_nodes,
            max_evaluations: o.max_evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothSection {
    pub sigma_smooth: f64,
    pub n_delta: usize,
    pub n_mc: usize,
}

impl Default for SmoothSection {
    fn default() -> Self {
        let s = SigmaSmoothSpec::default();
        Self {
            sigma_smooth: s.sigma_smooth,
            n_delta: s.n_delta,
            n_mc: s.n_mc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Noise levels for `sweep-noise`, ascending.
    pub levels: Vec<f64>,
    /// Defect indices for `sweep-location`.
    pub indices: Vec<usize>,
    /// Defect stiffnesses for `sweep-size`.
    pub stiffnesses: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            levels: vec![1e-8, 1e-7, 1e-6, 1e-5],
            indices: (1..=19).map(|i| 5 * i).collect(),
            stiffnesses: (0..20).map(|i| 1.05 + 0.05 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeSection {
    pub j_min: usize,
    /// `0` means the last mass.
    pub j_max: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            j_min: 2,
            j_max: 0,
            k_min: 0.1,
            k_max: 5.0,
            k_steps: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub length: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub cross_section: f64,
}

/// On-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Measurement file to invert instead of synthesizing one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<PathBuf>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub defect: DefectSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub smooth: SmoothSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<UnitsSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            output_dir: default_output_dir(),
            workers: None,
            measurement: None,
            chain: ChainSection::default(),
            defect: DefectSection::default(),
            noise: NoiseSection::default(),
            grid: GridSection::default(),
            objective: ObjectiveSection::default(),
            smooth: SmoothSection::default(),
            sweep: SweepSection::default(),
            landscape: LandscapeSection::default(),
            units: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            reason: e.message().to_string()
                + &e.span()
                    .map(|r| format!(" (at byte {})", r.start))
                    .unwrap_or_default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Named configurations of the reference studies.
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self::default();
        match name {
            "baseline" => c.kind = Some(ExperimentKind::Invert),
            "noise-threshold" => {
                c.kind = Some(ExperimentKind::SweepNoise);
                c.smooth = SmoothSection {
                    sigma_smooth: 0.0,
                    n_delta: 1,
                    n_mc: 20,
                };
            }
            "smooth-comparison" => {
                c.kind = Some(ExperimentKind::McInvert);
                c.noise.level = 5e-5;
            }
            "location-sweep" => {
                c.kind = Some(ExperimentKind::SweepLocation);
                c.noise.level = 5e-4;
            }
            "size-sweep" => {
                c.kind = Some(ExperimentKind::SweepSize);
                c.noise.level = 5e-4;
            }
            "landscape-85" => {
                c.kind = Some(ExperimentKind::Landscape);
                c.defect = DefectSection {
                    index: 85,
                    stiffness: 1.3,
                };
                c.noise.level = 5e-4;
            }
            "landscape-90" => {
                c.kind = Some(ExperimentKind::Landscape);
                c.defect = DefectSection {
                    index: 90,
                    stiffness: 1.1,
                };
                c.noise.level = 5e-4;
            }
            other => {
                return Err(Error::Config {
                    path: "preset".into(),
                    reason: format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")),
                })
            }
        }
        Ok(c)
    }
}

pub const PRESETS: [&str; 7] = [
    "baseline",
    "noise-threshold",
    "smooth-comparison",
    "location-sweep",
    "size-sweep",
    "landscape-85",
    "landscape-90",
];

/// Validated domain objects built from an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub chain: ChainConfig,
    pub defect: DefectHypothesis,
    pub grid: SGrid,
    pub objective: ObjectiveSpec,
    pub smooth: SigmaSmoothSpec,
    pub units: Option<PhysicalUnits>,
    pub landscape_j: (usize, usize),
}

/// Re-labels a domain validation error with the config key it came from.
fn at(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            let leaf = name.rsplit('.').next().unwrap_or(name);
            Error::Config {
                path: format!("{section}.{leaf}"),
                reason,
            }
        }
        other => other,
    }
}

fn config_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        let kind = self
            .kind
            .ok_or_else(|| config_err("kind", "no experiment kind given"))?;
        let c = &self.chain;
        let chain = ChainConfig::with_constants(
            c.n_masses,
            c.damping,
            c.impulse,
            c.base_stiffness,
            c.base_mass,
        )
        .map_err(|e| at("chain", e))?;
        let defect = DefectHypothesis::new(self.defect.index, self.defect.stiffness, &chain)
            .map_err(|e| at("defect", e))?;
        let grid = SGrid::new(self.grid.s_min, self.grid.s_max, self.grid.n_nodes)
            .map_err(|e| at("grid", e))?;
        let o = &self.objective;
        let objective = ObjectiveSpec {
            grid,
            log_floor: o.log_floor,
            k_bounds: (o.k_min, o.k_max),
            k_tol: o.k_tol,
            coarse_k_nodes: o.coarse_k_nodes,
            max_evaluations: o.max_evaluations,
        };
        objective.validate().map_err(|e| match at("objective", e) {
            Error::Config { path, reason } if path == "objective.k_bounds" => Error::Config {
                path: "objective.k_min".into(),
                reason,
            },
            other => other,
        })?;
        let smooth = SigmaSmoothSpec {
            sigma_smooth: self.smooth.sigma_smooth,
            n_delta: self.smooth.n_delta,
            n_mc: self.smooth.n_mc,
            base_seed: self.seed,
        };
        smooth.validate().map_err(|e| at("smooth", e))?;
        if !(self.noise.level >= 0.0 && self.noise.level.is_finite()) {
            return Err(config_err("noise.level", "must be >= 0"));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers", "must be >= 1"));
        }
        let units = self
            .units
            .as_ref()
            .map(|u| PhysicalUnits::new(u.length, u.density, u.youngs_modulus, u.cross_section))
            .transpose()
            .map_err(|e| at("units", e))?;

        match kind {
            ExperimentKind::SweepNoise => {
                let l = &self.sweep.levels;
                if l.is_empty() || l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(config_err("sweep.levels", "need positive noise levels"));
                }
                if l.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_err("sweep.levels", "levels must be strictly ascending"));
                }
            }
            ExperimentKind::SweepLocation => {
                let n = chain.n_masses();
                if self.sweep.indices.is_empty()
                    || self.sweep.indices.iter().any(|j| !(2..=n).contains(j))
                {
                    return Err(config_err("sweep.indices", format!("need indices in 2..={n}")));
                }
            }
            ExperimentKind::SweepSize => {
                let s = &self.sweep.stiffnesses;
                if s.is_empty() || s.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                    return Err(config_err("sweep.stiffnesses", "need positive stiffnesses"));
                }
            }
            _ => {}
        }

        let l = &self.landscape;
        let j_max = if l.j_max == 0 { chain.n_masses() } else { l.j_max };
        if kind == ExperimentKind::Landscape {
            if !(2 <= l.j_min && l.j_min < j_max && j_max <= chain.n_masses()) {
                return Err(config_err("landscape.j_min", "need 2 <= j_min < j_max <= N"));
            }
            if !(l.k_min > 0.0 && l.k_max > l.k_min) {
                return Err(config_err("landscape.k_min", "need 0 < k_min < k_max"));
            }
            if l.k_steps < 2 {
                return Err(config_err("landscape.k_steps", "need at least 2"));
            }
        }

        Ok(Resolved {
            kind,
            chain,
            defect,
            grid,
            objective,
            smooth,
            units,
            landscape_j: (l.j_min, j_max),
        })
    }
}
