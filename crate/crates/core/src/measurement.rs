//! Synthetic Laplace-domain measurements: generation, noise, persistence.
//!
//! Data are produced by the direct tridiagonal solve, never by the closed
//! form the inversion uses.
//!
//! # File format (version 1)
//!
//! ```text
//! # chain-defect measurement
//! version = 1
//! n_masses = 100
//! damping = 1e-1
//! impulse = 1e0
//! base_stiffness = 1e0
//! base_mass = 1e0
//! grid.s_min = 0e0
//! grid.s_max = 1e2
//! grid.n_nodes = 2001
//! noise_level = 0e0
//! seed = 0
//! truth.index = 40          # optional
//! truth.stiffness = 1.3e0   # optional
//! [values]
//! 8.97e-1
//! ...
//! ```
//!
//! Floats use Rust's shortest round-trip representation, so save/load is
//! bit-exact. Lines starting with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainConfig, DefectHypothesis};
use crate::quadrature::simpson_weights;
use crate::spectral::direct_solve_x1;

pub const FORMAT_VERSION: u32 = 1;

/// Uniform quadrature grid on `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct SGrid {
    s_min: f64,
    s_max: f64,
    n_nodes: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    s_min: f64,
    s_max: f64,
    n_nodes: usize,
}

impl TryFrom<RawGrid> for SGrid {
    type Error = Error;

    fn try_from(r: RawGrid) -> Result<Self> {
        SGrid::new(r.s_min, r.s_max, r.n_nodes)
    }
}

impl SGrid {
    pub const MIN_NODES: usize = 11;

    pub fn new(s_min: f64, s_max: f64, n_nodes: usize) -> Result<Self> {
        if !(s_min >= 0.0 && s_min.is_finite()) {
            return Err(Error::invalid("grid.s_min", format!("need s_min >= 0, got {s_min}")));
        }
        if !(s_max > s_min && s_max.is_finite()) {
            return Err(Error::invalid(
                "grid.s_max",
                format!("need s_max > s_min, got {s_max}"),
            ));
        }
        if n_nodes < Self::MIN_NODES {
            return Err(Error::invalid(
                "grid.n_nodes",
                format!("need at least {} nodes, got {n_nodes}", Self::MIN_NODES),
            ));
        }
        Ok(Self {
            s_min,
            s_max,
            n_nodes,
        })
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        (self.s_max - self.s_min) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.s_max
        } else {
            self.s_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }

    /// Composite Simpson weights for this grid.
    pub fn weights(&self) -> Vec<f64> {
        simpson_weights(self.n_nodes, self.spacing())
    }
}

impl Default for SGrid {
    fn default() -> Self {
        Self {
            s_min: 0.0,
            s_max: 100.0,
            n_nodes: 2001,
        }
    }
}

/// `x̃₁(s_i)` of the defective chain at every grid node, via the direct solve.
pub fn synthesize(chain: &ChainConfig, defect: &DefectHypothesis, grid: &SGrid) -> Result<Vec<f64>> {
    grid.nodes()
        .into_iter()
        .map(|s| direct_solve_x1(defect.index(), defect.stiffness(), s, chain))
        .collect()
}

/// Adds i.i.d. `N(0, (η max|v|)²)` noise, deterministic in `seed`.
pub fn add_noise(values: &[f64], noise_level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::invalid(
            "noise_level",
            format!("need η >= 0, got {noise_level}"),
        ));
    }
    let scale = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let std = noise_level * scale;
    if std == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = Normal::new(0.0, std).expect("positive finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Measured trace plus the metadata needed to regenerate it.
///
/// `truth` is bookkeeping only; nothing in the inversion reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub chain: ChainConfig,
    pub grid: SGrid,
    pub values: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
    pub truth: Option<DefectHypothesis>,
}

impl MeasurementSet {
    /// Synthesizes and perturbs the response of `(chain, defect)` on `grid`.
    pub fn generate(
        chain: &ChainConfig,
        defect: &DefectHypothesis,
        grid: &SGrid,
        noise_level: f64,
        seed: u64,
    ) -> Result<Self> {
        let clean = synthesize(chain, defect, grid)?;
        Ok(Self {
            chain: *chain,
            grid: *grid,
            values: add_noise(&clean, noise_level, seed)?,
            noise_level,
            seed,
            truth: Some(*defect),
        })
    }

    /// Same clean trace with a different noise realization.
    pub fn renoised(clean: &[f64], template: &MeasurementSet, noise_level: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            values: add_noise(clean, noise_level, seed)?,
            noise_level,
            seed,
            ..template.clone()
        })
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.grid.n_nodes() {
            return Err(Error::MalformedFile {
                line: 0,
                reason: format!(
                    "{} values for {} grid nodes",
                    self.values.len(),
                    self.grid.n_nodes()
                ),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedFile {
                line: 0,
                reason: format!("non-finite value at node {i}"),
            });
        }
        Ok(())
    }

    /// Serializes in the versioned text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.chain;
        out.push_str("# chain-defect measurement\n");
        out.push_str(&format!("version = {FORMAT_VERSION}\n"));
        out.push_str(&format!("n_masses = {}\n", c.n_masses()));
        out.push_str(&format!("damping = {:e}\n", c.damping()));
        out.push_str(&format!("impulse = {:e}\n", c.impulse()));
        out.push_str(&format!("base_stiffness = {:e}\n", c.base_stiffness()));
        out.push_str(&format!("base_mass = {:e}\n", c.base_mass()));
        out.push_str(&format!("grid.s_min = {:e}\n", self.grid.s_min()));
        out.push_str(&format!("grid.s_max = {:e}\n", self.grid.s_max()));
        out.push_str(&format!("grid.n_nodes = {}\n", self.grid.n_nodes()));
        out.push_str(&format!("noise_level = {:e}\n", self.noise_level));
        out.push_str(&format!("seed = {}\n", self.seed));
        if let Some(t) = &self.truth {
            out.push_str(&format!("truth.index = {}\n", t.index()));
            out.push_str(&format!("truth.stiffness = {:e}\n", t.stiffness()));
        }
        out.push_str("[values]\n");
        for v in &self.values {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }

    /// Parses the versioned text format.
    pub fn parse(text: &str) -> Result<Self> {
        let malformed = |line: usize, reason: String| Error::MalformedFile { line, reason };
        let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut values = Vec::new();
        let mut in_values = false;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if in_values {
                let v: f64 = line
                    .parse()
                    .map_err(|_| malformed(lineno, format!("bad value `{line}`")))?;
                values.push(v);
            } else if line == "[values]" {
                in_values = true;
            } else {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| malformed(lineno, format!("expected `key = value`, got `{line}`")))?;
                let key = key.trim();
                if header.insert(key, (lineno, value.trim())).is_some() {
                    return Err(malformed(lineno, format!("duplicate key `{key}`")));
                }
            }
        }
        if !in_values {
            return Err(malformed(0, "missing [values] section".into()));
        }

        fn field<T: std::str::FromStr>(
            header: &BTreeMap<&str, (usize, &str)>,
            key: &str,
        ) -> Result<Option<T>> {
            match header.get(key) {
                None => Ok(None),
                Some((line, v)) => v.parse().map(Some).map_err(|_| Error::MalformedFile {
                    line: *line,
                    reason: format!("cannot parse `{key}` from `{v}`"),
                }),
            }
        }
        fn required<T: std::str::FromStr>(
            header: &BTreeMap<&str, (usize, &str)>,
            key: &str,
        ) -> Result<T> {
            field(header, key)?.ok_or_else(|| Error::MalformedFile {
                line: 0,
                reason: format!("missing key `{key}`"),
            })
        }

        let version: u32 = required(&header, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        const KNOWN: [&str; 13] = [
            "version",
            "n_masses",
            "damping",
            "impulse",
            "base_stiffness",
            "base_mass",
            "grid.s_min",
            "grid.s_max",
            "grid.n_nodes",
            "noise_level",
            "seed",
            "truth.index",
            "truth.stiffness",
        ];
        if let Some((key, (line, _))) = header.iter().find(|(k, _)| !KNOWN.contains(k)) {
            return Err(malformed(*line, format!("unknown key `{key}`")));
        }

        let chain = ChainConfig::with_constants(
            required(&header, "n_masses")?,
            required(&header, "damping")?,
            required(&header, "impulse")?,
            field(&header, "base_stiffness")?.unwrap_or(1.0),
            field(&header, "base_mass")?.unwrap_or(1.0),
        )?;
        let grid = SGrid::new(
            required(&header, "grid.s_min")?,
            required(&header, "grid.s_max")?,
            required(&header, "grid.n_nodes")?,
        )?;
        let truth = match (
            field::<usize>(&header, "truth.index")?,
            field::<f64>(&header, "truth.stiffness")?,
        ) {
            (Some(j), Some(k)) => Some(DefectHypothesis::new(j, k, &chain)?),
            (None, None) => None,
            _ => return Err(malformed(0, "incomplete truth block".into())),
        };
        let set = Self {
            chain,
            grid,
            values,
            noise_level: required(&header, "noise_level")?,
            seed: required(&header, "seed")?,
            truth,
        };
        if !(set.noise_level >= 0.0) {
            return Err(malformed(0, "noise_level must be >= 0".into()));
        }
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Two-column CSV `s,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("s,value\n");
        for (s, v) in self.grid.nodes().iter().zip(&self.values) {
            out.push_str(&format!("{s:e},{v:e}\n"));
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
