//! Chain and defect configuration, bar ↔ chain identifications and unit
//! conversions.
//!
//! Everything inside the forward maps and the inversion is nondimensional:
//! unit masses, unit baseline springs, one time unit per cell travel time.
//! [`PhysicalUnits`] only decorates results for reporting.
//!
//! Indexing: masses are `1..=N`; spring `j` couples masses `j-1` and `j`, so
//! the admissible defect indices are `2..=N`. Both chain ends are clamped
//! (`x₀ = x_{N+1} = 0`); the boundary springs are implicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal operating bounds for the defect stiffness.
pub const STIFFNESS_BOUNDS: (f64, f64) = (0.1, 5.0);

/// Homogeneous chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain")]
pub struct ChainConfig {
    n_masses: usize,
    damping: f64,
    impulse: f64,
    base_stiffness: f64,
    base_mass: f64,
}

impl ChainConfig {
    /// Chain with unit mass and unit baseline stiffness.
    pub fn new(n_masses: usize, damping: f64, impulse: f64) -> Result<Self> {
        Self::with_constants(n_masses, damping, impulse, 1.0, 1.0)
    }

    pub fn with_constants(
        n_masses: usize,
        damping: f64,
        impulse: f64,
        base_stiffness: f64,
        base_mass: f64,
    ) -> Result<Self> {
        if n_masses < 3 {
            return Err(Error::invalid("n_masses", format!("need N >= 3, got {n_masses}")));
        }
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(Error::invalid("damping", format!("need d >= 0, got {damping}")));
        }
        if !impulse.is_finite() {
            return Err(Error::invalid("impulse", "must be finite"));
        }
        if !(base_stiffness > 0.0 && base_stiffness.is_finite()) {
            return Err(Error::invalid(
                "base_stiffness",
                format!("need k > 0, got {base_stiffness}"),
            ));
        }
        if !(base_mass > 0.0 && base_mass.is_finite()) {
            return Err(Error::invalid("base_mass", format!("need m > 0, got {base_mass}")));
        }
        Ok(Self {
            n_masses,
            damping,
            impulse,
            base_stiffness,
            base_mass,
        })
    }

    /// N = 100, d = 0.1, γ = 1, k = m = 1.
    pub fn baseline() -> Self {
        Self {
            n_masses: 100,
            damping: 0.1,
            impulse: 1.0,
            base_stiffness: 1.0,
            base_mass: 1.0,
        }
    }

    pub fn n_masses(&self) -> usize {
        self.n_masses
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn impulse(&self) -> f64 {
        self.impulse
    }

    pub fn base_stiffness(&self) -> f64 {
        self.base_stiffness
    }

    pub fn base_mass(&self) -> f64 {
        self.base_mass
    }

    /// Same chain with a different impulse amplitude.
    pub fn with_impulse(mut self, impulse: f64) -> Self {
        self.impulse = impulse;
        self
    }

    /// Same chain with a different damping coefficient.
    pub fn with_damping(mut self, damping: f64) -> Result<Self> {
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(Error::invalid("damping", format!("need d >= 0, got {damping}")));
        }
        self.damping = damping;
        Ok(self)
    }

    /// Admissible defect indices `2..=N`.
    pub fn defect_indices(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.n_masses
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

/// A single defective spring: index `j` and absolute stiffness `k*`.
///
/// With the default unit baseline, `k*` is also the stiffness contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDefect")]
pub struct DefectHypothesis {
    index: usize,
    stiffness: f64,
}

impl DefectHypothesis {
    pub fn new(index: usize, stiffness: f64, chain: &ChainConfig) -> Result<Self> {
        if !chain.defect_indices().contains(&index) {
            return Err(Error::invalid(
                "defect.index",
                format!("need 2 <= j <= {}, got {index}", chain.n_masses()),
            ));
        }
        if !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(Error::invalid(
                "defect.stiffness",
                format!("need k* > 0, got {stiffness}"),
            ));
        }
        Ok(Self { index, stiffness })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    /// True when `k*` lies in the nominal operating range [0.1, 5].
    pub fn in_operating_range(&self) -> bool {
        (STIFFNESS_BOUNDS.0..=STIFFNESS_BOUNDS.1).contains(&self.stiffness)
    }
}

/// Physical scales used to report nondimensional results in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnits")]
pub struct PhysicalUnits {
    /// Bar length L [m].
    length: f64,
    /// Density ρ [kg/m³].
    density: f64,
    /// Baseline Young's modulus E₀ [Pa].
    youngs_modulus: f64,
    /// Cross-section A [m²].
    cross_section: f64,
}

impl PhysicalUnits {
    pub fn new(length: f64, density: f64, youngs_modulus: f64, cross_section: f64) -> Result<Self> {
        for (name, v) in [
            ("units.length", length),
            ("units.density", density),
            ("units.youngs_modulus", youngs_modulus),
            ("units.cross_section", cross_section),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(Self {
            length,
            density,
            youngs_modulus,
            cross_section,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn cross_section(&self) -> f64 {
        self.cross_section
    }

    /// Δx = L / N.
    pub fn cell_length(&self, chain: &ChainConfig) -> f64 {
        self.length / chain.n_masses() as f64
    }

    /// c = sqrt(E₀ / ρ).
    pub fn wave_speed(&self) -> f64 {
        (self.youngs_modulus / self.density).sqrt()
    }

    /// m_ref = ρ A Δx.
    pub fn reference_mass(&self, chain: &ChainConfig) -> f64 {
        self.density * self.cross_section * self.cell_length(chain)
    }

    /// k_ref = E₀ A / Δx.
    pub fn reference_stiffness(&self, chain: &ChainConfig) -> f64 {
        self.youngs_modulus * self.cross_section / self.cell_length(chain)
    }

    /// Seconds per nondimensional time unit, sqrt(m_ref / k_ref) = Δx / c.
    pub fn time_scale(&self, chain: &ChainConfig) -> f64 {
        (self.reference_mass(chain) / self.reference_stiffness(chain)).sqrt()
    }

    /// Young's modulus of an element whose spring has nondimensional stiffness `k`.
    pub fn modulus_for_stiffness(&self, k: f64) -> f64 {
        k * self.youngs_modulus
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    n_masses: usize,
    damping: f64,
    impulse: f64,
    #[serde(default = "unit")]
    base_stiffness: f64,
    #[serde(default = "unit")]
    base_mass: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawChain> for ChainConfig {
    type Error = Error;

    fn try_from(r: RawChain) -> Result<Self> {
        Self::with_constants(r.n_masses, r.damping, r.impulse, r.base_stiffness, r.base_mass)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefect {
    index: usize,
    stiffness: f64,
}

impl TryFrom<RawDefect> for DefectHypothesis {
    type Error = Error;

    // Without a chain only the lower index bound can be checked here.
    fn try_from(r: RawDefect) -> Result<Self> {
        if r.index < 2 {
            return Err(Error::invalid("defect.index", format!("need j >= 2, got {}", r.index)));
        }
        if !(r.stiffness > 0.0 && r.stiffness.is_finite()) {
            return Err(Error::invalid(
                "defect.stiffness",
                format!("need k* > 0, got {}", r.stiffness),
            ));
        }
        Ok(Self {
            index: r.index,
            stiffness: r.stiffness,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnits {
    length: f64,
    density: f64,
    youngs_modulus: f64,
    cross_section: f64,
}

impl TryFrom<RawUnits> for PhysicalUnits {
    type Error = Error;

    fn try_from(r: RawUnits) -> Result<Self> {
        Self::new(r.length, r.density, r.youngs_modulus, r.cross_section)
    }
}

/// Nondimensional time to seconds.
pub fn physical_time(t: f64, units: &PhysicalUnits, chain: &ChainConfig) -> f64 {
    t * units.time_scale(chain)
}

/// Nondimensional angular frequency to rad/s.
pub fn physical_frequency(omega: f64, units: &PhysicalUnits, chain: &ChainConfig) -> f64 {
    omega / units.time_scale(chain)
}

/// Highest frequency [Hz] the N-cell discretization resolves reliably,
/// f_max = c N / (4 L).
pub fn max_resolved_frequency(units: &PhysicalUnits, chain: &ChainConfig) -> f64 {
    units.wave_speed() * chain.n_masses() as f64 / (4.0 * units.length())
}

/// Lumped parameters of one chain element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementParams {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
}

/// Sampled continuum profiles of a heterogeneous bar.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BarProfiles {
    pub density: Vec<f64>,
    pub modulus: Vec<f64>,
    pub damping: Vec<f64>,
}

/// Maps sampled bar profiles to chain elements: `m = ρΔx`, `k = E/Δx`,
/// `d = μΔx`.
pub fn identify_from_bar(
    density: &[f64],
    modulus: &[f64],
    damping: &[f64],
    dx: f64,
) -> Result<Vec<ElementParams>> {
    if density.len() != modulus.len() || density.len() != damping.len() {
        return Err(Error::LengthMismatch {
            density: density.len(),
            modulus: modulus.len(),
            damping: damping.len(),
        });
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::invalid("dx", format!("must be > 0, got {dx}")));
    }
    density
        .iter()
        .zip(modulus)
        .zip(damping)
        .enumerate()
        .map(|(i, ((&rho, &e), &mu))| {
            if !(rho > 0.0) {
                return Err(Error::NonPositiveProfile {
                    what: "density",
                    index: i,
                    value: rho,
                });
            }
            if !(e > 0.0) {
                return Err(Error::NonPositiveProfile {
                    what: "modulus",
                    index: i,
                    value: e,
                });
            }
            if !(mu >= 0.0) {
                return Err(Error::NonPositiveProfile {
                    what: "damping",
                    index: i,
                    value: mu,
                });
            }
            Ok(ElementParams {
                mass: rho * dx,
                stiffness: e / dx,
                damping: mu * dx,
            })
        })
        .collect()
}

/// Inverse of [`identify_from_bar`].
pub fn bar_from_elements(elements: &[ElementParams], dx: f64) -> BarProfiles {
    BarProfiles {
        density: elements.iter().map(|e| e.mass / dx).collect(),
        modulus: elements.iter().map(|e| e.stiffness * dx).collect(),
        damping: elements.iter().map(|e| e.damping / dx).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_invariants() {
        assert!(ChainConfig::new(2, 0.1, 1.0).is_err());
        assert!(ChainConfig::new(3, -0.1, 1.0).is_err());
        assert!(ChainConfig::with_constants(10, 0.1, 1.0, 0.0, 1.0).is_err());
        assert!(ChainConfig::with_constants(10, 0.1, 1.0, 1.0, -1.0).is_err());
        let c = ChainConfig::new(3, 0.0, 1.0).unwrap();
        assert_eq!(c.defect_indices(), 2..=3);
    }

    #[test]
    fn defect_invariants() {
        let c = ChainConfig::baseline();
        assert!(DefectHypothesis::new(1, 1.3, &c).is_err());
        assert!(DefectHypothesis::new(101, 1.3, &c).is_err());
        assert!(DefectHypothesis::new(40, 0.0, &c).is_err());
        let d = DefectHypothesis::new(100, 1.3, &c).unwrap();
        assert!(d.in_operating_range());
        assert!(!DefectHypothesis::new(2, 7.0, &c).unwrap().in_operating_range());
    }

    #[test]
    fn identify_uniform_bar() {
        let n = 100;
        let els = identify_from_bar(&vec![1.0; n], &vec![1.0; n], &vec![0.1; n], 0.01).unwrap();
        for e in &els {
            assert!((e.mass - 0.01).abs() < 1e-15);
            assert!((e.stiffness - 100.0).abs() < 1e-12);
            assert!((e.damping - 0.001).abs() < 1e-15);
        }
    }

    #[test]
    fn identify_is_local() {
        let n = 50;
        let mut e = vec![2.0; n];
        e[17] *= 1.3;
        let els = identify_from_bar(&vec![3.0; n], &e, &vec![0.0; n], 0.02).unwrap();
        let base = 2.0 / 0.02;
        for (i, el) in els.iter().enumerate() {
            let expect = if i == 17 { 1.3 * base } else { base };
            assert!((el.stiffness - expect).abs() < 1e-12 * expect);
            assert!((el.mass - 0.06).abs() < 1e-15);
        }
    }

    #[test]
    fn identify_errors() {
        assert!(matches!(
            identify_from_bar(&[1.0], &[1.0, 1.0], &[0.0], 0.1),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            identify_from_bar(&[1.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], 0.1),
            Err(Error::NonPositiveProfile { what: "density", index: 1, .. })
        ));
        assert!(matches!(
            identify_from_bar(&[1.0], &[-2.0], &[0.0], 0.1),
            Err(Error::NonPositiveProfile { what: "modulus", .. })
        ));
    }

    #[test]
    fn defect_element_matches_hypothesis_contrast() {
        // A constant bar with one stiffer element, normalized by the baseline
        // spring, is exactly a unit chain with k* = E_def / E₀ at that spring.
        let n = 100;
        let e0 = 7.0e10;
        let mut e = vec![e0; n];
        e[39] = 1.3 * e0;
        let dx = 1.0 / n as f64;
        let els = identify_from_bar(&vec![2700.0; n], &e, &vec![0.0; n], dx).unwrap();
        let kref = e0 / dx;
        let normalized: Vec<f64> = els.iter().map(|el| el.stiffness / kref).collect();
        let chain = ChainConfig::baseline();
        let defect = DefectHypothesis::new(40, normalized[39], &chain).unwrap();
        assert!((defect.stiffness() - 1.3).abs() < 1e-14);
        let units = PhysicalUnits::new(1.0, 2700.0, e0, 1.0).unwrap();
        assert!((units.modulus_for_stiffness(defect.stiffness()) - e[39]).abs() < 1e-3);
        assert_eq!(normalized.iter().filter(|&&k| (k - 1.0).abs() > 1e-14).count(), 1);
    }

    #[test]
    fn unit_cell_travel_time() {
        let chain = ChainConfig::baseline();
        let units = PhysicalUnits::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((physical_time(1.0, &units, &chain) - 0.01).abs() < 1e-16);
        assert_eq!(physical_time(0.0, &units, &chain), 0.0);
        assert!(PhysicalUnits::new(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn time_scale_equals_cell_over_speed() {
        let chain = ChainConfig::baseline();
        let units = PhysicalUnits::new(2.5, 7850.0, 200e9, 3e-4).unwrap();
        let a = units.time_scale(&chain);
        let b = units.cell_length(&chain) / units.wave_speed();
        assert!((a - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn max_frequency_cases() {
        let chain = ChainConfig::baseline();
        let unit = PhysicalUnits::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((max_resolved_frequency(&unit, &chain) - 25.0).abs() < 1e-12);

        let doubled = ChainConfig::new(200, 0.1, 1.0).unwrap();
        assert!((max_resolved_frequency(&unit, &doubled) - 50.0).abs() < 1e-12);

        let steel = PhysicalUnits::new(1.0, 7850.0, 200e9, 1.0).unwrap();
        // c computed independently: sqrt(200e9 / 7850) via exp/ln.
        let c = ((200e9f64).ln() - 7850f64.ln()).mul_add(0.5, 0.0).exp();
        assert!((steel.wave_speed() - c).abs() < 1e-9 * c);
        assert!((steel.wave_speed() - 5048.0).abs() < 1.0);
        let f = max_resolved_frequency(&steel, &chain);
        assert!((f - c * 25.0).abs() < 1e-6 * f);
        assert!((f - 1.26e5).abs() < 0.01e5);
    }

    #[test]
    fn chain_config_round_trips_through_json() {
        let c = ChainConfig::with_constants(17, 0.25, 2.0, 1.5, 0.5).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: ChainConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        let bad = s.replace("17", "2");
        assert!(serde_json::from_str::<ChainConfig>(&bad).is_err());
    }
}
