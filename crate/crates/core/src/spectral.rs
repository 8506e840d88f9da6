//! Laplace-domain forward maps for the single-defect chain.
//!
//! Taking the Laplace transform of the chain equations with an impulse `γ`
//! on mass 1 gives a tridiagonal system `A X = b`, `b = [-γ, 0, …, 0]ᵀ`.
//! For the homogeneous chain `A_h = tridiag(k, h, k)` with
//! `h = -(m s² + d s + 2k) = -2k cosh λ`, whose inverse has the closed form
//!
//! ```text
//! K[m][p] = sinh(min(m,p) λ) sinh((N+1-max(m,p)) λ) / (sinh λ sinh((N+1) λ))
//! ```
//!
//! with `K = -k A_h⁻¹`. [`green_kernel`] returns `K`, the positive kernel of
//! the closed form. The defect adds a rank-two perturbation `P` in rows
//! `j-1` and `j`, and `X = A_h⁻¹ b - A_h⁻¹ P X` reduces to a 2×2 system for
//! `x̃_{j-1}`, `x̃_j` followed by an explicit expression for `x̃₁`.
//!
//! Sign convention: the closed-form kernel is the inverse of `-A_h / k`, not
//! of `A_h`. All defect formulas here use `R = A_h⁻¹ = -K / k`, which makes
//! [`analytic_x1`] agree with [`direct_solve_x1`] identically (checked in the
//! tests at every probe, including the scalar case `x̃₁ = γ / (s² + d s + 2)`).
//!
//! The system matrix follows the chain equations literally: row `j-1` couples
//! to `x̃_j` with the baseline stiffness while row `j` couples to `x̃_{j-1}`
//! with `k*`, so `A` is not symmetric when `k* ≠ k`.

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::model::ChainConfig;

/// Determinants of the adjacent-pair system below this are treated as singular.
pub const DETERMINANT_GUARD: f64 = 1e-300;

/// Laplace variable together with the derived diagonal `h` and spectral
/// parameter `λ` (`cosh λ = -h / 2k`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub s: f64,
    pub h: f64,
    pub lambda: f64,
}

/// Evaluates `h(s)` and `λ(s)` for the homogeneous chain.
///
/// `λ` is computed as `2 asinh(sqrt(q) / 2)` with `q = (m s² + d s) / k`, an
/// identity for `arccosh(1 + q/2)` that keeps full relative accuracy as
/// `s → 0`.
///
/// # Panics
///
/// If `s` is negative or not finite.
pub fn lambda_of_s(s: f64, chain: &ChainConfig) -> SpectralPoint {
    assert!(s >= 0.0 && s.is_finite(), "Laplace variable must be >= 0, got {s}");
    let m = chain.base_mass();
    let d = chain.damping();
    let k = chain.base_stiffness();
    let dynamic = m * s * s + d * s;
    let q = dynamic / k;
    SpectralPoint {
        s,
        h: -(dynamic + 2.0 * k),
        lambda: 2.0 * (0.5 * q.sqrt()).asinh(),
    }
}

/// `ln sinh x` for `x > 0`, finite for arbitrarily large `x`.
#[inline]
pub fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// `ln K[m][p]` for a chain of `n` masses at spectral parameter `lambda`.
pub fn ln_green_kernel(m: usize, p: usize, lambda: f64, n: usize) -> f64 {
    debug_assert!((1..=n).contains(&m) && (1..=n).contains(&p));
    let lo = m.min(p) as f64;
    let hi = (n + 1 - m.max(p)) as f64;
    if lambda == 0.0 {
        return (lo * hi / (n + 1) as f64).ln();
    }
    let big = (n + 1) as f64;
    ln_sinh(lo * lambda) + ln_sinh(hi * lambda) - ln_sinh(lambda) - ln_sinh(big * lambda)
}

/// Closed-form kernel `K[m][p]` at the given spectral point, for `1 <= m, p <= n`.
///
/// Evaluated in the log domain, so no intermediate overflows even when
/// `cosh((N+1) λ)` is far outside the `f64` range. Deep entries underflow
/// gracefully to zero. At `λ = 0` the analytic limit
/// `min(m,p) (N+1-max(m,p)) / (N+1)` is returned.
pub fn green_kernel(m: usize, p: usize, sp: &SpectralPoint, n: usize) -> f64 {
    assert!(
        (1..=n).contains(&m) && (1..=n).contains(&p),
        "kernel index ({m}, {p}) outside 1..={n}"
    );
    ln_green_kernel(m, p, sp.lambda, n).exp()
}

/// The six distinct Laplace-inverse entries `R = A_h⁻¹` needed for a defect
/// at spring `j`, at one `s`. `R` is symmetric, so `R[j][1] = R[1][j]` etc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectKernels {
    /// `R[1][1]`
    pub r_11: f64,
    /// `R[1][j-1]`
    pub r_1p: f64,
    /// `R[1][j]`
    pub r_1j: f64,
    /// `R[j-1][j-1]`
    pub r_pp: f64,
    /// `R[j-1][j]`
    pub r_pj: f64,
    /// `R[j][j]`
    pub r_jj: f64,
}

impl DefectKernels {
    pub fn new(j: usize, sp: &SpectralPoint, chain: &ChainConfig) -> Self {
        let n = chain.n_masses();
        assert!((2..=n).contains(&j), "defect index {j} outside 2..={n}");
        let scale = -1.0 / chain.base_stiffness();
        let r = |a, b| scale * green_kernel(a, b, sp, n);
        Self {
            r_11: r(1, 1),
            r_1p: r(1, j - 1),
            r_1j: r(1, j),
            r_pp: r(j - 1, j - 1),
            r_pj: r(j - 1, j),
            r_jj: r(j, j),
        }
    }

    /// Adjacent-pair coefficients and responses for contrast `a = k - k*`.
    #[inline]
    pub fn pair_raw(&self, a: f64, gamma: f64) -> RawPair {
        let f = a * (self.r_pj - self.r_jj);
        let g = 1.0 + self.r_jj * a;
        let u = 1.0 + self.r_pp * a - self.r_pj * a;
        let v = self.r_pj * a;
        let det = g * u - f * v;
        let x_prev = -(-gamma * self.r_1j * v + gamma * self.r_1p * g) / det;
        let x_def = -(gamma * self.r_1j * u - gamma * self.r_1p * f) / det;
        RawPair {
            f,
            g,
            u,
            v,
            det,
            x_prev,
            x_def,
        }
    }

    /// `x̃₁` for contrast `a = k - k*`, or `None` when the pair system is
    /// numerically singular.
    #[inline]
    pub fn x1_raw(&self, a: f64, gamma: f64) -> Option<f64> {
        let p = self.pair_raw(a, gamma);
        (p.det.abs() >= DETERMINANT_GUARD).then(|| self.x1_from_pair(a, gamma, &p))
    }

    #[inline]
    fn x1_from_pair(&self, a: f64, gamma: f64, p: &RawPair) -> f64 {
        -gamma * self.r_11 - a * (self.r_1p - self.r_1j) * p.x_prev - self.r_1j * a * p.x_def
    }
}

/// Unchecked output of [`DefectKernels::pair_raw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPair {
    pub f: f64,
    pub g: f64,
    pub u: f64,
    pub v: f64,
    pub det: f64,
    pub x_prev: f64,
    pub x_def: f64,
}

/// Responses of the two masses attached to the defective spring, with the
/// coefficients of the 2×2 system that determines them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectAdjacentPair {
    /// `x̃_{j-1}(s)`
    pub x_jm1: f64,
    /// `x̃_j(s)`
    pub x_j: f64,
    pub f: f64,
    pub g: f64,
    pub u: f64,
    pub v: f64,
}

impl DefectAdjacentPair {
    pub fn determinant(&self) -> f64 {
        self.g * self.u - self.f * self.v
    }
}

fn check_defect(j: usize, k_star: f64, chain: &ChainConfig) -> Result<()> {
    let n = chain.n_masses();
    if !(2..=n).contains(&j) {
        return Err(Error::invalid("defect.index", format!("need 2 <= j <= {n}, got {j}")));
    }
    if !(k_star > 0.0 && k_star.is_finite()) {
        return Err(Error::invalid("defect.stiffness", format!("need k* > 0, got {k_star}")));
    }
    Ok(())
}

/// Solves the adjacent-pair system for a defect `(j, k*)` at one `s`.
pub fn defect_pair(
    j: usize,
    k_star: f64,
    sp: &SpectralPoint,
    chain: &ChainConfig,
) -> Result<DefectAdjacentPair> {
    check_defect(j, k_star, chain)?;
    let kern = DefectKernels::new(j, sp, chain);
    let raw = kern.pair_raw(chain.base_stiffness() - k_star, chain.impulse());
    if !(raw.det.abs() >= DETERMINANT_GUARD) {
        return Err(Error::NearSingularDeterminant {
            index: j,
            stiffness: k_star,
            s: sp.s,
            det: raw.det,
        });
    }
    Ok(DefectAdjacentPair {
        x_jm1: raw.x_prev,
        x_j: raw.x_def,
        f: raw.f,
        g: raw.g,
        u: raw.u,
        v: raw.v,
    })
}

/// Analytic first-mass response `x̃₁(s)` of the chain with defect `(j, k*)`.
pub fn analytic_x1(j: usize, k_star: f64, s: f64, chain: &ChainConfig) -> Result<f64> {
    check_defect(j, k_star, chain)?;
    let sp = lambda_of_s(s, chain);
    let kern = DefectKernels::new(j, &sp, chain);
    let a = chain.base_stiffness() - k_star;
    let pair = kern.pair_raw(a, chain.impulse());
    if !(pair.det.abs() >= DETERMINANT_GUARD) {
        return Err(Error::NearSingularDeterminant {
            index: j,
            stiffness: k_star,
            s,
            det: pair.det,
        });
    }
    Ok(kern.x1_from_pair(a, chain.impulse(), &pair))
}

/// First-mass response of the defect-free chain, `γ K[1][1] / k`.
pub fn homogeneous_x1(s: f64, chain: &ChainConfig) -> f64 {
    let sp = lambda_of_s(s, chain);
    chain.impulse() * green_kernel(1, 1, &sp, chain.n_masses()) / chain.base_stiffness()
}

/// Laplace-domain system matrix for the defect `(j, k*)`.
///
/// Diagonal `h` except `h + k - k*` in rows `j-1` and `j`; off-diagonals `k`
/// except `A[j][j-1] = k*`.
pub fn system_matrix(j: usize, k_star: f64, s: f64, chain: &ChainConfig) -> Result<Tridiagonal> {
    check_defect(j, k_star, chain)?;
    let n = chain.n_masses();
    let k = chain.base_stiffness();
    let h = lambda_of_s(s, chain).h;
    let mut diag = vec![h; n];
    diag[j - 2] = h + k - k_star;
    diag[j - 1] = h + k - k_star;
    let upper = vec![k; n - 1];
    let mut lower = vec![k; n - 1];
    lower[j - 2] = k_star;
    Ok(Tridiagonal::new(lower, diag, upper))
}

/// All mass responses `x̃₁ … x̃_N` by a direct pivoted tridiagonal solve.
pub fn direct_solve(j: usize, k_star: f64, s: f64, chain: &ChainConfig) -> Result<Vec<f64>> {
    let a = system_matrix(j, k_star, s, chain)?;
    let mut b = vec![0.0; chain.n_masses()];
    b[0] = -chain.impulse();
    a.solve(&b)
}

/// `x̃₁(s)` by direct solve. This is the synthetic-data generator; it shares
/// no code with [`analytic_x1`].
pub fn direct_solve_x1(j: usize, k_star: f64, s: f64, chain: &ChainConfig) -> Result<f64> {
    Ok(direct_solve(j, k_star, s, chain)?[0])
}
