//! Tridiagonal linear solves.

use crate::error::{Error, Result};

/// A general (not necessarily symmetric) tridiagonal matrix.
///
/// `lower[i] = A[i+1][i]`, `diag[i] = A[i][i]`, `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty tridiagonal matrix");
        assert_eq!(lower.len(), n - 1);
        assert_eq!(upper.len(), n - 1);
        Self { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `out = A x` without allocating.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        if n == 1 {
            out[0] = self.diag[0] * x[0];
            return;
        }
        out[0] = self.diag[0] * x[0] + self.upper[0] * x[1];
        for i in 1..n - 1 {
            out[i] = self.lower[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.upper[i] * x[i + 1];
        }
        out[n - 1] = self.lower[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    /// Solves `A x = rhs` by Gaussian elimination with partial pivoting.
    ///
    /// Row interchanges create fill in a second superdiagonal, which is
    /// tracked in place of the consumed subdiagonal.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut d = self.diag.clone();
        let mut dl = self.lower.clone();
        let mut du = self.upper.clone();
        let mut b = rhs.to_vec();

        if n == 1 {
            if d[0] == 0.0 {
                return Err(Error::SingularMatrix { row: 0 });
            }
            return Ok(vec![b[0] / d[0]]);
        }

        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::SingularMatrix { row: i });
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = 0.0;
                }
                du[i] = temp;
                let bt = b[i];
                b[i] = b[i + 1];
                b[i + 1] = bt - fact * b[i + 1];
            }
        }
        if d[n - 1] == 0.0 {
            return Err(Error::SingularMatrix { row: n - 1 });
        }

        b[n - 1] /= d[n - 1];
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
        }
        Ok(b)
    }
}
