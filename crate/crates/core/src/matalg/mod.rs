//! Dense matrix helpers, Mittag-Leffler functions and fractional operators.

mod frac;
mod ml;
pub mod quad;

pub use frac::{frac_differentiate, frac_integrate, frac_integrate_weighted};
pub use ml::{
    ml_cumulative, ml_cumulative_integral, ml_density, ml_matrix, ml_scalar, MlOperator,
};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub(crate) fn require_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub(crate) fn require_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Eigenvalues of a real square matrix as (re, im) pairs.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    require_square(m)?;
    require_finite(m, "matrix")?;
    // Francis QR can stall on exactly symmetric block-constant matrices.
    if m == &m.transpose() {
        return Ok(SymmetricEigen::new(m.clone()).eigenvalues.iter().map(|&x| (x, 0.0)).collect());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn invert(m: &Matrix, what: &'static str) -> Result<Matrix> {
    require_square(m)?;
    if condition_number(m) > 1e14 {
        return Err(Error::Numerical(format!("{what} is numerically singular")));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{what} is singular")))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Samples on a uniform grid `t0 + k * dt`, each sample a matrix (vectors are n x 1).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Matrix>,
}

impl GridFunction {
    pub fn new(t0: f64, dt: f64, values: Vec<Matrix>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::Grid(format!("need finite t0 and dt > 0, got t0={t0}, dt={dt}")));
        }
        let first = values.first().ok_or(Error::Empty("grid samples"))?;
        let shape = first.shape();
        if values.iter().any(|v| v.shape() != shape) {
            return Err(Error::Grid("samples do not share one shape".into()));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn from_scalars(t0: f64, dt: f64, xs: &[f64]) -> Result<Self> {
        Self::new(t0, dt, xs.iter().map(|&x| Matrix::from_element(1, 1, x)).collect())
    }

    /// Samples `f` at `n` points starting from `t0`.
    pub fn sample(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> Matrix) -> Result<Self> {
        Self::new(t0, dt, (0..n).map(|k| f(t0 + k as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    /// Entry (r, c) of every sample.
    pub fn component(&self, r: usize, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[(r, c)]).collect()
    }

    /// Scalar series for 1 x 1 grids.
    pub fn scalars(&self) -> Vec<f64> {
        self.component(0, 0)
    }
}
