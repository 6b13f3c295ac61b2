//! Scalar and matrix Mittag-Leffler functions.
//!
//! Scalar evaluation picks a branch by argument:
//! * power series for `z >= 0` (up to 30) and for small negative `z`;
//! * inverse Laplace transform on a parabolic contour for `-30 <= z < -1.5` when `alpha <= 1`;
//! * the algebraic asymptotic expansion below `-30` (absolute error well under 1e-8 there).

use super::{condition_number, require_finite, require_square, Matrix};
use crate::error::{Error, Result};
use nalgebra::{Complex, SymmetricEigen};
use statrs::function::gamma::{gamma, ln_gamma};

const SERIES_LIMIT: f64 = 30.0;
const SMALL_NEGATIVE: f64 = -1.5;
const MAX_SERIES_TERMS: usize = 2000;
const CONTOUR_NODES: usize = 32;
const ASYMPTOTIC_TERMS: i32 = 12;

/// 1/Gamma(x), zero at the poles.
pub(crate) fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 170.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / gamma(x)
}

fn check_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    Ok(())
}

/// E_{alpha,beta}(z) = sum_n z^n / Gamma(alpha n + beta) for real z.
pub fn ml_scalar(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    check_params(alpha, beta)?;
    if !z.is_finite() {
        return Err(Error::NonFinite("Mittag-Leffler argument"));
    }
    if z >= SMALL_NEGATIVE {
        if z > SERIES_LIMIT {
            return Err(Error::Range { value: z, reason: format!("positive arguments supported up to {SERIES_LIMIT}") });
        }
        return series(alpha, beta, z);
    }
    if z >= -SERIES_LIMIT {
        if alpha <= 1.0 {
            return Ok(contour(alpha, beta, -z));
        }
        return series(alpha, beta, z);
    }
    if alpha >= 2.0 {
        return Err(Error::Range { value: z, reason: "no asymptotic branch for alpha >= 2".into() });
    }
    Ok(asymptotic(alpha, beta, z))
}

fn series(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    let ln_z = z.abs().ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut peak = 0.0f64;
    for n in 0..MAX_SERIES_TERMS {
        let arg = alpha * n as f64 + beta;
        let magnitude = if arg < 160.0 && n < 300 {
            z.abs().powi(n as i32) * rgamma(arg)
        } else {
            (n as f64 * ln_z - ln_gamma(arg)).exp()
        };
        if !magnitude.is_finite() {
            return Err(Error::Range { value: z, reason: "series terms overflow".into() });
        }
        let term = if z < 0.0 && n % 2 == 1 { -magnitude } else { magnitude };
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        peak = peak.max(magnitude);
        let past_peak = magnitude < peak || arg > 2.0;
        if n > 2 && past_peak && magnitude <= 1e-17 * (sum + comp).abs().max(f64::MIN_POSITIVE) {
            let value = sum + comp;
            if !value.is_finite() {
                return Err(Error::Range { value: z, reason: "series sum overflow".into() });
            }
            return Ok(value);
        }
    }
    Err(Error::Range { value: z, reason: format!("series did not converge in {MAX_SERIES_TERMS} terms") })
}

/// Inverse Laplace transform of s^(alpha-beta) / (s^alpha + x) at t = 1 along a
/// parabolic contour with trapezoidal nodes. Valid for x > 0 and 0 < alpha <= 1.
fn contour(alpha: f64, beta: f64, x: f64) -> f64 {
    let n = CONTOUR_NODES as f64;
    let h = 2.0 * std::f64::consts::PI / n;
    let mut acc = 0.0;
    for k in CONTOUR_NODES / 2..CONTOUR_NODES {
        let theta = -std::f64::consts::PI + (k as f64 + 0.5) * h;
        let s = Complex::new(n * (0.1309 - 0.1194 * theta * theta), n * 0.25 * theta);
        let ds = Complex::new(-n * 0.2388 * theta, n * 0.25);
        let f = s.powf(alpha - beta) / (s.powf(alpha) + x);
        acc += (s.exp() * f * ds).im;
    }
    acc * 2.0 / n
}

fn asymptotic(alpha: f64, beta: f64, z: f64) -> f64 {
    -(1..=ASYMPTOTIC_TERMS)
        .map(|k| z.powi(-k) * rgamma(beta - alpha * k as f64))
        .sum::<f64>()
}

/// Spectral representation of a square matrix used to evaluate Mittag-Leffler
/// functions of `scale * A` for many scales.
#[derive(Debug, Clone)]
pub struct MlOperator {
    a: Matrix,
    form: Form,
}

#[derive(Debug, Clone)]
enum Form {
    Eigen { values: Vec<f64>, vectors: Matrix, inverse: Matrix },
    Series,
}

const CONDITION_LIMIT: f64 = 1e8;

impl MlOperator {
    pub fn new(a: &Matrix) -> Result<Self> {
        require_square(a)?;
        require_finite(a, "Mittag-Leffler matrix argument")?;
        let form = diagonalize(a).unwrap_or(Form::Series);
        Ok(Self { a: a.clone(), form })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn is_diagonalized(&self) -> bool {
        matches!(self.form, Form::Eigen { .. })
    }

    /// Real eigenvalues when the fast path applies.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match &self.form {
            Form::Eigen { values, .. } => Some(values),
            Form::Series => None,
        }
    }

    /// E_{alpha,beta}(scale * A).
    pub fn ml(&self, alpha: f64, beta: f64, scale: f64) -> Result<Matrix> {
        check_params(alpha, beta)?;
        match &self.form {
            Form::Eigen { values, vectors, inverse } => {
                let mut scaled = vectors.clone();
                for (j, &lam) in values.iter().enumerate() {
                    let e = ml_scalar(alpha, beta, scale * lam)?;
                    scaled.column_mut(j).scale_mut(e);
                }
                Ok(scaled * inverse)
            }
            Form::Series => matrix_series(alpha, beta, &(&self.a * scale)),
        }
    }

    /// f(t) = A t^(alpha-1) E_{alpha,alpha}(-A t^alpha).
    pub fn density(&self, alpha: f64, t: f64) -> Result<Matrix> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("density needs t > 0, got {t}")));
        }
        let e = self.ml(alpha, alpha, -t.powf(alpha))?;
        Ok(&self.a * e * t.powf(alpha - 1.0))
    }

    /// F(t) = I - E_{alpha,1}(-A t^alpha), the integral of the density over [0, t].
    pub fn cumulative(&self, alpha: f64, t: f64) -> Result<Matrix> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("cumulative needs t >= 0, got {t}")));
        }
        let n = self.a.nrows();
        if t == 0.0 {
            return Ok(Matrix::zeros(n, n));
        }
        Ok(Matrix::identity(n, n) - self.ml(alpha, 1.0, -t.powf(alpha))?)
    }

    /// Integral of F over [0, t]: t (I - E_{alpha,2}(-A t^alpha)).
    pub fn cumulative_integral(&self, alpha: f64, t: f64) -> Result<Matrix> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("cumulative integral needs t >= 0, got {t}")));
        }
        let n = self.a.nrows();
        if t == 0.0 {
            return Ok(Matrix::zeros(n, n));
        }
        Ok((Matrix::identity(n, n) - self.ml(alpha, 2.0, -t.powf(alpha))?) * t)
    }
}

fn diagonalize(a: &Matrix) -> Option<Form> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() <= 1e-14 * scale {
        let sym = SymmetricEigen::new((a + a.transpose()) * 0.5);
        let vectors = sym.eigenvectors;
        let inverse = vectors.transpose();
        return Some(Form::Eigen { values: sym.eigenvalues.iter().copied().collect(), vectors, inverse });
    }
    let eig = super::eigenvalues(a).ok()?;
    if eig.iter().any(|&(_, im)| im.abs() > 1e-10 * scale) {
        return None;
    }
    let mut re: Vec<f64> = eig.iter().map(|&(r, _)| r).collect();
    re.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for x in re {
        match clusters.last_mut() {
            Some(c) if (x - c[c.len() - 1]).abs() <= 1e-8 * scale => c.push(x),
            _ => clusters.push(vec![x]),
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut columns = Vec::with_capacity(n);
    for c in clusters {
        let lam = c.iter().sum::<f64>() / c.len() as f64;
        let shifted = a - Matrix::identity(n, n) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        for &i in order.iter().take(c.len()) {
            if svd.singular_values[i] > 1e-7 * scale {
                return None;
            }
            values.push(lam);
            columns.push(vt.row(i).transpose());
        }
    }
    let vectors = Matrix::from_columns(&columns);
    if condition_number(&vectors) > CONDITION_LIMIT {
        return None;
    }
    let inverse = vectors.clone().try_inverse()?;
    let mut d = &inverse * a * &vectors;
    for (i, &v) in values.iter().enumerate() {
        d[(i, i)] -= v;
    }
    if d.amax() > 1e-8 * scale {
        return None;
    }
    Some(Form::Eigen { values, vectors, inverse })
}

fn matrix_series(alpha: f64, beta: f64, a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let norm = a.norm();
    // Sum of term norms is bounded by E(norm); keep it small enough that
    // cancellation cannot spoil the result at the 1e-10 level.
    let bound = ml_scalar(alpha, beta, norm.min(SERIES_LIMIT))?;
    if norm > SERIES_LIMIT || bound > 1e4 {
        return Err(Error::Range {
            value: norm,
            reason: "matrix is not diagonalizable with a well-conditioned real eigenbasis and its norm is too large for the series".into(),
        });
    }
    let mut power = Matrix::identity(n, n);
    let mut sum = Matrix::identity(n, n) * rgamma(beta);
    for k in 1..500 {
        power = &power * a;
        let term = &power * rgamma(alpha * k as f64 + beta);
        sum += &term;
        if term.norm() < 1e-14 * sum.norm() {
            return Ok(sum);
        }
    }
    Err(Error::Range { value: norm, reason: "matrix series did not converge in 500 terms".into() })
}

pub fn ml_matrix(alpha: f64, beta: f64, lam: &Matrix) -> Result<Matrix> {
    MlOperator::new(lam)?.ml(alpha, beta, 1.0)
}

pub fn ml_density(alpha: f64, lam: &Matrix, t: f64) -> Result<Matrix> {
    MlOperator::new(lam)?.density(alpha, t)
}

pub fn ml_cumulative(alpha: f64, lam: &Matrix, t: f64) -> Result<Matrix> {
    MlOperator::new(lam)?.cumulative(alpha, t)
}

pub fn ml_cumulative_integral(alpha: f64, lam: &Matrix, t: f64) -> Result<Matrix> {
    MlOperator::new(lam)?.cumulative_integral(alpha, t)
}
