//! Sector-model limit matrices and the market / sector / bulk structure of their spectra.

use crate::error::{Error, Result};
use crate::kernels::SectorParams;
use crate::matalg::{invert, spectral_radius, Matrix, Vector};
use nalgebra::SymmetricEigen;
use serde::Serialize;

/// Large-m sector parameters: lambda = m (Hc -/+ Ha) overall and per sector.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SectorLimitParams {
    pub gamma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub lambda_plus_r: Vec<f64>,
    pub lambda_minus_r: Vec<f64>,
    /// Partition of the 0-based asset indices.
    pub sectors: Vec<Vec<usize>>,
}

impl SectorLimitParams {
    /// Equal parameters in every sector, with contiguous sectors of the given sizes.
    pub fn uniform(gamma: f64, lambda_plus: f64, lambda_minus: f64, lp_r: f64, lm_r: f64, sizes: &[usize]) -> Self {
        Self {
            gamma,
            lambda_plus,
            lambda_minus,
            lambda_plus_r: vec![lp_r; sizes.len()],
            lambda_minus_r: vec![lm_r; sizes.len()],
            sectors: SectorParams::contiguous_sectors(sizes),
        }
    }

    pub fn m(&self) -> usize {
        self.sectors.iter().map(Vec::len).sum()
    }

    pub fn r(&self) -> usize {
        self.sectors.len()
    }

    pub fn eta(&self) -> Vec<f64> {
        let m = self.m() as f64;
        self.sectors.iter().map(|s| s.len() as f64 / m).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if self.sectors.is_empty() {
            return Err(Error::Empty("sectors"));
        }
        if self.lambda_plus_r.len() != self.r() || self.lambda_minus_r.len() != self.r() {
            return Err(Error::param("lambda_r", format!("need one value per sector ({})", self.r())));
        }
        let m = self.m();
        let mut seen = vec![false; m];
        for s in &self.sectors {
            if s.is_empty() {
                return Err(Error::param("sectors", "empty sector"));
            }
            for &i in s {
                if i >= m || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::param("sectors", format!("not a partition of 0..{m} (asset {i})")));
                }
            }
        }
        Ok(())
    }

    /// w = (1, ..., 1) / sqrt(m).
    pub fn w(&self) -> Vector {
        let m = self.m();
        Vector::from_element(m, 1.0 / (m as f64).sqrt())
    }

    /// Normalized indicator of sector r.
    pub fn w_r(&self, r: usize) -> Vector {
        let mut v = Vector::zeros(self.m());
        let s = &self.sectors[r];
        for &i in s {
            v[i] = 1.0 / (s.len() as f64).sqrt();
        }
        v
    }

    fn off_diagonal_ones(&self) -> Matrix {
        let m = self.m();
        Matrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    fn sector_ones(&self, r: usize) -> Matrix {
        let m = self.m();
        let mut j = Matrix::zeros(m, m);
        for &a in &self.sectors[r] {
            for &b in &self.sectors[r] {
                if a != b {
                    j[(a, b)] = 1.0;
                }
            }
        }
        j
    }

    /// scale I - lam w w^T - sum_r eta_r lam_r w_r w_r^T.
    fn idealized(&self, scale: f64, lam: f64, lam_r: &[f64]) -> Matrix {
        let m = self.m();
        let w = self.w();
        let mut a = Matrix::identity(m, m) * scale - &w * w.transpose() * lam;
        for (r, eta) in self.eta().into_iter().enumerate() {
            let wr = self.w_r(r);
            a -= &wr * wr.transpose() * (eta * lam_r[r]);
        }
        a
    }

    /// scale I - (lam / m) J - sum_r (lam_r / m) J_r, with finite-m amplitudes H = lambda / m.
    fn finite(&self, scale: f64, lam: f64, lam_r: &[f64]) -> Matrix {
        let m = self.m();
        let mf = m as f64;
        let mut a = Matrix::identity(m, m) * scale - self.off_diagonal_ones() * (lam / mf);
        for (r, l) in lam_r.iter().enumerate() {
            a -= self.sector_ones(r) * (l / mf);
        }
        a
    }

    /// (H - H') (J - (m-1) w w^T) + sum_r (H_r - H'_r) (J_r - (m_r-1) w_r w_r^T), so that
    /// the finite-m matrix equals scale I - (m-1) H w w^T - ... - epsilon.
    fn epsilon(&self, lam: f64, lam_r: &[f64]) -> Matrix {
        let m = self.m();
        let mf = m as f64;
        let w = self.w();
        let mut e = (self.off_diagonal_ones() - &w * w.transpose() * (mf - 1.0)) * (lam / mf);
        for (r, l) in lam_r.iter().enumerate() {
            let wr = self.w_r(r);
            let mr = self.sectors[r].len() as f64;
            e += (self.sector_ones(r) - &wr * wr.transpose() * (mr - 1.0)) * (l / mf);
        }
        e
    }

    /// Aggregate load lambda + sum_r eta_r lambda_r.
    pub fn load(&self, lam: f64, lam_r: &[f64]) -> f64 {
        lam + self.eta().iter().zip(lam_r).map(|(e, l)| e * l).sum::<f64>()
    }

    /// Finite-m kernel parameters with Hc = (lambda+ + lambda-) / 2m and Ha = (lambda+ - lambda-) / 2m.
    pub fn to_sector_params(&self, alpha: f64, mu: f64) -> SectorParams {
        let mf = self.m() as f64;
        let split = |lp: f64, lm: f64| ((lp + lm) / (2.0 * mf), (lp - lm) / (2.0 * mf));
        let (hc, ha) = split(self.lambda_plus, self.lambda_minus);
        let (hc_r, ha_r): (Vec<f64>, Vec<f64>) =
            self.lambda_plus_r.iter().zip(&self.lambda_minus_r).map(|(&p, &m)| split(p, m)).unzip();
        SectorParams { alpha, gamma: self.gamma, hc, ha, sectors: self.sectors.clone(), hc_r, ha_r, mu: vec![mu; self.m()] }
    }
}

impl From<&SectorParams> for SectorLimitParams {
    /// Inverse of `to_sector_params`: lambda+- = m (Hc +- Ha).
    fn from(p: &SectorParams) -> Self {
        let mf = p.mu.len() as f64;
        Self {
            gamma: p.gamma,
            lambda_plus: mf * (p.hc + p.ha),
            lambda_minus: mf * (p.hc - p.ha),
            lambda_plus_r: p.hc_r.iter().zip(&p.ha_r).map(|(c, a)| mf * (c + a)).collect(),
            lambda_minus_r: p.hc_r.iter().zip(&p.ha_r).map(|(c, a)| mf * (c - a)).collect(),
            sectors: p.sectors.clone(),
        }
    }
}

/// Smallest eigenvalue of the idealized price matrix relative to 2 gamma. Zero at the
/// admissibility boundary, one when there is no cross excitation.
pub fn price_margin(params: &SectorLimitParams) -> Result<f64> {
    params.validate()?;
    let a = params.idealized(2.0 * params.gamma, params.lambda_minus, &params.lambda_minus_r);
    Ok(SymmetricEigen::new(a).eigenvalues.min() / (2.0 * params.gamma))
}

/// Spectrum of `a` inside (0, upper), i.e. I - a is a contraction when upper = 2.
fn admissible(a: &Matrix, upper: f64, what: &str) -> Result<()> {
    let ev = SymmetricEigen::new(a.clone()).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 || hi >= upper {
        return Err(Error::Precondition {
            name: format!("{what} admissibility"),
            detail: format!("spectrum [{lo:.6}, {hi:.6}] must lie inside (0, {upper})"),
        });
    }
    Ok(())
}

/// Price covariance mixing (I - C)^-1. With `exact_finite_m` the finite-m matrix including its
/// O(1/m) correction, otherwise the rank-one idealization.
pub fn sigma_matrix(params: &SectorLimitParams, exact_finite_m: bool) -> Result<Matrix> {
    params.validate()?;
    admissible(&params.idealized(2.0 * params.gamma, params.lambda_minus, &params.lambda_minus_r), 2.0, "price")?;
    let a = if exact_finite_m {
        params.finite(2.0 * params.gamma, params.lambda_minus, &params.lambda_minus_r)
    } else {
        params.idealized(2.0 * params.gamma, params.lambda_minus, &params.lambda_minus_r)
    };
    admissible(&a, 2.0, "price")?;
    invert(&a, "price mixing")
}

/// Variance mixing K^-1, exact at finite m or idealized.
pub fn v_matrix(params: &SectorLimitParams, exact_finite_m: bool) -> Result<Matrix> {
    params.validate()?;
    admissible(&params.idealized(1.0, params.lambda_plus, &params.lambda_plus_r), 2.0, "variance")?;
    let a = if exact_finite_m {
        params.finite(1.0, params.lambda_plus, &params.lambda_plus_r)
    } else {
        params.idealized(1.0, params.lambda_plus, &params.lambda_plus_r)
    };
    admissible(&a, 2.0, "variance")?;
    invert(&a, "variance mixing")
}

/// Eigenvalues of the idealized Sigma from the R x R restriction to the sector directions;
/// the remaining m - R eigenvalues equal 1 / (2 gamma). Sorted descending.
pub fn ideal_sigma_eigenvalues(params: &SectorLimitParams) -> Result<Vec<f64>> {
    params.validate()?;
    let r = params.r();
    let eta = params.eta();
    let s = Vector::from_iterator(r, eta.iter().map(|e| e.sqrt()));
    let mut a = Matrix::identity(r, r) * (2.0 * params.gamma) - &s * s.transpose() * params.lambda_minus;
    for k in 0..r {
        a[(k, k)] -= eta[k] * params.lambda_minus_r[k];
    }
    let mut out: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().map(|x| 1.0 / x).collect();
    out.extend(std::iter::repeat(1.0 / (2.0 * params.gamma)).take(params.m() - r));
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Both limit matrices at finite m with their correction terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorLimit {
    pub params: SectorLimitParams,
    pub sigma: Matrix,
    pub vcal: Matrix,
    pub epsilon_sigma: Matrix,
    pub epsilon_v: Matrix,
    pub epsilon_sigma_radius: f64,
    pub epsilon_v_radius: f64,
}

impl SectorLimit {
    pub fn new(params: SectorLimitParams) -> Result<Self> {
        let sigma = sigma_matrix(&params, true)?;
        let vcal = v_matrix(&params, true)?;
        let epsilon_sigma = params.epsilon(params.lambda_minus, &params.lambda_minus_r);
        let epsilon_v = params.epsilon(params.lambda_plus, &params.lambda_plus_r);
        Ok(Self {
            epsilon_sigma_radius: spectral_radius(&epsilon_sigma)?,
            epsilon_v_radius: spectral_radius(&epsilon_v)?,
            params,
            sigma,
            vcal,
            epsilon_sigma,
            epsilon_v,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRatios {
    pub market_sector: Option<f64>,
    pub sector_bulk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub market_mode: f64,
    pub sector_modes: Vec<f64>,
    pub bulk: Vec<f64>,
    pub gap_ratios: GapRatios,
    /// True when a gap ratio is within 1e-9 of one, so the positional split is arbitrary.
    pub degenerate: bool,
    #[serde(skip)]
    pub market_vector: Vector,
}

/// Symmetric eigendecomposition split positionally into the top eigenvalue, the next R - 1
/// and the rest.
pub fn eigen_spectrum(mat: &Matrix, r: usize) -> Result<SpectrumReport> {
    let n = crate::matalg::require_square(mat)?;
    let asym = (mat - mat.transpose()).amax();
    if asym > 1e-10 * (1.0 + mat.amax()) {
        return Err(Error::Domain(format!("matrix is not symmetric (max asymmetry {asym:.3e})")));
    }
    if r == 0 || r > n {
        return Err(Error::param("R", format!("must lie in 1..={n}, got {r}")));
    }
    let eig = SymmetricEigen::new((mat + mat.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut market_vector = eig.eigenvectors.column(order[0]).into_owned();
    if market_vector.sum() < 0.0 {
        market_vector.neg_mut();
    }
    let ratio = |a: f64, b: f64| if b != 0.0 { Some(a / b) } else { None };
    let market_sector = if n > 1 { ratio(eigenvalues[0], eigenvalues[1]) } else { None };
    let sector_bulk = if r > 1 && r < n { ratio(eigenvalues[r - 1], eigenvalues[r]) } else { None };
    let degenerate = [market_sector, sector_bulk].iter().flatten().any(|g| (g - 1.0).abs() < 1e-9);
    Ok(SpectrumReport {
        market_mode: eigenvalues[0],
        sector_modes: eigenvalues[1..r].to_vec(),
        bulk: eigenvalues[r..].to_vec(),
        eigenvalues,
        gap_ratios: GapRatios { market_sector, sector_bulk },
        degenerate,
        market_vector,
    })
}
