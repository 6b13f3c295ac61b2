//! Power-law Hawkes kernel families, assumption checks and limit-model extraction.

mod laplace;
mod limit;
mod presets;

pub use laplace::{profile_transform, psi_laplace, psi_laplace_limit, rescaled_psi_laplace, ProfileTransform};
pub use limit::{
    check_assumptions, compute_delta_numeric, compute_delta_price_subspace, extract_limit_model, AssumptionReport,
    check_assumptions_with, CheckTolerances, IntensityLimitStatus, LimitModel, LimitModelDocument, ProbeResult,
    Violation, DEFAULT_PROBES,
};
pub use presets::{
    build_nontrivial_volterra, build_sector_model, build_two_asset, NontrivialParams, SectorParams, TwoAssetParams,
};

use crate::error::{Error, Result};
use crate::matalg::quad::{integrate, Tolerance};
use crate::matalg::{require_square, spectral_radius, Matrix, Vector};
use serde::{Deserialize, Serialize};

/// The shared kernel profile alpha * t^-(alpha+1) on t >= 1, zero before. Unit mass.
pub fn profile(alpha: f64, t: f64) -> f64 {
    if t >= 1.0 {
        alpha * t.powf(-(alpha + 1.0))
    } else {
        0.0
    }
}

/// Integral of the profile over [0, t].
pub fn profile_cdf(alpha: f64, t: f64) -> f64 {
    if t >= 1.0 {
        -(-alpha * t.ln()).exp_m1()
    } else {
        0.0
    }
}

/// Supremum of the profile over [lag, infinity).
pub fn profile_envelope(alpha: f64, lag: f64) -> f64 {
    alpha * lag.max(1.0).powf(-(alpha + 1.0))
}

/// Mass of the profile by quadrature, over [1, upper] or the whole half-line when `upper` is None.
pub fn profile_mass_quadrature(alpha: f64, upper: Option<f64>) -> Result<f64> {
    let tol = Tolerance { abs: 1e-13, rel: 1e-13 };
    match upper {
        // t = exp(x)
        Some(u) => integrate(|x| alpha * (-alpha * x).exp(), 0.0, u.ln(), tol),
        // t = 1 / v
        None => integrate(|v: f64| if v == 0.0 { 0.0 } else { alpha * v.powf(alpha - 1.0) }, 0.0, 1.0, tol),
    }
}

/// Amplitude matrix family G(T) = base + T^-alpha * critical.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    pub base: Matrix,
    pub critical: Matrix,
}

impl Amplitude {
    pub fn at(&self, alpha: f64, horizon: f64) -> Matrix {
        &self.base + &self.critical * horizon.powf(-alpha)
    }
}

/// Matrix kernel whose entry (i, j) is G(T)_ij * profile(t): the effect of a component-j
/// event on the intensity of component i.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub alpha: f64,
    pub amplitude: Amplitude,
}

impl KernelSpec {
    pub fn new(alpha: f64, amplitude: Amplitude) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let n = require_square(&amplitude.base)?;
        if amplitude.critical.shape() != (n, n) {
            return Err(Error::param("amplitude", "base and critical parts differ in shape"));
        }
        Ok(Self { alpha, amplitude })
    }

    pub fn dim(&self) -> usize {
        self.amplitude.base.nrows()
    }

    pub fn l1_at(&self, horizon: f64) -> Matrix {
        self.amplitude.at(self.alpha, horizon)
    }

    pub fn eval(&self, t: f64, horizon: f64) -> Matrix {
        self.l1_at(horizon) * profile(self.alpha, t)
    }
}

/// The microscopic process at one horizon: constant baseline and amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    pub alpha: f64,
    pub amplitude: Matrix,
    pub baseline: Vector,
    pub horizon: f64,
}

impl HawkesModel {
    pub fn new(alpha: f64, amplitude: Matrix, baseline: Vector, horizon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let n = require_square(&amplitude)?;
        if baseline.len() != n {
            return Err(Error::param("baseline", format!("length {} does not match dimension {n}", baseline.len())));
        }
        if amplitude.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::param("amplitude", "entries must be finite and nonnegative"));
        }
        if baseline.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::param("baseline", "entries must be finite and nonnegative"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        let rho = spectral_radius(&amplitude)?;
        if rho >= 1.0 {
            return Err(Error::Unstable { rho });
        }
        Ok(Self { alpha, amplitude, baseline, horizon })
    }

    pub fn dim(&self) -> usize {
        self.baseline.len()
    }

    /// L1 norm of the kernel, exact because the profile has unit mass.
    pub fn l1_matrix(&self) -> Matrix {
        self.amplitude.clone()
    }

    /// L1 norm with the profile mass computed by quadrature.
    pub fn l1_matrix_quadrature(&self) -> Result<Matrix> {
        Ok(&self.amplitude * profile_mass_quadrature(self.alpha, None)?)
    }

    pub fn stability(&self) -> Result<f64> {
        spectral_radius(&self.amplitude)
    }
}

/// Which closed-form family a model came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    TwoAsset,
    Sector,
    NontrivialVolterra,
}

/// A kernel family indexed by the horizon T together with the limit baseline and the
/// change of basis that exposes its critical directions.
#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub kernel: KernelSpec,
    /// Limit baseline: the horizon-T baseline is T^(alpha-1) * mu.
    pub mu: Vector,
    pub m_assets: usize,
    pub basis: Matrix,
    pub n_c: usize,
    pub preset: Option<PresetKind>,
    /// Closed-form K from the preset's derivation, used to cross-check the numeric extraction.
    pub closed_form_k: Option<Matrix>,
}

impl ModelFamily {
    pub fn new(kernel: KernelSpec, mu: Vector, m_assets: usize, basis: Matrix, n_c: usize) -> Result<Self> {
        let dim = kernel.dim();
        if dim != 2 * m_assets {
            return Err(Error::param("m_assets", format!("kernel dimension {dim} is not twice {m_assets}")));
        }
        if mu.len() != dim {
            return Err(Error::param("mu", format!("length {} does not match dimension {dim}", mu.len())));
        }
        if basis.shape() != (dim, dim) {
            return Err(Error::param("basis", "must be square with the kernel dimension"));
        }
        if n_c == 0 || n_c > dim {
            return Err(Error::param("n_c", format!("must lie in 1..={dim}, got {n_c}")));
        }
        Ok(Self { kernel, mu, m_assets, basis, n_c, preset: None, closed_form_k: None })
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn l1_at(&self, horizon: f64) -> Matrix {
        self.kernel.l1_at(horizon)
    }

    pub fn baseline_at(&self, horizon: f64) -> Vector {
        &self.mu * horizon.powf(self.alpha() - 1.0)
    }

    pub fn at(&self, horizon: f64) -> Result<HawkesModel> {
        HawkesModel::new(self.alpha(), self.l1_at(horizon), self.baseline_at(horizon), horizon)
    }

    /// Amplitude used for the price-mixing matrix: the limit amplitude with the cross-asset
    /// part of the vanishing component kept at unit scale. Cross-asset interactions in the
    /// presets are O(T^-alpha) in the amplitude yet enter the price mixing at order one.
    pub fn delta_reference(&self) -> Matrix {
        let mut g = self.kernel.amplitude.base.clone();
        let crit = &self.kernel.amplitude.critical;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i / 2 != j / 2 {
                    g[(i, j)] += crit[(i, j)];
                }
            }
        }
        g
    }
}

/// Basis whose first m columns are e_{i+} + e_{i-} and last m columns e_{i+} - e_{i-}.
pub fn standard_basis(m: usize) -> Matrix {
    let mut o = Matrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        o[(2 * i, i)] = 1.0;
        o[(2 * i + 1, i)] = 1.0;
        o[(2 * i, m + i)] = 1.0;
        o[(2 * i + 1, m + i)] = -1.0;
    }
    o
}

/// Q with columns e_{i+} - e_{i-}, so that Q^T N gives net price moves.
pub fn price_projection(m: usize) -> Matrix {
    let mut q = Matrix::zeros(2 * m, m);
    for i in 0..m {
        q[(2 * i, i)] = 1.0;
        q[(2 * i + 1, i)] = -1.0;
    }
    q
}
