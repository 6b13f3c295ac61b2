//! Assumption checks on a kernel family and extraction of the limiting rough-volatility model.

use super::{price_projection, ModelFamily};
use crate::error::{Error, Result};
use crate::matalg::{eigenvalues, invert, max_abs_diff, spectral_radius, Matrix, Vector};
use serde::{Serialize, Serializer};
use statrs::function::gamma::gamma;

/// Horizons used by `extract_limit_model` to probe the family.
pub const DEFAULT_PROBES: [f64; 3] = [1e3, 1e4, 1e5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckTolerances {
    /// Zero-block and span residuals.
    pub structural: f64,
    /// Margins on spectral radii and eigenvalue signs.
    pub spectral: f64,
    /// Allowed relative drift of the finite-horizon K probes.
    pub probe_ratio: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self { structural: 1e-12, spectral: 1e-8, probe_ratio: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityLimitStatus {
    /// Holds by the closed form of a preset family.
    Certified,
    /// A limit statement that no finite probe can settle.
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub name: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub horizon: f64,
    pub spectral_radius: f64,
    pub stable: bool,
    pub zero_block_residual: f64,
    pub span_residual: f64,
    pub k_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub probes: Vec<ProbeResult>,
    pub stable_at_t: bool,
    pub rho_max: f64,
    pub structure_ok: bool,
    pub k_converges: bool,
    #[serde(serialize_with = "ser_matrix")]
    pub k_matrix: Matrix,
    pub k_invertible: bool,
    #[serde(serialize_with = "ser_matrix")]
    pub m_matrix: Matrix,
    pub m_invertible: bool,
    pub km_spectrum_positive: bool,
    pub c_spectral_radius: f64,
    pub no_arbitrage_ok: bool,
    pub intensity_limit: IntensityLimitStatus,
    pub violated: Vec<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violated.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Assumption(self.violated.iter().map(|v| format!("{}: {}", v.name, v.detail)).collect()))
        }
    }
}

pub(crate) fn ser_matrix<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    rows(m).serialize(s)
}

pub(crate) fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Blocks of a matrix split at index n_c in both dimensions.
struct Blocks {
    a: Matrix,
    upper_right: Matrix,
    b: Matrix,
    c: Matrix,
}

fn split(m: &Matrix, n_c: usize) -> Blocks {
    let n = m.nrows();
    Blocks {
        a: m.view((0, 0), (n_c, n_c)).into_owned(),
        upper_right: m.view((0, n_c), (n_c, n - n_c)).into_owned(),
        b: m.view((n_c, 0), (n - n_c, n_c)).into_owned(),
        c: m.view((n_c, n_c), (n - n_c, n - n_c)).into_owned(),
    }
}

fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

/// Largest residual of projecting G^T q_i onto the span of the price directions.
fn span_residual(l1: &Matrix, m_assets: usize) -> f64 {
    let q = price_projection(m_assets);
    // columns of q are orthogonal with squared norm 2
    let image = l1.transpose() * &q;
    let projected = &q * (q.transpose() * &image) * 0.5;
    max_abs_diff(&image, &projected)
}

fn check_shapes(family: &ModelFamily, basis: &Matrix, n_c: usize) -> Result<Matrix> {
    let dim = family.dim();
    if basis.shape() != (dim, dim) {
        return Err(Error::param("basis", format!("must be {dim}x{dim}")));
    }
    if n_c == 0 || n_c > dim {
        return Err(Error::param("n_c", format!("must lie in 1..={dim}, got {n_c}")));
    }
    invert(basis, "basis O")
}

/// Checks the structural assumptions of the scaling limit on a family, probing the finite
/// horizons in `t_probe`.
pub fn check_assumptions(family: &ModelFamily, basis: &Matrix, n_c: usize, t_probe: &[f64]) -> Result<AssumptionReport> {
    check_assumptions_with(family, basis, n_c, t_probe, &CheckTolerances::default())
}

pub fn check_assumptions_with(
    family: &ModelFamily,
    basis: &Matrix,
    n_c: usize,
    t_probe: &[f64],
    tol: &CheckTolerances,
) -> Result<AssumptionReport> {
    if t_probe.is_empty() {
        return Err(Error::Empty("T_probe"));
    }
    if let Some(&t) = t_probe.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::param("T_probe", format!("horizons must be positive, got {t}")));
    }
    let o_inv = check_shapes(family, basis, n_c)?;
    let alpha = family.alpha();
    let mut violated = Vec::new();
    let mut violate = |name: &str, detail: String| violated.push(Violation { name: name.to_string(), detail });

    let amp = &family.kernel.amplitude;
    let base_t = split(&(&o_inv * &amp.base * basis), n_c);
    let crit_t = split(&(&o_inv * &amp.critical * basis), n_c);
    let identity = Matrix::identity(n_c, n_c);

    let saturation = max_abs_diff(&base_t.a, &identity);
    if saturation > tol.structural.max(1e-10) {
        violate(
            "critical block",
            format!("limit of the critical block differs from the identity by {saturation:.3e}"),
        );
    }
    let k = -&crit_t.a;
    let m = &base_t.a * alpha;

    let mut probes = Vec::with_capacity(t_probe.len());
    let mut sorted = t_probe.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        let g = family.l1_at(t);
        let rho = spectral_radius(&g)?;
        let stable = rho < 1.0 - tol.spectral && g.iter().all(|x| *x >= -tol.structural);
        let blocks = split(&(&o_inv * &g * basis), n_c);
        let zero_block_residual = blocks.upper_right.amax();
        let k_t = (&identity - &blocks.a) * t.powf(alpha);
        let k_relative_error = frobenius(&(&k_t - &k)) / frobenius(&k).max(f64::MIN_POSITIVE);
        probes.push(ProbeResult {
            horizon: t,
            spectral_radius: rho,
            stable,
            zero_block_residual,
            span_residual: span_residual(&g, family.m_assets),
            k_relative_error,
        });
    }
    let rho_max = probes.iter().map(|p| p.spectral_radius).fold(0.0, f64::max);

    let stable_at_t = probes.iter().all(|p| p.stable);
    if !stable_at_t {
        let bad: Vec<String> = probes
            .iter()
            .filter(|p| !p.stable)
            .map(|p| format!("T={} rho={:.6}", p.horizon, p.spectral_radius))
            .collect();
        violate("stability", format!("spectral radius not below 1 or negative entries at {}", bad.join(", ")));
    }

    let structural_scale = tol.structural * (1.0 + amp.base.amax() + amp.critical.amax());
    let structure_ok = probes.iter().all(|p| p.zero_block_residual <= structural_scale);
    if !structure_ok {
        let worst = probes.iter().map(|p| p.zero_block_residual).fold(0.0, f64::max);
        violate("block structure", format!("upper-right block of the conjugated kernel has entry {worst:.3e}"));
    }

    let errors: Vec<f64> = probes.iter().map(|p| p.k_relative_error).collect();
    let last = *errors.last().unwrap_or(&0.0);
    let shrinking = errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol.probe_ratio) + 1e-9);
    let mut k_converges = last <= tol.probe_ratio && shrinking;
    if let Some(closed) = &family.closed_form_k {
        let gap = if closed.shape() == k.shape() { max_abs_diff(closed, &k) } else { f64::INFINITY };
        if gap > 1e-9 {
            k_converges = false;
            violate("closed-form K", format!("extracted K differs from the preset closed form by {gap:.3e}"));
        }
    }
    if !k_converges {
        violate("K convergence", format!("relative probe errors {errors:?}"));
    }

    let k_invertible = crate::matalg::condition_number(&k) < 1e12;
    let m_invertible = crate::matalg::condition_number(&m) < 1e12;
    let mut km_spectrum_positive = false;
    if k_invertible && m_invertible {
        let km = &k * invert(&m, "M")?;
        let ev = eigenvalues(&km)?;
        km_spectrum_positive = ev.iter().all(|(re, _)| *re > tol.spectral);
        if !km_spectrum_positive {
            violate("tail condition", format!("K M^-1 has eigenvalues {ev:?}"));
        }
    } else {
        violate("invertibility", format!("K invertible: {k_invertible}, M invertible: {m_invertible}"));
    }

    let c_spectral_radius = if n_c < family.dim() { spectral_radius(&base_t.c)? } else { 0.0 };
    if c_spectral_radius >= 1.0 - tol.spectral {
        violate("non-critical block", format!("spectral radius of the limit C block is {c_spectral_radius}"));
    }

    let reference = family.delta_reference();
    let span = probes
        .iter()
        .map(|p| p.span_residual)
        .fold(span_residual(&reference, family.m_assets), f64::max);
    let no_arbitrage_ok = span <= structural_scale;
    if !no_arbitrage_ok {
        violate("no pair-trading arbitrage", format!("transposed kernel leaves the price span with residual {span:.3e}"));
    }

    let intensity_limit =
        if family.preset.is_some() { IntensityLimitStatus::Certified } else { IntensityLimitStatus::Unverifiable };

    Ok(AssumptionReport {
        probes,
        stable_at_t,
        rho_max,
        structure_ok,
        k_converges,
        k_matrix: k,
        k_invertible,
        m_matrix: m,
        m_invertible,
        km_spectrum_positive,
        c_spectral_radius,
        no_arbitrage_ok,
        intensity_limit,
        violated,
    })
}

fn require_pairs(l1: &Matrix) -> Result<usize> {
    let n = crate::matalg::require_square(l1)?;
    if n % 2 != 0 {
        return Err(Error::param("l1", format!("dimension {n} is not even")));
    }
    Ok(n / 2)
}

/// Price mixing matrix from the L1 kernel norm: with psi = (I - l1)^-1 l1,
/// entry (i, j) is psi[j+, i+] - psi[j-, i+].
pub fn compute_delta_numeric(l1: &Matrix) -> Result<Matrix> {
    let m = require_pairs(l1)?;
    let rho = spectral_radius(l1)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let n = 2 * m;
    let psi = invert(&(Matrix::identity(n, n) - l1), "I - l1")? * l1;
    Ok(Matrix::from_fn(m, m, |i, j| psi[(2 * j, 2 * i)] - psi[(2 * j + 1, 2 * i)]))
}

/// Same quantity computed on the price directions only: l1^T v_i = sum_j c_ij v_j, and the
/// mixing is ((I - c)^-1 - I)^T. Needs only the restriction to the price span to be stable.
pub fn compute_delta_price_subspace(l1: &Matrix) -> Result<Matrix> {
    let m = require_pairs(l1)?;
    let q = price_projection(m);
    let image = l1.transpose() * &q;
    let c = (q.transpose() * &image * 0.5).transpose();
    let residual = max_abs_diff(&image, &(&q * c.transpose()));
    if residual > 1e-10 * (1.0 + l1.amax()) {
        return Err(Error::Domain(format!("price directions are not invariant, residual {residual:.3e}")));
    }
    let rho = spectral_radius(&c)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let d = invert(&(Matrix::identity(m, m) - &c), "I - c")? - Matrix::identity(m, m);
    Ok(d.transpose())
}

/// Macroscopic limit of a kernel family.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitModel {
    pub alpha: f64,
    pub n_c: usize,
    pub m_assets: usize,
    pub k: Matrix,
    pub m: Matrix,
    pub lambda: Matrix,
    pub theta1: Matrix,
    pub theta2: Matrix,
    pub theta0: Vector,
    pub delta: Matrix,
    pub basis: Matrix,
    pub basis_inv: Matrix,
    pub c_l1: Matrix,
    pub b_l1: Matrix,
    /// Limit baseline in the original coordinates.
    pub mu: Vector,
}

impl LimitModel {
    pub fn dim(&self) -> usize {
        2 * self.m_assets
    }

    pub fn o11(&self) -> Matrix {
        self.basis.view((0, 0), (self.n_c, self.n_c)).into_owned()
    }

    pub fn o12(&self) -> Matrix {
        self.basis.view((0, self.n_c), (self.n_c, self.dim() - self.n_c)).into_owned()
    }

    pub fn o21(&self) -> Matrix {
        self.basis.view((self.n_c, 0), (self.dim() - self.n_c, self.n_c)).into_owned()
    }

    pub fn o22(&self) -> Matrix {
        let r = self.dim() - self.n_c;
        self.basis.view((self.n_c, self.n_c), (r, r)).into_owned()
    }

    /// Rows 0..n_c, columns 0..n_c of O^-1.
    pub fn o_inv11(&self) -> Matrix {
        self.basis_inv.view((0, 0), (self.n_c, self.n_c)).into_owned()
    }

    /// Rows 0..n_c, columns n_c.. of O^-1.
    pub fn o_inv12(&self) -> Matrix {
        self.basis_inv.view((0, self.n_c), (self.n_c, self.dim() - self.n_c)).into_owned()
    }

    /// Stacked [Theta1; Theta2], mapping the reduced variance to all 2m components.
    pub fn theta(&self) -> Matrix {
        let mut t = Matrix::zeros(self.dim(), self.n_c);
        t.view_mut((0, 0), (self.n_c, self.n_c)).copy_from(&self.theta1);
        t.view_mut((self.n_c, 0), (self.dim() - self.n_c, self.n_c)).copy_from(&self.theta2);
        t
    }

    /// I + Delta, applied to net order flow to obtain prices.
    pub fn price_mixing(&self) -> Matrix {
        Matrix::identity(self.m_assets, self.m_assets) + &self.delta
    }

    pub fn to_document(&self) -> LimitModelDocument {
        LimitModelDocument {
            alpha: self.alpha,
            n_c: self.n_c,
            m: self.m_assets,
            k: rows(&self.k),
            m_matrix: rows(&self.m),
            lambda: rows(&self.lambda),
            theta1: rows(&self.theta1),
            theta2: rows(&self.theta2),
            theta0: self.theta0.as_slice().to_vec(),
            delta: rows(&self.delta),
            o11: rows(&self.o11()),
            o12: rows(&self.o12()),
            o21: rows(&self.o21()),
            o22: rows(&self.o22()),
            o_inv11: rows(&self.o_inv11()),
            o_inv12: rows(&self.o_inv12()),
            c_l1: rows(&self.c_l1),
            b_l1: rows(&self.b_l1),
        }
    }
}

/// Serialized form of a `LimitModel`, matrices as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitModelDocument {
    pub alpha: f64,
    pub n_c: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m_matrix: Vec<Vec<f64>>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<Vec<f64>>,
    #[serde(rename = "Theta1")]
    pub theta1: Vec<Vec<f64>>,
    #[serde(rename = "Theta2")]
    pub theta2: Vec<Vec<f64>>,
    pub theta0: Vec<f64>,
    #[serde(rename = "Delta")]
    pub delta: Vec<Vec<f64>>,
    #[serde(rename = "O11")]
    pub o11: Vec<Vec<f64>>,
    #[serde(rename = "O12")]
    pub o12: Vec<Vec<f64>>,
    #[serde(rename = "O21")]
    pub o21: Vec<Vec<f64>>,
    #[serde(rename = "O22")]
    pub o22: Vec<Vec<f64>>,
    #[serde(rename = "Oinv11")]
    pub o_inv11: Vec<Vec<f64>>,
    #[serde(rename = "Oinv12")]
    pub o_inv12: Vec<Vec<f64>>,
    #[serde(rename = "C_l1")]
    pub c_l1: Vec<Vec<f64>>,
    #[serde(rename = "B_l1")]
    pub b_l1: Vec<Vec<f64>>,
}

impl Serialize for LimitModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

/// Kernel keeping only the non-critical part of the price reference, O [[0, 0], [B, C]] O^-1.
/// Its spectral radius is that of C, and its transpose acts on the price span exactly like
/// the full reference.
fn price_reference(family: &ModelFamily, basis: &Matrix, basis_inv: &Matrix, n_c: usize) -> Matrix {
    let mut conj = basis_inv * family.delta_reference() * basis;
    conj.view_mut((0, 0), (n_c, family.dim())).fill(0.0);
    basis * conj * basis_inv
}

/// Extracts the limit model; fails with the violated assumptions if the checks do not pass.
pub fn extract_limit_model(family: &ModelFamily, basis: &Matrix, n_c: usize) -> Result<LimitModel> {
    let report = check_assumptions(family, basis, n_c, &DEFAULT_PROBES)?.into_result()?;
    let alpha = family.alpha();
    let dim = family.dim();
    let basis_inv = invert(basis, "basis O")?;
    let base_t = split(&(&basis_inv * &family.kernel.amplitude.base * basis), n_c);
    let k = report.k_matrix;
    let m = report.m_matrix;
    let k_inv = invert(&k, "K")?;
    let lambda = &k * invert(&m, "M")? * (alpha / gamma(1.0 - alpha));
    let r = dim - n_c;
    let o = |r0, c0, nr, nc| basis.view((r0, c0), (nr, nc)).into_owned();
    let (theta1, theta2) = if r > 0 {
        let feed = invert(&(Matrix::identity(r, r) - &base_t.c), "I - C")? * &base_t.b;
        (
            (o(0, 0, n_c, n_c) + o(0, n_c, n_c, r) * &feed) * &k_inv,
            (o(n_c, 0, r, n_c) + o(n_c, n_c, r, r) * &feed) * &k_inv,
        )
    } else {
        (o(0, 0, n_c, n_c) * &k_inv, Matrix::zeros(0, n_c))
    };
    let theta0 = (&basis_inv * &family.mu).rows(0, n_c).into_owned();
    let delta = compute_delta_numeric(&price_reference(family, basis, &basis_inv, n_c))?;
    Ok(LimitModel {
        alpha,
        n_c,
        m_assets: family.m_assets,
        k,
        m,
        lambda,
        theta1,
        theta2,
        theta0,
        delta,
        basis: basis.clone(),
        basis_inv,
        c_l1: base_t.c,
        b_l1: base_t.b,
        mu: family.mu.clone(),
    })
}
