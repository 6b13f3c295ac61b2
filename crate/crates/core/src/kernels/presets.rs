//! Closed-form kernel families: two assets, sectors, and a family with a non-diagonal
//! volatility mixing.

use super::{standard_basis, Amplitude, KernelSpec, ModelFamily, PresetKind};
use crate::error::{Error, Result};
use crate::matalg::{Matrix, Vector};
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

fn unit_interval(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in [0, 1], got {x}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (1/2, 1), got {alpha}")))
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {x}")))
    }
}

fn precondition(failures: Vec<(String, String)>) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let name = failures.iter().map(|f| f.0.clone()).collect::<Vec<_>>().join(", ");
    let detail = failures.iter().map(|f| f.1.clone()).collect::<Vec<_>>().join("; ");
    Err(Error::Precondition { name, detail })
}

/// Moduli of a -/+ sqrt(b) with the principal complex square root.
fn shifted_root_moduli(a: f64, b: f64) -> (f64, f64) {
    let r = Complex::new(b, 0.0).sqrt();
    ((Complex::new(a, 0.0) - r).norm(), (Complex::new(a, 0.0) + r).norm())
}

/// Two assets with self-excitation split (1 - gamma, gamma) between same-direction and
/// opposite-direction moves, and cross-asset continuation (c) / alternation (a) feedback.
/// `hc12` is the effect of asset-2 moves on asset 1, `hc21` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAssetParams {
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub hc12: f64,
    pub ha12: f64,
    pub hc21: f64,
    pub ha21: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl TwoAssetParams {
    pub fn h12(&self) -> f64 {
        self.hc12 + self.ha12
    }

    pub fn h21(&self) -> f64 {
        self.hc21 + self.ha21
    }

    /// Net cross-asset momentum d12 = Hc12 - Ha12.
    pub fn d12(&self) -> f64 {
        self.hc12 - self.ha12
    }

    pub fn d21(&self) -> f64 {
        self.hc21 - self.ha21
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        for (name, x) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("hc12", self.hc12),
            ("ha12", self.ha12),
            ("hc21", self.hc21),
            ("ha21", self.ha21),
        ] {
            unit_interval(name, x)?;
        }
        positive("mu1", self.mu1)?;
        positive("mu2", self.mu2)?;
        let mut failures = Vec::new();
        let product = self.h12() * self.h21();
        if product >= 1.0 {
            failures.push((
                "first admissibility inequality (Hc12+Ha12)(Hc21+Ha21) < 1".to_string(),
                format!("product is {product}"),
            ));
        }
        let shift = 1.0 - (self.gamma1 + self.gamma2);
        let disc = self.d12() * self.d21() + (self.gamma1 - self.gamma2).powi(2);
        let (minus, plus) = shifted_root_moduli(shift, disc);
        if minus >= 1.0 {
            failures.push((
                "second admissibility inequality |1-(g1+g2)-sqrt(d12 d21+(g1-g2)^2)| < 1".to_string(),
                format!("modulus is {minus}"),
            ));
        }
        if plus >= 1.0 {
            failures.push((
                "third admissibility inequality |1-(g1+g2)+sqrt(d12 d21+(g1-g2)^2)| < 1".to_string(),
                format!("modulus is {plus}"),
            ));
        }
        precondition(failures)
    }
}

pub fn build_two_asset(p: &TwoAssetParams) -> Result<ModelFamily> {
    p.validate()?;
    let mut base = Matrix::zeros(4, 4);
    for (asset, g) in [(0usize, p.gamma1), (1, p.gamma2)] {
        let i = 2 * asset;
        base[(i, i)] = 1.0 - g;
        base[(i + 1, i + 1)] = 1.0 - g;
        base[(i, i + 1)] = g;
        base[(i + 1, i)] = g;
    }
    let mut critical = -base.clone();
    critical[(0, 2)] = p.hc12;
    critical[(0, 3)] = p.ha12;
    critical[(1, 2)] = p.ha12;
    critical[(1, 3)] = p.hc12;
    critical[(2, 0)] = p.hc21;
    critical[(2, 1)] = p.ha21;
    critical[(3, 0)] = p.ha21;
    critical[(3, 1)] = p.hc21;
    let kernel = KernelSpec::new(p.alpha, Amplitude { base, critical })?;
    let mu = Vector::from_vec(vec![p.mu1, p.mu1, p.mu2, p.mu2]);
    let mut family = ModelFamily::new(kernel, mu, 2, standard_basis(2), 2)?;
    family.preset = Some(PresetKind::TwoAsset);
    family.closed_form_k = Some(Matrix::from_row_slice(2, 2, &[1.0, -p.h12(), -p.h21(), 1.0]));
    Ok(family)
}

/// Many assets grouped in sectors. Asset pairs share a background feedback (hc, ha) and pairs
/// inside one sector get an extra (hc_r, ha_r). Sectors are lists of 0-based asset indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorParams {
    pub alpha: f64,
    pub gamma: f64,
    pub hc: f64,
    pub ha: f64,
    pub sectors: Vec<Vec<usize>>,
    pub hc_r: Vec<f64>,
    pub ha_r: Vec<f64>,
    pub mu: Vec<f64>,
}

impl SectorParams {
    /// Contiguous sectors of the given sizes.
    pub fn contiguous_sectors(sizes: &[usize]) -> Vec<Vec<usize>> {
        let mut start = 0;
        sizes
            .iter()
            .map(|&n| {
                let s: Vec<usize> = (start..start + n).collect();
                start += n;
                s
            })
            .collect()
    }

    /// One asset in one sector.
    pub fn single_asset(alpha: f64, gamma: f64, mu: f64) -> Self {
        Self { alpha, gamma, hc: 0.0, ha: 0.0, sectors: vec![vec![0]], hc_r: vec![0.0], ha_r: vec![0.0], mu: vec![mu] }
    }

    pub fn m(&self) -> usize {
        self.mu.len()
    }

    /// Sector index of every asset.
    pub fn membership(&self) -> Result<Vec<usize>> {
        let m = self.m();
        let mut owner = vec![usize::MAX; m];
        for (r, sector) in self.sectors.iter().enumerate() {
            if sector.is_empty() {
                return Err(Error::param("sectors", format!("sector {r} is empty")));
            }
            for &i in sector {
                if i >= m {
                    return Err(Error::param("sectors", format!("asset {i} out of range for m = {m}")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::param("sectors", format!("asset {i} listed twice")));
                }
                owner[i] = r;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::param("sectors", format!("asset {i} is not in any sector")));
        }
        Ok(owner)
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        check_alpha(self.alpha)?;
        unit_interval("gamma", self.gamma)?;
        let m = self.m();
        if m == 0 {
            return Err(Error::Empty("assets"));
        }
        let owner = self.membership()?;
        let r = self.sectors.len();
        if self.hc_r.len() != r || self.ha_r.len() != r {
            return Err(Error::param("hc_r/ha_r", format!("need one value per sector ({r})")));
        }
        for &x in [self.hc, self.ha].iter().chain(&self.hc_r).chain(&self.ha_r) {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::param("feedback", format!("entries must be nonnegative, got {x}")));
            }
        }
        for &x in &self.mu {
            positive("mu", x)?;
        }
        let mf = m as f64;
        let minus: f64 = mf * (self.hc - self.ha)
            + self
                .sectors
                .iter()
                .enumerate()
                .map(|(k, s)| s.len() as f64 / mf * mf * (self.hc_r[k] - self.ha_r[k]))
                .sum::<f64>();
        let plus: f64 = mf * (self.hc + self.ha)
            + self
                .sectors
                .iter()
                .enumerate()
                .map(|(k, s)| s.len() as f64 / mf * mf * (self.hc_r[k] + self.ha_r[k]))
                .sum::<f64>();
        let mut failures = Vec::new();
        if minus.abs() >= 2.0 * self.gamma {
            failures.push((
                "price admissibility |lambda- + sum eta_r lambda-_r| < 2 gamma".to_string(),
                format!("{} vs {}", minus.abs(), 2.0 * self.gamma),
            ));
        }
        if plus.abs() >= 1.0 {
            failures.push((
                "variance admissibility |lambda+ + sum eta_r lambda+_r| < 1".to_string(),
                format!("value is {}", plus.abs()),
            ));
        }
        if m > 1 {
            let finite: f64 = self.hc
                + self.ha
                + self
                    .sectors
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.len() as f64 - 1.0) / (mf - 1.0) * (self.hc_r[k] + self.ha_r[k]))
                    .sum::<f64>();
            if finite.abs() >= 1.0 / (mf - 1.0) {
                failures.push((
                    "finite-m admissibility |Hc+Ha+sum (m_r-1)/(m-1)(Hc_r+Ha_r)| < 1/(m-1)".to_string(),
                    format!("{} vs {}", finite.abs(), 1.0 / (mf - 1.0)),
                ));
            }
        }
        precondition(failures)?;
        Ok(owner)
    }

    /// Off-diagonal all-ones matrix J (m x m).
    pub fn j_matrix(&self) -> Matrix {
        let m = self.m();
        Matrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    /// Off-diagonal ones restricted to sector r.
    pub fn j_sector(&self, r: usize) -> Matrix {
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

    /// I - (Hc+Ha) J - sum_r (Hc_r+Ha_r) J_r.
    pub fn closed_form_k(&self) -> Matrix {
        let m = self.m();
        let mut k = Matrix::identity(m, m) - self.j_matrix() * (self.hc + self.ha);
        for r in 0..self.sectors.len() {
            k -= self.j_sector(r) * (self.hc_r[r] + self.ha_r[r]);
        }
        k
    }

    /// (1 - 2 gamma) I + (Hc-Ha) J + sum_r (Hc_r-Ha_r) J_r.
    pub fn closed_form_c(&self) -> Matrix {
        let m = self.m();
        let mut c = Matrix::identity(m, m) * (1.0 - 2.0 * self.gamma) + self.j_matrix() * (self.hc - self.ha);
        for r in 0..self.sectors.len() {
            c += self.j_sector(r) * (self.hc_r[r] - self.ha_r[r]);
        }
        c
    }
}

pub fn build_sector_model(p: &SectorParams) -> Result<ModelFamily> {
    let owner = p.validate()?;
    let m = p.m();
    let dim = 2 * m;
    let mut base = Matrix::zeros(dim, dim);
    let mut critical = Matrix::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let (same, opposite) = if i == j {
                base[(2 * i, 2 * i)] = 1.0 - p.gamma;
                base[(2 * i + 1, 2 * i + 1)] = 1.0 - p.gamma;
                base[(2 * i, 2 * i + 1)] = p.gamma;
                base[(2 * i + 1, 2 * i)] = p.gamma;
                (-(1.0 - p.gamma), -p.gamma)
            } else if owner[i] == owner[j] {
                let r = owner[i];
                (p.hc + p.hc_r[r], p.ha + p.ha_r[r])
            } else {
                (p.hc, p.ha)
            };
            critical[(2 * i, 2 * j)] = same;
            critical[(2 * i + 1, 2 * j + 1)] = same;
            critical[(2 * i, 2 * j + 1)] = opposite;
            critical[(2 * i + 1, 2 * j)] = opposite;
        }
    }
    let kernel = KernelSpec::new(p.alpha, Amplitude { base, critical })?;
    let mu = Vector::from_iterator(dim, p.mu.iter().flat_map(|&x| [x, x]));
    let mut family = ModelFamily::new(kernel, mu, m, standard_basis(m), m)?;
    family.preset = Some(PresetKind::Sector);
    family.closed_form_k = Some(p.closed_form_k());
    Ok(family)
}

/// Two assets whose limit variance has a non-diagonal diffusion matrix. `kappa` is the
/// opposite-direction imbalance kept in the non-critical block; `hb21`, `hs21` act on asset 1
/// from asset-2 moves (same/opposite direction), `hb12`, `hs12` on asset 2 from asset 1.
/// Entries stay nonnegative for horizons with T^-alpha <= 1 - kappa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NontrivialParams {
    pub alpha: f64,
    pub kappa: f64,
    pub hb12: f64,
    pub hs12: f64,
    pub hb21: f64,
    pub hs21: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl NontrivialParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::param("kappa", format!("must lie in [0, 1), got {}", self.kappa)));
        }
        for (name, x) in [("hb12", self.hb12), ("hs12", self.hs12), ("hb21", self.hb21), ("hs21", self.hs21)] {
            unit_interval(name, x)?;
        }
        positive("mu1", self.mu1)?;
        positive("mu2", self.mu2)?;
        let mut failures = Vec::new();
        let product = (self.hb12 + self.hs12) * (self.hb21 + self.hs21);
        if product >= 1.0 {
            failures.push(("first admissibility inequality (Hb12+Hs12)(Hb21+Hs21) < 1".to_string(), format!("product is {product}")));
        }
        let (minus, plus) = shifted_root_moduli(self.kappa, (self.hb12 - self.hs12) * (self.hb21 - self.hs21));
        if minus >= 1.0 {
            failures.push(("second admissibility inequality |kappa - sqrt(..)| < 1".to_string(), format!("modulus is {minus}")));
        }
        if plus >= 1.0 {
            failures.push(("third admissibility inequality |kappa + sqrt(..)| < 1".to_string(), format!("modulus is {plus}")));
        }
        precondition(failures)
    }

    /// Smallest horizon at which every kernel entry is nonnegative.
    pub fn min_horizon(&self) -> f64 {
        (1.0 - self.kappa).powf(-1.0 / self.alpha)
    }
}

pub fn build_nontrivial_volterra(p: &NontrivialParams) -> Result<ModelFamily> {
    p.validate()?;
    let k = p.kappa;
    // same-direction amplitude (1 + kappa - T^-alpha) / 2, opposite-direction one kappa lower
    let base_block = [[(1.0 + k) / 2.0, (1.0 - k) / 2.0], [(1.0 - k) / 2.0, (1.0 + k) / 2.0]];
    let mut base = Matrix::zeros(4, 4);
    let mut critical = Matrix::zeros(4, 4);
    for a in 0..2 {
        for r in 0..2 {
            for c in 0..2 {
                base[(2 * a + r, 2 * a + c)] = base_block[r][c];
                critical[(2 * a + r, 2 * a + c)] = -0.5;
            }
        }
    }
    critical[(0, 2)] = p.hb21;
    critical[(0, 3)] = p.hs21;
    critical[(1, 2)] = p.hs21;
    critical[(1, 3)] = p.hb21;
    critical[(2, 0)] = p.hb12;
    critical[(2, 1)] = p.hs12;
    critical[(3, 0)] = p.hs12;
    critical[(3, 1)] = p.hb12;
    let kernel = KernelSpec::new(p.alpha, Amplitude { base, critical })?;
    let mu = Vector::from_vec(vec![p.mu1, p.mu1, p.mu2, p.mu2]);
    let mut family = ModelFamily::new(kernel, mu, 2, standard_basis(2), 2)?;
    family.preset = Some(PresetKind::NontrivialVolterra);
    family.closed_form_k = Some(Matrix::from_row_slice(
        2,
        2,
        &[1.0, -(p.hb21 + p.hs21), -(p.hb12 + p.hs12), 1.0],
    ));
    Ok(family)
}
