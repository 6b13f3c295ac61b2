//! Laplace transforms of the kernel profile and of the resolvent.

use super::{LimitModel, ModelFamily};
use crate::error::{Error, Result};
use crate::matalg::quad::{integrate, Tolerance};
use crate::matalg::{invert, spectral_radius, Matrix};
use statrs::function::gamma::gamma;

/// Laplace transform of the unit-mass profile. With u = t^-alpha the transform becomes
/// the integral of exp(-s u^(-1/alpha)) over u in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTransform {
    alpha: f64,
}

impl ProfileTransform {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")))
        }
    }

    fn check(s: f64) -> Result<()> {
        if s >= 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("transform argument must be finite and nonnegative, got {s}")))
        }
    }

    /// Split point near the transition u ~ s^alpha.
    fn knee(&self, s: f64) -> f64 {
        s.powf(self.alpha).clamp(1e-300, 1.0)
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        let inv = -1.0 / self.alpha;
        let f = |u: f64| if u == 0.0 { 0.0 } else { (-s * u.powf(inv)).exp() };
        let tol = Tolerance { abs: 1e-14, rel: 1e-13 };
        let k = self.knee(s);
        Ok(integrate(f, 0.0, k, tol)? + if k < 1.0 { integrate(f, k, 1.0, tol)? } else { 0.0 })
    }

    /// 1 - value(s), computed without cancellation.
    pub fn complement(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        let inv = -1.0 / self.alpha;
        let f = |u: f64| if u == 0.0 { 1.0 } else { -(-s * u.powf(inv)).exp_m1() };
        let tol = Tolerance { abs: 1e-16, rel: 1e-13 };
        let k = self.knee(s);
        Ok(integrate(f, 0.0, k, tol)? + if k < 1.0 { integrate(f, k, 1.0, tol)? } else { 0.0 })
    }
}

pub fn profile_transform(alpha: f64, s: f64) -> Result<f64> {
    ProfileTransform::new(alpha)?.value(s)
}

/// Laplace transform of the resolvent psi = sum_k phi^{*k} at horizon T.
pub fn psi_laplace(family: &ModelFamily, z: f64, horizon: f64) -> Result<Matrix> {
    let g = family.l1_at(horizon);
    let rho = spectral_radius(&g)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let pt = ProfileTransform::new(family.alpha())?;
    let hat = pt.value(z)?;
    let miss = pt.complement(z)?;
    let n = g.nrows();
    // I - G hat = (I - G) + G (1 - hat)
    let resolvent = (Matrix::identity(n, n) - &g) + &g * miss;
    Ok(invert(&resolvent, "I - phi_hat")? * (g * hat))
}

/// T^-alpha psi_hat^T(z / T), the quantity with a finite limit as T grows.
pub fn rescaled_psi_laplace(family: &ModelFamily, z: f64, horizon: f64) -> Result<Matrix> {
    Ok(psi_laplace(family, z / horizon, horizon)? * horizon.powf(-family.alpha()))
}

/// Limit of `rescaled_psi_laplace`:
/// O [[(Gamma(1-alpha)/alpha z^alpha M + K)^-1, 0], [(I-C)^-1 B (...)^-1, 0]] O^-1.
pub fn psi_laplace_limit(limit: &LimitModel, z: f64) -> Result<Matrix> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    let alpha = limit.alpha;
    let n_c = limit.n_c;
    let dim = limit.dim();
    let core = invert(&(&limit.m * (gamma(1.0 - alpha) / alpha * z.powf(alpha)) + &limit.k), "limit resolvent")?;
    let mut blocks = Matrix::zeros(dim, dim);
    blocks.view_mut((0, 0), (n_c, n_c)).copy_from(&core);
    if dim > n_c {
        let r = dim - n_c;
        let lower = invert(&(Matrix::identity(r, r) - &limit.c_l1), "I - C")? * &limit.b_l1 * &core;
        blocks.view_mut((n_c, 0), (r, n_c)).copy_from(&lower);
    }
    Ok(&limit.basis * blocks * &limit.basis_inv)
}

#[cfg(test)]
mod tests {
    use super::super::{build_two_asset, extract_limit_model, standard_basis, Amplitude, KernelSpec, TwoAssetParams};
    use super::*;
    use crate::matalg::{max_abs_diff, Vector};
    use statrs::function::gamma::gamma_ui;

    // alpha s^alpha Gamma(-alpha, s) = e^-s - s^alpha Gamma(1 - alpha, s)
    fn incomplete_gamma_oracle(alpha: f64, s: f64) -> f64 {
        (-s).exp() - s.powf(alpha) * gamma_ui(1.0 - alpha, s)
    }

    #[test]
    fn transform_matches_incomplete_gamma() {
        for &alpha in &[0.55, 0.7, 0.9] {
            let pt = ProfileTransform::new(alpha).unwrap();
            for &s in &[1e-4, 0.01, 0.3, 1.0, 5.0, 20.0] {
                let q = pt.value(s).unwrap();
                assert!((q - incomplete_gamma_oracle(alpha, s)).abs() < 1e-9, "alpha={alpha} s={s}");
                assert!((q + pt.complement(s).unwrap() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn complement_small_argument() {
        // 1 - phi_hat(s) ~ Gamma(1 - alpha) s^alpha as s -> 0
        let alpha = 0.6;
        let pt = ProfileTransform::new(alpha).unwrap();
        let s: f64 = 1e-10;
        let ratio = pt.complement(s).unwrap() / (gamma(1.0 - alpha) * s.powf(alpha));
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    fn scalar_family(g: f64) -> ModelFamily {
        let amp = Amplitude { base: Matrix::from_element(2, 2, g / 2.0), critical: Matrix::zeros(2, 2) };
        let kernel = KernelSpec::new(0.6, amp).unwrap();
        ModelFamily::new(kernel, Vector::from_element(2, 1.0), 1, standard_basis(1), 1).unwrap()
    }

    #[test]
    fn geometric_series_on_symmetric_direction() {
        let f = scalar_family(0.5);
        let z = 0.2;
        let ghat = 0.5 * profile_transform(0.6, z).unwrap();
        let psi = psi_laplace(&f, z, 10.0).unwrap();
        // (1, 1) is an eigenvector of G with eigenvalue g
        let v = Vector::from_element(2, 1.0);
        let w = &psi * &v;
        assert!((w[0] - ghat / (1.0 - ghat)).abs() < 1e-12);
    }

    #[test]
    fn vanishes_for_large_argument() {
        let f = scalar_family(0.5);
        assert!(psi_laplace(&f, 200.0, 10.0).unwrap().amax() < 1e-80);
    }

    #[test]
    fn rescaled_transform_converges() {
        let p = TwoAssetParams {
            alpha: 0.6,
            gamma1: 0.4,
            gamma2: 0.3,
            hc12: 0.3,
            ha12: 0.1,
            hc21: 0.2,
            ha21: 0.05,
            mu1: 1.0,
            mu2: 1.0,
        };
        let f = build_two_asset(&p).unwrap();
        let lm = extract_limit_model(&f, &standard_basis(2), 2).unwrap();
        let limit = psi_laplace_limit(&lm, 1.0).unwrap();
        let errs: Vec<f64> = [1e3, 1e4, 1e5]
            .iter()
            .map(|&t| max_abs_diff(&rescaled_psi_laplace(&f, 1.0, t).unwrap(), &limit) / limit.amax())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[2] < 0.05, "{errs:?}");
    }
}
