//! Riemann-Liouville fractional integration and differentiation on uniform grids.

use super::{GridFunction, Matrix};
use crate::error::{Error, Result};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma, ln_gamma};

fn check_order(alpha: f64, lo_open: bool) -> Result<()> {
    let ok = if lo_open { alpha > 0.0 && alpha <= 1.0 } else { alpha > 0.0 && alpha < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("fractional order {alpha} outside the supported interval")))
    }
}

/// Cell weights of the product-rectangle rule: the kernel (t - s)^(alpha-1) / Gamma(alpha)
/// integrated exactly over a cell `n` steps back.
pub(crate) fn product_weights(alpha: f64, dt: f64, n: usize) -> Vec<f64> {
    let c = dt.powf(alpha) / gamma(alpha + 1.0);
    (0..=n)
        .map(|k| if k == 0 { 0.0 } else { c * ((k as f64).powf(alpha) - ((k - 1) as f64).powf(alpha)) })
        .collect()
}

/// Discrete I^alpha f with the left-endpoint product-rectangle rule. First order in dt.
pub fn frac_integrate(alpha: f64, f: &GridFunction) -> Result<GridFunction> {
    check_order(alpha, true)?;
    let n = f.len();
    let w = product_weights(alpha, f.dt, n);
    let (r, c) = f.shape();
    let out = (0..n)
        .map(|k| {
            let mut acc = Matrix::zeros(r, c);
            for j in 0..k {
                acc += &f.values[j] * w[k - j];
            }
            acc
        })
        .collect();
    GridFunction::new(f.t0, f.dt, out)
}

/// Discrete I^alpha of `s^power * g(s)` on a grid starting at 0, where `power > -1` may be
/// negative and `g` is bounded and sampled on the grid. Between samples `g` is interpolated
/// linearly in `s^smoothness`; the singular factors are integrated exactly over each cell.
pub fn frac_integrate_weighted(
    alpha: f64,
    power: f64,
    smoothness: f64,
    g: &GridFunction,
) -> Result<GridFunction> {
    check_order(alpha, true)?;
    if !(power > -1.0) {
        return Err(Error::param("power", format!("must exceed -1, got {power}")));
    }
    if !(smoothness > 0.0) {
        return Err(Error::param("smoothness", format!("must be positive, got {smoothness}")));
    }
    if g.t0 != 0.0 {
        return Err(Error::Grid("weighted integration needs a grid starting at 0".into()));
    }
    let n = g.len();
    let (r, c) = g.shape();
    let nodes: Vec<f64> = (0..n).map(|j| g.time(j).powf(smoothness)).collect();
    let slopes: Vec<Matrix> = (0..n.saturating_sub(1))
        .map(|j| (&g.values[j + 1] - &g.values[j]) / (nodes[j + 1] - nodes[j]))
        .collect();
    let mut low = CellMasses::new(alpha, power, n);
    let mut high = CellMasses::new(alpha, power + smoothness, n);
    let mut out = Vec::with_capacity(n);
    out.push(Matrix::zeros(r, c));
    for k in 1..n {
        let t = g.time(k);
        low.fill(k, t);
        high.fill(k, t);
        let mut acc = Matrix::zeros(r, c);
        for j in 0..k {
            let m0 = low.mass(j, k);
            let m1 = high.mass(j, k);
            acc += &g.values[j] * m0 + &slopes[j] * (m1 - nodes[j] * m0);
        }
        out.push(acc);
    }
    GridFunction::new(g.t0, g.dt, out)
}

/// Exact cell integrals of (t - s)^(alpha-1) s^exponent / Gamma(alpha) on the grid j/k.
struct CellMasses {
    alpha: f64,
    a: f64,
    scale: f64,
    front: f64,
    // I_{j/k}(a, alpha), or the complement I_{1-j/k}(alpha, a) past the midpoint
    cdf: Vec<f64>,
}

impl CellMasses {
    fn new(alpha: f64, exponent: f64, n: usize) -> Self {
        let a = exponent + 1.0;
        let scale = (ln_gamma(a) - ln_gamma(a + alpha)).exp();
        Self { alpha, a, scale, front: 0.0, cdf: vec![0.0; n] }
    }

    fn fill(&mut self, k: usize, t: f64) {
        let kf = k as f64;
        for (j, slot) in self.cdf.iter_mut().enumerate().take(k + 1) {
            let x = j as f64 / kf;
            *slot = if x <= 0.5 { beta_reg(self.a, self.alpha, x) } else { beta_reg(self.alpha, self.a, 1.0 - x) };
        }
        self.front = t.powf(self.alpha + self.a - 1.0) * self.scale;
    }

    fn mass(&self, j: usize, k: usize) -> f64 {
        let kf = k as f64;
        let x0 = j as f64 / kf;
        let x1 = (j + 1) as f64 / kf;
        let d = if x0 > 0.5 {
            self.cdf[j] - self.cdf[j + 1]
        } else if x1 <= 0.5 {
            self.cdf[j + 1] - self.cdf[j]
        } else {
            (1.0 - self.cdf[j + 1]) - self.cdf[j]
        };
        self.front * d
    }
}

/// Discrete D^alpha f = d/dt I^(1-alpha) f by forward differences; one sample shorter than `f`.
/// Accuracy requires `f` smoother than Hoelder-alpha.
pub fn frac_differentiate(alpha: f64, f: &GridFunction) -> Result<GridFunction> {
    check_order(alpha, false)?;
    if f.len() < 2 {
        return Err(Error::Grid("differentiation needs at least two samples".into()));
    }
    let integral = frac_integrate(1.0 - alpha, f)?;
    let out = integral
        .values
        .windows(2)
        .map(|w| (&w[1] - &w[0]) / f.dt)
        .collect();
    GridFunction::new(f.t0, f.dt, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::MlOperator;

    #[test]
    fn integral_of_constant_is_exact() {
        let dt = 1.0 / 64.0;
        let ones = GridFunction::from_scalars(0.0, dt, &[1.0; 65]).unwrap();
        let out = frac_integrate(0.6, &ones).unwrap();
        for (k, v) in out.scalars().iter().enumerate() {
            let t = k as f64 * dt;
            assert!((v - t.powf(0.6) / gamma(1.6)).abs() < 1e-13);
        }
    }

    #[test]
    fn semigroup_half_half() {
        let n = 1025;
        let dt = 1.0 / 1024.0;
        let ones = GridFunction::from_scalars(0.0, dt, &vec![1.0; n]).unwrap();
        let once = frac_integrate(0.5, &ones).unwrap();
        let twice = frac_integrate(0.5, &once).unwrap();
        // single-application error of I^{1/2} on the smooth function sqrt(t)-type output is O(dt)
        let single: f64 = {
            let g = GridFunction::sample(0.0, dt, n, |t| Matrix::from_element(1, 1, t)).unwrap();
            let out = frac_integrate(0.5, &g).unwrap();
            out.scalars()
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let t = k as f64 * dt;
                    (v - t.powf(1.5) / gamma(2.5)).abs()
                })
                .fold(0.0, f64::max)
        };
        let err = twice
            .scalars()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - k as f64 * dt).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2.0 * single.max(dt), "err {err} single {single}");
    }

    #[test]
    fn linear_and_nonnegative() {
        let dt = 0.01;
        let a = GridFunction::sample(0.0, dt, 50, |t| Matrix::from_element(1, 1, (3.0 * t).sin().abs())).unwrap();
        let b = GridFunction::sample(0.0, dt, 50, |t| Matrix::from_element(1, 1, t * t)).unwrap();
        let sum = GridFunction::new(0.0, dt, a.values.iter().zip(&b.values).map(|(x, y)| x * 2.0 + y).collect()).unwrap();
        let ia = frac_integrate(0.7, &a).unwrap().scalars();
        let ib = frac_integrate(0.7, &b).unwrap().scalars();
        let is = frac_integrate(0.7, &sum).unwrap().scalars();
        for k in 0..50 {
            assert!((is[k] - 2.0 * ia[k] - ib[k]).abs() < 1e-14);
            assert!(ia[k] >= 0.0);
        }
    }

    #[test]
    fn derivative_inverts_integral_of_constant() {
        let alpha = 0.6;
        let dt = 1.0 / 2048.0;
        let f = GridFunction::sample(0.0, dt, 2049, |t| Matrix::from_element(1, 1, t.powf(alpha) / gamma(1.0 + alpha)))
            .unwrap();
        let d = frac_differentiate(alpha, &f).unwrap();
        assert_eq!(d.len(), 2048);
        let tol = 5.0 * dt.powf(alpha.min(1.0 - alpha));
        // away from the origin, where the forward difference sees the t^alpha cusp
        for (k, v) in d.scalars().iter().enumerate().skip(64) {
            assert!((v - 1.0).abs() < tol, "k={k} v={v}");
        }
    }

    #[test]
    fn derivative_of_zero() {
        let z = GridFunction::from_scalars(0.0, 0.1, &[0.0; 10]).unwrap();
        assert!(frac_differentiate(0.4, &z).unwrap().scalars().iter().all(|v| *v == 0.0));
        let one = GridFunction::from_scalars(0.0, 0.1, &[1.0]).unwrap();
        assert!(frac_differentiate(0.4, &one).is_err());
    }

    #[test]
    fn derivative_inverts_integral_on_square() {
        let alpha = 0.6;
        let dt = 1.0 / 2048.0;
        let g = GridFunction::sample(0.0, dt, 2049, |t| Matrix::from_element(1, 1, t * t)).unwrap();
        let i = frac_integrate(alpha, &g).unwrap();
        let d = frac_differentiate(alpha, &i).unwrap();
        for (k, v) in d.scalars().iter().enumerate() {
            let t = k as f64 * dt;
            assert!((v - t * t).abs() < 5e-3, "k={k}");
        }
    }

    #[test]
    fn weighted_rule_is_exact_for_pure_powers() {
        let dt = 1.0 / 128.0;
        let ones = GridFunction::from_scalars(0.0, dt, &[1.0; 129]).unwrap();
        let p = -0.3;
        let out = frac_integrate_weighted(0.4, p, 1.0, &ones).unwrap();
        let c = gamma(p + 1.0) / gamma(p + 1.4);
        for (k, v) in out.scalars().iter().enumerate() {
            let t = k as f64 * dt;
            assert!((v - c * t.powf(p + 0.4)).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn weighted_rule_on_density_identity() {
        let alpha: f64 = 0.6;
        let lam = Matrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.5]);
        let op = MlOperator::new(&lam).unwrap();
        let n = 257;
        let dt = 1.0 / 256.0;
        let g = GridFunction::sample(0.0, dt, n, |t| &lam * op.ml(alpha, alpha, -t.powf(alpha)).unwrap()).unwrap();
        let out = frac_integrate_weighted(1.0 - alpha, alpha - 1.0, alpha, &g).unwrap();
        for k in 1..n {
            let t = k as f64 * dt;
            let target = &lam * (Matrix::identity(2, 2) - op.cumulative(alpha, t).unwrap());
            let err = crate::matalg::max_abs_diff(&out.values[k], &target);
            assert!(err < 5e-3, "k={k} err={err}");
        }
    }
}
