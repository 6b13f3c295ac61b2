//! The macroscopic rough-volatility model: Euler scheme for the stochastic Volterra variance
//! equation and the price it drives, Mittag-Leffler moment formulas and a roughness estimator.

use crate::error::{Error, Result};
use crate::kernels::{price_projection, LimitModel, TwoAssetParams};
use crate::matalg::{eigenvalues, MlOperator, Matrix, Vector};
use crate::stats::path_rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeVariancePolicy {
    /// Negative iterates enter the square root as zero; the drift keeps the raw value.
    #[default]
    Truncate,
}

#[derive(Debug, Clone)]
pub struct MacroConfig {
    pub limit: LimitModel,
    pub grid_points: usize,
    pub paths: usize,
    pub seed: u64,
    pub policy: NegativeVariancePolicy,
}

impl MacroConfig {
    pub fn new(limit: LimitModel, grid_points: usize, paths: usize, seed: u64) -> Result<Self> {
        if grid_points < 8 {
            return Err(Error::param("grid_points", format!("need at least 8, got {grid_points}")));
        }
        if paths == 0 {
            return Err(Error::param("paths", "need at least one path"));
        }
        let ev = eigenvalues(&limit.lambda)?;
        if ev.iter().any(|(re, _)| *re <= 0.0) {
            return Err(Error::param("limit", format!("Lambda must have a positive spectrum, got {ev:?}")));
        }
        Ok(Self { limit, grid_points, paths, seed, policy: NegativeVariancePolicy::Truncate })
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.grid_points - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.grid_points).map(|k| k as f64 * self.dt()).collect()
    }
}

/// One simulated path on the grid k / (n - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPath {
    pub times: Vec<f64>,
    /// Reduced variance factors, length n_c.
    pub vtilde: Vec<Vector>,
    /// Component variances Theta Vtilde after the negative-variance policy, length 2m.
    pub v: Vec<Vector>,
    /// Prices, length m.
    pub p: Vec<Vector>,
    /// Brownian increments on each cell, length 2m; replaying them reproduces the path.
    pub noise: Vec<Vector>,
    pub policy: NegativeVariancePolicy,
}

impl MacroPath {
    pub fn terminal_price(&self) -> &Vector {
        self.p.last().expect("grid has at least 8 points")
    }

    /// Long-format CSV `t,V_1..V_2m,P_1..P_m`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.v[0].len();
        let m = self.p[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("V_{i}")));
        header.extend((1..=m).map(|i| format!("P_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.v[k].iter().map(f64::to_string));
            row.extend(self.p[k].iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Cell averages of (t - s)^(alpha - 1): entry n - 1 is the weight of the cell n steps back.
fn cell_weights(alpha: f64, dt: f64, n: usize) -> Vec<f64> {
    let scale = dt.powf(alpha - 1.0) / alpha;
    (1..=n).map(|j| scale * ((j as f64).powf(alpha) - ((j - 1) as f64).powf(alpha))).collect()
}

/// Matrices of the scheme that do not change between paths.
struct Scheme {
    weights: Vec<f64>,
    drive: Matrix,
    theta: Matrix,
    theta0: Vector,
    mix_in: Matrix,
    price: Matrix,
    drift: Vector,
    n_c: usize,
    dim: usize,
}

impl Scheme {
    fn new(cfg: &MacroConfig) -> Self {
        let lm = &cfg.limit;
        let dim = lm.dim();
        let n_c = lm.n_c;
        // [O^-1_11 | O^-1_12] maps the 2m noise coordinates onto the n_c factors
        let mix_in = lm.basis_inv.view((0, 0), (n_c, dim)).into_owned();
        let price = lm.price_mixing() * price_projection(lm.m_assets).transpose();
        let drift = &price * &lm.mu;
        Self {
            weights: cell_weights(lm.alpha, cfg.dt(), cfg.grid_points),
            drive: &lm.lambda / gamma(lm.alpha),
            theta: lm.theta(),
            theta0: lm.theta0.clone(),
            mix_in,
            price,
            drift,
            n_c,
            dim,
        }
    }

    fn run(&self, cfg: &MacroConfig, noise: Vec<Vector>) -> Result<MacroPath> {
        let n = cfg.grid_points;
        let dt = cfg.dt();
        let times = cfg.times();
        let mut vtilde = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        // h_j = (theta0 - Vtilde_j) dt + O^-1 [diag sqrt(V_j+) dB_j], the per-cell increment
        let mut increments: Vec<Vector> = Vec::with_capacity(n);
        let mut price = Vector::zeros(self.price.nrows());
        for k in 0..n {
            let mut acc = Vector::zeros(self.n_c);
            for (j, h) in increments.iter().enumerate() {
                acc.axpy(self.weights[k - 1 - j], h, 1.0);
            }
            let vt = &self.drive * acc;
            if vt.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("non-finite variance at step {k} (t = {})", times[k])));
            }
            let raw = &self.theta * &vt;
            let vol = raw.map(|x| x.max(0.0).sqrt());
            if k + 1 < n {
                let db = &noise[k];
                let shocked = vol.component_mul(db);
                increments.push((&self.theta0 - &vt) * dt + &self.mix_in * &shocked);
                p.push(price.clone());
                price += &self.price * shocked + &self.drift * dt;
            } else {
                p.push(price.clone());
            }
            v.push(raw.map(|x| x.max(0.0)));
            vtilde.push(vt);
        }
        Ok(MacroPath { times, vtilde, v, p, noise, policy: cfg.policy })
    }

    fn draw_noise(&self, cfg: &MacroConfig, path: u64) -> Vec<Vector> {
        let mut rng = path_rng(cfg.seed, path);
        let sd = cfg.dt().sqrt();
        (0..cfg.grid_points - 1)
            .map(|_| Vector::from_fn(self.dim, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            }))
            .collect()
    }
}

/// Simulates path 0 of the configuration.
pub fn simulate_limit(cfg: &MacroConfig) -> Result<MacroPath> {
    simulate_limit_path(cfg, 0)
}

pub fn simulate_limit_path(cfg: &MacroConfig, path: u64) -> Result<MacroPath> {
    let scheme = Scheme::new(cfg);
    let noise = scheme.draw_noise(cfg, path);
    scheme.run(cfg, noise)
}

/// Re-runs the scheme on recorded Brownian increments.
pub fn replay(cfg: &MacroConfig, noise: Vec<Vector>) -> Result<MacroPath> {
    if noise.len() + 1 != cfg.grid_points || noise.iter().any(|b| b.len() != cfg.limit.dim()) {
        return Err(Error::Grid("noise record does not match the configuration".into()));
    }
    Scheme::new(cfg).run(cfg, noise)
}

/// Simulates every path of the configuration in parallel and reduces each one with `f`.
/// Results are in path order and do not depend on scheduling.
pub fn simulate_ensemble<T, F>(cfg: &MacroConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(MacroPath) -> T + Sync,
{
    let scheme = Scheme::new(cfg);
    (0..cfg.paths as u64)
        .into_par_iter()
        .map(|path| scheme.run(cfg, scheme.draw_noise(cfg, path)).map(&f))
        .collect()
}

fn reduced_baseline(limit: &LimitModel, mu: &Vector) -> Result<Vector> {
    if mu.len() != limit.dim() {
        return Err(Error::param("mu", format!("length {} does not match dimension {}", mu.len(), limit.dim())));
    }
    Ok((&limit.basis_inv * mu).rows(0, limit.n_c).into_owned())
}

/// E[V_t] = Theta F(t) theta0 with F(t) = I - E_{alpha,1}(-Lambda t^alpha), for a constant
/// baseline `mu` in the original coordinates.
pub fn expected_variance(limit: &LimitModel, mu: &Vector, times: &[f64]) -> Result<Vec<Vector>> {
    let theta0 = reduced_baseline(limit, mu)?;
    let op = MlOperator::new(&limit.lambda)?;
    let theta = limit.theta();
    times.iter().map(|&t| Ok(&theta * (op.cumulative(limit.alpha, t)? * &theta0))).collect()
}

/// Integral of E[V] over [0, t].
pub fn integrated_expected_variance(limit: &LimitModel, mu: &Vector, t: f64) -> Result<Vector> {
    let theta0 = reduced_baseline(limit, mu)?;
    let op = MlOperator::new(&limit.lambda)?;
    Ok(limit.theta() * (op.cumulative_integral(limit.alpha, t)? * theta0))
}

/// E[P_t P_t^T] by the Ito isometry: Pi Q^T diag(int E[V]) Q Pi^T plus the squared drift,
/// with Pi = I + Delta.
pub fn expected_price_square(limit: &LimitModel, t: f64) -> Result<Matrix> {
    let iv = integrated_expected_variance(limit, &limit.mu, t)?;
    let load = limit.price_mixing() * price_projection(limit.m_assets).transpose();
    let drift = &load * &limit.mu * t;
    Ok(&load * Matrix::from_diagonal(&iv) * load.transpose() + &drift * drift.transpose())
}

/// Two-asset second moments written out by hand: with den = 4 g1 g2 - d12 d21 and
/// P = (1/den) [[2 g2, d21], [d12, 2 g1]] applied to the net flow of each asset,
/// E[(P1)^2] = 2 (4 g2^2 IV1 + d21^2 IV2) / den^2 and similarly for the other entries.
pub fn two_asset_price_square(p: &TwoAssetParams, limit: &LimitModel, t: f64) -> Result<Matrix> {
    p.validate()?;
    if limit.m_assets != 2 {
        return Err(Error::param("limit", "expects a two-asset limit model"));
    }
    let iv = integrated_expected_variance(limit, &limit.mu, t)?;
    let (iv1, iv2) = (iv[0], iv[2]);
    let (g1, g2, d12, d21) = (p.gamma1, p.gamma2, p.d12(), p.d21());
    let den = 4.0 * g1 * g2 - d12 * d21;
    let s = 2.0 / (den * den);
    let p11 = s * (4.0 * g2 * g2 * iv1 + d21 * d21 * iv2);
    let p22 = s * (d12 * d12 * iv1 + 4.0 * g1 * g1 * iv2);
    let p12 = s * (2.0 * g2 * d12 * iv1 + 2.0 * g1 * d21 * iv2);
    Ok(Matrix::from_row_slice(2, 2, &[p11, p12, p12, p22]))
}

/// Roughness estimate: half the slope of log E|x_{k+l} - x_k|^2 against log l.
pub fn hurst_estimate(path: &[f64], lags: &[usize]) -> Result<f64> {
    if path.len() < 256 {
        return Err(Error::param("path", format!("need at least 256 samples, got {}", path.len())));
    }
    if lags.len() < 3 {
        return Err(Error::param("lags", "need at least 3 lags"));
    }
    let mut pts = Vec::with_capacity(lags.len());
    for &l in lags {
        if l == 0 || l >= path.len() / 2 {
            return Err(Error::param("lags", format!("lag {l} out of range")));
        }
        let n = path.len() - l;
        let s = (0..n).map(|k| (path[k + l] - path[k]).powi(2)).sum::<f64>() / n as f64;
        if s == 0.0 {
            return Err(Error::Domain("path has no variation at some lag; estimate undefined".into()));
        }
        pts.push(((l as f64).ln(), s.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx / 2.0)
}

/// Default lags for `hurst_estimate`: 1, 2, 4, ... up to 32 steps.
pub const DEFAULT_LAGS: [usize; 6] = [1, 2, 4, 8, 16, 32];
