//! Order flow on the macroscopic time scale and ensemble statistics.

use super::EventLog;
use crate::error::{Error, Result};
use crate::kernels::{profile_cdf, HawkesModel};
use crate::matalg::{Matrix, Vector};
use crate::stats::{correlation, Estimate};
use std::io::{self, Write};

/// Rescaled processes on the grid t_k = k / (n - 1) of [0, 1]:
/// X = T^-2a N_{tT}, Y = T^-2a (integrated intensity), Z = T^a (X - Y), P^i = X^{i+} - X^{i-}.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledPaths {
    pub horizon: f64,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
    pub z: Vec<Vector>,
    pub p: Vec<Vector>,
}

impl RescaledPaths {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_x(&self) -> &Vector {
        self.x.last().expect("grid has at least two points")
    }

    /// T^a P, the price on the scale where it has a nondegenerate limit.
    pub fn price_limit_scale(&self, k: usize) -> Vector {
        &self.p[k] * self.horizon.powf(self.alpha)
    }

    pub fn terminal_price_limit_scale(&self) -> Vector {
        self.price_limit_scale(self.len() - 1)
    }

    /// CSV with header `t,X_1..X_2m,Z_1..Z_2m,P_1..P_m`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.x[0].len();
        let m = self.p[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("X_{i}")));
        header.extend((1..=dim).map(|i| format!("Z_{i}")));
        header.extend((1..=m).map(|i| format!("P_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.x[k].iter().map(f64::to_string));
            row.extend(self.z[k].iter().map(f64::to_string));
            row.extend(self.p[k].iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn rescale(model: &HawkesModel, log: &EventLog, grid_points: usize) -> Result<RescaledPaths> {
    if grid_points < 2 {
        return Err(Error::Grid(format!("need at least 2 grid points, got {grid_points}")));
    }
    let dim = model.dim();
    if log.dim() != dim || dim % 2 != 0 {
        return Err(Error::param("log", "dimension must match the model and be even"));
    }
    let horizon = log.horizon();
    let alpha = model.alpha;
    let count_scale = horizon.powf(-2.0 * alpha);
    let fluct_scale = horizon.powf(alpha);
    let merged = log.merged();
    let times: Vec<f64> = (0..grid_points).map(|k| k as f64 / (grid_points - 1) as f64).collect();
    let (mut xs, mut ys, mut zs, mut ps) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut mass = Vector::zeros(dim);
    for &t in &times {
        let u = t * horizon;
        let counts = Vector::from_iterator(dim, log.counts_at(u).into_iter().map(|c| c as f64));
        mass.fill(0.0);
        for &(s, j) in merged.iter().take_while(|e| e.0 < u) {
            mass[j] += profile_cdf(alpha, u - s);
        }
        let integrated = &model.baseline * u + &model.amplitude * &mass;
        let x = counts * count_scale;
        let y = integrated * count_scale;
        let z = (&x - &y) * fluct_scale;
        let p = Vector::from_fn(dim / 2, |i, _| x[2 * i] - x[2 * i + 1]);
        xs.push(x);
        ys.push(y);
        zs.push(z);
        ps.push(p);
    }
    Ok(RescaledPaths { horizon, alpha, times, x: xs, y: ys, z: zs, p: ps })
}

/// Ensemble statistics of rescaled paths. Price statistics use the limit-scale price T^a P.
/// Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    TerminalPriceSecondMoment(usize),
    TerminalPriceCrossMoment(usize, usize),
    TerminalPriceCorrelation(usize, usize),
    MeanX(usize),
    MeanZ(usize),
}

impl Statistic {
    /// Parses `p2:i`, `pp:i:j`, `corr:i:j`, `x:k`, `z:k` with 1-based indices.
    pub fn parse(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split(':').collect();
        let idx = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::param("statistic", format!("bad index {s:?} in {name:?}"))),
            }
        };
        match parts.as_slice() {
            ["p2", i] => Ok(Self::TerminalPriceSecondMoment(idx(i)?)),
            ["pp", i, j] => Ok(Self::TerminalPriceCrossMoment(idx(i)?, idx(j)?)),
            ["corr", i, j] => Ok(Self::TerminalPriceCorrelation(idx(i)?, idx(j)?)),
            ["x", k] => Ok(Self::MeanX(idx(k)?)),
            ["z", k] => Ok(Self::MeanZ(idx(k)?)),
            _ => Err(Error::param("statistic", format!("unknown statistic {name:?}"))),
        }
    }
}

fn check_ensemble(paths: &[RescaledPaths]) -> Result<()> {
    if paths.len() < 2 {
        return Err(Error::param("paths", format!("need at least 2, got {}", paths.len())));
    }
    let first = &paths[0];
    if paths.iter().any(|p| p.times != first.times || p.horizon != first.horizon) {
        return Err(Error::Grid("paths are on different grids or horizons".into()));
    }
    Ok(())
}

pub fn ensemble_moments(paths: &[RescaledPaths], stat: Statistic) -> Result<Estimate> {
    check_ensemble(paths)?;
    let dim = paths[0].x[0].len();
    let m = dim / 2;
    let check = |i: usize, n: usize| {
        if i < n {
            Ok(())
        } else {
            Err(Error::param("statistic", format!("index {} out of range 1..={n}", i + 1)))
        }
    };
    let terminal: Vec<Vector> = paths.iter().map(RescaledPaths::terminal_price_limit_scale).collect();
    match stat {
        Statistic::TerminalPriceSecondMoment(i) => {
            check(i, m)?;
            Estimate::from_samples(&terminal.iter().map(|p| p[i] * p[i]).collect::<Vec<_>>())
        }
        Statistic::TerminalPriceCrossMoment(i, j) => {
            check(i, m)?;
            check(j, m)?;
            Estimate::from_samples(&terminal.iter().map(|p| p[i] * p[j]).collect::<Vec<_>>())
        }
        Statistic::TerminalPriceCorrelation(i, j) => {
            check(i, m)?;
            check(j, m)?;
            let a: Vec<f64> = terminal.iter().map(|p| p[i]).collect();
            let b: Vec<f64> = terminal.iter().map(|p| p[j]).collect();
            let r = correlation(&a, &b)?;
            let n = a.len() as f64;
            Ok(Estimate { mean: r, se: (1.0 - r * r) / (n - 1.0).sqrt(), n: a.len() })
        }
        Statistic::MeanX(k) => {
            check(k, dim)?;
            Estimate::from_samples(&paths.iter().map(|p| p.terminal_x()[k]).collect::<Vec<_>>())
        }
        Statistic::MeanZ(k) => {
            check(k, dim)?;
            Estimate::from_samples(&paths.iter().map(|p| p.z[p.len() - 1][k]).collect::<Vec<_>>())
        }
    }
}

/// Correlation matrix of limit-scale price increments pooled over paths and grid steps.
pub fn increment_correlation(paths: &[RescaledPaths]) -> Result<Matrix> {
    check_ensemble(paths)?;
    let m = paths[0].p[0].len();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); m];
    for path in paths {
        for k in 1..path.len() {
            let d = path.price_limit_scale(k) - path.price_limit_scale(k - 1);
            for i in 0..m {
                series[i].push(d[i]);
            }
        }
    }
    let mut c = Matrix::identity(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let r = correlation(&series[i], &series[j])?;
            c[(i, j)] = r;
            c[(j, i)] = r;
        }
    }
    Ok(c)
}
