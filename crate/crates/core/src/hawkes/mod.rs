//! Exact simulation of the microscopic Hawkes model and the rescaled order-flow processes.

mod rescale;

pub use rescale::{ensemble_moments, increment_correlation, rescale, RescaledPaths, Statistic};

use crate::error::{Error, Result};
use crate::kernels::{profile, profile_cdf, profile_envelope, HawkesModel};
use crate::matalg::Vector;
pub use crate::stats::path_rng;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Abort once this many events have been accepted.
    pub max_events: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { max_events: 10_000_000 }
    }
}

/// Event times of every component on [0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    horizon: f64,
    events: Vec<Vec<f64>>,
}

impl EventLog {
    pub fn new(horizon: f64, events: Vec<Vec<f64>>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        if events.is_empty() {
            return Err(Error::Empty("components"));
        }
        for (c, times) in events.iter().enumerate() {
            if times.iter().any(|t| !(0.0..=horizon).contains(t)) {
                return Err(Error::Domain(format!("component {c} has a time outside [0, {horizon}]")));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Domain(format!("component {c} times are not strictly increasing")));
            }
        }
        Ok(Self { horizon, events })
    }

    pub fn dim(&self) -> usize {
        self.events.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self, component: usize) -> &[f64] {
        &self.events[component]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.events.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// N_t for every component, counting events at times <= t.
    pub fn counts_at(&self, t: f64) -> Vec<usize> {
        self.events.iter().map(|ts| ts.partition_point(|&s| s <= t)).collect()
    }

    /// All events as (time, component), ordered by time then component.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .events
            .iter()
            .enumerate()
            .flat_map(|(c, ts)| ts.iter().map(move |&t| (t, c)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    /// CSV with header `component,time`, rows sorted by time; components are 0-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "component,time")?;
        for (t, c) in self.merged() {
            writeln!(w, "{c},{t}")?;
        }
        Ok(())
    }

    fn from_unsorted(horizon: f64, dim: usize, raw: Vec<(f64, usize)>) -> Result<Self> {
        let mut events = vec![Vec::new(); dim];
        for (t, c) in raw {
            events[c].push(t);
        }
        for ts in &mut events {
            ts.sort_by(f64::total_cmp);
            // ties have probability zero but can appear after rounding
            ts.dedup();
        }
        Self::new(horizon, events)
    }
}

fn check_model(model: &HawkesModel) -> Result<()> {
    let rho = model.stability()?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    Ok(())
}

fn runaway(opts: &SimOptions, t: f64) -> Error {
    Error::Numerical(format!("event cap {} reached at time {t}", opts.max_events))
}

/// Thinning simulation of path 0 for the given seed.
pub fn simulate(model: &HawkesModel, seed: u64) -> Result<EventLog> {
    simulate_path(model, seed, 0, &SimOptions::default())
}

/// Ogata thinning. Each past event on component j bounds its future contribution to the total
/// intensity by colsum_j * alpha * max(lag, 1)^-(alpha+1), which is non-increasing in the
/// candidate time, so a bound computed at t stays valid for every later candidate. The bound
/// is recomputed after two consecutive rejections and bumped by colsum_j * alpha on acceptance.
pub fn simulate_path(model: &HawkesModel, seed: u64, path: u64, opts: &SimOptions) -> Result<EventLog> {
    check_model(model)?;
    let mut rng = path_rng(seed, path);
    let dim = model.dim();
    let alpha = model.alpha;
    let horizon = model.horizon;
    let g = &model.amplitude;
    let colsum: Vec<f64> = (0..dim).map(|j| g.column(j).sum()).collect();
    let mu_total = model.baseline.sum();

    let mut history: Vec<(f64, usize)> = Vec::new();
    let mut t = 0.0;
    let mut bound = mu_total;
    let mut rejections = 0;
    let mut excitation = Vector::zeros(dim);
    loop {
        if bound <= 0.0 {
            break;
        }
        let s = t + Exp::new(bound).map_err(|e| Error::Numerical(e.to_string()))?.sample(&mut rng);
        if s > horizon {
            break;
        }
        excitation.fill(0.0);
        for &(ti, j) in &history {
            excitation[j] += profile(alpha, s - ti);
        }
        let lam = &model.baseline + g * &excitation;
        let total = lam.sum();
        debug_assert!(total <= bound * (1.0 + 1e-9), "bound {bound} below intensity {total}");
        t = s;
        if rng.random::<f64>() * bound <= total {
            let mut pick = rng.random::<f64>() * total;
            let mut comp = dim - 1;
            for (i, &l) in lam.iter().enumerate() {
                if pick < l {
                    comp = i;
                    break;
                }
                pick -= l;
            }
            history.push((s, comp));
            if history.len() > opts.max_events {
                return Err(runaway(opts, s));
            }
            bound += colsum[comp] * alpha;
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= 2 {
                bound = mu_total
                    + history.iter().map(|&(ti, j)| colsum[j] * profile_envelope(alpha, s - ti)).sum::<f64>();
                rejections = 0;
            }
        }
    }
    EventLog::from_unsorted(horizon, dim, history)
}

/// Cluster (branching) simulation: immigrants arrive at the baseline rates and every event on
/// component j spawns Poisson(G_ij) children on component i at Pareto lags U^(-1/alpha).
/// Same law as thinning, linear cost in the number of events.
pub fn simulate_branching(model: &HawkesModel, seed: u64, path: u64, opts: &SimOptions) -> Result<EventLog> {
    check_model(model)?;
    let mut rng = path_rng(seed, path);
    let dim = model.dim();
    let horizon = model.horizon;
    let inv_alpha = -1.0 / model.alpha;
    let offspring: Vec<Vec<Option<Poisson<f64>>>> = (0..dim)
        .map(|j| (0..dim).map(|i| Poisson::new(model.amplitude[(i, j)]).ok()).collect())
        .collect();
    let mut queue: Vec<(f64, usize)> = Vec::new();
    for i in 0..dim {
        if let Ok(p) = Poisson::new(model.baseline[i] * horizon) {
            let n = p.sample(&mut rng) as usize;
            for _ in 0..n {
                queue.push((rng.random::<f64>() * horizon, i));
            }
        }
    }
    let mut out = Vec::with_capacity(queue.len());
    while let Some((t, j)) = queue.pop() {
        out.push((t, j));
        if out.len() > opts.max_events {
            return Err(runaway(opts, t));
        }
        for (i, dist) in offspring[j].iter().enumerate() {
            let Some(dist) = dist else { continue };
            let n = dist.sample(&mut rng) as usize;
            for _ in 0..n {
                let u: f64 = 1.0 - rng.random::<f64>();
                let child = t + u.powf(inv_alpha);
                if child <= horizon {
                    queue.push((child, i));
                }
            }
        }
    }
    EventLog::from_unsorted(horizon, dim, out)
}

fn check_time(model: &HawkesModel, log: &EventLog, t: f64) -> Result<()> {
    if log.dim() != model.dim() {
        return Err(Error::param("log", format!("dimension {} does not match model {}", log.dim(), model.dim())));
    }
    if !(0.0..=log.horizon()).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", log.horizon())));
    }
    Ok(())
}

/// Intensity at time t from the events strictly before t.
pub fn intensity_at(model: &HawkesModel, log: &EventLog, t: f64) -> Result<Vector> {
    check_time(model, log, t)?;
    let mut excitation = Vector::zeros(model.dim());
    for (j, ts) in log.events.iter().enumerate() {
        for &s in ts.iter().take_while(|&&s| s < t) {
            excitation[j] += profile(model.alpha, t - s);
        }
    }
    Ok(&model.baseline + &model.amplitude * excitation)
}

/// Integrated intensity over [0, t], exact through the closed-form profile CDF.
pub fn compensator(model: &HawkesModel, log: &EventLog, t: f64) -> Result<Vector> {
    check_time(model, log, t)?;
    let mut mass = Vector::zeros(model.dim());
    for (j, ts) in log.events.iter().enumerate() {
        for &s in ts.iter().take_while(|&&s| s < t) {
            mass[j] += profile_cdf(model.alpha, t - s);
        }
    }
    Ok(&model.baseline * t + &model.amplitude * mass)
}

/// Increments of each component's compensator between its consecutive events, pooled over
/// components. For an exact sample these are i.i.d. unit exponentials.
pub fn rescaled_interarrivals(model: &HawkesModel, log: &EventLog) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(log.total());
    let mut previous = Vector::zeros(model.dim());
    for (t, c) in log.merged() {
        let now = compensator(model, log, t)?;
        out.push(now[c] - previous[c]);
        previous[c] = now[c];
    }
    Ok(out)
}
