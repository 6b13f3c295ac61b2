//! The five subcommands. Each validates everything it needs before writing anything and
//! returns `Some(reason)` when the run finished but its checked claim failed.

use crate::artifacts::{csv, Artifacts};
use crate::config::{ExperimentConfig, ModelConfig, Simulator};
use crate::error::{CliError, Result};
use rayon::prelude::*;
use roughhawkes::hawkes::{ensemble_moments, rescale, simulate_branching, simulate_path, EventLog, SimOptions};
use roughhawkes::kernels::{
    check_assumptions_with, extract_limit_model, price_projection, HawkesModel, LimitModel, ModelFamily, PresetKind,
    DEFAULT_PROBES,
};
use roughhawkes::spectrum::{
    eigen_spectrum, ideal_sigma_eigenvalues, price_margin, sigma_matrix, SectorLimit, SectorLimitParams, SpectrumReport,
};
use roughhawkes::stats::Estimate;
use roughhawkes::volterra::{
    expected_price_square, expected_variance, integrated_expected_variance, simulate_ensemble, simulate_limit_path,
    two_asset_price_square, MacroConfig,
};
use serde::Serialize;

pub type Outcome = Result<Option<String>>;

/// Radius of the non-critical price block above which a check prints a near-critical warning.
const NEAR_CRITICAL: f64 = 0.99;
/// Same for sector models, on the smallest idealized price eigenvalue over 2 gamma.
const NEAR_CRITICAL_MARGIN: f64 = 0.05;

fn sim_options(cfg: &ExperimentConfig) -> SimOptions {
    SimOptions { max_events: cfg.max_events.unwrap_or(SimOptions::default().max_events) }
}

fn simulate(cfg: &ExperimentConfig, model: &HawkesModel, seed: u64, path: u64) -> Result<EventLog> {
    let opts = sim_options(cfg);
    Ok(match cfg.simulator {
        Simulator::Thinning => simulate_path(model, seed, path, &opts)?,
        Simulator::Branching => simulate_branching(model, seed, path, &opts)?,
    })
}

fn limit_model(family: &ModelFamily) -> Result<LimitModel> {
    Ok(extract_limit_model(family, &family.basis, family.n_c)?)
}

#[derive(Serialize)]
struct CheckDocument<'a> {
    passed: bool,
    near_critical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    sector_price_margin: Option<f64>,
    #[serde(flatten)]
    report: &'a roughhawkes::kernels::AssumptionReport,
}

pub fn check(cfg: &ExperimentConfig, out: &mut Artifacts) -> Outcome {
    let family = cfg.family()?;
    let probes: &[f64] = if cfg.t_list.is_empty() { &DEFAULT_PROBES } else { cfg.horizons()? };
    let report = check_assumptions_with(&family, &family.basis, family.n_c, probes, &cfg.check_tolerances())?;
    let mut near_critical = report.c_spectral_radius > NEAR_CRITICAL;
    if near_critical {
        eprintln!(
            "warning: near-critical price block, spectral radius of C = {:.9}",
            report.c_spectral_radius
        );
    }
    let margin = match &cfg.model {
        Some(ModelConfig::Sector(p)) => Some(price_margin(&SectorLimitParams::from(p))?),
        _ => None,
    };
    if let Some(m) = margin.filter(|&m| m < NEAR_CRITICAL_MARGIN) {
        near_critical = true;
        eprintln!("warning: near-critical sector loading, smallest price eigenvalue is {m:.3e} of 2 gamma");
    }
    out.write_json("assumptions.json", &CheckDocument { passed: report.passed(), near_critical, sector_price_margin: margin, report: &report })?;
    if report.passed() {
        Ok(None)
    } else {
        let names: Vec<&str> = report.violated.iter().map(|v| v.name.as_str()).collect();
        Ok(Some(format!("violated assumptions: {}", names.join(", "))))
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

pub fn sim_micro(cfg: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Outcome {
    let family = cfg.family()?;
    let horizons = cfg.horizons()?.to_vec();
    cfg.check_sizes()?;
    let stats = cfg.statistics(&["x:1", "z:1", "p2:1"], family.m_assets)?;
    let models: Vec<HawkesModel> = horizons.iter().map(|&t| family.at(t)).collect::<roughhawkes::Result<_>>()?;
    let mut rows = Vec::new();
    for (model, horizon) in models.iter().zip(&horizons) {
        let logs: Vec<EventLog> = (0..cfg.paths as u64)
            .into_par_iter()
            .map(|p| simulate(cfg, model, seed, p))
            .collect::<Result<_>>()?;
        for (p, log) in logs.iter().enumerate().take(cfg.keep_paths) {
            out.write(&format!("micro/T{horizon}/events_{p}.csv"), |w| log.write_csv(w))?;
            let paths = rescale(model, log, cfg.grid_points)?;
            out.write(&format!("micro/T{horizon}/rescaled_{p}.csv"), |w| paths.write_csv(w))?;
        }
        if logs.len() < 2 {
            continue;
        }
        let terminal = logs.par_iter().map(|log| rescale(model, log, 2)).collect::<roughhawkes::Result<Vec<_>>>()?;
        for (name, stat) in &stats {
            let est = ensemble_moments(&terminal, *stat)?;
            rows.push(vec![fmt(*horizon), name.clone(), fmt(est.mean), fmt(est.se), est.n.to_string()]);
        }
    }
    if !rows.is_empty() {
        out.write("moments.csv", |w| csv(w, &["T", "statistic", "value", "SE", "n"], &rows))?;
    }
    Ok(None)
}

/// Grid indices closest to t = 0.2, 0.4, ..., 1.
fn summary_indices(grid_points: usize) -> Vec<usize> {
    (1..=5).map(|k| ((k as f64 / 5.0) * (grid_points - 1) as f64).round() as usize).collect()
}

pub fn sim_macro(cfg: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Outcome {
    let family = cfg.family()?;
    cfg.check_sizes()?;
    let lm = limit_model(&family)?;
    let mc = MacroConfig::new(lm.clone(), cfg.grid_points, cfg.paths, seed)?;
    out.write_json("limit_model.json", &lm)?;
    for p in 0..cfg.keep_paths.min(cfg.paths) {
        let path = simulate_limit_path(&mc, p as u64)?;
        out.write(&format!("macro/path_{p}.csv"), |w| path.write_csv(w))?;
    }
    let idx = summary_indices(cfg.grid_points);
    let times: Vec<f64> = idx.iter().map(|&k| mc.times()[k]).collect();
    let theta = lm.theta();
    let samples = simulate_ensemble(&mc, |path| {
        let v: Vec<_> = idx.iter().map(|&k| &theta * &path.vtilde[k]).collect();
        (v, path.terminal_price().clone())
    })?;
    if samples.len() < 2 {
        return Ok(None);
    }
    let oracle = expected_variance(&lm, &lm.mu, &times)?;
    let mut rows = Vec::new();
    for (ti, t) in times.iter().enumerate() {
        for c in 0..lm.dim() {
            let est = Estimate::from_samples(&samples.iter().map(|s| s.0[ti][c]).collect::<Vec<_>>())?;
            let target = oracle[ti][c];
            let z = if est.se > 0.0 { (est.mean - target) / est.se } else { 0.0 };
            rows.push(vec![fmt(*t), (c + 1).to_string(), fmt(est.mean), fmt(est.se), fmt(target), fmt(z)]);
        }
    }
    out.write("variance_summary.csv", |w| csv(w, &["t", "component", "mc_mean", "SE", "oracle", "z"], &rows))?;

    let closed = expected_price_square(&lm, 1.0)?;
    let by_hand = match (&family.preset, &cfg.model) {
        (Some(PresetKind::TwoAsset), Some(crate::config::ModelConfig::TwoAsset(p))) => {
            let mut p = *p;
            p.alpha = lm.alpha;
            Some(two_asset_price_square(&p, &lm, 1.0)?)
        }
        _ => None,
    };
    let drift = lm.price_mixing() * price_projection(lm.m_assets).transpose() * &lm.mu;
    let mut header = vec!["i", "j", "mc", "SE", "closed_form"];
    if by_hand.is_some() {
        header.push("two_asset_formula");
    }
    let mut rows = Vec::new();
    for i in 0..lm.m_assets {
        for j in i..lm.m_assets {
            let est = Estimate::from_samples(&samples.iter().map(|s| s.1[i] * s.1[j]).collect::<Vec<_>>())?;
            let mut row = vec![(i + 1).to_string(), (j + 1).to_string(), fmt(est.mean), fmt(est.se), fmt(closed[(i, j)])];
            if let Some(h) = &by_hand {
                // the hand formula has no drift term
                row.push(fmt(h[(i, j)] + drift[i] * drift[j]));
            }
            rows.push(row);
        }
    }
    out.write("price_moments.csv", |w| csv(w, &header, &rows))?;
    Ok(None)
}

pub fn converge(cfg: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Outcome {
    let family = cfg.family()?;
    let horizons = cfg.horizons()?.to_vec();
    cfg.check_sizes()?;
    if cfg.paths < 2 {
        return Err(CliError::Config("`paths` must be at least 2 for standard errors".into()));
    }
    let lm = limit_model(&family)?;
    let target = integrated_expected_variance(&lm, &lm.mu, 1.0)?;
    let models: Vec<HawkesModel> = horizons.iter().map(|&t| family.at(t)).collect::<roughhawkes::Result<_>>()?;
    let dim = family.dim();
    let mut rows = Vec::new();
    let mut errors = vec![Vec::new(); dim];
    for (model, horizon) in models.iter().zip(&horizons) {
        let scale = horizon.powf(-2.0 * lm.alpha);
        let counts: Vec<Vec<usize>> = (0..cfg.paths as u64)
            .into_par_iter()
            .map(|p| simulate(cfg, model, seed, p).map(|log| log.counts()))
            .collect::<Result<_>>()?;
        for k in 0..dim {
            let est = Estimate::from_samples(&counts.iter().map(|c| c[k] as f64 * scale).collect::<Vec<_>>())?;
            let err = (est.mean - target[k]).abs();
            errors[k].push(err);
            rows.push(vec![fmt(*horizon), format!("x:{}", k + 1), fmt(est.mean), fmt(est.se), fmt(target[k]), fmt(err)]);
        }
    }
    out.write("convergence.csv", |w| csv(w, &["T", "statistic", "value", "SE", "macro_oracle", "abs_error"], &rows))?;
    let broken: Vec<String> =
        (0..dim).filter(|&k| errors[k].windows(2).any(|w| w[1] >= w[0])).map(|k| format!("x:{}", k + 1)).collect();
    if broken.is_empty() {
        Ok(None)
    } else {
        Ok(Some(format!("abs_error is not decreasing in T for {}", broken.join(", "))))
    }
}

#[derive(Serialize)]
struct SpectrumDocument {
    m: usize,
    sectors: usize,
    idealized: SpectrumReport,
    finite_m: SpectrumReport,
    rank_reduced_eigenvalues: Vec<f64>,
    /// Components of the idealized market eigenvector, sign fixed to a positive sum.
    market_vector: Vec<f64>,
    epsilon_sigma_radius: f64,
    epsilon_v_radius: f64,
    price_load: f64,
    variance_load: f64,
}

pub fn spectrum(cfg: &ExperimentConfig, out: &mut Artifacts) -> Outcome {
    let params = cfg.spectrum.clone().ok_or_else(|| CliError::Config("missing `spectrum` section".into()))?;
    let limit = SectorLimit::new(params.clone())?;
    let r = params.r();
    let idealized = eigen_spectrum(&sigma_matrix(&params, false)?, r)?;
    let finite_m = eigen_spectrum(&limit.sigma, r)?;
    let reduced = ideal_sigma_eigenvalues(&params)?;
    let rows: Vec<Vec<String>> = (0..params.m())
        .map(|k| {
            vec![(k + 1).to_string(), fmt(idealized.eigenvalues[k]), fmt(finite_m.eigenvalues[k]), fmt(reduced[k])]
        })
        .collect();
    let doc = SpectrumDocument {
        m: params.m(),
        sectors: r,
        market_vector: idealized.market_vector.iter().copied().collect(),
        idealized,
        finite_m,
        rank_reduced_eigenvalues: reduced,
        epsilon_sigma_radius: limit.epsilon_sigma_radius,
        epsilon_v_radius: limit.epsilon_v_radius,
        price_load: params.load(params.lambda_minus, &params.lambda_minus_r),
        variance_load: params.load(params.lambda_plus, &params.lambda_plus_r),
    };
    out.write_json("spectrum.json", &doc)?;
    out.write("eigenvalues.csv", |w| csv(w, &["index", "idealized", "finite_m", "rank_reduced"], &rows))?;
    Ok(None)
}
