//! Replication loop and per-column summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SamplerSettings};
use crate::error::{Error, Result};
use crate::estimator::estimate_beta;
use crate::geometry::{PointPattern, Window};
use crate::models::GibbsModel;
use crate::range::estimate_with_range;
use crate::rng::stream_rng;
use crate::sampler::{poisson_pattern, sample};
use crate::stats::{mean, sample_sd, standard_error};

/// Simulates one pattern on `window` with the given seed.
pub fn simulate<const D: usize>(
    model: &GibbsModel<f64>,
    window: &Window<f64, D>,
    settings: &SamplerSettings,
    seed: u64,
) -> Result<PointPattern<f64, D>> {
    if settings.direct_poisson {
        if !model.is_poisson() {
            return Err(Error::invalid("direct simulation needs a Poisson model"));
        }
        return poisson_pattern(model.beta(), window, &mut stream_rng(seed, 0));
    }
    let cfg = settings.config(window.volume(), seed)?;
    Ok(sample(model, window, &cfg)?.0)
}

/// Interval part of a successful estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub beta_hat: f64,
    pub pair_volume: f64,
    pub sigma2_hat: f64,
    pub ci: [f64; 2],
}

impl Interval {
    pub fn covers(&self, beta: f64) -> bool {
        self.ci[0] <= beta && beta <= self.ci[1]
    }
}

/// `N` and `V` at one `R̃`; `interval` is `None` when `V = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnData {
    pub r_tilde: f64,
    pub n_isolated: u64,
    pub empty_volume: f64,
    pub interval: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeData {
    pub r_hat: f64,
    pub flat: bool,
    pub interval: Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    /// `n(x)` on the full window, or the sampler error.
    pub count: std::result::Result<usize, String>,
    /// One entry per multiplier; `Err` carries the failure reason.
    pub columns: Vec<std::result::Result<ColumnData, String>>,
    pub range: Option<std::result::Result<RangeData, String>>,
}

fn column<const D: usize>(x: &PointPattern<f64, D>, window: &Window<f64, D>, r: f64, cfg: &ExperimentConfig) -> Result<ColumnData> {
    match estimate_beta(x, window, r, &cfg.quadrature, cfg.alpha) {
        Ok(rep) => Ok(ColumnData {
            r_tilde: r,
            n_isolated: rep.n_isolated,
            empty_volume: rep.empty_volume,
            interval: Some(Interval {
                beta_hat: rep.beta_hat,
                pair_volume: rep.pair_volume,
                sigma2_hat: rep.sigma2_hat,
                ci: [rep.ci.0, rep.ci.1],
            }),
        }),
        Err(Error::DegenerateEstimate { n_isolated, empty_volume }) => {
            Ok(ColumnData { r_tilde: r, n_isolated, empty_volume, interval: None })
        }
        Err(e) => Err(e),
    }
}

/// Simulates replication `i` and estimates every column.
pub fn run_replication<const D: usize>(cfg: &ExperimentConfig, i: usize) -> ReplicationRecord {
    let seed = cfg.replication_seed(i);
    let mut rec = ReplicationRecord { replication: i, seed, count: Err(String::new()), columns: Vec::new(), range: None };
    let window = match cfg.window::<D>() {
        Ok(w) => w,
        Err(e) => {
            rec.count = Err(e.to_string());
            return rec;
        }
    };
    let x = match simulate(&cfg.model, &window, &cfg.sampler, seed) {
        Ok(x) => x,
        Err(e) => {
            rec.count = Err(e.to_string());
            return rec;
        }
    };
    rec.count = Ok(x.len());
    rec.columns = cfg.r_tildes().into_iter().map(|r| column(&x, &window, r, cfg).map_err(|e| e.to_string())).collect();
    if let Some(grid) = &cfg.range_grid {
        rec.range = Some(match estimate_with_range(&x, &window, grid, &cfg.quadrature, cfg.alpha) {
            Ok((fit, rep)) => Ok(RangeData {
                r_hat: fit.r_hat,
                flat: fit.flat,
                interval: Interval {
                    beta_hat: rep.beta_hat,
                    pair_volume: rep.pair_volume,
                    sigma2_hat: rep.sigma2_hat,
                    ci: [rep.ci.0, rep.ci.1],
                },
            }),
            Err(e) => Err(e.to_string()),
        });
    }
    rec
}

/// Runs all replications on the current rayon pool. Records come back in
/// replication order and each depends only on its own seed, so the output
/// does not depend on the number of threads.
pub fn run_replications<const D: usize>(cfg: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    cfg.validate()?;
    cfg.window::<D>()?;
    Ok((0..cfg.replications).into_par_iter().map(|i| run_replication::<D>(cfg, i)).collect())
}

/// Summary of one `R̃ = p · R` column over the replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub multiplier: f64,
    pub r_tilde: f64,
    /// Replications with a finite `β̂`.
    pub successes: usize,
    /// Replications without one: sampler failures, `V = 0`, other errors.
    pub failure_count: usize,
    pub mean_beta: Option<f64>,
    pub sd_beta: Option<f64>,
    /// Share of successful replications whose interval covers `β⋆`.
    pub coverage_rate: Option<f64>,
    pub mean_sigma2: Option<f64>,
    pub mean_n: Option<f64>,
    pub mean_v: Option<f64>,
    /// Mean and standard error of `N − β⋆ V`, over every replication where
    /// `N` and `V` were computed (including `V = 0`).
    pub residual_mean: Option<f64>,
    pub residual_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub successes: usize,
    pub failure_count: usize,
    pub flat_count: usize,
    pub mean_r_hat: Option<f64>,
    pub sd_r_hat: Option<f64>,
    pub mean_beta: Option<f64>,
    pub sd_beta: Option<f64>,
    pub coverage_rate: Option<f64>,
}

/// Summary of one (model, window) experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub model: String,
    pub side: f64,
    pub dim: usize,
    pub beta_star: f64,
    pub reference_range: f64,
    pub replications: usize,
    pub sampler_failures: usize,
    /// Mean `n(x)` on the full window.
    pub mean_count: Option<f64>,
    pub columns: Vec<ColumnSummary>,
    pub range: Option<RangeSummary>,
}

fn opt(xs: &[f64], f: fn(&[f64]) -> f64) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(f(xs))
    }
}

fn rate(hits: usize, n: usize) -> Option<f64> {
    if n == 0 {
        None
    } else {
        Some(hits as f64 / n as f64)
    }
}

pub fn summarize<const D: usize>(cfg: &ExperimentConfig, records: &[ReplicationRecord]) -> ReplicationSummary {
    let beta_star = cfg.model.beta();
    let counts: Vec<f64> = records.iter().filter_map(|r| r.count.as_ref().ok().map(|&n| n as f64)).collect();
    let columns = cfg
        .multipliers
        .iter()
        .zip(cfg.r_tildes())
        .enumerate()
        .map(|(j, (&p, r_tilde))| {
            let data: Vec<&ColumnData> = records.iter().filter_map(|r| r.columns.get(j).and_then(|c| c.as_ref().ok())).collect();
            let fits: Vec<&Interval> = data.iter().filter_map(|d| d.interval.as_ref()).collect();
            let betas: Vec<f64> = fits.iter().map(|f| f.beta_hat).collect();
            let sigma2: Vec<f64> = fits.iter().map(|f| f.sigma2_hat).collect();
            let ns: Vec<f64> = data.iter().map(|d| d.n_isolated as f64).collect();
            let vs: Vec<f64> = data.iter().map(|d| d.empty_volume).collect();
            let resid: Vec<f64> = data.iter().map(|d| d.n_isolated as f64 - beta_star * d.empty_volume).collect();
            let covered = fits.iter().filter(|f| f.covers(beta_star)).count();
            ColumnSummary {
                multiplier: p,
                r_tilde,
                successes: fits.len(),
                failure_count: records.len() - fits.len(),
                mean_beta: opt(&betas, mean),
                sd_beta: opt(&betas, sample_sd),
                coverage_rate: rate(covered, fits.len()),
                mean_sigma2: opt(&sigma2, mean),
                mean_n: opt(&ns, mean),
                mean_v: opt(&vs, mean),
                residual_mean: opt(&resid, mean),
                residual_se: opt(&resid, standard_error),
            }
        })
        .collect();
    let range = cfg.range_grid.as_ref().map(|_| {
        let ok: Vec<&RangeData> = records.iter().filter_map(|r| r.range.as_ref().and_then(|x| x.as_ref().ok())).collect();
        let r_hats: Vec<f64> = ok.iter().map(|d| d.r_hat).collect();
        let betas: Vec<f64> = ok.iter().map(|d| d.interval.beta_hat).collect();
        RangeSummary {
            successes: ok.len(),
            failure_count: records.len() - ok.len(),
            flat_count: ok.iter().filter(|d| d.flat).count(),
            mean_r_hat: opt(&r_hats, mean),
            sd_r_hat: opt(&r_hats, sample_sd),
            mean_beta: opt(&betas, mean),
            sd_beta: opt(&betas, sample_sd),
            coverage_rate: rate(ok.iter().filter(|d| d.interval.covers(beta_star)).count(), ok.len()),
        }
    });
    ReplicationSummary {
        model: cfg.label.clone(),
        side: cfg.side,
        dim: D,
        beta_star,
        reference_range: cfg.reference_range,
        replications: records.len(),
        sampler_failures: records.iter().filter(|r| r.count.is_err()).count(),
        mean_count: opt(&counts, mean),
        columns,
        range,
    }
}

/// One experiment: records plus their summary.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub summary: ReplicationSummary,
}

pub fn run_experiment<const D: usize>(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let records = run_replications::<D>(cfg)?;
    let summary = summarize::<D>(cfg, &records);
    Ok(ExperimentOutcome { config: cfg.clone(), records, summary })
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs experiments in order on a pool of `threads` workers.
pub fn run_study<const D: usize>(experiments: &[ExperimentConfig], threads: Option<usize>) -> Result<Vec<ExperimentOutcome>> {
    with_threads(threads, || experiments.iter().map(run_experiment::<D>).collect::<Result<Vec<_>>>())?
}

/// Interval coverage of `β⋆` at a single `R̃` over `replications` patterns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStudy {
    pub r_tilde: f64,
    pub replications: usize,
    pub successes: usize,
    pub coverage_rate: Option<f64>,
    pub mean_beta: Option<f64>,
    pub mean_sigma2: Option<f64>,
}

pub fn run_coverage_study<const D: usize>(cfg: &ExperimentConfig, r_tilde: f64) -> Result<CoverageStudy> {
    let mut one = cfg.clone();
    one.reference_range = r_tilde;
    one.multipliers = vec![1.0];
    one.range_grid = None;
    let records = run_replications::<D>(&one)?;
    let col = &summarize::<D>(&one, &records).columns[0];
    Ok(CoverageStudy {
        r_tilde,
        replications: records.len(),
        successes: col.successes,
        coverage_rate: col.coverage_rate,
        mean_beta: col.mean_beta,
        mean_sigma2: col.mean_sigma2,
    })
}
