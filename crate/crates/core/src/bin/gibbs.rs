//! Command-line front end: simulate, estimate, range, experiment.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use gibbs_core::experiment::{emit_tables, failure_rows, run_study, StudyConfig, StudySummary};
use gibbs_core::geometry::csv_dimension;
use gibbs_core::models::catalog;
use gibbs_core::range::{beta_profile, parse_grid, segmented_breakpoint};
use gibbs_core::sampler::{sample, InitialState, SamplerConfig, STEPS_PER_UNIT_VOLUME};
use gibbs_core::{estimate_beta, BreakpointFit, GibbsModel, ModelConfig, PointPattern, QuadratureSettings, Window};

#[derive(Parser)]
#[command(name = "gibbs", version, about = "Simulate Gibbs point processes and estimate their Poisson intensity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the birth-death sampler on [0, L]^d and write the pattern as CSV.
    Simulate {
        /// Model file (TOML or JSON) or a catalog name such as `s1`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        window: f64,
        /// Number of proposals; defaults to 1e5 per unit volume.
        #[arg(long)]
        steps: Option<u64>,
        /// Defaults to half of the steps.
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 0.5)]
        p_birth: f64,
        /// Start from the empty pattern instead of thinned Poisson points.
        #[arg(long)]
        empty_start: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate beta with a confidence interval on the eroded window.
    Estimate {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        window: f64,
        #[arg(long)]
        rtilde: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Quadrature spacing for V and W; defaults to R̃/20 and R̃/10.
        #[arg(long)]
        grid_h: Option<f64>,
        /// Writes JSON here; prints to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the interaction range from the kink of the beta profile.
    Range {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        window: f64,
        /// `lo:hi:n`.
        #[arg(long, default_value = "0.02:0.08:13")]
        grid: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        grid_h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo study and write tables.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load_model(spec: &str) -> Result<GibbsModel<f64>> {
    let path = Path::new(spec);
    if !path.exists() && catalog::NAMES.contains(&spec) {
        return Ok(catalog::by_name(spec)?);
    }
    let cfg = ModelConfig::load(path).with_context(|| format!("loading model `{spec}`"))?;
    Ok(cfg.build()?)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn quad(grid_h: Option<f64>) -> QuadratureSettings {
    grid_h.map(QuadratureSettings::with_spacing).unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn simulate<const D: usize>(
    model: &GibbsModel<f64>,
    side: f64,
    steps: Option<u64>,
    burn_in: Option<u64>,
    p_birth: f64,
    empty_start: bool,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let window = Window::<f64, D>::cube(side)?;
    let steps = steps.unwrap_or_else(|| (STEPS_PER_UNIT_VOLUME * window.volume()).ceil() as u64);
    let cfg = SamplerConfig {
        steps,
        burn_in: burn_in.unwrap_or(steps / 2),
        p_birth,
        seed,
        init: if empty_start { InitialState::Empty } else { InitialState::Poisson },
        trace_every: None,
    };
    let (x, diag) = sample(model, &window, &cfg)?;
    x.save_csv(out)?;
    eprintln!(
        "{} points; acceptance birth {:.3}, death {:.3}",
        x.len(),
        diag.acceptance_rate_birth,
        diag.acceptance_rate_death
    );
    Ok(())
}

fn estimate<const D: usize>(pattern: &Path, side: f64, rtilde: f64, alpha: f64, grid_h: Option<f64>, out: Option<&Path>) -> Result<()> {
    let x = PointPattern::<f64, D>::load_csv(pattern)?;
    let window = Window::cube(side)?;
    let report = estimate_beta(&x, &window, rtilde, &quad(grid_h), alpha)?;
    write_json(&report.to_record(), out)
}

#[derive(Serialize)]
struct RangeOutput {
    grid: Vec<f64>,
    beta_profile: Vec<Option<f64>>,
    fit: BreakpointFit<f64>,
    estimate: gibbs_core::estimator::ReportRecord,
}

fn range<const D: usize>(pattern: &Path, side: f64, grid: &str, alpha: f64, grid_h: Option<f64>, out: Option<&Path>) -> Result<()> {
    let x = PointPattern::<f64, D>::load_csv(pattern)?;
    let window = Window::cube(side)?;
    let grid = parse_grid(grid)?;
    let q = quad(grid_h);
    let profile = beta_profile(&x, &window, &grid, &q)?;
    let fit = segmented_breakpoint(&profile)?;
    let report = estimate_beta(&x, &window, fit.r_hat, &q, alpha)?;
    if fit.flat {
        eprintln!("warning: the profile has no detectable kink; R̂ is arbitrary");
    }
    write_json(&RangeOutput { grid, beta_profile: profile.beta_hats, fit, estimate: report.to_record() }, out)
}

fn experiment(config: &Path, out_dir: &Path, threads: Option<usize>) -> Result<()> {
    let study = StudyConfig::load(config)?;
    let experiments = study.experiments()?;
    let outcomes = match study.dim {
        2 => run_study::<2>(&experiments, threads)?,
        3 => run_study::<3>(&experiments, threads)?,
        d => bail!("unsupported dimension {d}; use 2 or 3"),
    };
    let summary = StudySummary::from_outcomes(&outcomes);
    let failures = failure_rows(&outcomes);
    for path in emit_tables(&summary, &failures, out_dir)? {
        eprintln!("wrote {}", path.display());
    }
    if !failures.is_empty() {
        eprintln!("{} failed steps listed in failures.csv", failures.len());
    }
    Ok(())
}

fn dim_of(path: &Path) -> Result<usize> {
    Ok(csv_dimension(path)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { model, window, steps, burn_in, p_birth, empty_start, seed, dim, out } => {
            let m = load_model(&model)?;
            match dim {
                2 => simulate::<2>(&m, window, steps, burn_in, p_birth, empty_start, seed, &out),
                3 => simulate::<3>(&m, window, steps, burn_in, p_birth, empty_start, seed, &out),
                d => bail!("unsupported dimension {d}; use 2 or 3"),
            }
        }
        Command::Estimate { pattern, window, rtilde, alpha, grid_h, out } => match dim_of(&pattern)? {
            2 => estimate::<2>(&pattern, window, rtilde, alpha, grid_h, out.as_deref()),
            3 => estimate::<3>(&pattern, window, rtilde, alpha, grid_h, out.as_deref()),
            d => bail!("unsupported dimension {d}"),
        },
        Command::Range { pattern, window, grid, alpha, grid_h, out } => match dim_of(&pattern)? {
            2 => range::<2>(&pattern, window, &grid, alpha, grid_h, out.as_deref()),
            3 => range::<3>(&pattern, window, &grid, alpha, grid_h, out.as_deref()),
            d => bail!("unsupported dimension {d}"),
        },
        Command::Experiment { config, out_dir, threads } => experiment(&config, &out_dir, threads),
    }
}
