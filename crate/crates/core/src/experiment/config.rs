//! Experiment and study configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::QuadratureSettings;
use crate::geometry::Window;
use crate::models::{GibbsModel, ModelConfig};
use crate::range::parse_grid;
use crate::rng::derive_seed;
use crate::sampler::{InitialState, SamplerConfig, STEPS_PER_UNIT_VOLUME};

/// How replications are simulated, independent of the window size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub steps_per_volume: f64,
    /// Overrides `steps_per_volume` when set.
    pub steps: Option<u64>,
    pub burn_in_fraction: f64,
    pub p_birth: f64,
    pub init: InitialState,
    /// Draw Poisson models directly instead of running the chain.
    pub direct_poisson: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            steps_per_volume: STEPS_PER_UNIT_VOLUME,
            steps: None,
            burn_in_fraction: 0.5,
            p_birth: 0.5,
            init: InitialState::Poisson,
            direct_poisson: false,
        }
    }
}

impl SamplerSettings {
    pub fn config(&self, volume: f64, seed: u64) -> Result<SamplerConfig> {
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::invalid(format!("burn-in fraction must lie in [0, 1), got {}", self.burn_in_fraction)));
        }
        let steps = match self.steps {
            Some(s) => s,
            None => {
                if !(self.steps_per_volume > 0.0) {
                    return Err(Error::invalid("steps_per_volume must be positive"));
                }
                (self.steps_per_volume * volume).ceil().max(2.0) as u64
            }
        };
        let burn_in = (steps as f64 * self.burn_in_fraction).floor() as u64;
        let cfg = SamplerConfig { steps, burn_in, p_birth: self.p_birth, seed, init: self.init, trace_every: None };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One model on one cubic window `[0, side]^D`, replicated.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub model: GibbsModel<f64>,
    /// `R` in `R̃ = p · R`; usually the model's range.
    pub reference_range: f64,
    pub side: f64,
    pub replications: usize,
    pub multipliers: Vec<f64>,
    pub alpha: f64,
    pub master_seed: u64,
    pub sampler: SamplerSettings,
    pub quadrature: QuadratureSettings,
    /// Grid of `R̃` values for the breakpoint estimate `R̂`; `None` skips it.
    pub range_grid: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn new(label: impl Into<String>, model: GibbsModel<f64>, side: f64) -> Self {
        Self {
            label: label.into(),
            reference_range: model.range(),
            model,
            side,
            replications: 200,
            multipliers: vec![0.9, 1.0, 1.1, 1.2],
            alpha: 0.05,
            master_seed: 0,
            sampler: SamplerSettings::default(),
            quadrature: QuadratureSettings::default(),
            range_grid: None,
        }
    }

    pub fn window<const D: usize>(&self) -> Result<Window<f64, D>> {
        Window::cube(self.side)
    }

    pub fn r_tildes(&self) -> Vec<f64> {
        self.multipliers.iter().map(|p| p * self.reference_range).collect()
    }

    /// Seed of replication `i`; independent of thread scheduling.
    pub fn replication_seed(&self, i: usize) -> u64 {
        derive_seed(self.master_seed, &[i as u64])
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        if !(self.reference_range > 0.0) {
            return Err(Error::invalid(format!("reference range must be positive, got {}", self.reference_range)));
        }
        if self.multipliers.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("multipliers must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.sampler.direct_poisson && !self.model.is_poisson() {
            return Err(Error::invalid(format!("`{}` is not Poisson; direct simulation is unavailable", self.label)));
        }
        Ok(())
    }
}

/// A model entry of a study file: a model config plus a display name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyModel {
    pub name: String,
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default)]
    pub reference_range: Option<f64>,
    /// Adds the `R̂` column for this model when the study has a range grid.
    #[serde(default = "yes")]
    pub estimate_range: bool,
}

fn yes() -> bool {
    true
}

/// A study file: every model crossed with every window side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub replications: usize,
    pub windows: Vec<f64>,
    pub multipliers: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// `lo:hi:n` grid for `R̂`.
    #[serde(default)]
    pub range_grid: Option<String>,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    pub models: Vec<StudyModel>,
}

fn default_dim() -> usize {
    2
}

fn default_alpha() -> f64 {
    0.05
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("experiment config", e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Expands into one experiment per (model, window) in file order.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.models.is_empty() || self.windows.is_empty() {
            return Err(Error::invalid("a study needs at least one model and one window"));
        }
        let grid = self.range_grid.as_deref().map(parse_grid).transpose()?;
        let mut out = Vec::new();
        for (mi, m) in self.models.iter().enumerate() {
            let model = m.model.build::<f64>()?;
            for (wi, &side) in self.windows.iter().enumerate() {
                let mut e = ExperimentConfig::new(m.name.clone(), model.clone(), side);
                e.reference_range = m.reference_range.unwrap_or(model.range());
                e.replications = self.replications;
                e.multipliers = self.multipliers.clone();
                e.alpha = self.alpha;
                e.master_seed = derive_seed(self.master_seed, &[mi as u64, wi as u64]);
                e.sampler = self.sampler.clone();
                e.quadrature = self.quadrature;
                e.range_grid = if m.estimate_range { grid.clone() } else { None };
                e.validate()?;
                out.push(e);
            }
        }
        Ok(out)
    }
}
