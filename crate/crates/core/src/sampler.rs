//! Birth–death Metropolis–Hastings for finite-range Gibbs models on a box.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::index::{Excluding, Neighborhood, SpatialIndex};
use crate::models::GibbsModel;
use crate::num::Real;
use crate::rng::stream_rng;

/// Default number of proposals per unit window volume.
pub const STEPS_PER_UNIT_VOLUME: f64 = 1.0e5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Empty,
    /// Poisson(β) points, thinned so that the start state has positive density.
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub p_birth: f64,
    pub seed: u64,
    pub init: InitialState,
    /// Record `n(x)` every this many proposals after burn-in.
    #[serde(default)]
    pub trace_every: Option<u64>,
}

impl SamplerConfig {
    /// `1e5 · |Λ|` proposals, half of them burn-in, started from Poisson(β).
    pub fn for_volume(volume: f64, seed: u64) -> Self {
        let steps = (STEPS_PER_UNIT_VOLUME * volume).ceil().max(2.0) as u64;
        Self { steps, burn_in: steps / 2, p_birth: 0.5, seed, init: InitialState::Poisson, trace_every: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::invalid(format!("steps ({}) must exceed burn-in ({})", self.steps, self.burn_in)));
        }
        if !(self.p_birth > 0.0 && self.p_birth < 1.0) {
            return Err(Error::invalid(format!("birth probability must lie in (0, 1), got {}", self.p_birth)));
        }
        if self.trace_every == Some(0) {
            return Err(Error::invalid("trace interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate_birth: f64,
    pub acceptance_rate_death: f64,
    pub final_count: usize,
    pub statistic_trace: Vec<usize>,
}

/// Mutable configuration with a grid index keyed by point id.
pub(crate) struct ChainState<F, const D: usize> {
    points: Vec<Point<F, D>>,
    index: SpatialIndex<F, D>,
}

impl<F: Real, const D: usize> ChainState<F, D> {
    pub(crate) fn new(cell_size: F) -> Result<Self> {
        Ok(Self { points: Vec::new(), index: SpatialIndex::new(cell_size)? })
    }

    pub(crate) fn from_points(points: &[Point<F, D>], cell_size: F) -> Result<Self> {
        let mut s = Self::new(cell_size)?;
        for p in points {
            s.push(*p);
        }
        Ok(s)
    }

    pub(crate) fn push(&mut self, p: Point<F, D>) {
        self.index.insert(self.points.len(), &p);
        self.points.push(p);
    }

    pub(crate) fn swap_remove(&mut self, i: usize) {
        let last = self.points.len() - 1;
        self.index.remove(i, &self.points[i]);
        if i != last {
            let moved = self.points[last];
            self.index.relabel(last, i, &moved);
        }
        self.points.swap_remove(i);
    }

    pub(crate) fn into_pattern(self) -> PointPattern<F, D> {
        PointPattern::from_vec_unchecked(self.points)
    }
}

impl<F: Real, const D: usize> Neighborhood<F, D> for ChainState<F, D> {
    fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(&self, u: &Point<F, D>, r: F, f: G) {
        self.index.visit_within(&self.points, u, r, f)
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

/// `log(λ(u, x) |Λ| / (n(x) + 1))`.
fn log_birth_ratio<F: Real, const D: usize>(model: &GibbsModel<F>, log_volume: F, state: &ChainState<F, D>, u: &Point<F, D>) -> F {
    model.log_papangelou_in(u, state) + log_volume - F::from_usize_lossy(state.len() + 1).ln()
}

/// `log(n(x) / (λ(v, x \ v) |Λ|))` for the point `v` with id `i`.
fn log_death_ratio<F: Real, const D: usize>(model: &GibbsModel<F>, log_volume: F, state: &ChainState<F, D>, i: usize) -> F {
    let rest = Excluding { inner: state, id: i };
    F::from_usize_lossy(state.len()).ln() - model.log_papangelou_in(&state.points[i], &rest) - log_volume
}

fn uniform_point<F: Real, const D: usize, R: Rng + ?Sized>(window: &Window<F, D>, rng: &mut R) -> Point<F, D> {
    let mut c = [F::zero(); D];
    for (k, ck) in c.iter_mut().enumerate() {
        let t: f64 = rng.random();
        *ck = window.lower()[k] + F::lit(t) * window.side(k);
    }
    Point::new(c)
}

/// Homogeneous Poisson pattern of intensity `beta` on `window`.
pub fn poisson_pattern<F: Real, const D: usize, R: Rng + ?Sized>(beta: F, window: &Window<F, D>, rng: &mut R) -> Result<PointPattern<F, D>> {
    let mean = (beta * window.volume()).as_f64();
    let n = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?.sample(rng) as usize
    } else {
        0
    };
    Ok(PointPattern::from_vec_unchecked((0..n).map(|_| uniform_point(window, rng)).collect()))
}

/// Runs the chain and returns its final state.
///
/// Each proposal is a birth at a uniform location with probability `p_birth`,
/// otherwise the death of a uniformly chosen point. Births are accepted with
/// probability `min(1, λ(u, x)|Λ|/(n + 1) · (1 − p_birth)/p_birth)` and deaths
/// with `min(1, n/(λ(v, x \ v)|Λ|) · p_birth/(1 − p_birth))`; a death proposed
/// on the empty pattern is rejected.
pub fn sample<F: Real, const D: usize>(
    model: &GibbsModel<F>,
    window: &Window<F, D>,
    cfg: &SamplerConfig,
) -> Result<(PointPattern<F, D>, ChainDiagnostics)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, 0);
    let log_volume = window.volume().ln();
    let proposal_bias = F::lit(((1.0 - cfg.p_birth) / cfg.p_birth).ln());

    let mut state = ChainState::new(model.range())?;
    if cfg.init == InitialState::Poisson {
        for p in poisson_pattern(model.beta(), window, &mut rng)?.into_points() {
            if model.log_interaction_in(&p, &state).is_finite() {
                state.push(p);
            }
        }
    }

    let (mut births, mut birth_acc, mut deaths, mut death_acc) = (0u64, 0u64, 0u64, 0u64);
    let mut trace = Vec::new();
    for step in 0..cfg.steps {
        let birth = rng.random::<f64>() < cfg.p_birth;
        if birth {
            births += 1;
            let u = uniform_point(window, &mut rng);
            let log_ratio = log_birth_ratio(model, log_volume, &state, &u) + proposal_bias;
            if log_ratio.is_nan() || log_ratio == F::infinity() {
                return Err(Error::SamplerFailure { step, reason: format!("birth ratio {log_ratio}") });
            }
            if F::lit(rng.random::<f64>().ln()) < log_ratio {
                birth_acc += 1;
                state.push(u);
            }
        } else {
            deaths += 1;
            if !state.is_empty() {
                let i = rng.random_range(0..state.len());
                let log_ratio = log_death_ratio(model, log_volume, &state, i) - proposal_bias;
                if log_ratio.is_nan() || log_ratio == F::infinity() {
                    return Err(Error::SamplerFailure { step, reason: format!("death ratio {log_ratio}") });
                }
                if F::lit(rng.random::<f64>().ln()) < log_ratio {
                    death_acc += 1;
                    state.swap_remove(i);
                }
            }
        }
        if let Some(every) = cfg.trace_every {
            if step >= cfg.burn_in && (step - cfg.burn_in) % every == 0 {
                trace.push(state.len());
            }
        }
    }

    let rate = |a: u64, n: u64| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    let diagnostics = ChainDiagnostics {
        acceptance_rate_birth: rate(birth_acc, births),
        acceptance_rate_death: rate(death_acc, deaths),
        final_count: state.len(),
        statistic_trace: trace,
    };
    Ok((state.into_pattern(), diagnostics))
}

/// Birth ratio at `(x, u)` and death ratio at `(x ∪ {u}, u)`, without the
/// proposal-probability factor. Their product is one wherever `λ(u, x) > 0`.
pub fn detailed_balance_check<F: Real, const D: usize>(
    model: &GibbsModel<F>,
    window: &Window<F, D>,
    x: &PointPattern<F, D>,
    u: &Point<F, D>,
) -> Result<(F, F)> {
    let (b, d) = detailed_balance_log(model, window, x, u)?;
    Ok((b.exp(), d.exp()))
}

/// Log-space version of [`detailed_balance_check`].
pub fn detailed_balance_log<F: Real, const D: usize>(
    model: &GibbsModel<F>,
    window: &Window<F, D>,
    x: &PointPattern<F, D>,
    u: &Point<F, D>,
) -> Result<(F, F)> {
    let log_volume = window.volume().ln();
    let before = ChainState::from_points(x.points(), model.range())?;
    let birth = log_birth_ratio(model, log_volume, &before, u);
    let mut after = ChainState::from_points(x.points(), model.range())?;
    after.push(*u);
    let death = log_death_ratio(model, log_volume, &after, x.len());
    Ok((birth, death))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::catalog;

    fn unit() -> Window<f64, 2> {
        Window::cube(1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::for_volume(1.0, 1);
        assert_eq!(cfg.steps, 100_000);
        assert_eq!(cfg.burn_in, 50_000);
        cfg.validate().unwrap();
        cfg.burn_in = cfg.steps;
        assert!(cfg.validate().is_err());
        let mut cfg = SamplerConfig::for_volume(1.0, 1);
        cfg.p_birth = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn poisson_ratios_are_algebraic_inverses() {
        let m = GibbsModel::poisson(200.0, 0.05).unwrap();
        let x = PointPattern::from_coords(&[[0.1, 0.1], [0.5, 0.52]]).unwrap();
        let (b, d) = detailed_balance_check(&m, &unit(), &x, &Point::new([0.5, 0.5])).unwrap();
        assert!((b - 200.0 / 3.0).abs() < 1e-12);
        assert!((d - 3.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn hard_core_violation_has_zero_birth_ratio() {
        let m = catalog::by_name::<f64>("shc1").unwrap();
        let x = PointPattern::from_coords(&[[0.5, 0.51]]).unwrap();
        let (b, _) = detailed_balance_check(&m, &unit(), &x, &Point::new([0.5, 0.5])).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn swap_remove_keeps_index_in_sync() {
        let pts: Vec<Point<f64, 2>> = (0..20).map(|i| Point::new([i as f64 * 0.05, 0.5])).collect();
        let mut s = ChainState::from_points(&pts, 0.05).unwrap();
        s.swap_remove(3);
        s.swap_remove(0);
        s.swap_remove(s.len() - 1);
        let p = s.points.clone();
        let x = PointPattern::new(p.clone()).unwrap();
        for u in &p {
            let mut a = Vec::new();
            s.visit_within(u, 0.07, |i, _, _| a.push(i));
            a.sort_unstable();
            let mut b = Vec::new();
            x.visit_within(u, 0.07, |i, _, _| b.push(i));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn seed_determinism() {
        let m = catalog::by_name::<f64>("s1").unwrap();
        let mut cfg = SamplerConfig::for_volume(1.0, 99);
        cfg.steps = 20_000;
        cfg.burn_in = 10_000;
        let (a, da) = sample(&m, &unit(), &cfg).unwrap();
        let (b, db) = sample(&m, &unit(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        cfg.seed = 100;
        let (c, _) = sample(&m, &unit(), &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_start_and_trace() {
        let m = catalog::by_name::<f64>("s2").unwrap();
        let cfg = SamplerConfig { steps: 4000, burn_in: 1000, p_birth: 0.5, seed: 5, init: InitialState::Empty, trace_every: Some(100) };
        let (x, d) = sample(&m, &unit(), &cfg).unwrap();
        assert_eq!(d.statistic_trace.len(), 30);
        assert_eq!(d.final_count, x.len());
        assert!(d.acceptance_rate_birth > 0.0 && d.acceptance_rate_birth <= 1.0);
        assert!(unit().contains_window(&unit()));
        assert!(x.iter().all(|p| unit().contains(p)));
    }
}
