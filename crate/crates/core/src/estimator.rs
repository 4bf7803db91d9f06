//! Ratio estimator of the Poisson intensity parameter `β` with border correction.
//!
//! On the eroded window `Λ ⊖ R̃` the estimator is `β̂ = N / V` where `N`
//! counts points with no other point within `R̃` and `V` is the volume of
//! locations with no point within `R̃`. The asymptotic variance is estimated
//! by `σ̂² = |Λ ⊖ R̃| (β̂ / V + β̂² W / V²)` with `W` the double integral of the
//! product of empty-ball indicators over pairs at distance at most `R̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::index::{IndexedPattern, SpatialIndex};
use crate::models::GibbsModel;
use crate::num::Real;
use crate::quadrature::QuadratureGrid;
use crate::stats::normal_quantile;

/// Lattice resolution for the `V` and `W` integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// `V` spacing is `R̃ / v_divisions`.
    pub v_divisions: f64,
    /// `W` spacing is `R̃ / w_divisions`.
    pub w_divisions: f64,
    /// Absolute spacing used for both integrals when set.
    #[serde(default)]
    pub grid_h: Option<f64>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { v_divisions: 20.0, w_divisions: 10.0, grid_h: None }
    }
}

impl QuadratureSettings {
    pub fn with_spacing(h: f64) -> Self {
        Self { grid_h: Some(h), ..Self::default() }
    }

    pub fn v_spacing<F: Real>(&self, r_tilde: F) -> F {
        match self.grid_h {
            Some(h) => F::lit(h),
            None => r_tilde / F::lit(self.v_divisions),
        }
    }

    pub fn w_spacing<F: Real>(&self, r_tilde: F) -> F {
        match self.grid_h {
            Some(h) => F::lit(h),
            None => r_tilde / F::lit(self.w_divisions),
        }
    }
}

fn check_radius<F: Real>(r_tilde: F) -> Result<()> {
    if !(r_tilde > F::zero()) || !r_tilde.is_finite() {
        return Err(Error::invalid(format!("R̃ must be positive and finite, got {r_tilde}")));
    }
    Ok(())
}

/// `N`: points of `full_x` inside `window_eroded` with no other point of
/// `full_x` within closed distance `r_tilde`.
pub fn count_isolated<F: Real, const D: usize>(full_x: &PointPattern<F, D>, window_eroded: &Window<F, D>, r_tilde: F) -> Result<u64> {
    check_radius(r_tilde)?;
    let index = SpatialIndex::build(full_x, r_tilde)?;
    let pts = full_x.points();
    let mut n = 0u64;
    for (i, u) in pts.iter().enumerate() {
        if !window_eroded.contains(u) {
            continue;
        }
        let mut isolated = true;
        index.visit_within(pts, u, r_tilde, |j, _, _| isolated &= j == i);
        if isolated {
            n += 1;
        }
    }
    Ok(n)
}

/// Empty-ball indicator `1(d(u, X) > R̃)` at every lattice node.
pub fn empty_mask<F: Real, const D: usize>(full_x: &PointPattern<F, D>, grid: &QuadratureGrid<F, D>, r_tilde: F) -> Vec<bool> {
    let mut mask = grid.coverage_mask(full_x.iter(), r_tilde);
    mask.iter_mut().for_each(|m| *m = !*m);
    mask
}

/// `V`: midpoint rule for the volume of `window_eroded` at distance more than `R̃` from `full_x`.
pub fn empty_space_volume<F: Real, const D: usize>(full_x: &PointPattern<F, D>, window_eroded: &Window<F, D>, r_tilde: F, h: F) -> Result<F> {
    check_radius(r_tilde)?;
    let grid = QuadratureGrid::new(*window_eroded, h)?;
    let empty = empty_mask(full_x, &grid, r_tilde).iter().filter(|&&e| e).count();
    Ok(grid.cell_volume() * F::from_usize_lossy(empty))
}

/// Number of ordered node pairs `(u, v)` with both nodes empty and `‖u − v‖ <= r`.
fn empty_pair_count<F: Real, const D: usize>(grid: &QuadratureGrid<F, D>, empty: &[bool], r: F) -> u64 {
    let counts = *grid.counts();
    let flags: Vec<u8> = empty.iter().map(|&e| e as u8).collect();
    let mut total = 0u64;
    for o in grid.ball_offsets(r) {
        // Node range for u such that u + o stays in the grid.
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        let mut skip = false;
        for k in 0..D {
            let n = counts[k] as i64;
            let a = (-o[k]).max(0);
            let b = (n - o[k]).min(n);
            if a >= b {
                skip = true;
                break;
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        if skip {
            continue;
        }
        // Signed linear shift of the offset.
        let mut shift = 0i64;
        for k in (0..D).rev() {
            shift = shift * counts[k] as i64 + o[k];
        }
        let run = hi[0] - lo[0];
        let mut m = lo;
        loop {
            let start = grid.linear_index(&m);
            let a = &flags[start..start + run];
            let b0 = (start as i64 + shift) as usize;
            let b = &flags[b0..b0 + run];
            total += a.iter().zip(b).map(|(x, y)| (x & y) as u64).sum::<u64>();
            // Advance axes 1.. (axis 0 handled by the run).
            let mut k = 1;
            loop {
                if k >= D {
                    break;
                }
                if m[k] + 1 < hi[k] {
                    m[k] += 1;
                    break;
                }
                m[k] = lo[k];
                k += 1;
            }
            if k >= D {
                break;
            }
        }
    }
    total
}

/// `W`: double midpoint rule for `∫_{Λ⊖R̃} ∫_{B(u,R̃) ∩ Λ⊖R̃} 1(u empty) 1(v empty) dv du`.
///
/// Both variables run over the same lattice, so the inner domain is clipped
/// to the eroded window.
pub fn pair_empty_volume<F: Real, const D: usize>(full_x: &PointPattern<F, D>, window_eroded: &Window<F, D>, r_tilde: F, h: F) -> Result<F> {
    check_radius(r_tilde)?;
    let grid = QuadratureGrid::new(*window_eroded, h)?;
    let empty = empty_mask(full_x, &grid, r_tilde);
    let pairs = empty_pair_count(&grid, &empty, r_tilde);
    let cv = grid.cell_volume();
    Ok(cv * cv * F::from_u64(pairs).unwrap())
}

/// `N`, `V` and `β̂ = N / V` without the variance machinery.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEstimate<F> {
    pub n_isolated: u64,
    pub empty_volume: F,
    pub beta_hat: F,
}

pub fn ratio_estimate<F: Real, const D: usize>(
    full_x: &PointPattern<F, D>,
    window: &Window<F, D>,
    r_tilde: F,
    quad: &QuadratureSettings,
) -> Result<RatioEstimate<F>> {
    check_radius(r_tilde)?;
    let eroded = window.erode(r_tilde)?;
    let n = count_isolated(full_x, &eroded, r_tilde)?;
    let v = empty_space_volume(full_x, &eroded, r_tilde, quad.v_spacing(r_tilde))?;
    if !(v > F::zero()) {
        return Err(Error::DegenerateEstimate { n_isolated: n, empty_volume: v.as_f64() });
    }
    Ok(RatioEstimate { n_isolated: n, empty_volume: v, beta_hat: F::from_u64(n).unwrap() / v })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport<F, const D: usize> {
    pub beta_hat: F,
    pub n_isolated: u64,
    pub empty_volume: F,
    pub pair_volume: F,
    pub sigma2_hat: F,
    pub ci: (F, F),
    pub alpha: F,
    pub window_used: Window<F, D>,
    pub r_tilde: F,
}

impl<F: Real, const D: usize> EstimateReport<F, D> {
    pub fn covers(&self, beta: F) -> bool {
        self.ci.0 <= beta && beta <= self.ci.1
    }

    pub fn to_record(&self) -> ReportRecord {
        ReportRecord {
            beta_hat: self.beta_hat.as_f64(),
            n_isolated: self.n_isolated,
            empty_volume: self.empty_volume.as_f64(),
            pair_volume: self.pair_volume.as_f64(),
            sigma2_hat: self.sigma2_hat.as_f64(),
            ci: [self.ci.0.as_f64(), self.ci.1.as_f64()],
            alpha: self.alpha.as_f64(),
            window_lower: self.window_used.lower().iter().map(|c| c.as_f64()).collect(),
            window_upper: self.window_used.upper().iter().map(|c| c.as_f64()).collect(),
            r_tilde: self.r_tilde.as_f64(),
        }
    }
}

/// Serialisable form of [`EstimateReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub beta_hat: f64,
    pub n_isolated: u64,
    pub empty_volume: f64,
    pub pair_volume: f64,
    pub sigma2_hat: f64,
    pub ci: [f64; 2],
    pub alpha: f64,
    pub window_lower: Vec<f64>,
    pub window_upper: Vec<f64>,
    pub r_tilde: f64,
}

/// `β̂`, `σ̂²` and the studentised `1 − α` confidence interval
/// `β̂ ± z_{1−α/2} σ̂ / √|Λ ⊖ R̃|`, all on the window eroded by `r_tilde`.
pub fn estimate_beta<F: Real, const D: usize>(
    full_x: &PointPattern<F, D>,
    window: &Window<F, D>,
    r_tilde: F,
    quad: &QuadratureSettings,
    alpha: F,
) -> Result<EstimateReport<F, D>> {
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ratio = ratio_estimate(full_x, window, r_tilde, quad)?;
    let eroded = window.erode(r_tilde)?;
    let w = pair_empty_volume(full_x, &eroded, r_tilde, quad.w_spacing(r_tilde))?;
    let v = ratio.empty_volume;
    let b = ratio.beta_hat;
    let volume = eroded.volume();
    let sigma2 = volume * (b / v + b * b * w / (v * v));
    let z = F::lit(normal_quantile(1.0 - alpha.as_f64() / 2.0));
    let half = z * (sigma2 / volume).sqrt();
    Ok(EstimateReport {
        beta_hat: b,
        n_isolated: ratio.n_isolated,
        empty_volume: v,
        pair_volume: w,
        sigma2_hat: sigma2,
        ci: (b - half, b + half),
        alpha,
        window_used: eroded,
        r_tilde,
    })
}

/// Innovation `Σ_{u ∈ X ∩ Λ} h(u, X \ u) − ∫_Λ h(u, X) λ(u, X) du` for
/// `h(u, x) = 1(d(u, x) > R̃)`, the integral by the midpoint rule at spacing `h`.
pub fn innovation<F: Real, const D: usize>(
    full_x: &PointPattern<F, D>,
    model: &GibbsModel<F>,
    window_eroded: &Window<F, D>,
    r_tilde: F,
    h: F,
) -> Result<F> {
    let n = count_isolated(full_x, window_eroded, r_tilde)?;
    let grid = QuadratureGrid::new(*window_eroded, h)?;
    let empty = empty_mask(full_x, &grid, r_tilde);
    let indexed = IndexedPattern::new(full_x, model.range())?;
    let mut compensator = F::zero();
    for (id, &e) in empty.iter().enumerate() {
        if e {
            compensator = compensator + model.log_interaction_in(&grid.node(id), &indexed).exp();
        }
    }
    Ok(F::from_u64(n).unwrap() - model.beta() * grid.cell_volume() * compensator)
}
