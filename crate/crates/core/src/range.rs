//! Range selection: profile `β̂(R̃)` over a grid and locate its slope breakpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_beta, ratio_estimate, EstimateReport, QuadratureSettings};
use crate::geometry::{PointPattern, Window};
use crate::num::Real;

/// Number of breakpoint candidates scanned before refinement.
pub const CANDIDATES: usize = 200;
const GOLDEN_ITERATIONS: usize = 60;

/// `β̂(R̃)` along a grid; `None` marks a degenerate estimate (`V = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct BetaProfile<F> {
    pub grid: Vec<F>,
    pub beta_hats: Vec<Option<F>>,
}

impl<F: Real> BetaProfile<F> {
    pub fn valid_points(&self) -> (Vec<F>, Vec<F>) {
        self.grid
            .iter()
            .zip(&self.beta_hats)
            .filter_map(|(&x, b)| b.map(|y| (x, y)))
            .unzip()
    }
}

/// Continuous two-segment least-squares fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakpointFit<F> {
    pub r_hat: F,
    /// Fitted value at the breakpoint.
    pub intercept: F,
    pub left_slope: F,
    pub right_slope: F,
    pub sse: F,
    /// SSE of the single straight line through the same data.
    pub line_sse: F,
    /// SSE does not vary with the breakpoint, so `r_hat` carries no information.
    pub flat: bool,
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linear_grid<F: Real>(lo: F, hi: F, n: usize) -> Vec<F> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * F::from_usize_lossy(i) / F::from_usize_lossy(n - 1)).collect(),
    }
}

/// Thirteen values spanning `[0.4 r, 1.6 r]`.
pub fn default_grid<F: Real>(r_guess: F) -> Vec<F> {
    linear_grid(F::lit(0.4) * r_guess, F::lit(1.6) * r_guess, 13)
}

/// Parses `lo:hi:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::parse("grid", format!("expected lo:hi:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(bad());
    }
    Ok(linear_grid(lo, hi, n))
}

/// Evaluates `β̂(R̃)` for each `R̃` of the grid, each on its own eroded window.
pub fn beta_profile<F: Real, const D: usize>(
    full_x: &PointPattern<F, D>,
    window: &Window<F, D>,
    grid: &[F],
    quad: &QuadratureSettings,
) -> Result<BetaProfile<F>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty R̃ grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("R̃ grid must be strictly increasing"));
    }
    let limit = window.min_side() / F::lit(4.0);
    if !(grid[0] > F::zero()) || !(grid[grid.len() - 1] < limit) {
        return Err(Error::invalid(format!("R̃ grid must lie in (0, {limit})")));
    }
    let mut beta_hats = Vec::with_capacity(grid.len());
    for &r in grid {
        match ratio_estimate(full_x, window, r, quad) {
            Ok(est) => beta_hats.push(Some(est.beta_hat)),
            Err(Error::DegenerateEstimate { .. }) => beta_hats.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(BetaProfile { grid: grid.to_vec(), beta_hats })
}

/// Solves the normal equations of a small least-squares problem; `None` if singular.
fn least_squares<F: Real, const P: usize>(rows: impl Iterator<Item = ([F; P], F)>) -> Option<([F; P], F)> {
    let mut a = [[F::zero(); P]; P];
    let mut b = [F::zero(); P];
    let mut data = Vec::new();
    for (row, y) in rows {
        for i in 0..P {
            for j in 0..P {
                a[i][j] = a[i][j] + row[i] * row[j];
            }
            b[i] = b[i] + row[i] * y;
        }
        data.push((row, y));
    }
    // Gaussian elimination with partial pivoting.
    let scale = a.iter().flatten().fold(F::zero(), |m, v| m.max(v.abs()));
    for col in 0..P {
        let piv = (col..P).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > scale * F::epsilon() * F::lit(64.0)) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..P {
            let f = a[r][col] / a[col][col];
            for c in col..P {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut coef = [F::zero(); P];
    for i in (0..P).rev() {
        let mut s = b[i];
        for j in i + 1..P {
            s = s - a[i][j] * coef[j];
        }
        coef[i] = s / a[i][i];
    }
    let sse = data
        .iter()
        .map(|(row, y)| {
            let fit = (0..P).fold(F::zero(), |acc, k| acc + row[k] * coef[k]);
            (*y - fit) * (*y - fit)
        })
        .fold(F::zero(), |a, b| a + b);
    Some((coef, sse))
}

/// Broken-stick fit `y ≈ a + b₁ min(x − c, 0) + b₂ max(x − c, 0)` for fixed `c`.
fn broken_stick<F: Real>(xs: &[F], ys: &[F], c: F) -> Option<([F; 3], F)> {
    least_squares(xs.iter().zip(ys).map(|(&x, &y)| ([F::one(), (x - c).min(F::zero()), (x - c).max(F::zero())], y)))
}

/// Breakpoint of the continuous two-segment regression of `ys` on `xs`.
///
/// Candidates are scanned on an even grid between the second smallest and
/// second largest `x`, then the best bracket is refined by golden-section search.
pub fn segmented_fit<F: Real>(xs: &[F], ys: &[F]) -> Result<BreakpointFit<F>> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!("breakpoint fit needs at least 5 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite profile value"));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
    let sx: Vec<F> = order.iter().map(|&i| xs[i]).collect();
    let sy: Vec<F> = order.iter().map(|&i| ys[i]).collect();
    let (lo, hi) = (sx[1], sx[sx.len() - 2]);
    if !(lo < hi) {
        return Err(Error::InsufficientData("profile has no interior range".into()));
    }

    let sse_at = |c: F| broken_stick(&sx, &sy, c).map(|(_, s)| s).unwrap_or(F::infinity());
    let cands = linear_grid(lo, hi, CANDIDATES);
    let sses: Vec<F> = cands.iter().map(|&c| sse_at(c)).collect();
    let (best, _) = sses
        .iter()
        .enumerate()
        .fold((0, F::infinity()), |(bi, bs), (i, &s)| if s < bs { (i, s) } else { (bi, bs) });
    let max_sse = sses.iter().copied().filter(|s| s.is_finite()).fold(F::zero(), F::max);

    let (_, line_sse) = least_squares(sx.iter().zip(&sy).map(|(&x, &y)| ([F::one(), x], y)))
        .ok_or_else(|| Error::InsufficientData("degenerate x values".into()))?;

    // Golden-section refinement on the bracket around the best candidate.
    let mut a = cands[best.saturating_sub(1)];
    let mut b = cands[(best + 1).min(CANDIDATES - 1)];
    let mut c_best = cands[best];
    let mut s_best = sses[best];
    let inv_phi = F::lit(0.618_033_988_749_894_9);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (sse_at(x1), sse_at(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = sse_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = sse_at(x2);
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < s_best {
            c_best = x;
            s_best = f;
        }
    }

    let (coef, sse) = broken_stick(&sx, &sy, c_best).ok_or_else(|| Error::InsufficientData("singular fit".into()))?;
    let mean = sy.iter().copied().fold(F::zero(), |a, b| a + b) / F::from_usize_lossy(sy.len());
    let tss = sy.iter().map(|&y| (y - mean) * (y - mean)).fold(F::zero(), |a, b| a + b);
    let flat = tss == F::zero() || (max_sse - s_best) <= F::lit(1e-10) * tss;
    Ok(BreakpointFit {
        r_hat: c_best,
        intercept: coef[0],
        left_slope: coef[1],
        right_slope: coef[2],
        sse,
        line_sse,
        flat,
    })
}

/// Breakpoint of a profile, using only its non-degenerate entries.
pub fn segmented_breakpoint<F: Real>(profile: &BetaProfile<F>) -> Result<BreakpointFit<F>> {
    let (xs, ys) = profile.valid_points();
    segmented_fit(&xs, &ys)
}

/// Profiles `β̂`, picks `R̂` at the breakpoint, and re-estimates at `R̃ = R̂`.
pub fn estimate_with_range<F: Real, const D: usize>(
    full_x: &PointPattern<F, D>,
    window: &Window<F, D>,
    grid: &[F],
    quad: &QuadratureSettings,
    alpha: F,
) -> Result<(BreakpointFit<F>, EstimateReport<F, D>)> {
    let profile = beta_profile(full_x, window, grid, quad)?;
    let fit = segmented_breakpoint(&profile)?;
    let report = estimate_beta(full_x, window, fit.r_hat, quad, alpha)?;
    Ok((fit, report))
}
