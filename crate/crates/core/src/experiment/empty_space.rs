//! Empty-space probabilities `F(r)` and `F_{0,v}(R̃)` and the asymptotic
//! variance they determine.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SamplerSettings;
use super::run::simulate;
use crate::error::{Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::models::GibbsModel;
use crate::num::ball_volume;
use crate::quadrature::{lattice_ball_offsets, QuadratureGrid};
use crate::rng::derive_seed;

/// Where and how finely empty balls are probed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptySpaceDesign {
    /// Radii at which `F̂` is tabulated.
    pub radii: Vec<f64>,
    /// `R̃` for the pair probabilities; displacements are the lattice
    /// offsets `v` with `‖v‖ <= pair_radius`.
    pub pair_radius: f64,
    /// Lattice spacing of the reference points and displacements.
    pub spacing: f64,
    /// Use every `stride`-th lattice node per axis as a reference point.
    pub stride: usize,
}

impl EmptySpaceDesign {
    /// `F̂` on `[0, 2R̃]` at `R̃/20` steps, pairs on a lattice of spacing `R̃/10`.
    pub fn for_radius(r_tilde: f64) -> Self {
        Self {
            radii: (0..=40).map(|i| r_tilde * i as f64 / 20.0).collect(),
            pair_radius: r_tilde,
            spacing: r_tilde / 10.0,
            stride: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::invalid("empty-space radii must be finite and non-negative"));
        }
        if !(self.pair_radius > 0.0 && self.pair_radius.is_finite()) {
            return Err(Error::invalid("pair radius must be positive"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || self.stride == 0 {
            return Err(Error::invalid("spacing and stride must be positive"));
        }
        Ok(())
    }

    fn reach(&self) -> f64 {
        self.radii.iter().copied().fold(self.pair_radius, f64::max)
    }
}

/// Monte-Carlo (or analytic) empty-space tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptySpaceEstimates<const D: usize> {
    pub radii: Vec<f64>,
    /// `F̂(r)` at each radius.
    pub f_hat: Vec<f64>,
    pub pair_radius: f64,
    /// `1 − F̂(pair_radius)`.
    pub empty_prob: f64,
    /// Displacements `v`, `‖v‖ <= pair_radius`.
    #[serde(with = "serde_arrays")]
    pub displacements: Vec<[f64; D]>,
    /// `1 − F̂_{0,v}(pair_radius)`: both balls empty.
    pub pair_empty: Vec<f64>,
    /// Volume element of the displacement quadrature.
    pub cell_volume: f64,
    pub chains: usize,
    /// Reference points per chain.
    pub references: usize,
}

impl<const D: usize> EmptySpaceEstimates<D> {
    /// `F̂(r)` by linear interpolation in the table.
    pub fn f_at(&self, r: f64) -> Option<f64> {
        let i = self.radii.iter().position(|&x| x >= r)?;
        if self.radii[i] == r {
            return Some(self.f_hat[i]);
        }
        if i == 0 {
            return None;
        }
        let (x0, x1) = (self.radii[i - 1], self.radii[i]);
        let t = (r - x0) / (x1 - x0);
        Some(self.f_hat[i - 1] + t * (self.f_hat[i] - self.f_hat[i - 1]))
    }
}

mod serde_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(v: &[[f64; D]], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|a| a.to_vec()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<Vec<[f64; D]>, De::Error> {
        let raw = Vec::<Vec<f64>>::deserialize(d)?;
        raw.into_iter()
            .map(|v| <[f64; D]>::try_from(v.as_slice()).map_err(|_| serde::de::Error::custom(format!("expected {D} coordinates"))))
            .collect()
    }
}

/// Per-chain hit counts, summed over chains.
#[derive(Clone, Debug, Default)]
struct Tally {
    within: Vec<u64>,
    references: u64,
    empty: u64,
    pair_hits: Vec<u64>,
    pair_total: Vec<u64>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        if self.within.is_empty() {
            return o;
        }
        for (a, b) in self.within.iter_mut().zip(&o.within) {
            *a += b;
        }
        for (a, b) in self.pair_hits.iter_mut().zip(&o.pair_hits) {
            *a += b;
        }
        for (a, b) in self.pair_total.iter_mut().zip(&o.pair_total) {
            *a += b;
        }
        self.references += o.references;
        self.empty += o.empty;
        self
    }
}

/// Distance from each node to the nearest point, capped at `cap` (`+∞` beyond).
fn distance_field<const D: usize>(x: &PointPattern<f64, D>, grid: &QuadratureGrid<f64, D>, cap: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; grid.len()];
    for p in x.iter() {
        grid.visit_ball(p, cap, |id| {
            let d = grid.node(id).distance(p);
            if d < dist[id] {
                dist[id] = d;
            }
        });
    }
    dist
}

fn tally_pattern<const D: usize>(
    x: &PointPattern<f64, D>,
    grid: &QuadratureGrid<f64, D>,
    design: &EmptySpaceDesign,
    offsets: &[[i64; D]],
) -> Tally {
    let dist = distance_field(x, grid, design.reach());
    let counts = grid.counts();
    let mut t = Tally {
        within: vec![0; design.radii.len()],
        pair_hits: vec![0; offsets.len()],
        pair_total: vec![0; offsets.len()],
        ..Tally::default()
    };
    let r = design.pair_radius;
    for id in 0..grid.len() {
        let m = grid.multi_index(id);
        if m.iter().any(|&i| i % design.stride != 0) {
            continue;
        }
        t.references += 1;
        let d = dist[id];
        for (j, &rj) in design.radii.iter().enumerate() {
            if d <= rj {
                t.within[j] += 1;
            }
        }
        let empty_here = d > r;
        if empty_here {
            t.empty += 1;
        }
        'offsets: for (k, o) in offsets.iter().enumerate() {
            let mut other = [0usize; D];
            for a in 0..D {
                let c = m[a] as i64 + o[a];
                if c < 0 || c >= counts[a] as i64 {
                    continue 'offsets;
                }
                other[a] = c as usize;
            }
            t.pair_total[k] += 1;
            if empty_here && dist[grid.linear_index(&other)] > r {
                t.pair_hits[k] += 1;
            }
        }
    }
    t
}

fn reference_grid<const D: usize>(window: &Window<f64, D>, design: &EmptySpaceDesign) -> Result<QuadratureGrid<f64, D>> {
    QuadratureGrid::new(window.erode(design.reach())?, design.spacing)
}

/// Empty-space frequencies from already simulated patterns on `window`.
pub fn empty_space_from_patterns<const D: usize>(
    patterns: &[PointPattern<f64, D>],
    window: &Window<f64, D>,
    design: &EmptySpaceDesign,
) -> Result<EmptySpaceEstimates<D>> {
    design.validate()?;
    if patterns.is_empty() {
        return Err(Error::invalid("at least one pattern is required"));
    }
    let grid = reference_grid(window, design)?;
    let offsets = lattice_ball_offsets(grid.spacing(), design.pair_radius);
    let total = patterns
        .par_iter()
        .map(|x| tally_pattern(x, &grid, design, &offsets))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge);
    Ok(finish(&total, &grid, design, &offsets, patterns.len()))
}

fn finish<const D: usize>(
    t: &Tally,
    grid: &QuadratureGrid<f64, D>,
    design: &EmptySpaceDesign,
    offsets: &[[i64; D]],
    chains: usize,
) -> EmptySpaceEstimates<D> {
    let refs = t.references as f64;
    let spacing = grid.spacing();
    let (displacements, pair_empty): (Vec<[f64; D]>, Vec<f64>) = offsets
        .iter()
        .zip(t.pair_hits.iter().zip(&t.pair_total))
        .filter(|(_, (_, &n))| n > 0)
        .map(|(o, (&h, &n))| (std::array::from_fn(|a| o[a] as f64 * spacing[a]), h as f64 / n as f64))
        .unzip();
    EmptySpaceEstimates {
        radii: design.radii.clone(),
        f_hat: t.within.iter().map(|&c| c as f64 / refs).collect(),
        pair_radius: design.pair_radius,
        empty_prob: t.empty as f64 / refs,
        displacements,
        pair_empty,
        cell_volume: grid.cell_volume(),
        chains,
        references: t.references as usize / chains.max(1),
    }
}

/// Simulates `n_chains` independent patterns (chain `c` seeded with
/// `derive_seed(master_seed, [c])`) and tabulates how often balls around
/// interior lattice points, and pairs of them, are empty.
pub fn estimate_empty_space<const D: usize>(
    model: &GibbsModel<f64>,
    window: &Window<f64, D>,
    sampler: &SamplerSettings,
    n_chains: usize,
    design: &EmptySpaceDesign,
    master_seed: u64,
) -> Result<EmptySpaceEstimates<D>> {
    design.validate()?;
    if n_chains == 0 {
        return Err(Error::invalid("at least one chain is required"));
    }
    let grid = reference_grid(window, design)?;
    let offsets = lattice_ball_offsets(grid.spacing(), design.pair_radius);
    let tallies = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let x = simulate(model, window, sampler, derive_seed(master_seed, &[c as u64]))?;
            Ok(tally_pattern(&x, &grid, design, &offsets))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    Ok(finish(&total, &grid, design, &offsets, n_chains))
}

/// Volume of the union of two balls of radius `r` whose centres are `d` apart
/// (`D` = 2 or 3).
pub fn two_ball_union_volume(dim: usize, r: f64, d: f64) -> Result<f64> {
    let d = d.abs();
    let single = ball_volume::<f64>(dim, r);
    if d >= 2.0 * r {
        return Ok(2.0 * single);
    }
    let lens = match dim {
        2 => 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt(),
        3 => PI * (4.0 * r + d) * (2.0 * r - d).powi(2) / 12.0,
        _ => return Err(Error::invalid(format!("two-ball union implemented for d = 2, 3, not {dim}"))),
    };
    Ok(2.0 * single - lens)
}

/// Exact Poisson(β) tables on the same lattice `estimate_empty_space` would
/// use: `F(r) = 1 − exp(−β ω_D r^D)` and `1 − F_{0,v}(R̃) = exp(−β |B(0,R̃) ∪ B(v,R̃)|)`.
pub fn poisson_empty_space<const D: usize>(beta: f64, design: &EmptySpaceDesign) -> Result<EmptySpaceEstimates<D>> {
    design.validate()?;
    let h = design.spacing;
    let offsets = lattice_ball_offsets(&[h; D], design.pair_radius);
    let r = design.pair_radius;
    let mut displacements = Vec::with_capacity(offsets.len());
    let mut pair_empty = Vec::with_capacity(offsets.len());
    for o in &offsets {
        let v: [f64; D] = std::array::from_fn(|a| o[a] as f64 * h);
        let d = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        pair_empty.push((-beta * two_ball_union_volume(D, r, d)?).exp());
        displacements.push(v);
    }
    Ok(EmptySpaceEstimates {
        radii: design.radii.clone(),
        f_hat: design.radii.iter().map(|&s| 1.0 - (-beta * ball_volume::<f64>(D, s)).exp()).collect(),
        pair_radius: r,
        empty_prob: (-beta * ball_volume::<f64>(D, r)).exp(),
        displacements,
        pair_empty,
        cell_volume: h.powi(D as i32),
        chains: 0,
        references: 0,
    })
}

/// `σ² = β⋆/(1 − F(R̃)) + β⋆²/(1 − F(R̃))² ∫_{B(0,R̃)} (1 − F_{0,v}(R̃)) dv`
/// with `R̃ = ese.pair_radius`, the integral as a sum over the tabulated
/// displacements.
pub fn sigma2_theoretical<const D: usize>(beta_star: f64, ese: &EmptySpaceEstimates<D>) -> Result<f64> {
    if !(beta_star >= 0.0 && beta_star.is_finite()) {
        return Err(Error::invalid(format!("beta must be finite and non-negative, got {beta_star}")));
    }
    if beta_star == 0.0 {
        return Ok(0.0);
    }
    let e = ese.empty_prob;
    if !(e > 0.0) {
        return Err(Error::DegenerateEstimate { n_isolated: 0, empty_volume: 0.0 });
    }
    let integral = ese.cell_volume * ese.pair_empty.iter().sum::<f64>();
    Ok(beta_star / e + beta_star * beta_star * integral / (e * e))
}

/// Planar Poisson `σ²(β, R̃)` from the void probabilities, reduced to
/// `β e^{βπR̃²} + 2πβ² ∫_0^R̃ ρ exp(β lens(ρ)) dρ` and integrated by
/// composite Simpson on 4096 panels.
pub fn poisson_sigma2_planar(beta: f64, r: f64) -> f64 {
    let lens = |rho: f64| 2.0 * r * r * (rho / (2.0 * r)).acos() - 0.5 * rho * (4.0 * r * r - rho * rho).sqrt();
    let f = |rho: f64| rho * (beta * lens(rho)).exp();
    let n = 4096;
    let h = r / n as f64;
    let mut s = f(0.0) + f(r);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    beta * (beta * PI * r * r).exp() + 2.0 * PI * beta * beta * s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_volume_limits() {
        let r = 0.3;
        assert!((two_ball_union_volume(2, r, 0.0).unwrap() - PI * r * r).abs() < 1e-15);
        assert!((two_ball_union_volume(2, r, 0.6).unwrap() - 2.0 * PI * r * r).abs() < 1e-12);
        let v3 = 4.0 / 3.0 * PI * r.powi(3);
        assert!((two_ball_union_volume(3, r, 0.0).unwrap() - v3).abs() < 1e-15);
        assert!((two_ball_union_volume(3, r, 0.6).unwrap() - 2.0 * v3).abs() < 1e-12);
    }

    #[test]
    fn zero_intensity_gives_zero_variance() {
        let ese = poisson_empty_space::<2>(0.0, &EmptySpaceDesign::for_radius(0.05)).unwrap();
        assert_eq!(sigma2_theoretical(0.0, &ese).unwrap(), 0.0);
    }

    #[test]
    fn full_coverage_is_degenerate() {
        let mut ese = poisson_empty_space::<2>(100.0, &EmptySpaceDesign::for_radius(0.05)).unwrap();
        ese.empty_prob = 0.0;
        assert!(matches!(sigma2_theoretical(100.0, &ese), Err(Error::DegenerateEstimate { .. })));
    }

    #[test]
    fn low_intensity_variance_tends_to_beta() {
        // As β → 0, σ² → β.
        let s = poisson_sigma2_planar(1e-6, 0.05);
        assert!((s / 1e-6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn interpolation() {
        let ese = poisson_empty_space::<2>(200.0, &EmptySpaceDesign::for_radius(0.05)).unwrap();
        assert_eq!(ese.f_at(0.0), Some(0.0));
        let mid = ese.f_at(0.05 * 1.5 / 20.0).unwrap();
        assert!(mid > ese.f_hat[1] && mid < ese.f_hat[2]);
        assert_eq!(ese.f_at(1.0), None);
    }
}
