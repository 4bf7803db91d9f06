//! Papangelou conditional intensities `λ(u, x) = β λ̃(u, x)` of finite-range Gibbs models.
//!
//! Every model is stored as its Poisson intensity parameter `β`, its range
//! `R`, and an [`Interaction`] describing `λ̃`. Interaction terms are
//! evaluated in log space; a hard-core violation is `-∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::index::{IndexedPattern, Neighborhood};
use crate::num::{ball_volume, Real};
use crate::quadrature::QuadratureGrid;

/// Lattice divisions of `R` used for area-interaction increments.
pub const AREA_DIVISIONS_PER_RANGE: usize = 64;

/// Higher-order interaction term `λ̃`.
#[derive(Clone, Debug, PartialEq)]
pub enum Interaction<F> {
    /// `γ^{n_[0,R](u, x)}`
    Strauss { gamma: F },
    /// Zero inside the hard core `δ`, else `γ^{n_]δ,R](u, x)}`.
    StraussHardCore { gamma: F, hard_core: F },
    /// `Π_j γ_j^{n_[R_{j-1}, R_j](u, x)}` with `R_0 = 0` and `radii = [R_1, …, R_p]`.
    PiecewiseStrauss { gammas: Vec<F>, radii: Vec<F> },
    /// `γ^{s(x ∪ u) − s(x)}` with `s` the number of triangles of side at most `R`.
    Triplets { gamma: F },
    /// `γ^{t(x ∪ u) − t(x)}`, `t(x) = Σ_v min(s, n_[0,R/2](v, x \ v))`.
    GeyerSaturation { gamma: F, saturation: F },
    /// Pairwise `log g(r) = θ⁶ r⁻⁶ − θ¹² r⁻¹²` for `0 < r <= R`.
    LennardJones { theta: F },
    /// `γ^{A(x ∪ u) − A(x)}`, `A` the volume of the union of balls of radius `R/2`.
    AreaInteraction { gamma: F },
}

impl<F> Interaction<F> {
    pub fn name(&self) -> &'static str {
        match self {
            Interaction::Strauss { .. } => "strauss",
            Interaction::StraussHardCore { .. } => "strauss_hard_core",
            Interaction::PiecewiseStrauss { .. } => "piecewise_strauss",
            Interaction::Triplets { .. } => "triplets",
            Interaction::GeyerSaturation { .. } => "geyer",
            Interaction::LennardJones { .. } => "lennard_jones",
            Interaction::AreaInteraction { .. } => "area_interaction",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsModel<F> {
    beta: F,
    range: F,
    interaction: Interaction<F>,
}

fn in_unit<F: Real>(g: F) -> bool {
    g >= F::zero() && g <= F::one()
}

/// `log γ^n`, with `0^0 = 1`.
#[inline]
fn log_pow<F: Real>(gamma: F, n: usize) -> F {
    if n == 0 {
        F::zero()
    } else {
        F::from_usize_lossy(n) * gamma.ln()
    }
}

impl<F: Real> GibbsModel<F> {
    pub fn new(beta: F, range: F, interaction: Interaction<F>) -> Result<Self> {
        if !(beta > F::zero()) || !beta.is_finite() {
            return Err(Error::model(format!("beta must be positive and finite, got {beta}")));
        }
        if !(range > F::zero()) || !range.is_finite() {
            return Err(Error::model(format!("range must be positive and finite, got {range}")));
        }
        match &interaction {
            Interaction::Strauss { gamma } | Interaction::Triplets { gamma } => {
                if !in_unit(*gamma) {
                    return Err(Error::model(format!("gamma must lie in [0, 1], got {gamma}")));
                }
            }
            Interaction::StraussHardCore { gamma, hard_core } => {
                if !in_unit(*gamma) {
                    return Err(Error::model(format!("gamma must lie in [0, 1], got {gamma}")));
                }
                if !(*hard_core > F::zero() && *hard_core < range) {
                    return Err(Error::model(format!("hard core must satisfy 0 < delta < R, got {hard_core}")));
                }
            }
            Interaction::PiecewiseStrauss { gammas, radii } => {
                if gammas.is_empty() || gammas.len() != radii.len() {
                    return Err(Error::model("piecewise Strauss needs one gamma per radius"));
                }
                if let Some(g) = gammas.iter().find(|g| !in_unit(**g)) {
                    return Err(Error::model(format!("gammas must lie in [0, 1], got {g}")));
                }
                let mut prev = F::zero();
                for r in radii {
                    if !(*r > prev) {
                        return Err(Error::model("piecewise radii must be strictly increasing from 0"));
                    }
                    prev = *r;
                }
                if prev != range {
                    return Err(Error::model(format!("last piecewise radius {prev} must equal the range {range}")));
                }
            }
            Interaction::GeyerSaturation { gamma, saturation } => {
                if !(*gamma > F::zero()) || !gamma.is_finite() {
                    return Err(Error::model(format!("Geyer gamma must be positive, got {gamma}")));
                }
                if !(*saturation >= F::one()) || !saturation.is_finite() {
                    return Err(Error::model(format!("saturation must be >= 1, got {saturation}")));
                }
            }
            Interaction::LennardJones { theta } => {
                if !(*theta > F::zero()) || !theta.is_finite() {
                    return Err(Error::model(format!("theta must be positive, got {theta}")));
                }
            }
            Interaction::AreaInteraction { gamma } => {
                if !(*gamma > F::zero()) || !gamma.is_finite() {
                    return Err(Error::model(format!("area-interaction gamma must be positive, got {gamma}")));
                }
            }
        }
        Ok(Self { beta, range, interaction })
    }

    /// Homogeneous Poisson process, as a Strauss model with `γ = 1`.
    pub fn poisson(beta: F, range: F) -> Result<Self> {
        Self::new(beta, range, Interaction::Strauss { gamma: F::one() })
    }

    pub fn strauss(beta: F, gamma: F, range: F) -> Result<Self> {
        Self::new(beta, range, Interaction::Strauss { gamma })
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    pub fn range(&self) -> F {
        self.range
    }

    pub fn interaction(&self) -> &Interaction<F> {
        &self.interaction
    }

    pub fn with_beta(&self, beta: F) -> Result<Self> {
        Self::new(beta, self.range, self.interaction.clone())
    }

    /// True when `λ̃(u, ∅) = 1`, which is what makes `β` identifiable.
    pub fn satisfies_identifiability(&self) -> bool {
        !matches!(self.interaction, Interaction::AreaInteraction { .. })
    }

    /// True for a Strauss model with `γ = 1`.
    pub fn is_poisson(&self) -> bool {
        matches!(self.interaction, Interaction::Strauss { gamma } if gamma == F::one())
    }

    /// Minimum allowed inter-point distance, if any.
    pub fn hard_core(&self) -> Option<F> {
        match self.interaction {
            Interaction::StraussHardCore { hard_core, .. } => Some(hard_core),
            _ => None,
        }
    }

    /// `log λ̃(u, x)` for `u ∉ x`, querying only points of `x` within `R` of `u`.
    pub fn log_interaction_in<const D: usize, N: Neighborhood<F, D>>(&self, u: &Point<F, D>, x: &N) -> F {
        let range = self.range;
        match &self.interaction {
            Interaction::Strauss { gamma } => log_pow(*gamma, x.count_within(u, range)),
            Interaction::StraussHardCore { gamma, hard_core } => {
                let mut blocked = false;
                let mut n = 0;
                x.visit_within(u, range, |_, _, d| {
                    if d <= *hard_core {
                        blocked = true;
                    } else {
                        n += 1;
                    }
                });
                if blocked {
                    F::neg_infinity()
                } else {
                    log_pow(*gamma, n)
                }
            }
            Interaction::PiecewiseStrauss { gammas, radii } => {
                let mut counts = vec![0usize; radii.len()];
                x.visit_within(u, range, |_, _, d| {
                    let mut lower = F::zero();
                    for (j, r) in radii.iter().enumerate() {
                        if d >= lower && d <= *r {
                            counts[j] += 1;
                        }
                        lower = *r;
                    }
                });
                gammas.iter().zip(&counts).map(|(g, &n)| log_pow(*g, n)).fold(F::zero(), |a, b| a + b)
            }
            Interaction::Triplets { gamma } => {
                let mut nbrs: Vec<Point<F, D>> = Vec::new();
                x.visit_within(u, range, |_, p, _| nbrs.push(*p));
                let mut closed = 0;
                for (i, a) in nbrs.iter().enumerate() {
                    closed += nbrs[i + 1..].iter().filter(|b| a.distance(b) <= range).count();
                }
                log_pow(*gamma, closed)
            }
            Interaction::GeyerSaturation { gamma, saturation } => {
                let r = range / F::lit(2.0);
                let s = *saturation;
                let mut nbrs: Vec<(usize, Point<F, D>)> = Vec::new();
                x.visit_within(u, r, |i, p, _| nbrs.push((i, *p)));
                let mut delta = F::from_usize_lossy(nbrs.len()).min(s);
                for (id, v) in &nbrs {
                    // Neighbours of v in x \ v.
                    let mut n_v = 0usize;
                    x.visit_within(v, r, |j, _, _| {
                        if j != *id {
                            n_v += 1
                        }
                    });
                    let before = F::from_usize_lossy(n_v).min(s);
                    let after = F::from_usize_lossy(n_v + 1).min(s);
                    delta = delta + (after - before);
                }
                if delta == F::zero() {
                    F::zero()
                } else {
                    delta * gamma.ln()
                }
            }
            Interaction::LennardJones { theta } => {
                let mut sum = F::zero();
                x.visit_within(u, range, |_, _, d| sum = sum + lennard_jones_log_g(*theta, d));
                sum
            }
            Interaction::AreaInteraction { gamma } => {
                let r = range / F::lit(2.0);
                let increment = uncovered_ball_volume(u, x, r);
                increment * gamma.ln()
            }
        }
    }

    /// `log λ̃(u, x)`, indexing `x` on the fly.
    pub fn log_interaction<const D: usize>(&self, u: &Point<F, D>, x: &PointPattern<F, D>) -> Result<F> {
        if !u.is_finite() {
            return Err(Error::invalid("query point has non-finite coordinates"));
        }
        let indexed = IndexedPattern::new(x, self.range)?;
        Ok(self.log_interaction_in(u, &indexed))
    }

    pub fn log_papangelou_in<const D: usize, N: Neighborhood<F, D>>(&self, u: &Point<F, D>, x: &N) -> F {
        self.beta.ln() + self.log_interaction_in(u, x)
    }

    /// `λ(u, x) = β λ̃(u, x)`; zero when a hard core is violated.
    pub fn papangelou<const D: usize>(&self, u: &Point<F, D>, x: &PointPattern<F, D>) -> Result<F> {
        Ok(self.beta * self.log_interaction(u, x)?.exp())
    }
}

/// `log g(r)` of the finite-range Lennard-Jones pair potential, `r <= R` assumed.
#[inline]
pub fn lennard_jones_log_g<F: Real>(theta: F, r: F) -> F {
    let t = (theta / r).powi(6);
    // t(1 − t) stays −∞ rather than NaN as r → 0.
    t * (F::one() - t)
}

/// `|B(u, r) \ ∪_{v ∈ x} B(v, r)|`. Exact when no ball overlaps; otherwise the
/// uncovered fraction of a midpoint lattice of spacing `2r / AREA_DIVISIONS_PER_RANGE`
/// inside `B(u, r)`, times the exact ball volume.
fn uncovered_ball_volume<F: Real, const D: usize, N: Neighborhood<F, D>>(u: &Point<F, D>, x: &N, r: F) -> F {
    let full = ball_volume::<F>(D, r);
    let mut nbrs: Vec<Point<F, D>> = Vec::new();
    x.visit_within(u, r + r, |_, p, _| nbrs.push(*p));
    if nbrs.is_empty() {
        return full;
    }
    let half = AREA_DIVISIONS_PER_RANGE / 2;
    let h = (r + r) / F::from_usize_lossy(AREA_DIVISIONS_PER_RANGE);
    let mut inside = 0usize;
    let mut uncovered = 0usize;
    let mut m = [0usize; D];
    loop {
        let mut c = u.coords;
        for k in 0..D {
            let offset = (F::from_usize_lossy(m[k]) - F::from_usize_lossy(half) + F::lit(0.5)) * h;
            c[k] = c[k] + offset;
        }
        let q = Point::new(c);
        if q.distance(u) <= r {
            inside += 1;
            if !nbrs.iter().any(|v| q.distance(v) <= r) {
                uncovered += 1;
            }
        }
        let mut k = 0;
        loop {
            if k == D {
                return full * F::from_usize_lossy(uncovered) / F::from_usize_lossy(inside);
            }
            if m[k] + 1 < 2 * half {
                m[k] += 1;
                break;
            }
            m[k] = 0;
            k += 1;
        }
    }
}

/// Number of unordered triples of `x` whose three pairwise distances are all `<= r`.
pub fn triplet_count<F: Real, const D: usize>(x: &PointPattern<F, D>, r: F) -> Result<usize> {
    if !(r > F::zero()) {
        return Err(Error::invalid(format!("triplet radius must be positive, got {r}")));
    }
    let indexed = IndexedPattern::new(x, r)?;
    let pts = x.points();
    let mut total = 0;
    let mut nbrs = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        nbrs.clear();
        indexed.visit_within(a, r, |j, _, _| {
            if j > i {
                nbrs.push(j)
            }
        });
        for (k, &j) in nbrs.iter().enumerate() {
            total += nbrs[k + 1..].iter().filter(|&&l| pts[j].distance(&pts[l]) <= r).count();
        }
    }
    Ok(total)
}

/// `|region ∩ ∪_{v ∈ x} B(v, r)|` by the midpoint rule at spacing `h`.
pub fn ball_union_volume<F: Real, const D: usize>(x: &PointPattern<F, D>, r: F, region: &Window<F, D>, h: F) -> Result<F> {
    if !(r > F::zero()) {
        return Err(Error::invalid(format!("ball radius must be positive, got {r}")));
    }
    let grid = QuadratureGrid::new(*region, h)?;
    let covered = grid.coverage_mask(x.iter(), r).iter().filter(|&&c| c).count();
    Ok(grid.cell_volume() * F::from_usize_lossy(covered))
}

/// Model description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    pub beta: f64,
    #[serde(rename = "R")]
    pub range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Piecewise Strauss breakpoints `R_1 < … < R_p`; equally spaced when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl ModelConfig {
    fn need(&self, v: Option<f64>, key: &str) -> Result<f64> {
        v.ok_or_else(|| Error::model(format!("model `{}` requires key `{key}`", self.model)))
    }

    pub fn build<F: Real>(&self) -> Result<GibbsModel<F>> {
        let lit = F::lit;
        let interaction = match self.model.to_ascii_lowercase().replace('-', "_").as_str() {
            "poisson" => Interaction::Strauss { gamma: F::one() },
            "strauss" => Interaction::Strauss { gamma: lit(self.need(self.gamma, "gamma")?) },
            "strauss_hard_core" | "strausshardcore" | "hardcore_strauss" => Interaction::StraussHardCore {
                gamma: lit(self.need(self.gamma, "gamma")?),
                hard_core: lit(self.need(self.delta, "delta")?),
            },
            "piecewise_strauss" | "piecewisestrauss" => {
                let gammas = self.gammas.clone().ok_or_else(|| Error::model("piecewise Strauss requires `gammas`"))?;
                let p = gammas.len();
                let radii = match &self.radii {
                    Some(r) => r.clone(),
                    None => (1..=p).map(|j| self.range * j as f64 / p as f64).collect(),
                };
                let mut radii: Vec<F> = radii.into_iter().map(lit).collect();
                if let Some(last) = radii.last_mut() {
                    // j·R/p with j = p may round away from R.
                    if (last.as_f64() - self.range).abs() <= 1e-12 * self.range {
                        *last = lit(self.range);
                    }
                }
                Interaction::PiecewiseStrauss { gammas: gammas.into_iter().map(lit).collect(), radii }
            }
            "triplets" => Interaction::Triplets { gamma: lit(self.need(self.gamma, "gamma")?) },
            "geyer" | "geyer_saturation" => Interaction::GeyerSaturation {
                gamma: lit(self.need(self.gamma, "gamma")?),
                saturation: lit(self.need(self.sat, "sat")?),
            },
            "lennard_jones" | "lennardjones" => Interaction::LennardJones { theta: lit(self.need(self.theta, "theta")?) },
            "area_interaction" | "areainteraction" => {
                Interaction::AreaInteraction { gamma: lit(self.need(self.gamma, "gamma")?) }
            }
            other => return Err(Error::model(format!("unknown model `{other}`"))),
        };
        GibbsModel::new(lit(self.beta), lit(self.range), interaction)
    }

    pub fn from_model<F: Real>(model: &GibbsModel<F>) -> Self {
        let mut cfg = ModelConfig {
            model: model.interaction().name().to_string(),
            beta: model.beta().as_f64(),
            range: model.range().as_f64(),
            gamma: None,
            gammas: None,
            radii: None,
            delta: None,
            sat: None,
            theta: None,
        };
        match model.interaction() {
            Interaction::Strauss { gamma } | Interaction::Triplets { gamma } | Interaction::AreaInteraction { gamma } => {
                cfg.gamma = Some(gamma.as_f64())
            }
            Interaction::StraussHardCore { gamma, hard_core } => {
                cfg.gamma = Some(gamma.as_f64());
                cfg.delta = Some(hard_core.as_f64());
            }
            Interaction::PiecewiseStrauss { gammas, radii } => {
                cfg.gammas = Some(gammas.iter().map(|g| g.as_f64()).collect());
                cfg.radii = Some(radii.iter().map(|g| g.as_f64()).collect());
            }
            Interaction::GeyerSaturation { gamma, saturation } => {
                cfg.gamma = Some(gamma.as_f64());
                cfg.sat = Some(saturation.as_f64());
            }
            Interaction::LennardJones { theta } => cfg.theta = Some(theta.as_f64()),
        }
        cfg
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::parse("model config", e))
        } else {
            toml::from_str(text).map_err(|e| Error::parse("model config", e))
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Named models used in the simulation study, with `R = 0.05`.
pub mod catalog {
    use super::*;

    /// Reference range `R` of the study; `R̃ = p · RANGE` for every model.
    pub const RANGE: f64 = 0.05;

    fn f<F: Real>(v: f64) -> F {
        F::lit(v)
    }

    /// Looks up `s1, s2, shc1, shc2, ps1, ps2, t1, t2, g1, g2`.
    pub fn by_name<F: Real>(name: &str) -> Result<GibbsModel<F>> {
        let r: F = f(RANGE);
        let beta: F = f(200.0);
        let third = |j: f64| f::<F>(RANGE * j / 3.0);
        match name {
            "s1" => GibbsModel::new(beta, r, Interaction::Strauss { gamma: f(0.2) }),
            "s2" => GibbsModel::new(beta, r, Interaction::Strauss { gamma: f(0.8) }),
            "shc1" => GibbsModel::new(beta, r, Interaction::StraussHardCore { gamma: f(0.2), hard_core: f(RANGE / 2.0) }),
            "shc2" => GibbsModel::new(beta, r, Interaction::StraussHardCore { gamma: f(0.8), hard_core: f(RANGE / 2.0) }),
            "ps1" => GibbsModel::new(
                beta,
                r,
                Interaction::PiecewiseStrauss { gammas: vec![f(0.8), f(0.5), f(0.2)], radii: vec![third(1.0), third(2.0), r] },
            ),
            "ps2" => GibbsModel::new(
                beta,
                r,
                Interaction::PiecewiseStrauss { gammas: vec![f(0.2), f(0.8), f(0.2)], radii: vec![third(1.0), third(2.0), r] },
            ),
            "t1" => GibbsModel::new(beta, r, Interaction::Triplets { gamma: f(0.2) }),
            "t2" => GibbsModel::new(beta, r, Interaction::Triplets { gamma: f(0.8) }),
            // Saturation disks of radius RANGE, so the Papangelou range is 2 · RANGE.
            "g1" => GibbsModel::new(beta, f(2.0 * RANGE), Interaction::GeyerSaturation { gamma: f(0.5), saturation: f(1.0) }),
            "g2" => GibbsModel::new(f(50.0), f(2.0 * RANGE), Interaction::GeyerSaturation { gamma: f(1.5), saturation: f(1.0) }),
            other => Err(Error::model(format!("unknown catalog model `{other}`"))),
        }
    }

    pub const NAMES: [&str; 10] = ["s1", "s2", "shc1", "shc2", "ps1", "ps2", "t1", "t2", "g1", "g2"];
}
