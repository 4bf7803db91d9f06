//! Midpoint lattices and rasterised coverage of unions of balls.

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::num::Real;

/// Midpoint rule lattice tiling a window.
///
/// The requested spacing is shrunk per axis so that a whole number of cells
/// tiles each side exactly: `n_k = ceil(side_k / h)`, `h_k = side_k / n_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid<F, const D: usize> {
    window: Window<F, D>,
    counts: [usize; D],
    spacing: [F; D],
}

/// Hard cap on lattice size, to turn absurd resolutions into errors.
const MAX_NODES: f64 = 2.0e8;

impl<F: Real, const D: usize> QuadratureGrid<F, D> {
    pub fn new(window: Window<F, D>, h: F) -> Result<Self> {
        if !(h > F::zero()) || !h.is_finite() {
            return Err(Error::InvalidResolution(format!("spacing must be positive, got {h}")));
        }
        let mut counts = [0usize; D];
        let mut spacing = [F::zero(); D];
        let mut total = 1.0f64;
        for k in 0..D {
            let n = (window.side(k) / h).ceil().as_f64().max(1.0);
            total *= n;
            if total > MAX_NODES {
                return Err(Error::InvalidResolution(format!("spacing {h} gives more than {MAX_NODES} nodes")));
            }
            counts[k] = n as usize;
            spacing[k] = window.side(k) / F::from_usize_lossy(counts[k]);
        }
        Ok(Self { window, counts, spacing })
    }

    pub fn window(&self) -> &Window<F, D> {
        &self.window
    }

    pub fn counts(&self) -> &[usize; D] {
        &self.counts
    }

    pub fn spacing(&self) -> &[F; D] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume carried by each node.
    pub fn cell_volume(&self) -> F {
        self.spacing.iter().fold(F::one(), |a, &b| a * b)
    }

    #[inline]
    pub fn coord(&self, k: usize, i: usize) -> F {
        self.window.lower()[k] + (F::from_usize_lossy(i) + F::lit(0.5)) * self.spacing[k]
    }

    /// Multi-index of a linear node id, axis 0 varying fastest.
    #[inline]
    pub fn multi_index(&self, mut id: usize) -> [usize; D] {
        let mut m = [0usize; D];
        for k in 0..D {
            m[k] = id % self.counts[k];
            id /= self.counts[k];
        }
        m
    }

    #[inline]
    pub fn linear_index(&self, m: &[usize; D]) -> usize {
        let mut id = 0;
        for k in (0..D).rev() {
            id = id * self.counts[k] + m[k];
        }
        id
    }

    #[inline]
    pub fn node(&self, id: usize) -> Point<F, D> {
        let m = self.multi_index(id);
        let mut c = [F::zero(); D];
        for k in 0..D {
            c[k] = self.coord(k, m[k]);
        }
        Point::new(c)
    }

    /// Inclusive per-axis node ranges whose nodes may lie within `r` of `p`,
    /// or `None` when the ball misses the lattice entirely.
    fn node_box(&self, p: &Point<F, D>, r: F) -> Option<([usize; D], [usize; D])> {
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        for k in 0..D {
            let s = self.spacing[k];
            let base = self.window.lower()[k];
            // One node of slack each side; the exact distance test decides.
            let a = ((p.coords[k] - r - base) / s - F::lit(0.5)).floor().as_f64() - 1.0;
            let b = ((p.coords[k] + r - base) / s - F::lit(0.5)).ceil().as_f64() + 1.0;
            let last = (self.counts[k] - 1) as f64;
            if b < 0.0 || a > last {
                return None;
            }
            lo[k] = a.max(0.0) as usize;
            hi[k] = b.min(last) as usize;
        }
        Some((lo, hi))
    }

    /// Visits the ids of the nodes `u` with `‖u − p‖ <= r`.
    pub fn visit_ball<G: FnMut(usize)>(&self, p: &Point<F, D>, r: F, mut f: G) {
        let Some((lo, hi)) = self.node_box(p, r) else { return };
        let mut m = lo;
        loop {
            let mut c = [F::zero(); D];
            for k in 0..D {
                c[k] = self.coord(k, m[k]);
            }
            if Point::new(c).distance(p) <= r {
                f(self.linear_index(&m));
            }
            let mut k = 0;
            loop {
                if k == D {
                    return;
                }
                if m[k] < hi[k] {
                    m[k] += 1;
                    break;
                }
                m[k] = lo[k];
                k += 1;
            }
        }
    }

    /// `mask[id]` is true when node `id` lies within closed distance `r` of some point.
    pub fn coverage_mask<'a, I>(&self, points: I, r: F) -> Vec<bool>
    where
        I: IntoIterator<Item = &'a Point<F, D>>,
    {
        let mut mask = vec![false; self.len()];
        for p in points {
            self.visit_ball(p, r, |id| mask[id] = true);
        }
        mask
    }

    /// Integer lattice offsets `o` with `‖o ∘ spacing‖ <= r`.
    pub fn ball_offsets(&self, r: F) -> Vec<[i64; D]> {
        lattice_ball_offsets(&self.spacing, r)
    }
}

/// Integer offsets `o` with `‖o ∘ spacing‖ <= r`, in odometer order (axis 0 fastest).
pub fn lattice_ball_offsets<F: Real, const D: usize>(spacing: &[F; D], r: F) -> Vec<[i64; D]> {
    let mut reach = [0i64; D];
    for k in 0..D {
        reach[k] = (r / spacing[k]).floor().to_i64().unwrap_or(0) + 1;
    }
    let mut out = Vec::new();
    let mut o = reach.map(|m| -m);
    loop {
        let mut s = F::zero();
        for k in 0..D {
            let d = F::from_i64(o[k]).unwrap() * spacing[k];
            s = s + d * d;
        }
        if s.sqrt() <= r {
            out.push(o);
        }
        let mut k = 0;
        loop {
            if k == D {
                return out;
            }
            if o[k] < reach[k] {
                o[k] += 1;
                break;
            }
            o[k] = -reach[k];
            k += 1;
        }
    }
}
