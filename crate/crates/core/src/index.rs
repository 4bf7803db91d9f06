//! Uniform grid index for fixed-radius neighbour queries.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern};
use crate::num::Real;

/// Anything that can enumerate the points within a closed ball.
pub trait Neighborhood<F: Real, const D: usize> {
    /// Calls `f(id, point, distance)` for every point with `distance <= r`.
    fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(&self, u: &Point<F, D>, r: F, f: G);

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn count_within(&self, u: &Point<F, D>, r: F) -> usize {
        let mut n = 0;
        self.visit_within(u, r, |_, _, _| n += 1);
        n
    }
}

/// Linear scan.
impl<F: Real, const D: usize> Neighborhood<F, D> for PointPattern<F, D> {
    fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(&self, u: &Point<F, D>, r: F, mut f: G) {
        for (i, p) in self.points().iter().enumerate() {
            let d = u.distance(p);
            if d <= r {
                f(i, p, d);
            }
        }
    }

    fn len(&self) -> usize {
        PointPattern::len(self)
    }
}

/// Hides one point of an underlying neighbourhood, giving `x \ v`.
pub struct Excluding<'a, N> {
    pub inner: &'a N,
    pub id: usize,
}

impl<F: Real, const D: usize, N: Neighborhood<F, D>> Neighborhood<F, D> for Excluding<'_, N> {
    fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(&self, u: &Point<F, D>, r: F, mut f: G) {
        let skip = self.id;
        self.inner.visit_within(u, r, |i, p, d| {
            if i != skip {
                f(i, p, d)
            }
        });
    }

    fn len(&self) -> usize {
        self.inner.len().saturating_sub(1)
    }
}

/// Buckets of point ids keyed by integer cell coordinates `floor(x / cell_size)`.
#[derive(Clone, Debug)]
pub struct SpatialIndex<F, const D: usize> {
    cell_size: F,
    buckets: FxHashMap<[i64; D], Vec<u32>>,
}

impl<F: Real, const D: usize> SpatialIndex<F, D> {
    pub fn new(cell_size: F) -> Result<Self> {
        if !(cell_size > F::zero()) || !cell_size.is_finite() {
            return Err(Error::invalid(format!("cell size must be positive and finite, got {cell_size}")));
        }
        Ok(Self { cell_size, buckets: FxHashMap::default() })
    }

    pub fn build(pattern: &PointPattern<F, D>, cell_size: F) -> Result<Self> {
        let mut index = Self::new(cell_size)?;
        for (i, p) in pattern.points().iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
            }
            index.insert(i, p);
        }
        Ok(index)
    }

    pub fn cell_size(&self) -> F {
        self.cell_size
    }

    /// Sizes of the non-empty buckets.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.buckets.values().map(Vec::len).filter(|&n| n > 0).collect();
        sizes.sort_unstable();
        sizes
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.values().filter(|b| !b.is_empty()).count()
    }

    #[inline]
    fn cell_of(&self, p: &Point<F, D>) -> [i64; D] {
        p.coords.map(|c| (c / self.cell_size).floor().to_i64().unwrap_or(i64::MAX))
    }

    pub(crate) fn insert(&mut self, id: usize, p: &Point<F, D>) {
        let key = self.cell_of(p);
        self.buckets.entry(key).or_default().push(id as u32);
    }

    pub(crate) fn remove(&mut self, id: usize, p: &Point<F, D>) {
        let key = self.cell_of(p);
        if let Some(bucket) = self.buckets.get_mut(&key) {
            if let Some(pos) = bucket.iter().position(|&j| j as usize == id) {
                bucket.swap_remove(pos);
            }
            if bucket.is_empty() {
                self.buckets.remove(&key);
            }
        }
    }

    /// Renames the id of the point stored at `p`.
    pub(crate) fn relabel(&mut self, from: usize, to: usize, p: &Point<F, D>) {
        let key = self.cell_of(p);
        if let Some(bucket) = self.buckets.get_mut(&key) {
            if let Some(slot) = bucket.iter_mut().find(|j| **j as usize == from) {
                *slot = to as u32;
            }
        }
    }

    /// Visits the ids in every bucket that may hold a point within `r` of `u`.
    pub fn visit_candidates<G: FnMut(usize)>(&self, u: &Point<F, D>, r: F, mut f: G) {
        let mut lo = [0i64; D];
        let mut hi = [0i64; D];
        let mut cells: f64 = 1.0;
        for k in 0..D {
            lo[k] = ((u.coords[k] - r) / self.cell_size).floor().to_i64().unwrap_or(i64::MIN);
            hi[k] = ((u.coords[k] + r) / self.cell_size).floor().to_i64().unwrap_or(i64::MAX);
            cells *= (hi[k] as f64 - lo[k] as f64) + 1.0;
        }
        if cells > self.buckets.len() as f64 {
            // Scanning the occupied buckets is cheaper than the query box.
            for (key, bucket) in &self.buckets {
                if (0..D).all(|k| lo[k] <= key[k] && key[k] <= hi[k]) {
                    bucket.iter().for_each(|&i| f(i as usize));
                }
            }
            return;
        }
        let mut c = lo;
        loop {
            if let Some(bucket) = self.buckets.get(&c) {
                bucket.iter().for_each(|&i| f(i as usize));
            }
            let mut k = 0;
            loop {
                if k == D {
                    return;
                }
                if c[k] < hi[k] {
                    c[k] += 1;
                    break;
                }
                c[k] = lo[k];
                k += 1;
            }
        }
    }

    pub fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(
        &self,
        points: &[Point<F, D>],
        u: &Point<F, D>,
        r: F,
        mut f: G,
    ) {
        self.visit_candidates(u, r, |i| {
            let p = &points[i];
            let d = u.distance(p);
            if d <= r {
                f(i, p, d);
            }
        });
    }

    /// Ids of the points within closed distance `r` of `u`, sorted.
    pub fn neighbors(&self, points: &[Point<F, D>], u: &Point<F, D>, r: F) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_within(points, u, r, |i, _, _| out.push(i));
        out.sort_unstable();
        out
    }
}

/// Builds the grid index of `pattern` with the given cell size.
pub fn build_index<F: Real, const D: usize>(pattern: &PointPattern<F, D>, cell_size: F) -> Result<SpatialIndex<F, D>> {
    SpatialIndex::build(pattern, cell_size)
}

/// A pattern paired with its grid index.
#[derive(Clone, Debug)]
pub struct IndexedPattern<'a, F, const D: usize> {
    pub pattern: &'a PointPattern<F, D>,
    pub index: SpatialIndex<F, D>,
}

impl<'a, F: Real, const D: usize> IndexedPattern<'a, F, D> {
    pub fn new(pattern: &'a PointPattern<F, D>, cell_size: F) -> Result<Self> {
        Ok(Self { pattern, index: SpatialIndex::build(pattern, cell_size)? })
    }
}

impl<F: Real, const D: usize> Neighborhood<F, D> for IndexedPattern<'_, F, D> {
    fn visit_within<G: FnMut(usize, &Point<F, D>, F)>(&self, u: &Point<F, D>, r: F, f: G) {
        self.index.visit_within(self.pattern.points(), u, r, f)
    }

    fn len(&self) -> usize {
        self.pattern.len()
    }
}

/// `d(u, x)`, the distance from `u` to the nearest point of `x`; `+∞` when `x` is empty.
pub fn min_dist<F: Real, const D: usize>(
    u: &Point<F, D>,
    pattern: &PointPattern<F, D>,
    index: &SpatialIndex<F, D>,
) -> Result<F> {
    if !u.is_finite() {
        return Err(Error::invalid("query point has non-finite coordinates"));
    }
    if pattern.is_empty() {
        return Ok(F::infinity());
    }
    let mut r = index.cell_size();
    loop {
        let mut best = F::infinity();
        index.visit_within(pattern.points(), u, r, |_, _, d| best = best.min(d));
        if best <= r {
            return Ok(best);
        }
        // Once the query box covers more cells than there are buckets the
        // candidate scan is already exhaustive; finish with a linear pass.
        let box_cells = (F::lit(2.0) * r / index.cell_size() + F::one()).powi(D as i32);
        if box_cells.as_f64() > index.buckets.len() as f64 {
            return Ok(pattern.points().iter().map(|p| u.distance(p)).fold(F::infinity(), F::min));
        }
        r = r + r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_pattern_has_no_buckets() {
        let idx = build_index(&PointPattern::<f64, 2>::empty(), 0.1).unwrap();
        assert_eq!(idx.bucket_count(), 0);
    }

    #[test]
    fn shared_cell_forms_one_bucket() {
        let x = PointPattern::<f64, 2>::from_coords(&[[0.01, 0.01], [0.02, 0.05], [0.09, 0.09]]).unwrap();
        let idx = build_index(&x, 0.1).unwrap();
        assert_eq!(idx.bucket_sizes(), vec![3]);
    }

    #[test]
    fn rejects_bad_cell_size() {
        assert!(build_index(&PointPattern::<f64, 2>::empty(), 0.0).is_err());
        assert!(build_index(&PointPattern::<f64, 2>::empty(), f64::NAN).is_err());
    }

    #[test]
    fn min_dist_examples() {
        let x = PointPattern::<f64, 2>::from_coords(&[[0.03, 0.0]]).unwrap();
        let idx = build_index(&x, 0.01).unwrap();
        assert_eq!(min_dist(&Point::new([0.0, 0.0]), &x, &idx).unwrap(), 0.03);
        let e = PointPattern::<f64, 2>::empty();
        let idx = build_index(&e, 0.01).unwrap();
        assert_eq!(min_dist(&Point::new([0.0, 0.0]), &e, &idx).unwrap(), f64::INFINITY);
    }

    #[test]
    fn far_query_falls_back_to_scan() {
        let x = PointPattern::<f64, 2>::from_coords(&[[100.0, 100.0], [-3.0, 4.0]]).unwrap();
        let idx = build_index(&x, 0.001).unwrap();
        assert_eq!(min_dist(&Point::new([0.0, 0.0]), &x, &idx).unwrap(), 5.0);
    }

    #[test]
    fn dynamic_updates_keep_ids_consistent() {
        let pts = vec![Point::new([0.1, 0.1]), Point::new([0.15, 0.1]), Point::new([0.5, 0.5])];
        let x = PointPattern::<f64, 2>::new(pts.clone()).unwrap();
        let mut idx = build_index(&x, 0.1).unwrap();
        // Delete id 0 by swap-remove: id 2 becomes id 0.
        idx.remove(0, &pts[0]);
        idx.relabel(2, 0, &pts[2]);
        let moved = vec![pts[2], pts[1]];
        assert_eq!(idx.neighbors(&moved, &Point::new([0.5, 0.5]), 0.01), vec![0]);
        assert_eq!(idx.neighbors(&moved, &Point::new([0.1, 0.1]), 0.06), vec![1]);
    }
}
