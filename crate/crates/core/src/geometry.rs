//! Points, point patterns and axis-aligned observation windows.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::Neighborhood;
use crate::num::Real;

/// A location in `D`-dimensional space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<F, const D: usize> {
    pub coords: [F; D],
}

impl<F: Real, const D: usize> Point<F, D> {
    pub const fn new(coords: [F; D]) -> Self {
        Self { coords }
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance. All range tests in the crate go through this
    /// function so that boundary ties are decided identically everywhere.
    #[inline]
    pub fn distance(&self, other: &Self) -> F {
        let mut s = F::zero();
        for k in 0..D {
            let d = self.coords[k] - other.coords[k];
            s = s + d * d;
        }
        s.sqrt()
    }

    pub fn translate(&self, shift: &[F; D]) -> Self {
        let mut coords = self.coords;
        for k in 0..D {
            coords[k] = coords[k] + shift[k];
        }
        Self { coords }
    }

    pub fn scale(&self, factor: F) -> Self {
        Self { coords: self.coords.map(|c| c * factor) }
    }
}

impl<F: Real, const D: usize> From<[F; D]> for Point<F, D> {
    fn from(coords: [F; D]) -> Self {
        Self { coords }
    }
}

/// A finite configuration of points sharing one dimension.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointPattern<F, const D: usize> {
    points: Vec<Point<F, D>>,
}

impl<F: Real, const D: usize> PointPattern<F, D> {
    pub fn new(points: Vec<Point<F, D>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub(crate) fn from_vec_unchecked(points: Vec<Point<F, D>>) -> Self {
        Self { points }
    }

    pub fn from_coords(coords: &[[F; D]]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| Point::new(c)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub const fn dim(&self) -> usize {
        D
    }

    pub fn points(&self) -> &[Point<F, D>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point<F, D>> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Point<F, D>> {
        self.points
    }

    /// Points lying in the closed box `window`.
    pub fn restrict(&self, window: &Window<F, D>) -> Self {
        Self { points: self.points.iter().copied().filter(|p| window.contains(p)).collect() }
    }

    /// Points within closed distance `r` of `u`.
    pub fn within_ball(&self, u: &Point<F, D>, r: F) -> Self {
        Self { points: self.points.iter().copied().filter(|p| u.distance(p) <= r).collect() }
    }

    pub fn with_point(&self, p: Point<F, D>) -> Self {
        let mut points = self.points.clone();
        points.push(p);
        Self { points }
    }

    pub fn without_index(&self, i: usize) -> Self {
        let mut points = self.points.clone();
        points.remove(i);
        Self { points }
    }

    pub fn translate(&self, shift: &[F; D]) -> Self {
        Self { points: self.points.iter().map(|p| p.translate(shift)).collect() }
    }

    pub fn scale(&self, factor: F) -> Self {
        Self { points: self.points.iter().map(|p| p.scale(factor)).collect() }
    }

    /// Smallest distance between two distinct points, `+∞` below two points.
    pub fn min_pairwise_distance(&self) -> F {
        let mut best = F::infinity();
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    /// Writes the pattern as CSV with header `x,y[,z]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header = &["x", "y", "z"][..D.min(3)];
        w.write_record(header).map_err(|e| Error::parse("pattern csv", e))?;
        for p in &self.points {
            w.write_record(p.coords.iter().map(|c| c.to_string()))
                .map_err(|e| Error::parse("pattern csv", e))?;
        }
        w.flush().map_err(|e| Error::parse("pattern csv", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a CSV pattern; the header must name exactly `D` columns.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(|e| Error::parse("pattern csv", e))?.clone();
        let expected = &["x", "y", "z"][..D.min(3)];
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if D > 3 || names != expected {
            return Err(Error::parse("pattern csv", format!("expected header {expected:?}, found {names:?}")));
        }
        let mut points = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse("pattern csv", e))?;
            let mut coords = [F::zero(); D];
            for (k, c) in coords.iter_mut().enumerate() {
                let field = rec.get(k).ok_or_else(|| Error::parse("pattern csv", format!("row {row}: missing column")))?;
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse("pattern csv", format!("row {row}: {e}")))?;
                *c = F::lit(v);
            }
            points.push(Point::new(coords));
        }
        Self::new(points)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Number of coordinate columns in a pattern CSV file, from its header.
pub fn csv_dimension(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| Error::parse("pattern csv", e))?;
    Ok(header.len())
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window<F, const D: usize> {
    lower: [F; D],
    upper: [F; D],
}

impl<F: Real, const D: usize> Window<F, D> {
    pub fn new(lower: [F; D], upper: [F; D]) -> Result<Self> {
        for k in 0..D {
            if !(lower[k].is_finite() && upper[k].is_finite()) {
                return Err(Error::invalid("window bounds must be finite"));
            }
            if !(lower[k] < upper[k]) {
                return Err(Error::invalid(format!("window side {k} is empty: {} >= {}", lower[k], upper[k])));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[0, side]^D`.
    pub fn cube(side: F) -> Result<Self> {
        Self::new([F::zero(); D], [side; D])
    }

    pub fn lower(&self) -> &[F; D] {
        &self.lower
    }

    pub fn upper(&self) -> &[F; D] {
        &self.upper
    }

    pub fn side(&self, k: usize) -> F {
        self.upper[k] - self.lower[k]
    }

    pub fn min_side(&self) -> F {
        (0..D).map(|k| self.side(k)).fold(F::infinity(), F::min)
    }

    pub fn volume(&self) -> F {
        (0..D).map(|k| self.side(k)).fold(F::one(), |a, b| a * b)
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &Point<F, D>) -> bool {
        (0..D).all(|k| self.lower[k] <= p.coords[k] && p.coords[k] <= self.upper[k])
    }

    pub fn contains_window(&self, other: &Self) -> bool {
        (0..D).all(|k| self.lower[k] <= other.lower[k] && other.upper[k] <= self.upper[k])
    }

    /// `{u ∈ W : B(u, r) ⊆ W}`: every face moved inward by `r`.
    pub fn erode(&self, r: F) -> Result<Self> {
        if !(r >= F::zero()) || !r.is_finite() {
            return Err(Error::invalid(format!("erosion radius must be finite and nonnegative, got {r}")));
        }
        let mut lower = self.lower;
        let mut upper = self.upper;
        for k in 0..D {
            lower[k] = lower[k] + r;
            upper[k] = upper[k] - r;
            if !(lower[k] < upper[k]) {
                return Err(Error::DomainTooSmall { window: self.to_string(), radius: r.as_f64() });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn scale(&self, factor: F) -> Result<Self> {
        Self::new(self.lower.map(|c| c * factor), self.upper.map(|c| c * factor))
    }
}

impl<F: Real, const D: usize> fmt::Display for Window<F, D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..D {
            if k > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{}, {}]", self.lower[k], self.upper[k])?;
        }
        Ok(())
    }
}

/// Number of points `v` of `x` with `‖v − u‖ ∈ [a, b]` (both ends closed).
pub fn count_in_annulus<F: Real, const D: usize, N: Neighborhood<F, D>>(
    u: &Point<F, D>,
    x: &N,
    a: F,
    b: F,
) -> Result<usize> {
    if !(a >= F::zero()) || !(a <= b) {
        return Err(Error::invalid(format!("annulus requires 0 <= a <= b, got [{a}, {b}]")));
    }
    if !u.is_finite() {
        return Err(Error::invalid("query point has non-finite coordinates"));
    }
    let mut n = 0;
    x.visit_within(u, b, |_, _, d| {
        if d >= a {
            n += 1;
        }
    });
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erosion_examples() {
        let w = Window::<f64, 2>::cube(1.0).unwrap();
        let e = w.erode(0.05).unwrap();
        assert_eq!(e.lower(), &[0.05, 0.05]);
        assert_eq!(e.upper(), &[0.95, 0.95]);
        let w2 = Window::<f64, 2>::cube(2.0).unwrap();
        assert_eq!(w2.erode(0.0).unwrap(), w2);
        assert!(matches!(w.erode(0.5), Err(Error::DomainTooSmall { .. })));
        assert!(w.erode(-0.1).is_err());
    }

    #[test]
    fn window_validation() {
        assert!(Window::<f64, 2>::new([0.0, 0.0], [1.0, 0.0]).is_err());
        assert!(Window::<f64, 2>::new([0.0, f64::NAN], [1.0, 1.0]).is_err());
        let w = Window::<f64, 3>::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.volume(), 6.0);
        assert_eq!(w.min_side(), 1.0);
    }

    #[test]
    fn rejects_non_finite_points() {
        assert!(PointPattern::<f64, 2>::from_coords(&[[0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn annulus_examples() {
        let x = PointPattern::<f64, 2>::from_coords(&[[0.03, 0.0], [0.2, 0.0]]).unwrap();
        let u = Point::new([0.0, 0.0]);
        assert_eq!(count_in_annulus(&u, &x, 0.0, 0.05).unwrap(), 1);
        assert_eq!(count_in_annulus(&u, &PointPattern::empty(), 0.0, 0.05).unwrap(), 0);
        assert!(count_in_annulus(&u, &x, 0.1, 0.05).is_err());
        // Both ends closed.
        assert_eq!(count_in_annulus(&u, &x, 0.03, 0.2).unwrap(), 2);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = PointPattern::<f64, 3>::from_coords(&[[0.1, 0.2, 0.3], [1.0 / 3.0, 2.5e-7, 7.0]]).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z\n"));
        let y = PointPattern::<f64, 3>::read_csv(&buf[..]).unwrap();
        assert_eq!(x, y);
        assert!(PointPattern::<f64, 2>::read_csv(&buf[..]).is_err());
    }
}
