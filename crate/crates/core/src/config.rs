//! Finite point configurations.
//!
//! An [`OrderedConfiguration`] is a finite sequence of pairwise compatible
//! points. Quotienting by the symmetric group gives a [`Configuration`], which
//! is stored in a canonical lexicographic order so that two orderings of the
//! same point set compare bitwise equal.

use std::cmp::Ordering;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default point-equality tolerance, in model units.
pub const DEFAULT_TOL_EQ: f64 = 1e-9;

/// Largest stratum for which [`symmetrize`] enumerates permutations.
pub const MAX_SYMMETRIZE_N: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("coordinate {coord} of point {index} is not finite")]
    NonFinite { index: usize, coord: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("points must have at least one coordinate")]
    ZeroDimension,
    #[error("points {0} and {1} violate the compatibility relation")]
    CompatibilityViolation(usize, usize),
    #[error("stratum of size {0} is too large to symmetrize (limit {MAX_SYMMETRIZE_N})")]
    StratumTooLarge(usize),
    #[error("configuration is empty")]
    EmptyConfiguration,
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
}

/// Distance functions available on the ambient space.
///
/// Every variant bounds the Chebyshev distance from above; the grid index in
/// [`crate::index`] relies on this for exact search termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Chebyshev => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// A point of the ambient space ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, ConfigError> {
        if coords.is_empty() {
            return Err(ConfigError::ZeroDimension);
        }
        if let Some(coord) = coords.iter().position(|c| !c.is_finite()) {
            return Err(ConfigError::NonFinite { index: 0, coord });
        }
        Ok(Point(coords.into_iter().map(normalize_zero).collect()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Self {
        assert_eq!(min.len(), max.len(), "box corners must share a dimension");
        BoundingBox { min, max }
    }

    /// Smallest box containing `coords` (flat, `dim` per point). `None` when empty.
    pub fn enclosing(dim: usize, coords: &[f64]) -> Option<Self> {
        if coords.is_empty() {
            return None;
        }
        let mut min = coords[..dim].to_vec();
        let mut max = min.clone();
        for p in coords.chunks_exact(dim) {
            for k in 0..dim {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(BoundingBox { min, max })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

/// The space the points live in: ℝ^d with a metric and an equality tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientSpace {
    pub dim: usize,
    pub metric: Metric,
    pub bounds: Option<BoundingBox>,
    pub tol_eq: f64,
}

impl AmbientSpace {
    pub fn euclidean(dim: usize) -> Self {
        AmbientSpace {
            dim,
            metric: Metric::Euclidean,
            bounds: None,
            tol_eq: DEFAULT_TOL_EQ,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_tol_eq(mut self, tol_eq: f64) -> Self {
        self.tol_eq = tol_eq;
        self
    }

    pub fn with_bounds(mut self, bounds: BoundingBox) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.metric.distance(a, b)
    }

    /// The default compatibility relation of this space: points are
    /// compatible iff they are farther apart than `tol_eq`.
    pub fn distinct(&self) -> Distinct {
        Distinct {
            metric: self.metric,
            tol_eq: self.tol_eq,
        }
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<Point, ConfigError> {
        let p = Point::new(coords)?;
        self.check_dim(p.dim())?;
        Ok(p)
    }

    fn check_dim(&self, found: usize) -> Result<(), ConfigError> {
        if found != self.dim {
            return Err(ConfigError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError::ZeroDimension);
        }
        if !(self.tol_eq.is_finite() && self.tol_eq >= 0.0) {
            return Err(ConfigError::InvalidTolerance(self.tol_eq));
        }
        Ok(())
    }
}

/// A symmetric relation on points whose truth forces distinctness.
pub trait CompatibilityRelation {
    fn compatible(&self, x: &[f64], y: &[f64]) -> bool;
}

/// Default relation `x U y ⟺ x ≠ y`, with inequality read as
/// `metric(x, y) > tol_eq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distinct {
    pub metric: Metric,
    pub tol_eq: f64,
}

impl CompatibilityRelation for Distinct {
    fn compatible(&self, x: &[f64], y: &[f64]) -> bool {
        self.metric.distance(x, y) > self.tol_eq
    }
}

impl<F> CompatibilityRelation for F
where
    F: Fn(&[f64], &[f64]) -> bool,
{
    fn compatible(&self, x: &[f64], y: &[f64]) -> bool {
        self(x, y)
    }
}

/// Outcome of a pairwise compatibility scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub first_violation: Option<(usize, usize)>,
}

/// Checks every unordered pair `i < j` against `rel`, in row-major pair order.
pub fn validate(points: &[Point], rel: &dyn CompatibilityRelation) -> Validation {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if !rel.compatible(points[i].coords(), points[j].coords()) {
                return Validation {
                    valid: false,
                    first_violation: Some((i, j)),
                };
            }
        }
    }
    Validation {
        valid: true,
        first_violation: None,
    }
}

/// A finite sequence of points; an element of OΓ^n once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedConfiguration {
    points: Vec<Point>,
}

impl OrderedConfiguration {
    pub fn new(points: Vec<Point>) -> Result<Self, ConfigError> {
        if let Some(first) = points.first() {
            let dim = first.dim();
            for p in &points {
                if p.dim() != dim {
                    return Err(ConfigError::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    });
                }
            }
        }
        Ok(OrderedConfiguration { points })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows<I, R>(rows: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = R>,
        R: Into<Vec<f64>>,
    {
        let points = rows
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                Point::new(r.into()).map_err(|e| match e {
                    ConfigError::NonFinite { coord, .. } => ConfigError::NonFinite { index, coord },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Returns `σ·o`, the points reordered so that slot `i` holds `o[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.points.len());
        OrderedConfiguration {
            points: perm.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// Lexicographic total order on coordinate tuples.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[inline]
fn normalize_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// A point of Γ^n: a canonically ordered finite set of distinct points.
///
/// Coordinates are stored flat, `dim` values per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    /// Canonicalizes `points` under the default relation of `space`.
    pub fn new(space: &AmbientSpace, points: Vec<Point>) -> Result<Self, ConfigError> {
        space.check()?;
        let mut coords = Vec::with_capacity(points.len() * space.dim);
        for (index, p) in points.into_iter().enumerate() {
            if p.dim() != space.dim {
                return Err(ConfigError::DimensionMismatch {
                    expected: space.dim,
                    found: p.dim(),
                });
            }
            debug_assert!(p.coords().iter().all(|c| c.is_finite()), "point {index}");
            coords.extend(p.0);
        }
        Self::from_flat(space, coords)
    }

    /// Canonicalizes raw coordinate rows under the default relation of `space`.
    pub fn from_rows<I, R>(space: &AmbientSpace, rows: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        space.check()?;
        let mut coords = Vec::new();
        for row in rows {
            let row = row.as_ref();
            space.check_dim(row.len())?;
            coords.extend_from_slice(row);
        }
        Self::from_flat(space, coords)
    }

    /// Canonicalizes a flat coordinate buffer (`space.dim` values per point).
    pub fn from_flat(space: &AmbientSpace, mut coords: Vec<f64>) -> Result<Self, ConfigError> {
        space.check()?;
        let dim = space.dim;
        if coords.len() % dim != 0 {
            return Err(ConfigError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(ConfigError::NonFinite {
                index: k / dim,
                coord: k % dim,
            });
        }
        coords.iter_mut().for_each(|c| *c = normalize_zero(*c));
        if let Some((i, j)) = find_close_pair(dim, &coords, space.metric, space.tol_eq) {
            return Err(ConfigError::CompatibilityViolation(i, j));
        }
        Ok(Self::sorted(dim, coords))
    }

    /// Set-union constructor: points closer than `tol_eq` to an earlier
    /// point (in canonical order) are dropped instead of rejected.
    pub fn from_points_dedup(space: &AmbientSpace, points: &[Point]) -> Result<Self, ConfigError> {
        space.check()?;
        let mut rows: Vec<&[f64]> = Vec::with_capacity(points.len());
        for p in points {
            space.check_dim(p.dim())?;
            rows.push(p.coords());
        }
        rows.sort_by(|a, b| lex_cmp(a, b));
        let mut coords: Vec<f64> = Vec::new();
        for row in rows {
            let dup = coords
                .chunks_exact(space.dim)
                .any(|q| space.distance(q, row) <= space.tol_eq);
            if !dup {
                coords.extend_from_slice(row);
            }
        }
        Ok(Configuration {
            dim: space.dim,
            coords,
        })
    }

    fn sorted(dim: usize, coords: Vec<f64>) -> Self {
        let mut rows: Vec<&[f64]> = coords.chunks_exact(dim).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        let sorted = rows.concat();
        Configuration {
            dim,
            coords: sorted,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cardinality, i.e. the stratum index n.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_points(&self) -> Vec<Point> {
        self.iter().map(|c| Point(c.to_vec())).collect()
    }

    pub fn contains(&self, space: &AmbientSpace, x: &[f64]) -> bool {
        self.iter().any(|q| space.distance(q, x) <= space.tol_eq)
    }

    /// `u ∪ {x}`, canonicalized.
    pub fn with_point(&self, space: &AmbientSpace, x: &Point) -> Result<Self, ConfigError> {
        let mut coords = self.coords.clone();
        space.check_dim(x.dim())?;
        coords.extend_from_slice(x.coords());
        Self::from_flat(space, coords)
    }

    pub fn to_json(&self) -> ConfigurationJson {
        ConfigurationJson {
            dim: self.dim,
            points: self.iter().map(|c| c.to_vec()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Configuration {
    type Item = &'a [f64];
    type IntoIter = std::slice::ChunksExact<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// On-disk form `{"dim": d, "points": [[x1, ..., xd], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationJson {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

impl ConfigurationJson {
    /// Canonicalizes on load; `space.dim` is overridden by the file's `dim`.
    pub fn into_configuration(self, space: &AmbientSpace) -> Result<Configuration, ConfigError> {
        let space = AmbientSpace {
            dim: self.dim,
            ..space.clone()
        };
        Configuration::from_rows(&space, &self.points)
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// The lexicographically first pair `(i, j)`, `i < j`, of points within
/// `tol` of each other, or `None`. Indices refer to the input order.
pub(crate) fn find_close_pair(
    dim: usize,
    coords: &[f64],
    metric: Metric,
    tol: f64,
) -> Option<(usize, usize)> {
    let n = coords.len() / dim;
    let point = |i: usize| &coords[i * dim..(i + 1) * dim];
    if n < 64 {
        for i in 0..n {
            for j in (i + 1)..n {
                if metric.distance(point(i), point(j)) <= tol {
                    return Some((i, j));
                }
            }
        }
        return None;
    }
    // sweep along the first axis; every metric bounds |Δx₀| from above
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| coords[a * dim].total_cmp(&coords[b * dim]));
    let mut best: Option<(usize, usize)> = None;
    for (k, &a) in order.iter().enumerate() {
        let xa = coords[a * dim];
        for &b in &order[k + 1..] {
            if coords[b * dim] - xa > tol {
                break;
            }
            if metric.distance(point(a), point(b)) <= tol {
                let cand = (a.min(b), a.max(b));
                if best.map_or(true, |c| cand < c) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

/// Quotient map OΓ^n → Γ^n: validates against `rel`, then sorts.
pub fn canonicalize(
    o: &OrderedConfiguration,
    rel: &dyn CompatibilityRelation,
) -> Result<Configuration, ConfigError> {
    let v = validate(o.points(), rel);
    if let Some((i, j)) = v.first_violation {
        return Err(ConfigError::CompatibilityViolation(i, j));
    }
    if o.is_empty() {
        return Err(ConfigError::EmptyConfiguration);
    }
    let dim = o.points[0].dim();
    let coords: Vec<f64> = o.points.iter().flat_map(|p| p.0.iter().copied()).collect();
    Ok(Configuration::sorted(dim, coords))
}

/// Averages `f` over all `n!` reorderings of `o`.
pub fn symmetrize<F>(f: F, o: &OrderedConfiguration) -> Result<f64, ConfigError>
where
    F: Fn(&[Point]) -> f64,
{
    let n = o.len();
    if n > MAX_SYMMETRIZE_N {
        return Err(ConfigError::StratumTooLarge(n));
    }
    if n == 0 {
        return Err(ConfigError::EmptyConfiguration);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut buf: Vec<Point> = Vec::with_capacity(n);
    for perm in (0..n).permutations(n) {
        buf.clear();
        buf.extend(perm.iter().map(|&i| o.points[i].clone()));
        total += f(&buf);
        count += 1;
    }
    Ok(total / count as f64)
}

/// `(1/|u|) Σ_{x∈u} f(x)`.
pub fn empirical_average<F>(f: F, u: &Configuration) -> Result<f64, ConfigError>
where
    F: Fn(&[f64]) -> f64,
{
    if u.is_empty() {
        return Err(ConfigError::EmptyConfiguration);
    }
    Ok(u.iter().map(f).sum::<f64>() / u.len() as f64)
}
