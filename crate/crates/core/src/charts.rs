//! Charts on locally finite configurations.
//!
//! A locally finite configuration is represented by its finite restriction
//! to a compact window. Around each point `u_i` sits a ball of radius
//! `ε_i = φ_u(u_i) / 2`, where `φ_u(x)` is the distance from `x` to the rest
//! of `u`. The chart `Φ_u` sends a family `z` of vectors in the open unit
//! ball to the configuration `(u_i + ε_i z_i)_i`; its image never collides
//! two points, and transitions between overlapping charts are affine per
//! point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{find_close_pair, AmbientSpace, BoundingBox, ConfigError, ConfigurationJson};
use crate::index::SpatialIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("separation is undefined on a configuration with fewer than two points")]
    SingletonConfiguration,
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("point {0} lies outside the window")]
    OutsideWindow(usize),
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected {expected} chart coordinates, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("chart coordinate {0} is not inside the open unit ball")]
    OutOfUnitBall(usize),
    #[error("radius {radius} at point {index} is not in (0, {limit}]")]
    InvalidRadius {
        index: usize,
        radius: f64,
        limit: f64,
    },
    #[error("point {0} is not in the chart domain")]
    NotInDomain(usize),
    #[error("point {0} is not in the overlap of the two charts")]
    NotInOverlap(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Finite window of a configuration in OΓ^{t,∞}, kept in sequence order.
#[derive(Debug, Clone)]
pub struct LocallyFiniteConfiguration {
    space: AmbientSpace,
    coords: Vec<f64>,
    window: BoundingBox,
}

impl LocallyFiniteConfiguration {
    /// Checks finiteness, distinctness and window containment. The window
    /// defaults to the space bounds, then to the enclosing box of the points.
    pub fn new(space: &AmbientSpace, coords: Vec<f64>) -> Result<Self, ChartError> {
        let window = space
            .bounds
            .clone()
            .or_else(|| BoundingBox::enclosing(space.dim, &coords))
            .unwrap_or_else(|| BoundingBox::new(vec![0.0; space.dim], vec![0.0; space.dim]));
        Self::with_window(space, coords, window)
    }

    pub fn with_window(
        space: &AmbientSpace,
        coords: Vec<f64>,
        window: BoundingBox,
    ) -> Result<Self, ChartError> {
        let dim = space.dim;
        if dim == 0 {
            return Err(ConfigError::ZeroDimension.into());
        }
        if coords.len() % dim != 0 {
            return Err(ConfigError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            }
            .into());
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(ConfigError::NonFinite {
                index: k / dim,
                coord: k % dim,
            }
            .into());
        }
        if let Some((i, j)) = find_close_pair(dim, &coords, space.metric, space.tol_eq) {
            return Err(ChartError::DuplicatePoints(i, j));
        }
        if let Some(i) = coords.chunks_exact(dim).position(|p| !window.contains(p)) {
            return Err(ChartError::OutsideWindow(i));
        }
        Ok(LocallyFiniteConfiguration {
            space: space.clone(),
            coords,
            window,
        })
    }

    pub fn from_rows<I, R>(space: &AmbientSpace, rows: I) -> Result<Self, ChartError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut coords = Vec::new();
        for r in rows {
            let r = r.as_ref();
            if r.len() != space.dim {
                return Err(ConfigError::DimensionMismatch {
                    expected: space.dim,
                    found: r.len(),
                }
                .into());
            }
            coords.extend_from_slice(r);
        }
        Self::new(space, coords)
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.space.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.space.dim;
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn window(&self) -> &BoundingBox {
        &self.window
    }

    /// Every compact subset of the window meets finitely many points; always
    /// true for a finite window.
    pub fn locally_finite_certificate(&self) -> bool {
        true
    }

    fn index(&self) -> SpatialIndex {
        SpatialIndex::build_flat(self.space.dim, &self.coords, self.space.metric)
    }
}

/// `φ_u(u_i)`: distance from `u_i` to the nearest other point of `u`.
pub fn separation(u: &LocallyFiniteConfiguration, i: usize) -> Result<f64, ChartError> {
    if u.len() < 2 {
        return Err(ChartError::SingletonConfiguration);
    }
    if i >= u.len() {
        return Err(ChartError::IndexOutOfRange {
            index: i,
            len: u.len(),
        });
    }
    let x = u.point(i);
    Ok((0..u.len())
        .filter(|&j| j != i)
        .map(|j| u.space.distance(x, u.point(j)))
        .fold(f64::INFINITY, f64::min))
}

fn separations(u: &LocallyFiniteConfiguration, idx: &SpatialIndex) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            idx.nearest_other(u.point(i), Some(i))
                .expect("at least two points")
                .1
        })
        .collect()
}

/// A chart `Φ_u` around a base configuration.
#[derive(Debug, Clone)]
pub struct Chart {
    base: LocallyFiniteConfiguration,
    radii: Vec<f64>,
    index: SpatialIndex,
}

/// On-disk form `{"base": Configuration, "radii": [...]}`. The base points
/// are listed in chart order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartJson {
    pub base: ConfigurationJson,
    pub radii: Vec<f64>,
}

/// Builds the chart with `ε_i = φ_u(u_i) / 2`.
pub fn build_chart(u: &LocallyFiniteConfiguration) -> Result<Chart, ChartError> {
    if u.len() < 2 {
        return Err(ChartError::SingletonConfiguration);
    }
    let index = u.index();
    let radii = separations(u, &index)
        .into_iter()
        .map(|s| s / 2.0)
        .collect();
    Ok(Chart {
        base: u.clone(),
        radii,
        index,
    })
}

impl Chart {
    /// A chart with caller-chosen radii, each in `(0, φ_u(u_i) / 2]`.
    pub fn with_radii(u: &LocallyFiniteConfiguration, radii: Vec<f64>) -> Result<Self, ChartError> {
        if u.len() < 2 {
            return Err(ChartError::SingletonConfiguration);
        }
        if radii.len() != u.len() {
            return Err(ChartError::LengthMismatch {
                expected: u.len(),
                found: radii.len(),
            });
        }
        let index = u.index();
        for (i, (&r, s)) in radii.iter().zip(separations(u, &index)).enumerate() {
            let limit = s / 2.0;
            if !(r > 0.0 && r <= limit) {
                return Err(ChartError::InvalidRadius {
                    index: i,
                    radius: r,
                    limit,
                });
            }
        }
        Ok(Chart {
            base: u.clone(),
            radii,
            index,
        })
    }

    pub fn base(&self) -> &LocallyFiniteConfiguration {
        &self.base
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Balls `B(u_i, ε_i)` are pairwise disjoint, and each open
    /// `B(u_i, 2ε_i)` contains no other base point. Pairwise check.
    pub fn check_disjointness(&self) -> bool {
        let n = self.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self
                    .base
                    .space
                    .distance(self.base.point(i), self.base.point(j));
                if self.radii[i] + self.radii[j] > d
                    || 2.0 * self.radii[i] > d
                    || 2.0 * self.radii[j] > d
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> ChartJson {
        let dim = self.base.dim();
        ChartJson {
            base: ConfigurationJson {
                dim,
                points: self
                    .base
                    .coords
                    .chunks_exact(dim)
                    .map(<[f64]>::to_vec)
                    .collect(),
            },
            radii: self.radii.clone(),
        }
    }

    fn window_for_image(&self) -> BoundingBox {
        let pad = self.radii.iter().copied().fold(0.0, f64::max);
        let w = &self.base.window;
        BoundingBox::new(
            w.min.iter().map(|x| x - pad).collect(),
            w.max.iter().map(|x| x + pad).collect(),
        )
    }

    /// Ball index containing each point of `v`, with the matching checked to
    /// be a bijection.
    fn locate(&self, v: &LocallyFiniteConfiguration) -> Result<Vec<usize>, ChartError> {
        let space = &self.base.space;
        let n = self.len();
        if v.len() != n || v.dim() != self.base.dim() {
            return Err(ChartError::LengthMismatch {
                expected: n,
                found: v.len(),
            });
        }
        let mut owner = vec![usize::MAX; n];
        let mut ball_of = Vec::with_capacity(n);
        for j in 0..n {
            let x = v.point(j);
            // inside B(u_i, ε_i) with ε_i ≤ φ_u(u_i)/2, u_i is the strict nearest base point
            let (i, d) = self.index.nearest(x).expect("chart base is nonempty");
            if d >= self.radii[i] - space.tol_eq || owner[i] != usize::MAX {
                return Err(ChartError::NotInDomain(j));
            }
            owner[i] = j;
            ball_of.push(i);
        }
        Ok(ball_of)
    }
}

/// `Φ_u(z) = (u_i + ε_i z_i)_i`; `z` is flat, `dim` values per point.
pub fn chart_apply(c: &Chart, z: &[f64]) -> Result<LocallyFiniteConfiguration, ChartError> {
    let space = &c.base.space;
    let dim = space.dim;
    if z.len() != c.base.coords.len() {
        return Err(ChartError::LengthMismatch {
            expected: c.base.coords.len(),
            found: z.len(),
        });
    }
    let origin = vec![0.0; dim];
    let mut out = Vec::with_capacity(z.len());
    for (i, zi) in z.chunks_exact(dim).enumerate() {
        if !zi.iter().all(|x| x.is_finite()) || space.distance(zi, &origin) >= 1.0 {
            return Err(ChartError::OutOfUnitBall(i));
        }
        let (u, eps) = (c.base.point(i), c.radii[i]);
        out.extend(u.iter().zip(zi).map(|(a, b)| a + eps * b));
    }
    LocallyFiniteConfiguration::with_window(space, out, c.window_for_image())
}

/// Inverse chart: the `z` with `Φ_u(z) = v` up to reordering of `v`.
pub fn chart_invert(c: &Chart, v: &LocallyFiniteConfiguration) -> Result<Vec<f64>, ChartError> {
    let ball_of = c.locate(v)?;
    let dim = c.base.dim();
    let mut z = vec![0.0; v.coords.len()];
    for (j, &i) in ball_of.iter().enumerate() {
        let (x, u, eps) = (v.point(j), c.base.point(i), c.radii[i]);
        for k in 0..dim {
            z[i * dim + k] = (x[k] - u[k]) / eps;
        }
    }
    Ok(z)
}

fn overlap_error(e: ChartError) -> ChartError {
    match e {
        ChartError::NotInDomain(j) => ChartError::NotInOverlap(j),
        other => other,
    }
}

/// Transition `Φ_{c1}^{-1} ∘ Φ_{c2}`.
pub fn transition(c1: &Chart, c2: &Chart, z: &[f64]) -> Result<Vec<f64>, ChartError> {
    let v = chart_apply(c2, z)?;
    chart_invert(c1, &v).map_err(overlap_error)
}

/// Analytic Jacobian of [`transition`] at `z`, dense and row-major with
/// `n·dim` rows (outputs) and columns (inputs). Block `(π(j), j)` equals
/// `(ε2_j / ε1_{π(j)}) I`, where `π(j)` is the ball of `c1` containing the
/// `j`-th image point; all other blocks vanish.
pub fn transition_jacobian(c1: &Chart, c2: &Chart, z: &[f64]) -> Result<Vec<f64>, ChartError> {
    let v = chart_apply(c2, z)?;
    let ball_of = c1.locate(&v).map_err(overlap_error)?;
    let dim = c1.base.dim();
    let size = z.len();
    let mut jac = vec![0.0; size * size];
    for (j, &i) in ball_of.iter().enumerate() {
        let scale = c2.radii[j] / c1.radii[i];
        for k in 0..dim {
            jac[(i * dim + k) * size + j * dim + k] = scale;
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> AmbientSpace {
        AmbientSpace::euclidean(1)
    }

    fn three() -> LocallyFiniteConfiguration {
        LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [1.0], [3.0]]).unwrap()
    }

    #[test]
    fn separation_examples() {
        let u = three();
        assert_eq!(separation(&u, 0).unwrap(), 1.0);
        assert_eq!(separation(&u, 2).unwrap(), 2.0);
        let grid =
            LocallyFiniteConfiguration::from_rows(&line(), (0..10).map(|k| [k as f64 * 0.25]))
                .unwrap();
        for i in 1..9 {
            assert_eq!(separation(&grid, i).unwrap(), 0.25);
        }
    }

    #[test]
    fn singleton_is_rejected() {
        let u = LocallyFiniteConfiguration::from_rows(&line(), [[0.0]]).unwrap();
        assert_eq!(separation(&u, 0), Err(ChartError::SingletonConfiguration));
        assert!(matches!(
            build_chart(&u),
            Err(ChartError::SingletonConfiguration)
        ));
    }

    #[test]
    fn duplicates_are_rejected() {
        assert!(matches!(
            LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [1.0], [0.0]]),
            Err(ChartError::DuplicatePoints(0, 2))
        ));
    }

    #[test]
    fn radii_are_half_separation() {
        let c = build_chart(&three()).unwrap();
        assert_eq!(c.radii(), &[0.5, 0.5, 1.0]);
        assert!(c.check_disjointness());
        let pair = LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [2.0]]).unwrap();
        assert_eq!(build_chart(&pair).unwrap().radii(), &[1.0, 1.0]);
    }

    #[test]
    fn apply_and_invert() {
        let c = build_chart(&three()).unwrap();
        let same = chart_apply(&c, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(same.flat(), c.base().flat());
        assert_eq!(chart_invert(&c, &same).unwrap(), vec![0.0, 0.0, 0.0]);

        let z = [0.5, -0.5, 0.25];
        let v = chart_apply(&c, &z).unwrap();
        assert_eq!(v.flat(), &[0.25, 0.75, 3.25]);
        let back = chart_invert(&c, &v).unwrap();
        for (a, b) in back.iter().zip(z) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn invert_ignores_point_order() {
        let c = build_chart(&three()).unwrap();
        let v = LocallyFiniteConfiguration::from_rows(&line(), [[3.25], [0.25], [0.75]]).unwrap();
        let z = chart_invert(&c, &v).unwrap();
        assert!(
            (z[0] - 0.5).abs() < 1e-12 && (z[1] + 0.5).abs() < 1e-12 && (z[2] - 0.25).abs() < 1e-12
        );
    }

    #[test]
    fn domain_violations() {
        let c = build_chart(&three()).unwrap();
        assert_eq!(
            chart_apply(&c, &[1.0, 0.0, 0.0]).unwrap_err(),
            ChartError::OutOfUnitBall(0)
        );
        assert!(matches!(
            chart_apply(&c, &[0.0, 0.0]),
            Err(ChartError::LengthMismatch { .. })
        ));
        let far = LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [1.0], [4.5]]).unwrap();
        assert_eq!(chart_invert(&c, &far), Err(ChartError::NotInDomain(2)));
        let crowded =
            LocallyFiniteConfiguration::from_rows(&line(), [[0.1], [-0.1], [3.0]]).unwrap();
        assert_eq!(chart_invert(&c, &crowded), Err(ChartError::NotInDomain(1)));
        // exactly on the boundary of B(1, 0.5)
        let edge = LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [1.5], [3.0]]).unwrap();
        assert_eq!(chart_invert(&c, &edge), Err(ChartError::NotInDomain(1)));
    }

    #[test]
    fn transition_identity_and_halving() {
        let u = three();
        let c1 = build_chart(&u).unwrap();
        let z = [0.3, -0.2, 0.9];
        let w = transition(&c1, &c1, &z).unwrap();
        for (a, b) in w.iter().zip(z) {
            assert!((a - b).abs() < 1e-12);
        }
        let halved: Vec<f64> = c1.radii().iter().map(|r| r / 2.0).collect();
        let c2 = Chart::with_radii(&u, halved).unwrap();
        let w = transition(&c1, &c2, &z).unwrap();
        for (a, b) in w.iter().zip(z) {
            assert!((a - b / 2.0).abs() < 1e-12);
        }
        let jac = transition_jacobian(&c1, &c2, &z).unwrap();
        assert_eq!(jac, vec![0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn transition_outside_overlap() {
        let u = three();
        let c1 = build_chart(&u).unwrap();
        let shifted =
            LocallyFiniteConfiguration::from_rows(&line(), [[0.0], [1.0], [4.0]]).unwrap();
        let c2 = build_chart(&shifted).unwrap();
        assert!(matches!(
            transition(&c1, &c2, &[0.0, 0.0, 0.0]),
            Err(ChartError::NotInOverlap(2))
        ));
    }

    #[test]
    fn oversized_radii_are_rejected() {
        assert!(matches!(
            Chart::with_radii(&three(), vec![0.5, 0.6, 1.0]),
            Err(ChartError::InvalidRadius { index: 1, .. })
        ));
    }
}
