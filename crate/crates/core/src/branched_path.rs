//! Branched paths.
//!
//! A [`PathSegment`] is a curve sampled on the uniform grid `t_k = k/m` of
//! `[0, 1]`. A [`BranchedPath`] is a sequence of stages, each a set of
//! segments; the set of end points of one stage must equal the set of start
//! points of the next. At a junction, sums of a test function along the
//! incoming and outgoing segments can be compared derivative by derivative
//! (see [`jet_match`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AmbientSpace, ConfigError, Configuration, Point};
use crate::hausdorff::{hausdorff_distance, HausdorffError};

/// Minimum number of grid intervals per segment.
pub const MIN_INTERVALS: usize = 8;
/// Highest supported jet order.
pub const MAX_JET_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("a segment needs at least {MIN_INTERVALS} grid intervals, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} has t = {t}, expected {expected}")]
    NonUniformGrid { index: usize, t: f64, expected: f64 },
    #[error("end of first segment and start of second are {gap} apart")]
    EndpointMismatch { gap: f64 },
    #[error("stage {0} is empty")]
    EmptyStage(usize),
    #[error("no stage boundary has both incoming and outgoing segments at the given point")]
    NotAJunction,
    #[error("jet order {0} is outside 1..={MAX_JET_ORDER}")]
    InvalidOrder(usize),
    #[error("segment has {m} intervals; order {order} needs at least {required}")]
    InsufficientResolution {
        m: usize,
        order: usize,
        required: usize,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Hausdorff(#[from] HausdorffError),
}

/// A sampled smooth path `[0, 1] → ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    dim: usize,
    /// `m + 1` points, flat.
    coords: Vec<f64>,
}

impl PathSegment {
    /// Samples `f` at `t_k = k/m`, `k = 0..=m`.
    pub fn from_fn<F>(m: usize, f: F) -> Result<Self, PathError>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if m < MIN_INTERVALS {
            return Err(PathError::TooFewSamples(m));
        }
        let mut coords = Vec::new();
        let mut dim = 0;
        for k in 0..=m {
            let p = Point::new(f(k as f64 / m as f64))?;
            if k == 0 {
                dim = p.dim();
            } else if p.dim() != dim {
                return Err(ConfigError::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                }
                .into());
            }
            coords.extend(p.into_coords());
        }
        Ok(PathSegment { dim, coords })
    }

    /// Accepts explicit `(t, point)` samples; `t` must follow `k/m` to 1e-12.
    pub fn from_samples(samples: Vec<(f64, Vec<f64>)>) -> Result<Self, PathError> {
        let m = samples.len().saturating_sub(1);
        if m < MIN_INTERVALS {
            return Err(PathError::TooFewSamples(m));
        }
        let dim = samples[0].1.len();
        let mut coords = Vec::with_capacity(samples.len() * dim);
        for (k, (t, x)) in samples.into_iter().enumerate() {
            let expected = k as f64 / m as f64;
            if !((t - expected).abs() <= 1e-12) {
                return Err(PathError::NonUniformGrid {
                    index: k,
                    t,
                    expected,
                });
            }
            let p = Point::new(x)?;
            if p.dim() != dim {
                return Err(ConfigError::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                }
                .into());
            }
            coords.extend(p.into_coords());
        }
        Ok(PathSegment { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid intervals.
    pub fn m(&self) -> usize {
        self.coords.len() / self.dim - 1
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 / self.m() as f64
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn samples(&self) -> Vec<(f64, Vec<f64>)> {
        (0..=self.m())
            .map(|k| (self.t(k), self.point(k).to_vec()))
            .collect()
    }

    pub fn alpha(&self) -> &[f64] {
        self.point(0)
    }

    pub fn omega(&self) -> &[f64] {
        self.point(self.m())
    }

    /// Piecewise-linear resampling onto `m` intervals. Grid points shared
    /// with the old grid are copied exactly.
    pub fn resample(&self, m: usize) -> Self {
        let old = self.m();
        if m == old {
            return self.clone();
        }
        let mut coords = Vec::with_capacity((m + 1) * self.dim);
        for k in 0..=m {
            let num = k * old;
            let (i, rem) = (num / m, num % m);
            if rem == 0 {
                coords.extend_from_slice(self.point(i));
            } else {
                let s = rem as f64 / m as f64;
                let (a, b) = (self.point(i), self.point(i + 1));
                coords.extend(a.iter().zip(b).map(|(x, y)| x + s * (y - x)));
            }
        }
        PathSegment {
            dim: self.dim,
            coords,
        }
    }

    /// Translates every sample by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        PathSegment {
            dim: self.dim,
            coords,
        }
    }
}

/// Groupoid composition: traverse `g1` on `[0, 1/2]`, then `g2` on `[1/2, 1]`.
///
/// Segments with different resolutions are first brought to the finer one.
pub fn compose(
    space: &AmbientSpace,
    g1: &PathSegment,
    g2: &PathSegment,
) -> Result<PathSegment, PathError> {
    if g1.dim != g2.dim {
        return Err(ConfigError::DimensionMismatch {
            expected: g1.dim,
            found: g2.dim,
        }
        .into());
    }
    let gap = space.distance(g1.omega(), g2.alpha());
    if gap > space.tol_eq {
        return Err(PathError::EndpointMismatch { gap });
    }
    let m = g1.m().max(g2.m());
    let (a, b) = (g1.resample(m), g2.resample(m));
    let mut coords = a.coords;
    coords.extend_from_slice(&b.coords[b.dim..]);
    Ok(PathSegment {
        dim: g1.dim,
        coords,
    })
}

fn point_to_polyline(x: &[f64], line: &PathSegment) -> f64 {
    let mut best = f64::INFINITY;
    let pts: Vec<&[f64]> = line.points().collect();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab2: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
        let s = if ab2 > 0.0 {
            let dot: f64 = a
                .iter()
                .zip(b)
                .zip(x)
                .map(|((p, q), r)| (q - p) * (r - p))
                .sum();
            (dot / ab2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d: f64 = a
            .iter()
            .zip(b)
            .zip(x)
            .map(|((p, q), r)| {
                let proj = p + s * (q - p);
                (r - proj) * (r - proj)
            })
            .sum::<f64>()
            .sqrt();
        best = best.min(d);
    }
    best
}

/// Symmetric Hausdorff distance between the piecewise-linear images of two
/// segments, measured from sample vertices to the other polyline.
pub fn image_distance(a: &PathSegment, b: &PathSegment) -> f64 {
    let ab = a
        .points()
        .map(|x| point_to_polyline(x, b))
        .fold(0.0, f64::max);
    let ba = b
        .points()
        .map(|x| point_to_polyline(x, a))
        .fold(0.0, f64::max);
    ab.max(ba)
}

/// Path compatibility: images differ, or the endpoint pairs differ.
pub fn segments_compatible(space: &AmbientSpace, a: &PathSegment, b: &PathSegment) -> bool {
    let ends_differ = space.distance(a.alpha(), b.alpha()) > space.tol_eq
        || space.distance(a.omega(), b.omega()) > space.tol_eq;
    ends_differ || image_distance(a, b) > space.tol_eq
}

/// Stages of segments glued along endpoint configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchedPath {
    stages: Vec<Vec<PathSegment>>,
}

impl BranchedPath {
    pub fn new(stages: Vec<Vec<PathSegment>>) -> Result<Self, PathError> {
        let mut dim = None;
        for (s, stage) in stages.iter().enumerate() {
            if stage.is_empty() {
                return Err(PathError::EmptyStage(s));
            }
            for g in stage {
                match dim {
                    None => dim = Some(g.dim),
                    Some(d) if d != g.dim => {
                        return Err(ConfigError::DimensionMismatch {
                            expected: d,
                            found: g.dim,
                        }
                        .into())
                    }
                    _ => {}
                }
            }
        }
        Ok(BranchedPath { stages })
    }

    pub fn stages(&self) -> &[Vec<PathSegment>] {
        &self.stages
    }

    pub fn dim(&self) -> usize {
        self.stages
            .first()
            .and_then(|s| s.first())
            .map_or(0, |g| g.dim)
    }

    /// `α(stage)` as a configuration (set semantics).
    pub fn alphas(&self, space: &AmbientSpace, stage: usize) -> Result<Configuration, PathError> {
        endpoint_set(space, self.stages[stage].iter().map(|g| g.alpha()))
    }

    /// `ω(stage)` as a configuration (set semantics).
    pub fn omegas(&self, space: &AmbientSpace, stage: usize) -> Result<Configuration, PathError> {
        endpoint_set(space, self.stages[stage].iter().map(|g| g.omega()))
    }

    pub fn to_json(&self) -> BranchedPathJson {
        BranchedPathJson {
            stages: self
                .stages
                .iter()
                .map(|st| {
                    st.iter()
                        .map(|g| SegmentJson {
                            samples: g.samples(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

fn endpoint_set<'a>(
    space: &AmbientSpace,
    ends: impl Iterator<Item = &'a [f64]>,
) -> Result<Configuration, PathError> {
    let pts = ends
        .map(|p| Point::new(p.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Configuration::from_points_dedup(space, &pts)?)
}

/// `{"samples": [[t, [coords]], ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub samples: Vec<(f64, Vec<f64>)>,
}

/// `{"stages": [[segment, ...], ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchedPathJson {
    pub stages: Vec<Vec<SegmentJson>>,
}

impl BranchedPathJson {
    pub fn into_path(self) -> Result<BranchedPath, PathError> {
        let stages = self
            .stages
            .into_iter()
            .map(|st| {
                st.into_iter()
                    .map(|s| PathSegment::from_samples(s.samples))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        BranchedPath::new(stages)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchViolation {
    /// Two segments of `stage` share image and endpoints.
    IncompatibleSegments {
        stage: usize,
        first: usize,
        second: usize,
    },
    /// `ω(stage) ≠ α(stage + 1)`; `gap` is their Hausdorff distance.
    EndpointGap { stage: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchValidation {
    pub valid: bool,
    pub violation: Option<BranchViolation>,
}

/// Checks stage-wise compatibility and `ω(γ_i) = α(γ_{i+1})` as configurations.
pub fn validate_branched(
    space: &AmbientSpace,
    bp: &BranchedPath,
) -> Result<BranchValidation, PathError> {
    let fail = |v| {
        Ok(BranchValidation {
            valid: false,
            violation: Some(v),
        })
    };
    for (s, stage) in bp.stages.iter().enumerate() {
        for i in 0..stage.len() {
            for j in (i + 1)..stage.len() {
                if !segments_compatible(space, &stage[i], &stage[j]) {
                    return fail(BranchViolation::IncompatibleSegments {
                        stage: s,
                        first: i,
                        second: j,
                    });
                }
            }
        }
        if s + 1 < bp.stages.len() {
            let gap = hausdorff_distance(
                space.metric,
                &bp.omegas(space, s)?,
                &bp.alphas(space, s + 1)?,
            )?;
            if gap > space.tol_eq {
                return fail(BranchViolation::EndpointGap { stage: s, gap });
            }
        }
    }
    Ok(BranchValidation {
        valid: true,
        violation: None,
    })
}

/// Finite-difference weights (Fornberg) for derivatives `0..=order` at `z`
/// from values at `nodes`. Result is indexed `[derivative][node]`.
pub fn fd_weights(z: f64, nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// At `t = 1`, from the left.
    End,
    /// At `t = 0`, from the right.
    Start,
}

/// One-sided finite-difference estimate of `d^k/dt^k f(γ(t))` at an end of
/// the segment, using `k + 2` samples (second-order accurate).
pub fn one_sided_derivative<F>(g: &PathSegment, f: F, k: usize, side: Side) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let npts = k + 2;
    let m = g.m();
    let h = 1.0 / m as f64;
    let (nodes, samples): (Vec<f64>, Vec<usize>) = match side {
        Side::Start => (0..npts).map(|j| (j as f64, j)).unzip(),
        Side::End => (0..npts).map(|j| (-(j as f64), m - j)).unzip(),
    };
    let w = fd_weights(0.0, &nodes, k);
    let sum: f64 = w[k]
        .iter()
        .zip(&samples)
        .map(|(wj, &s)| wj * f(g.point(s)))
        .sum();
    sum / h.powi(k as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetOptions {
    pub order: usize,
    /// Tolerance relative to `max |f|` over the involved samples.
    pub rel_tol: f64,
}

impl Default for JetOptions {
    fn default() -> Self {
        JetOptions {
            order: 3,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetReport {
    /// Boundary between stage `stage` and `stage + 1`.
    pub stage: usize,
    pub incoming: usize,
    pub outgoing: usize,
    /// Derivatives of orders `1..=order` of the incoming sum at `1⁻`.
    pub incoming_jet: Vec<f64>,
    /// Derivatives of orders `1..=order` of the outgoing sum at `0⁺`.
    pub outgoing_jet: Vec<f64>,
    /// `|incoming_jet[k] − outgoing_jet[k]|`.
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `Σ f∘c₋` at `1⁻` (incoming segments ending at `branch_point`)
/// with `Σ f∘c₊` at `0⁺` (outgoing segments starting there), derivative
/// orders `1..=opts.order`.
pub fn jet_match<F>(
    space: &AmbientSpace,
    bp: &BranchedPath,
    branch_point: &[f64],
    f: F,
    opts: JetOptions,
) -> Result<JetReport, PathError>
where
    F: Fn(&[f64]) -> f64,
{
    if opts.order == 0 || opts.order > MAX_JET_ORDER {
        return Err(PathError::InvalidOrder(opts.order));
    }
    let near = |p: &[f64]| space.distance(p, branch_point) <= space.tol_eq;
    let junction = (0..bp.stages.len().saturating_sub(1)).find_map(|s| {
        let inc: Vec<&PathSegment> = bp.stages[s].iter().filter(|g| near(g.omega())).collect();
        let out: Vec<&PathSegment> = bp.stages[s + 1]
            .iter()
            .filter(|g| near(g.alpha()))
            .collect();
        (!inc.is_empty() && !out.is_empty()).then_some((s, inc, out))
    });
    let (stage, incoming, outgoing) = junction.ok_or(PathError::NotAJunction)?;

    let required = 4 * opts.order;
    for g in incoming.iter().chain(&outgoing) {
        if g.m() < required {
            return Err(PathError::InsufficientResolution {
                m: g.m(),
                order: opts.order,
                required,
            });
        }
    }

    let scale = incoming
        .iter()
        .chain(&outgoing)
        .flat_map(|g| g.points())
        .map(|p| f(p).abs())
        .fold(0.0, f64::max);
    let tolerance = opts.rel_tol * scale;

    let jet = |segs: &[&PathSegment], side| -> Vec<f64> {
        (1..=opts.order)
            .map(|k| {
                segs.iter()
                    .map(|g| one_sided_derivative(g, &f, k, side))
                    .sum()
            })
            .collect()
    };
    let incoming_jet = jet(&incoming, Side::End);
    let outgoing_jet = jet(&outgoing, Side::Start);
    let residuals: Vec<f64> = incoming_jet
        .iter()
        .zip(&outgoing_jet)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let passed = residuals.iter().all(|r| *r <= tolerance);
    Ok(JetReport {
        stage,
        incoming: incoming.len(),
        outgoing: outgoing.len(),
        incoming_jet,
        outgoing_jet,
        residuals,
        tolerance,
        passed,
    })
}

/// A named scalar test function on the ambient space.
pub struct TestFunction {
    pub name: String,
    pub f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("TestFunction")
            .field("name", &self.name)
            .finish()
    }
}

/// Coordinate functions `x_i` followed by the products `x_i x_j`, `i ≤ j`.
pub fn default_test_functions(dim: usize) -> Vec<TestFunction> {
    let mut out: Vec<TestFunction> = (0..dim)
        .map(|i| TestFunction {
            name: format!("x{i}"),
            f: Box::new(move |p: &[f64]| p[i]),
        })
        .collect();
    for i in 0..dim {
        for j in i..dim {
            out.push(TestFunction {
                name: format!("x{i}*x{j}"),
                f: Box::new(move |p: &[f64]| p[i] * p[j]),
            });
        }
    }
    out
}

/// Runs [`jet_match`] for each test function.
pub fn jet_match_family(
    space: &AmbientSpace,
    bp: &BranchedPath,
    branch_point: &[f64],
    family: &[TestFunction],
    opts: JetOptions,
) -> Result<Vec<(String, JetReport)>, PathError> {
    family
        .iter()
        .map(|tf| {
            Ok((
                tf.name.clone(),
                jet_match(space, bp, branch_point, &tf.f, opts)?,
            ))
        })
        .collect()
}

/// Junction points: the distinct end points between consecutive stages.
pub fn junctions(space: &AmbientSpace, bp: &BranchedPath) -> Result<Vec<Point>, PathError> {
    let mut out = Vec::new();
    for s in 0..bp.stages.len().saturating_sub(1) {
        out.extend(bp.omegas(space, s)?.to_points());
    }
    Ok(out)
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// Graphviz rendering: one cluster per junction configuration, one node per
/// point, one edge per segment.
pub fn to_dot(space: &AmbientSpace, bp: &BranchedPath) -> Result<String, PathError> {
    let nstages = bp.stages.len();
    let mut boundaries = Vec::with_capacity(nstages + 1);
    if nstages > 0 {
        boundaries.push(bp.alphas(space, 0)?);
    }
    for s in 0..nstages {
        boundaries.push(bp.omegas(space, s)?);
    }
    let node_at = |b: usize, p: &[f64]| -> usize {
        boundaries[b]
            .iter()
            .enumerate()
            .map(|(i, q)| (i, space.distance(p, q)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(i, _)| i)
    };

    let mut out = String::from("digraph branched_path {\n  rankdir=LR;\n");
    for (b, conf) in boundaries.iter().enumerate() {
        let _ = writeln!(
            out,
            "  subgraph cluster_{b} {{\n    label=\"junction {b}\";"
        );
        for (i, p) in conf.iter().enumerate() {
            let _ = writeln!(out, "    n{b}_{i} [label=\"{}\"];", fmt_point(p));
        }
        out.push_str("  }\n");
    }
    for (s, stage) in bp.stages.iter().enumerate() {
        for (i, g) in stage.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{s}_{} -> n{}_{} [label=\"s{s}.{i}\"];",
                node_at(s, g.alpha()),
                s + 1,
                node_at(s + 1, g.omega())
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// The four-path branched path of ℝ²: a segment along the axis into
/// `(-1, 0)`, the upper and lower unit half circles to `(1, 0)`, and a
/// segment out along the axis.
pub fn four_path_circle(m: usize) -> Result<BranchedPath, PathError> {
    use std::f64::consts::PI;
    let g1 = PathSegment::from_fn(m, |t| vec![t - 2.0, 0.0])?;
    let g2 = PathSegment::from_fn(m, |t| vec![(PI * (1.0 - t)).cos(), (PI * t).sin()])?;
    let g3 = PathSegment::from_fn(m, |t| vec![(PI * (1.0 - t)).cos(), -(PI * t).sin()])?;
    let g4 = PathSegment::from_fn(m, |t| vec![t + 1.0, 0.0])?;
    BranchedPath::new(vec![vec![g1], vec![g2, g3], vec![g4]])
}
