//! Multivalued sections of trivial bundles `M × F₀`.
//!
//! A sampled section assigns to every base grid point a configuration in the
//! fiber. [`branched_equilibrium_section`] builds one from a parameter field
//! `A: M → (0, 4]` by taking, at each base point, the attracting cycle of
//! the logistic map; the fiber cardinality then jumps where `A` crosses a
//! period-doubling parameter. [`decompose_or_witness`] tries to thread a
//! constant-cardinality section into single-valued continuous selections.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AmbientSpace, ConfigError, Configuration, Metric, Point};
use crate::logistic::{
    bifurcation_points, logistic_attractor, Attractor, AttractorOptions, LogisticError,
};

/// Required ratio between the second-best and best continuation distance.
pub const GAP_RATIO: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SectionError {
    #[error("base grid is empty")]
    EmptyGrid,
    #[error("{base} base points but {fibers} fibers")]
    LengthMismatch { base: usize, fibers: usize },
    #[error("fiber {0} is empty")]
    EmptyFiber(usize),
    #[error("field value {value} at grid point {index} is outside (0, 4]")]
    ParameterOutOfRange { index: usize, value: f64 },
    #[error("fiber cardinality changes at grid point {index} ({before} -> {after})")]
    NonConstantCardinality {
        index: usize,
        before: usize,
        after: usize,
    },
    #[error("fiber {0} is flagged chaotic")]
    ChaoticFiber(usize),
    #[error(transparent)]
    Logistic(#[from] LogisticError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fiber {
    Points(Configuration),
    /// No periodic attractor; no points are fabricated.
    Chaotic,
}

impl Fiber {
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            Fiber::Points(c) => Some(c.len()),
            Fiber::Chaotic => None,
        }
    }

    pub fn points(&self) -> Option<&Configuration> {
        match self {
            Fiber::Points(c) => Some(c),
            Fiber::Chaotic => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchedSectionSample {
    base_points: Vec<Point>,
    fibers: Vec<Fiber>,
}

impl BranchedSectionSample {
    pub fn new(base_points: Vec<Point>, fibers: Vec<Fiber>) -> Result<Self, SectionError> {
        if base_points.len() != fibers.len() {
            return Err(SectionError::LengthMismatch {
                base: base_points.len(),
                fibers: fibers.len(),
            });
        }
        if let Some(i) = fibers
            .iter()
            .position(|f| matches!(f, Fiber::Points(c) if c.is_empty()))
        {
            return Err(SectionError::EmptyFiber(i));
        }
        Ok(BranchedSectionSample {
            base_points,
            fibers,
        })
    }

    pub fn base_points(&self) -> &[Point] {
        &self.base_points
    }

    pub fn fibers(&self) -> &[Fiber] {
        &self.fibers
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<Option<usize>> {
        self.fibers.iter().map(Fiber::cardinality).collect()
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        BranchedSectionSample {
            base_points: self.base_points[range.clone()].to_vec(),
            fibers: self.fibers[range].to_vec(),
        }
    }

    /// Maximal index runs of constant fiber cardinality (`None` for chaotic runs).
    pub fn constant_runs(&self) -> Vec<(Range<usize>, Option<usize>)> {
        let cards = self.cardinalities();
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=cards.len() {
            if i == cards.len() || cards[i] != cards[start] {
                runs.push((start..i, cards[start]));
                start = i;
            }
        }
        runs
    }
}

/// A point of the base where the fiber cardinality doubles or halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchLocus {
    pub base_location: Vec<f64>,
    pub cardinality_before: usize,
    pub cardinality_after: usize,
    /// The bifurcation parameter crossed at this locus.
    pub parameter_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSection {
    pub sample: BranchedSectionSample,
    /// Field values `A(x)` at the grid points.
    pub parameters: Vec<f64>,
    pub loci: Vec<BranchLocus>,
}

/// Logistic equilibrium section over `grid` for the parameter field `field`.
///
/// Loci are reported between consecutive grid points whose (periodic) fiber
/// cardinalities differ, one per doubling, located by linear interpolation
/// of `A` at the crossed bifurcation parameter.
pub fn branched_equilibrium_section<F>(
    field: F,
    grid: &[Point],
    opts: AttractorOptions,
) -> Result<EquilibriumSection, SectionError>
where
    F: Fn(&[f64]) -> f64,
{
    if grid.is_empty() {
        return Err(SectionError::EmptyGrid);
    }
    let fiber_space = AmbientSpace::euclidean(1);
    let mut parameters = Vec::with_capacity(grid.len());
    let mut fibers = Vec::with_capacity(grid.len());
    for (index, x) in grid.iter().enumerate() {
        let value = field(x.coords());
        if !(value > 0.0 && value <= 4.0) {
            return Err(SectionError::ParameterOutOfRange { index, value });
        }
        parameters.push(value);
        let fiber = match logistic_attractor(value, opts)? {
            Attractor::Periodic(orbit) => Fiber::Points(Configuration::from_rows(
                &fiber_space,
                orbit.points.iter().map(|p| [*p]),
            )?),
            Attractor::Chaotic { .. } => Fiber::Chaotic,
        };
        fibers.push(fiber);
    }
    let sample = BranchedSectionSample::new(grid.to_vec(), fibers)?;

    let level = |n: usize| n.trailing_zeros() as usize;
    let deepest = sample
        .cardinalities()
        .into_iter()
        .flatten()
        .map(level)
        .max()
        .unwrap_or(0);
    let cascade = if deepest > 0 {
        bifurcation_points(deepest)?
    } else {
        Vec::new()
    };

    let mut loci = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (Some(c0), Some(c1)) = (
            sample.fibers[i].cardinality(),
            sample.fibers[i + 1].cardinality(),
        ) else {
            continue;
        };
        if c0 == c1 {
            continue;
        }
        let (l0, l1) = (level(c0), level(c1));
        let levels: Vec<usize> = if l1 > l0 {
            ((l0 + 1)..=l1).collect()
        } else {
            ((l1 + 1)..=l0).rev().collect()
        };
        let (a0, a1) = (parameters[i], parameters[i + 1]);
        let (x0, x1) = (grid[i].coords(), grid[i + 1].coords());
        for l in levels {
            let threshold = cascade[l - 1];
            let s = if a1 != a0 {
                ((threshold - a0) / (a1 - a0)).clamp(0.0, 1.0)
            } else {
                0.5
            };
            let (before, after) = if l1 > l0 {
                (1 << (l - 1), 1 << l)
            } else {
                (1 << l, 1 << (l - 1))
            };
            loci.push(BranchLocus {
                base_location: x0.iter().zip(x1).map(|(a, b)| a + s * (b - a)).collect(),
                cardinality_before: before,
                cardinality_after: after,
                parameter_value: threshold,
            });
        }
    }
    Ok(EquilibriumSection {
        sample,
        parameters,
        loci,
    })
}

/// One single-valued continuous selection through the fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub values: Vec<Point>,
}

/// A grid edge where nearest continuation is ambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityWitness {
    pub edge: (usize, usize),
    pub selection: usize,
    pub best: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Selections {
        selections: Vec<Selection>,
        /// Largest selection jump divided by base spacing.
        lipschitz_estimate: f64,
    },
    Witness(AmbiguityWitness),
}

/// Threads `n` selections by nearest continuation between consecutive grid
/// points, or reports the first ambiguous edge.
pub fn decompose_or_witness(s: &BranchedSectionSample) -> Result<Decomposition, SectionError> {
    if s.is_empty() {
        return Err(SectionError::EmptyGrid);
    }
    let mut fibers = Vec::with_capacity(s.len());
    for (i, f) in s.fibers.iter().enumerate() {
        match f {
            Fiber::Points(c) => fibers.push(c),
            Fiber::Chaotic => return Err(SectionError::ChaoticFiber(i)),
        }
    }
    let n = fibers[0].len();
    for (i, w) in fibers.windows(2).enumerate() {
        if w[1].len() != n {
            return Err(SectionError::NonConstantCardinality {
                index: i + 1,
                before: n,
                after: w[1].len(),
            });
        }
    }
    let metric = Metric::Euclidean;
    let mut current: Vec<usize> = (0..n).collect();
    let mut tracks: Vec<Vec<usize>> = vec![current.clone()];
    let mut lipschitz: f64 = 0.0;
    for i in 0..fibers.len() - 1 {
        let (here, next) = (fibers[i], fibers[i + 1]);
        let mut taken = vec![usize::MAX; n];
        let mut chosen = Vec::with_capacity(n);
        for (sel, &k) in current.iter().enumerate() {
            let y = here.point(k);
            let mut dists: Vec<(f64, usize)> = next
                .iter()
                .enumerate()
                .map(|(j, q)| (metric.distance(y, q), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (best, j) = dists[0];
            let second = dists.get(1).map_or(f64::INFINITY, |d| d.0);
            let witness = AmbiguityWitness {
                edge: (i, i + 1),
                selection: sel,
                best,
                second,
            };
            if second < GAP_RATIO * best || taken[j] != usize::MAX {
                return Ok(Decomposition::Witness(witness));
            }
            taken[j] = sel;
            chosen.push(j);
            let spacing = metric.distance(s.base_points[i].coords(), s.base_points[i + 1].coords());
            if spacing > 0.0 {
                lipschitz = lipschitz.max(best / spacing);
            }
        }
        current = chosen;
        tracks.push(current.clone());
    }
    let selections = (0..n)
        .map(|sel| Selection {
            values: tracks
                .iter()
                .zip(&fibers)
                .map(|(t, f)| Point::new(f.point(t[sel]).to_vec()))
                .collect::<Result<Vec<_>, _>>()
                .expect("fiber points are finite"),
        })
        .collect();
    Ok(Decomposition::Selections {
        selections,
        lipschitz_estimate: lipschitz,
    })
}

/// `{"grid": [...], "fibers": [[...], ...], "loci": [{...}]}`; chaotic
/// fibers are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionJson {
    pub grid: Vec<Vec<f64>>,
    pub parameters: Vec<f64>,
    pub fibers: Vec<Option<Vec<f64>>>,
    pub loci: Vec<BranchLocus>,
}

impl From<&EquilibriumSection> for SectionJson {
    fn from(s: &EquilibriumSection) -> Self {
        SectionJson {
            grid: s
                .sample
                .base_points
                .iter()
                .map(|p| p.coords().to_vec())
                .collect(),
            parameters: s.parameters.clone(),
            fibers: s
                .sample
                .fibers
                .iter()
                .map(|f| f.points().map(|c| c.flat().to_vec()))
                .collect(),
            loci: s.loci.clone(),
        }
    }
}

/// `n + 1` evenly spaced points of `[lo, hi]` as 1-d base points.
pub fn interval_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<Point>, ConfigError> {
    (0..=n)
        .map(|k| {
            let x = if n == 0 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            };
            Point::new(vec![x])
        })
        .collect()
}
