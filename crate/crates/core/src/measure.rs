//! Measure-like configurations on a regular grid.
//!
//! A compactly supported function is identified with its support: `f R g`
//! iff `Supp f = Supp g`. Supports are cell masks, split into
//! face-connected components whose volumes are `cell_count · h^d`.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default threshold below which a cell value counts as zero.
pub const DEFAULT_TOL_SUPP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("grid dimensions must be non-empty and positive")]
    InvalidDims,
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("expected {expected} values, found {found}")]
    ValueCount { expected: usize, found: usize },
    #[error("origin has {found} coordinates, grid has {expected} dimensions")]
    OriginMismatch { expected: usize, found: usize },
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
    #[error("support touches the boundary layer at cell {0:?}")]
    SupportTouchesBoundary(Vec<usize>),
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("region mask has {found} cells, grid has {expected}")]
    RegionMismatch { expected: usize, found: usize },
    #[error("region and its ring overlap at cell {0}")]
    RingOverlap(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Real values on a regular lattice, stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    dims: Vec<usize>,
    h: f64,
    origin: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        dims: Vec<usize>,
        h: f64,
        origin: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(MeasureError::InvalidDims);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(MeasureError::InvalidSpacing(h));
        }
        if origin.len() != dims.len() {
            return Err(MeasureError::OriginMismatch {
                expected: dims.len(),
                found: origin.len(),
            });
        }
        let expected: usize = dims.iter().product();
        if values.len() != expected {
            return Err(MeasureError::ValueCount {
                expected,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite(i));
        }
        Ok(GridFunction {
            dims,
            h,
            origin,
            values,
        })
    }

    pub fn zeros(dims: Vec<usize>, h: f64) -> Result<Self, MeasureError> {
        let n = dims.iter().product();
        let origin = vec![0.0; dims.len()];
        GridFunction::new(dims, h, origin, vec![0.0; n])
    }

    /// Samples `f` at cell centres `origin + (i + ½) h`.
    pub fn from_fn<F>(
        dims: Vec<usize>,
        h: f64,
        origin: Vec<f64>,
        f: F,
    ) -> Result<Self, MeasureError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let n: usize = dims.iter().product();
        let mut x = vec![0.0; dims.len()];
        let mut values = Vec::with_capacity(n);
        for flat in 0..n {
            let idx = unravel(&dims, flat);
            for (k, xi) in x.iter_mut().enumerate() {
                *xi = origin.get(k).copied().unwrap_or(0.0) + (idx[k] as f64 + 0.5) * h;
            }
            values.push(f(&x));
        }
        GridFunction::new(dims, h, origin, values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dims.len() as i32)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[ravel(&self.dims, idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let i = ravel(&self.dims, idx);
        self.values[i] = v;
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| v * lambda).collect(),
            ..self.clone()
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.dims == other.dims && self.h == other.h && self.origin == other.origin
    }

    pub fn mask(&self, tol_supp: f64) -> Vec<bool> {
        self.values.iter().map(|v| v.abs() > tol_supp).collect()
    }

    /// First nonzero cell in the outermost layer, if any.
    pub fn boundary_violation(&self, tol_supp: f64) -> Option<Vec<usize>> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tol_supp)
            .map(|(i, _)| unravel(&self.dims, i))
            .find(|idx| {
                idx.iter()
                    .zip(&self.dims)
                    .any(|(&i, &n)| i == 0 || i + 1 == n)
            })
    }

    pub fn compact_support_certificate(&self, tol_supp: f64) -> bool {
        self.boundary_violation(tol_supp).is_none()
    }

    /// Text form: `dims`, `h` and `origin` header lines, then row-major values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        writeln!(
            s,
            "dims {}",
            join(&mut self.dims.iter().map(|d| d.to_string()))
        )
        .unwrap();
        writeln!(s, "h {}", self.h).unwrap();
        writeln!(
            s,
            "origin {}",
            join(&mut self.origin.iter().map(|o| o.to_string()))
        )
        .unwrap();
        let row = *self.dims.last().unwrap();
        for chunk in self.values.chunks(row) {
            writeln!(s, "{}", join(&mut chunk.iter().map(|v| v.to_string()))).unwrap();
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, MeasureError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut header = |key: &str| -> Result<(usize, Vec<String>), MeasureError> {
            let (line, l) = lines.next().ok_or(MeasureError::Parse {
                line: 0,
                message: format!("missing `{key}` header"),
            })?;
            let mut words = l.split_whitespace();
            if words.next() != Some(key) {
                return Err(MeasureError::Parse {
                    line,
                    message: format!("expected `{key}` header"),
                });
            }
            Ok((line, words.map(str::to_owned).collect()))
        };
        let parse_err = |line: usize, w: &str| MeasureError::Parse {
            line,
            message: format!("cannot parse `{w}`"),
        };
        let (line, words) = header("dims")?;
        let dims = words
            .iter()
            .map(|w| w.parse::<usize>().map_err(|_| parse_err(line, w)))
            .collect::<Result<Vec<_>, _>>()?;
        let (line, words) = header("h")?;
        let h = match words.as_slice() {
            [w] => w.parse::<f64>().map_err(|_| parse_err(line, w))?,
            _ => {
                return Err(MeasureError::Parse {
                    line,
                    message: "expected a single spacing".into(),
                })
            }
        };
        let (line, words) = header("origin")?;
        let origin = words
            .iter()
            .map(|w| w.parse::<f64>().map_err(|_| parse_err(line, w)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::new();
        for (line, l) in lines {
            for w in l.split_whitespace() {
                values.push(w.parse::<f64>().map_err(|_| parse_err(line, w))?);
            }
        }
        GridFunction::new(dims, h, origin, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        let raw: GridFunction = serde_json::from_str(text)?;
        GridFunction::new(raw.dims, raw.h, raw.origin, raw.values)
    }

    /// Reads a `.json` file as JSON and anything else as the text format.
    pub fn read(path: &Path) -> Result<Self, MeasureError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            GridFunction::from_json(&text)
        } else {
            GridFunction::parse_text(&text)
        }
    }
}

pub(crate) fn ravel(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &n)| {
        debug_assert!(i < n);
        acc * n + i
    })
}

pub(crate) fn unravel(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

fn for_each_face_neighbor(dims: &[usize], flat: usize, mut f: impl FnMut(usize)) {
    let mut stride = 1;
    for k in (0..dims.len()).rev() {
        let i = (flat / stride) % dims[k];
        if i > 0 {
            f(flat - stride);
        }
        if i + 1 < dims[k] {
            f(flat + stride);
        }
        stride *= dims[k];
    }
}

/// The `R`-class of a grid function: its support and the support's
/// face-connected components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportClass {
    pub dims: Vec<usize>,
    pub h: f64,
    pub mask: Vec<bool>,
    /// Flat cell indices per component, each sorted; components ordered by first cell.
    pub components: Vec<Vec<usize>>,
    pub volumes: Vec<f64>,
}

impl SupportClass {
    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_count() as f64 * self.h.powi(self.dims.len() as i32)
    }
}

pub fn support_class(f: &GridFunction) -> Result<SupportClass, MeasureError> {
    support_class_with_tol(f, DEFAULT_TOL_SUPP)
}

pub fn support_class_with_tol(
    f: &GridFunction,
    tol_supp: f64,
) -> Result<SupportClass, MeasureError> {
    if let Some(idx) = f.boundary_violation(tol_supp) {
        return Err(MeasureError::SupportTouchesBoundary(idx));
    }
    let mask = f.mask(tol_supp);
    let mut seen = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            for_each_face_neighbor(&f.dims, c, |nb| {
                if mask[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            });
        }
        cells.sort_unstable();
        components.push(cells);
    }
    let cell = f.cell_volume();
    let volumes = components.iter().map(|c| c.len() as f64 * cell).collect();
    Ok(SupportClass {
        dims: f.dims.clone(),
        h: f.h,
        mask,
        components,
        volumes,
    })
}

/// `f R g`: identical supports on a common grid.
pub fn r_equivalent(f: &GridFunction, g: &GridFunction) -> Result<bool, MeasureError> {
    if !f.same_grid(g) {
        return Err(MeasureError::GridMismatch);
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .all(|(a, b)| (a.abs() > DEFAULT_TOL_SUPP) == (b.abs() > DEFAULT_TOL_SUPP)))
}

/// A cell set `A` together with its one-cell ring `Ā \ A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    dims: Vec<usize>,
    cells: Vec<bool>,
    ring: Vec<bool>,
}

impl Region {
    /// `A` with the ring of cells at Chebyshev index distance 1 from it.
    pub fn new(dims: Vec<usize>, cells: Vec<bool>) -> Result<Self, MeasureError> {
        let n: usize = dims.iter().product();
        if cells.len() != n {
            return Err(MeasureError::RegionMismatch {
                expected: n,
                found: cells.len(),
            });
        }
        let mut ring = vec![false; n];
        let d = dims.len();
        for flat in (0..n).filter(|&i| cells[i]) {
            let idx = unravel(&dims, flat);
            // walk the 3^d block around idx
            for code in 0..3usize.pow(d as u32) {
                let mut c = code;
                let mut nb = Vec::with_capacity(d);
                for k in 0..d {
                    let off = (c % 3) as isize - 1;
                    c /= 3;
                    let j = idx[k] as isize + off;
                    if j < 0 || j >= dims[k] as isize {
                        break;
                    }
                    nb.push(j as usize);
                }
                if nb.len() == d {
                    let f = ravel(&dims, &nb);
                    if !cells[f] {
                        ring[f] = true;
                    }
                }
            }
        }
        Ok(Region { dims, cells, ring })
    }

    pub fn with_ring(
        dims: Vec<usize>,
        cells: Vec<bool>,
        ring: Vec<bool>,
    ) -> Result<Self, MeasureError> {
        let n: usize = dims.iter().product();
        for m in [&cells, &ring] {
            if m.len() != n {
                return Err(MeasureError::RegionMismatch {
                    expected: n,
                    found: m.len(),
                });
            }
        }
        if let Some(i) = (0..n).find(|&i| cells[i] && ring[i]) {
            return Err(MeasureError::RingOverlap(i));
        }
        Ok(Region { dims, cells, ring })
    }

    /// The index box `lo[k] ≤ i_k < hi[k]`, clipped to the grid.
    pub fn index_box(dims: Vec<usize>, lo: &[usize], hi: &[usize]) -> Result<Self, MeasureError> {
        if lo.len() != dims.len() || hi.len() != dims.len() {
            return Err(MeasureError::InvalidDims);
        }
        let n: usize = dims.iter().product();
        let cells = (0..n)
            .map(|flat| {
                unravel(&dims, flat)
                    .iter()
                    .enumerate()
                    .all(|(k, &i)| lo[k] <= i && i < hi[k])
            })
            .collect();
        Region::new(dims, cells)
    }

    /// Everything except the outermost layer, whose cells form the ring.
    pub fn interior(dims: Vec<usize>) -> Result<Self, MeasureError> {
        let lo = vec![1; dims.len()];
        let hi: Vec<usize> = dims.iter().map(|&n| n.saturating_sub(1)).collect();
        Region::index_box(dims, &lo, &hi)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn ring(&self) -> &[bool] {
        &self.ring
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub steps: Range<usize>,
    /// Cell count of `Supp ∩ A` per step.
    pub cell_counts: Vec<usize>,
    pub volumes: Vec<f64>,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumePathReport {
    pub valid: bool,
    pub first_violation: Option<usize>,
    pub intervals: Vec<IntervalReport>,
    /// Steps where the ring is not clear; they are outside every interval.
    pub excluded: Vec<usize>,
}

/// Checks that `Vol(Supp p_k ∩ A)` is constant over every maximal run of
/// steps whose frames vanish on the ring `Ā \ A`.
pub fn validate_constant_volume_path(
    path: &[GridFunction],
    region: &Region,
) -> Result<VolumePathReport, MeasureError> {
    validate_constant_volume_path_with_tol(path, region, DEFAULT_TOL_SUPP)
}

pub fn validate_constant_volume_path_with_tol(
    path: &[GridFunction],
    region: &Region,
    tol_supp: f64,
) -> Result<VolumePathReport, MeasureError> {
    if let Some(first) = path.first() {
        if path.iter().any(|f| !f.same_grid(first)) {
            return Err(MeasureError::GridMismatch);
        }
        if first.dims != region.dims {
            return Err(MeasureError::GridMismatch);
        }
    }
    let frames: Vec<(bool, usize)> = path
        .iter()
        .map(|f| {
            let mut clear = true;
            let mut count = 0;
            for (i, v) in f.values.iter().enumerate() {
                if v.abs() > tol_supp {
                    clear &= !region.ring[i];
                    count += usize::from(region.cells[i]);
                }
            }
            (clear, count)
        })
        .collect();
    let cell = path.first().map_or(0.0, GridFunction::cell_volume);
    let mut intervals = Vec::new();
    let mut excluded = Vec::new();
    let mut first_violation = None;
    let mut k = 0;
    while k < frames.len() {
        if !frames[k].0 {
            excluded.push(k);
            k += 1;
            continue;
        }
        let start = k;
        while k < frames.len() && frames[k].0 {
            k += 1;
        }
        let cell_counts: Vec<usize> = frames[start..k].iter().map(|f| f.1).collect();
        let bad = cell_counts.windows(2).position(|w| w[0] != w[1]);
        if let (Some(b), None) = (bad, first_violation) {
            first_violation = Some(start + b + 1);
        }
        intervals.push(IntervalReport {
            steps: start..k,
            volumes: cell_counts.iter().map(|&c| c as f64 * cell).collect(),
            cell_counts,
            constant: bad.is_none(),
        });
    }
    Ok(VolumePathReport {
        valid: first_violation.is_none(),
        first_violation,
        intervals,
        excluded,
    })
}
