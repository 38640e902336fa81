//! Uniform-grid spatial index with exact nearest-neighbour queries.
//!
//! Points are bucketed into cubic cells laid over their bounding box and
//! stored contiguously per cell. A query scans Chebyshev rings of cells
//! around the query cell and stops once no unvisited cell can hold a closer
//! point, so results always equal a linear scan.

use crate::config::{BoundingBox, Configuration, Metric};

/// Sample size for the nearest-neighbour spacing estimate.
const SPACING_SAMPLES: usize = 64;
/// Upper bound on allocated cells per indexed point.
const MAX_CELLS_PER_POINT: f64 = 4.0;
/// Relative slack on the ring termination bound, absorbing rounding in the
/// cell assignment.
const TERMINATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    metric: Metric,
    origin: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    cell_start: Vec<usize>,
    ids: Vec<usize>,
    coords: Vec<f64>,
    fingerprint: u64,
}

impl SpatialIndex {
    /// Builds an index with cell size near the median nearest-neighbour spacing.
    pub fn build(u: &Configuration, metric: Metric) -> Self {
        Self::build_flat(u.dim(), u.flat(), metric)
    }

    pub fn with_cell_size(u: &Configuration, metric: Metric, cell: f64) -> Self {
        Self::with_cell_size_flat(u.dim(), u.flat(), metric, cell)
    }

    /// Indexes an arbitrary flat point buffer; ids are positions in `coords`.
    pub fn build_flat(dim: usize, coords: &[f64], metric: Metric) -> Self {
        let cell = estimate_spacing(dim, coords, metric);
        Self::with_cell_size_flat(dim, coords, metric, cell)
    }

    pub fn with_cell_size_flat(dim: usize, points: &[f64], metric: Metric, cell: f64) -> Self {
        assert!(
            dim > 0 && points.len() % dim == 0,
            "flat buffer must hold whole points"
        );
        let n = points.len() / dim;
        let bbox = BoundingBox::enclosing(dim, points)
            .unwrap_or_else(|| BoundingBox::new(vec![0.0; dim], vec![0.0; dim]));
        let extents: Vec<f64> = bbox.min.iter().zip(&bbox.max).map(|(a, b)| b - a).collect();

        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            fallback_cell(&extents, n)
        };
        let limit = MAX_CELLS_PER_POINT * n.max(1) as f64 + 16.0;
        loop {
            let total: f64 = extents.iter().map(|e| (e / cell).floor() + 1.0).product();
            if total <= limit {
                break;
            }
            cell *= (total / limit).powf(1.0 / dim as f64).max(1.01);
        }

        let shape: Vec<usize> = extents
            .iter()
            .map(|e| (e / cell).floor() as usize + 1)
            .collect();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let ncells: usize = shape.iter().product();

        let mut index = SpatialIndex {
            dim,
            metric,
            origin: bbox.min,
            cell,
            shape,
            strides,
            cell_start: vec![0; ncells + 1],
            ids: Vec::with_capacity(n),
            coords: Vec::with_capacity(n * dim),
            fingerprint: fingerprint(dim, points),
        };

        let cell_of: Vec<usize> = points
            .chunks_exact(dim)
            .map(|p| index.linear_cell(p))
            .collect();
        for &c in &cell_of {
            index.cell_start[c + 1] += 1;
        }
        for c in 0..ncells {
            index.cell_start[c + 1] += index.cell_start[c];
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (cell_of[i], i));
        for i in order {
            index.ids.push(i);
            index
                .coords
                .extend_from_slice(&points[i * dim..(i + 1) * dim]);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Whether this index was built over exactly the points of `u`.
    pub fn covers(&self, u: &Configuration) -> bool {
        self.covers_flat(u.dim(), u.flat())
    }

    pub fn covers_flat(&self, dim: usize, coords: &[f64]) -> bool {
        self.dim == dim
            && self.len() * dim == coords.len()
            && self.fingerprint == fingerprint(dim, coords)
    }

    fn axis_cell(&self, k: usize, x: f64) -> i64 {
        ((x - self.origin[k]) / self.cell).floor() as i64
    }

    fn linear_cell(&self, p: &[f64]) -> usize {
        (0..self.dim)
            .map(|k| {
                let c = self.axis_cell(k, p[k]).clamp(0, self.shape[k] as i64 - 1);
                c as usize * self.strides[k]
            })
            .sum()
    }

    /// Nearest indexed point to `x`: its position in the configuration and
    /// its distance. `None` on an empty index.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.nearest_other(x, None)
    }

    /// Like [`nearest`](Self::nearest) but ignoring the point with id `skip`.
    pub fn nearest_other(&self, x: &[f64], skip: Option<usize>) -> Option<(usize, f64)> {
        if self.len() <= usize::from(skip.is_some()) {
            return None;
        }
        debug_assert_eq!(x.len(), self.dim);
        let centre: Vec<i64> = (0..self.dim).map(|k| self.axis_cell(k, x[k])).collect();
        let mut first_ring = 0i64;
        let mut last_ring = 0i64;
        for k in 0..self.dim {
            let hi = self.shape[k] as i64 - 1;
            let c = centre[k];
            first_ring = first_ring.max(c.saturating_neg()).max(c.saturating_sub(hi));
            last_ring = last_ring
                .max(c.saturating_abs())
                .max(hi.saturating_sub(c).saturating_abs());
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut r = first_ring.max(0);
        loop {
            self.scan_shell(0, &centre, r, false, 0, x, skip, &mut best);
            let bound = r as f64 * self.cell * (1.0 - TERMINATION_SLACK);
            if best.1 <= bound || r >= last_ring {
                break;
            }
            r += 1;
        }
        Some(best)
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_shell(
        &self,
        k: usize,
        centre: &[i64],
        r: i64,
        on_shell: bool,
        offset: usize,
        x: &[f64],
        skip: Option<usize>,
        best: &mut (usize, f64),
    ) {
        let hi = self.shape[k] as i64 - 1;
        let c = centre[k];
        let lo_idx = (c.saturating_sub(r)).max(0);
        let hi_idx = (c.saturating_add(r)).min(hi);
        if lo_idx > hi_idx {
            return;
        }
        let last = k + 1 == self.dim;
        let mut visit = |idx: i64, on: bool| {
            let off = offset + idx as usize * self.strides[k];
            if last {
                self.scan_cell(off, x, skip, best);
            } else {
                self.scan_shell(k + 1, centre, r, on, off, x, skip, best);
            }
        };
        if last && !on_shell {
            let (below, above) = (c.saturating_sub(r), c.saturating_add(r));
            if (0..=hi).contains(&below) {
                visit(below, true);
            }
            if r > 0 && (0..=hi).contains(&above) {
                visit(above, true);
            }
        } else {
            for idx in lo_idx..=hi_idx {
                visit(idx, on_shell || idx.saturating_sub(c).saturating_abs() == r);
            }
        }
    }

    fn scan_cell(&self, cell: usize, x: &[f64], skip: Option<usize>, best: &mut (usize, f64)) {
        let (start, end) = (self.cell_start[cell], self.cell_start[cell + 1]);
        for slot in start..end {
            let id = self.ids[slot];
            if Some(id) == skip {
                continue;
            }
            let p = &self.coords[slot * self.dim..(slot + 1) * self.dim];
            let d = self.metric.distance(x, p);
            if d < best.1 || (d == best.1 && id < best.0) {
                *best = (id, d);
            }
        }
    }
}

fn fallback_cell(extents: &[f64], n: usize) -> f64 {
    let max_extent = extents.iter().copied().fold(0.0, f64::max);
    if max_extent > 0.0 {
        max_extent / (n.max(1) as f64).powf(1.0 / extents.len() as f64)
    } else {
        1.0
    }
}

/// Median nearest-neighbour distance over an evenly strided sample.
fn estimate_spacing(dim: usize, points: &[f64], metric: Metric) -> f64 {
    let n = points.len() / dim;
    if n < 2 {
        return f64::NAN;
    }
    let samples = n.min(SPACING_SAMPLES);
    let step = n / samples;
    let mut nn: Vec<f64> = (0..samples)
        .map(|s| {
            let i = s * step;
            let p = &points[i * dim..(i + 1) * dim];
            points
                .chunks_exact(dim)
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| metric.distance(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    nn[nn.len() / 2]
}

fn fingerprint(dim: usize, coords: &[f64]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET ^ dim as u64;
    for c in coords {
        h ^= c.to_bits();
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AmbientSpace;

    fn linear_scan(u: &Configuration, metric: Metric, x: &[f64]) -> f64 {
        u.iter()
            .map(|p| metric.distance(x, p))
            .fold(f64::INFINITY, f64::min)
    }

    fn lattice(dim: usize, side: usize) -> Configuration {
        let space = AmbientSpace::euclidean(dim);
        let total = side.pow(dim as u32);
        let coords: Vec<f64> = (0..total)
            .flat_map(|mut i| {
                (0..dim)
                    .map(move |_| {
                        let c = (i % side) as f64 * 0.5;
                        i /= side;
                        c
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Configuration::from_flat(&space, coords).unwrap()
    }

    #[test]
    fn every_point_is_its_own_nearest() {
        for dim in 1..=3 {
            let u = lattice(dim, 7);
            let idx = SpatialIndex::build(&u, Metric::Euclidean);
            for (i, p) in u.iter().enumerate() {
                assert_eq!(idx.nearest(p), Some((i, 0.0)));
            }
        }
    }

    #[test]
    fn far_queries_match_linear_scan() {
        let u = lattice(2, 10);
        for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev] {
            let idx = SpatialIndex::build(&u, metric);
            for q in [[-40.0, 3.3], [100.0, 100.0], [2.26, -0.01], [1.0e6, -2.0e5]] {
                let (_, d) = idx.nearest(&q).unwrap();
                assert_eq!(d, linear_scan(&u, metric, &q), "{metric:?} {q:?}");
            }
        }
    }

    #[test]
    fn tiny_cells_are_capped() {
        let u = lattice(3, 5);
        let idx = SpatialIndex::with_cell_size(&u, Metric::Euclidean, 1e-9);
        assert!(idx.cell_size() > 1e-3);
        let q = [0.3, 0.7, 1.1];
        assert_eq!(
            idx.nearest(&q).unwrap().1,
            linear_scan(&u, Metric::Euclidean, &q)
        );
    }

    #[test]
    fn covers_only_its_own_configuration() {
        let u = lattice(2, 4);
        let v = lattice(2, 5);
        let idx = SpatialIndex::build(&u, Metric::Euclidean);
        assert!(idx.covers(&u));
        assert!(!idx.covers(&v));
    }

    #[test]
    fn nearest_other_skips_self() {
        let u = lattice(1, 6);
        let idx = SpatialIndex::build(&u, Metric::Euclidean);
        assert_eq!(idx.nearest_other(u.point(0), Some(0)), Some((1, 0.5)));
        let space = AmbientSpace::euclidean(1);
        let one = Configuration::from_rows(&space, [[0.0]]).unwrap();
        let idx = SpatialIndex::build(&one, Metric::Euclidean);
        assert_eq!(idx.nearest_other(&[0.0], Some(0)), None);
    }

    #[test]
    fn singleton_index() {
        let space = AmbientSpace::euclidean(1);
        let u = Configuration::from_rows(&space, [[2.0]]).unwrap();
        let idx = SpatialIndex::build(&u, Metric::Euclidean);
        assert_eq!(idx.nearest(&[-1.0]), Some((0, 3.0)));
    }
}
