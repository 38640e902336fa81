//! The Hausdorff metric d_Γ on finite configurations, and detection of
//! stratum changes (merges and splits) along sampled trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AmbientSpace, ConfigError, Configuration, ConfigurationJson, Metric, Point};
use crate::index::SpatialIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HausdorffError {
    #[error("configuration is empty")]
    EmptyConfiguration,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("spatial index does not cover its configuration")]
    IndexMismatch,
    #[error("time {time} at frame {index} does not increase")]
    NonMonotoneTime { index: usize, time: f64 },
    #[error("trajectory has {times} times but {frames} frames")]
    LengthMismatch { times: usize, frames: usize },
    #[error(
        "cardinality change {from} -> {to} at t = {time} needs attribution distance {distance}, above merge_tol {merge_tol}"
    )]
    UnresolvedTransition {
        time: f64,
        from: usize,
        to: usize,
        distance: f64,
        merge_tol: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// `d(x, v) = min_{y ∈ v} d(x, y)`.
pub fn dist_to_set(metric: Metric, x: &[f64], v: &Configuration) -> Result<f64, HausdorffError> {
    if v.is_empty() {
        return Err(HausdorffError::EmptyConfiguration);
    }
    if x.len() != v.dim() {
        return Err(HausdorffError::DimensionMismatch(x.len(), v.dim()));
    }
    Ok(nearest_in(metric, x, v).1)
}

fn nearest_in(metric: Metric, x: &[f64], v: &Configuration) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, y) in v.iter().enumerate() {
        let d = metric.distance(x, y);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_pair(u: &Configuration, v: &Configuration) -> Result<(), HausdorffError> {
    if u.is_empty() || v.is_empty() {
        return Err(HausdorffError::EmptyConfiguration);
    }
    if u.dim() != v.dim() {
        return Err(HausdorffError::DimensionMismatch(u.dim(), v.dim()));
    }
    Ok(())
}

/// Brute-force d_Γ(u, v): `max(sup_{x∈u} d(x, v), sup_{y∈v} d(y, u))`.
pub fn hausdorff_distance(
    metric: Metric,
    u: &Configuration,
    v: &Configuration,
) -> Result<f64, HausdorffError> {
    check_pair(u, v)?;
    let forward = u
        .iter()
        .map(|x| nearest_in(metric, x, v).1)
        .fold(0.0, f64::max);
    let backward = v
        .iter()
        .map(|y| nearest_in(metric, y, u).1)
        .fold(0.0, f64::max);
    Ok(forward.max(backward))
}

/// d_Γ(u, v) using prebuilt grid indexes over `u` and `v`.
///
/// Returns the same value as [`hausdorff_distance`] with the index's metric.
pub fn hausdorff_distance_indexed(
    u: &Configuration,
    v: &Configuration,
    idx_u: &SpatialIndex,
    idx_v: &SpatialIndex,
) -> Result<f64, HausdorffError> {
    check_pair(u, v)?;
    if !idx_u.covers(u) || !idx_v.covers(v) || idx_u.metric() != idx_v.metric() {
        return Err(HausdorffError::IndexMismatch);
    }
    let directed = |from: &Configuration, to: &SpatialIndex| {
        from.iter()
            .map(|x| to.nearest(x).map_or(f64::INFINITY, |(_, d)| d))
            .fold(0.0, f64::max)
    };
    Ok(directed(u, idx_v).max(directed(v, idx_u)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Merge,
    Split,
}

/// A crossing between strata Γ^n and Γ^m observed between two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumEvent {
    /// Sample time at which the new cardinality is first observed.
    pub time: f64,
    pub kind: EventKind,
    pub before_cardinality: usize,
    pub after_cardinality: usize,
    /// Points that absorbed (merge) or emitted (split) two or more points.
    pub location: Vec<Point>,
}

/// One JSON line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub from: usize,
    pub to: usize,
    pub at: Vec<Vec<f64>>,
}

impl From<&StratumEvent> for EventRecord {
    fn from(e: &StratumEvent) -> Self {
        EventRecord {
            t: e.time,
            kind: e.kind,
            from: e.before_cardinality,
            to: e.after_cardinality,
            at: e.location.iter().map(|p| p.coords().to_vec()).collect(),
        }
    }
}

/// Sampled trajectory in Γ, `{"times": [...], "frames": [Configuration, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub times: Vec<f64>,
    pub frames: Vec<ConfigurationJson>,
}

impl TrajectoryJson {
    pub fn into_frames(
        self,
        space: &AmbientSpace,
    ) -> Result<Vec<(f64, Configuration)>, HausdorffError> {
        if self.times.len() != self.frames.len() {
            return Err(HausdorffError::LengthMismatch {
                times: self.times.len(),
                frames: self.frames.len(),
            });
        }
        self.times
            .into_iter()
            .zip(self.frames)
            .map(|(t, f)| Ok((t, f.into_configuration(space)?)))
            .collect()
    }

    pub fn from_frames(frames: &[(f64, Configuration)]) -> Self {
        TrajectoryJson {
            times: frames.iter().map(|(t, _)| *t).collect(),
            frames: frames.iter().map(|(_, c)| c.to_json()).collect(),
        }
    }
}

/// Attributes every point of `many` to its nearest point of `few` (ties to
/// the lowest canonical index) and returns the points of `few` hit at least
/// twice together with the largest attribution distance.
fn attribute(metric: Metric, many: &Configuration, few: &Configuration) -> (Vec<Point>, f64) {
    let mut hits = vec![0usize; few.len()];
    let mut worst: f64 = 0.0;
    for x in many {
        let (j, d) = nearest_in(metric, x, few);
        hits[j] += 1;
        worst = worst.max(d);
    }
    let location = hits
        .iter()
        .enumerate()
        .filter(|&(_, &h)| h >= 2)
        .map(|(j, _)| Point::new(few.point(j).to_vec()).expect("configuration points are finite"))
        .collect();
    (location, worst)
}

/// Scans consecutive samples for cardinality changes.
///
/// A drop `n → m` is a merge when every point of the earlier frame lies
/// within `merge_tol` of the later one; a rise is a split under the mirrored
/// condition. Changes that cannot be attributed within `merge_tol` are
/// reported as [`HausdorffError::UnresolvedTransition`].
pub fn detect_stratum_events(
    metric: Metric,
    traj: &[(f64, Configuration)],
    merge_tol: f64,
) -> Result<Vec<StratumEvent>, HausdorffError> {
    for (index, w) in traj.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(HausdorffError::NonMonotoneTime {
                index: index + 1,
                time: w[1].0,
            });
        }
    }
    if traj.iter().any(|(_, c)| c.is_empty()) {
        return Err(HausdorffError::EmptyConfiguration);
    }
    let mut events = Vec::new();
    for w in traj.windows(2) {
        let ((_, prev), (time, next)) = (&w[0], &w[1]);
        if prev.dim() != next.dim() {
            return Err(HausdorffError::DimensionMismatch(prev.dim(), next.dim()));
        }
        let (before, after) = (prev.len(), next.len());
        if before == after {
            continue;
        }
        let (kind, (location, distance)) = if after < before {
            (EventKind::Merge, attribute(metric, prev, next))
        } else {
            (EventKind::Split, attribute(metric, next, prev))
        };
        if distance > merge_tol {
            return Err(HausdorffError::UnresolvedTransition {
                time: *time,
                from: before,
                to: after,
                distance,
                merge_tol,
            });
        }
        events.push(StratumEvent {
            time: *time,
            kind,
            before_cardinality: before,
            after_cardinality: after,
            location,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> AmbientSpace {
        AmbientSpace::euclidean(1)
    }

    fn cfg1(xs: &[f64]) -> Configuration {
        Configuration::from_rows(&line(), xs.iter().map(|x| [*x])).unwrap()
    }

    #[test]
    fn dist_to_set_examples() {
        let m = Metric::Euclidean;
        assert_eq!(dist_to_set(m, &[0.0], &cfg1(&[1.0])).unwrap(), 1.0);
        assert_eq!(dist_to_set(m, &[1.0], &cfg1(&[1.0, 3.0])).unwrap(), 0.0);
        let plane = AmbientSpace::euclidean(2);
        let v = Configuration::from_rows(&plane, [[3.0, 4.0], [1.0, 1.0]]).unwrap();
        // linear scan: |(3,4)| = 5, |(1,1)| = √2
        assert_eq!(dist_to_set(m, &[0.0, 0.0], &v).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn hausdorff_examples() {
        let m = Metric::Euclidean;
        assert_eq!(
            hausdorff_distance(m, &cfg1(&[0.0]), &cfg1(&[1.0])).unwrap(),
            1.0
        );
        let u = cfg1(&[0.5, -2.0, 7.0]);
        assert_eq!(hausdorff_distance(m, &u, &u).unwrap(), 0.0);
        // d(0,{1}) = 1, d(2,{1}) = 1, d(1,{0,2}) = 1
        assert_eq!(
            hausdorff_distance(m, &cfg1(&[0.0, 2.0]), &cfg1(&[1.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn empty_is_rejected() {
        let empty = Configuration::from_rows(&line(), Vec::<[f64; 1]>::new()).unwrap();
        assert_eq!(
            hausdorff_distance(Metric::Euclidean, &empty, &cfg1(&[0.0])),
            Err(HausdorffError::EmptyConfiguration)
        );
        assert_eq!(
            dist_to_set(Metric::Euclidean, &[0.0], &empty),
            Err(HausdorffError::EmptyConfiguration)
        );
    }

    #[test]
    fn indexed_rejects_foreign_index() {
        let u = cfg1(&[0.0, 1.0]);
        let v = cfg1(&[5.0]);
        let iu = SpatialIndex::build(&u, Metric::Euclidean);
        let iv = SpatialIndex::build(&v, Metric::Euclidean);
        assert_eq!(
            hausdorff_distance_indexed(&u, &v, &iv, &iu),
            Err(HausdorffError::IndexMismatch)
        );
        assert_eq!(hausdorff_distance_indexed(&u, &v, &iu, &iv).unwrap(), 5.0);
    }

    #[test]
    fn forced_merge() {
        let traj = vec![(0.0, cfg1(&[-1.0, 1.0])), (1.0, cfg1(&[0.0]))];
        let ev = detect_stratum_events(Metric::Euclidean, &traj, 2.0).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::Merge);
        assert_eq!((ev[0].before_cardinality, ev[0].after_cardinality), (2, 1));
        assert_eq!(ev[0].location[0].coords(), &[0.0]);
    }

    #[test]
    fn split_mirrors_merge() {
        let traj = vec![(0.0, cfg1(&[0.0])), (0.1, cfg1(&[-0.1, 0.1]))];
        let ev = detect_stratum_events(Metric::Euclidean, &traj, 0.5).unwrap();
        assert_eq!(ev[0].kind, EventKind::Split);
        assert_eq!((ev[0].before_cardinality, ev[0].after_cardinality), (1, 2));
    }

    #[test]
    fn constant_trajectory_has_no_events() {
        let traj: Vec<_> = (0..5).map(|k| (k as f64, cfg1(&[1.0, 2.0]))).collect();
        assert!(detect_stratum_events(Metric::Euclidean, &traj, 1e-8)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn two_particles_merge_at_one() {
        // x(t) = ±(1 − t); separation 2(1 − t) vanishes at t = 1
        let traj: Vec<_> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&t: &f64| {
                let a = 1.0 - t;
                let pts = if a == 0.0 { vec![0.0] } else { vec![-a, a] };
                (t, cfg1(&pts))
            })
            .collect();
        let ev = detect_stratum_events(Metric::Euclidean, &traj, 0.5).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].time, 1.0);
    }

    #[test]
    fn errors_on_time_and_tolerance() {
        let traj = vec![(1.0, cfg1(&[0.0])), (1.0, cfg1(&[0.0]))];
        assert!(matches!(
            detect_stratum_events(Metric::Euclidean, &traj, 1.0),
            Err(HausdorffError::NonMonotoneTime { index: 1, .. })
        ));
        let traj = vec![(0.0, cfg1(&[-1.0, 1.0])), (1.0, cfg1(&[0.0]))];
        assert!(matches!(
            detect_stratum_events(Metric::Euclidean, &traj, 0.5),
            Err(HausdorffError::UnresolvedTransition { .. })
        ));
    }

    #[test]
    fn event_record_json() {
        let e = StratumEvent {
            time: 1.0,
            kind: EventKind::Merge,
            before_cardinality: 2,
            after_cardinality: 1,
            location: vec![Point::new(vec![0.0]).unwrap()],
        };
        assert_eq!(
            serde_json::to_string(&EventRecord::from(&e)).unwrap(),
            r#"{"t":1.0,"kind":"merge","from":2,"to":1,"at":[[0.0]]}"#
        );
    }
}
