//! Branched configuration spaces.
//!
//! Finite point configurations and the Hausdorff metric that glues their
//! strata together, manifold charts on locally finite configurations,
//! branched paths and branched sections (including the logistic-map
//! equilibrium section), and support classes of compactly supported grid
//! functions with a constant-volume path check.

pub mod branched_path;
pub mod charts;
pub mod config;
pub mod hausdorff;
pub mod index;
pub mod logistic;
pub mod measure;
pub mod section;

pub use config::{
    canonicalize, empirical_average, symmetrize, validate, AmbientSpace, CompatibilityRelation,
    ConfigError, Configuration, Distinct, Metric, OrderedConfiguration, Point,
};
pub use hausdorff::{
    detect_stratum_events, dist_to_set, hausdorff_distance, hausdorff_distance_indexed, EventKind,
    HausdorffError, StratumEvent,
};
pub use index::SpatialIndex;
