//! Monte Carlo laboratory for Crump–Mode–Jagers chronological forests.
//!
//! The crate simulates CMJ forests, builds their Lukasiewicz, height and
//! contour paths, decomposes walks into weak ascending ladder processes and
//! checks the stable scaling limits of these objects statistically.

pub mod forest;
pub mod ladder;
pub mod measures;
pub mod models;
pub mod report;
pub mod rng;
pub mod scaling;
pub mod special;
pub mod stable_limit;
pub mod verify;

pub use forest::{ForestOptions, ForestPaths, PiecewiseLinearPath, SiblingOrder, TreeTable, Walk};
pub use ladder::{AgeConvention, LadderTriple, SizeBiasedTriple};
pub use measures::{AtomicMeasure, Measure, MeasureView};
pub use models::{CharacteristicSpec, LifeLaw, LifeSample, LifeSampler, Variant};
pub use report::{TestReport, Verdict};
pub use scaling::{ScalingKind, ScalingPreset};
pub use stable_limit::{LimitPathSample, StableParams};
