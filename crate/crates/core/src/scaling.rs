//! Space-time rescalings of walks, heights, contours and ladder processes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::PiecewiseLinearPath;

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("index {index} outside the path (length {len})")]
    OutOfRange { index: f64, len: usize },
    #[error("time {0} outside the contour")]
    OutOfContour(f64),
    #[error("{0:?} needs a {1} path")]
    Shape(ScalingKind, &'static str),
    #[error("invalid preset: p = {p}, v_p = {v_p}")]
    Preset { p: u64, v_p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalingKind {
    /// `v_p S([pt])`
    WalkSp,
    /// `v_p H([pt])`
    HeightHp,
    /// `v_p C(pt)`
    ContourCp,
    /// `v_p Z([p v_p t])`
    LadderZp,
    /// `T([p v_p t]) / p`
    LadderTp,
    /// `v_p R([p v_p t])`
    LadderRp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPreset {
    pub kind: ScalingKind,
    pub p: u64,
    pub v_p: f64,
}

/// A path to be rescaled.
#[derive(Debug, Clone, Copy)]
pub enum PathRef<'a> {
    Integer(&'a [i64]),
    Index(&'a [usize]),
    Real(&'a [f64]),
    Linear(&'a PiecewiseLinearPath),
}

impl PathRef<'_> {
    fn at(&self, index: f64) -> Option<f64> {
        if index < 0.0 {
            return None;
        }
        let i = index as usize;
        match self {
            PathRef::Integer(x) => x.get(i).map(|&v| v as f64),
            PathRef::Index(x) => x.get(i).map(|&v| v as f64),
            PathRef::Real(x) => x.get(i).copied(),
            PathRef::Linear(_) => None,
        }
    }

    fn len(&self) -> usize {
        match self {
            PathRef::Integer(x) => x.len(),
            PathRef::Index(x) => x.len(),
            PathRef::Real(x) => x.len(),
            PathRef::Linear(c) => c.points.len(),
        }
    }
}

impl ScalingPreset {
    pub fn new(kind: ScalingKind, p: u64, v_p: f64) -> Result<Self, ScalingError> {
        if p == 0 || !(v_p > 0.0 && v_p.is_finite()) {
            return Err(ScalingError::Preset { p, v_p });
        }
        Ok(Self { kind, p, v_p })
    }

    /// Index or time read from the source path at scaled time `t`.
    pub fn source_time(&self, t: f64) -> f64 {
        let p = self.p as f64;
        match self.kind {
            ScalingKind::WalkSp | ScalingKind::HeightHp => (p * t).floor(),
            ScalingKind::ContourCp => p * t,
            ScalingKind::LadderZp | ScalingKind::LadderTp | ScalingKind::LadderRp => (p * self.v_p * t).floor(),
        }
    }

    pub fn space_factor(&self) -> f64 {
        match self.kind {
            ScalingKind::LadderTp => 1.0 / self.p as f64,
            _ => self.v_p,
        }
    }
}

/// Evaluates the preset at `t`; never extrapolates.
pub fn rescale(path: PathRef<'_>, preset: &ScalingPreset, t: f64) -> Result<f64, ScalingError> {
    let u = preset.source_time(t);
    let value = match (preset.kind, path) {
        (ScalingKind::ContourCp, PathRef::Linear(c)) => c.eval(u).ok_or(ScalingError::OutOfContour(u))?,
        (ScalingKind::ContourCp, _) => return Err(ScalingError::Shape(preset.kind, "piecewise-linear")),
        (_, PathRef::Linear(_)) => return Err(ScalingError::Shape(preset.kind, "discrete")),
        (_, path) => path.at(u).ok_or(ScalingError::OutOfRange {
            index: u,
            len: path.len(),
        })?,
    };
    Ok(preset.space_factor() * value)
}
