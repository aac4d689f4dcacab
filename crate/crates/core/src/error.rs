use alloc::string::String;

use crate::volume::{Shape, Units};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate calibration: attenuation of air equals attenuation of water")]
    DegenerateCalibration,

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("voxel count {found} does not match shape {shape:?}")]
    VoxelCount { shape: Shape, found: usize },

    #[error("invalid shape {0:?}: every axis must be positive")]
    InvalidShape([usize; 3]),

    #[error("invalid spacing {0:?}: every component must be finite and positive")]
    InvalidSpacing([f64; 3]),

    #[error("invalid viewing window (width {width}, level {level})")]
    InvalidWindow { width: f64, level: f64 },

    #[error("expected {expected:?} intensities, found {found:?}")]
    UnitsMismatch { expected: Units, found: Units },

    #[error("normalized volume has voxel outside [0, 1]: {0}")]
    OutOfUnitRange(f32),

    #[error("label {0} is not in the declared label set")]
    UndeclaredLabel(u8),

    #[error("invalid augmentation spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no voxels carry label {0}")]
    EmptyLabel(u8),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("need at least {needed} cases, got {found}")]
    InsufficientCases { needed: usize, found: usize },

    #[error("histograms have unequal bin widths ({0} vs {1})")]
    BinWidthMismatch(f64, f64),

    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("invalid phantom geometry: {0}")]
    InvalidPhantom(String),
}
