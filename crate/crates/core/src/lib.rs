//! Hounsfield-unit windowing and CT-specific intensity augmentation.
//!
//! The crate is `no_std` (with `alloc`) and holds the pure numerical side of
//! the toolkit: the volume data model, windowing and Random windowing, the
//! baseline intensity augmentations, clipping-artifact and histogram-shape
//! analysis, corpus statistics for base windows and augmentation ranges,
//! segmentation metrics, and a deterministic synthetic phantom generator.
//!
//! File formats, reports and the command-line frontend live in the `ctwindow`
//! crate.
//!
//! Voxels are always stored z-major, x-fastest, as `f32`.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod artifact;
pub mod error;
pub mod intensity;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod stats;
pub mod volume;
pub mod window;

pub use error::{Error, Result};
pub use rng::{Stream, UniformSource};
pub use volume::{BinaryMask, Mask, Shape, Spacing, Units, ViewingWindow, Volume};
pub use window::{AugmentationSpec, Normalization, OutputMap, SampledWindow};
