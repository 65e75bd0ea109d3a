//! Monocular 3D localisation of static obstacles from segmentation masks.
//!
//! The crate is `no_std` (with `alloc`): geometry, a synthetic world
//! generator, classical segmentation, a bootstrap particle filter, a
//! multi-target tracker and evaluation metrics. File formats and the CLI
//! live in the `pfloc` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod pf;
pub mod raster;
pub mod rng;
pub mod segmentation;
pub mod simworld;
pub mod tracker;

pub use error::{ConfigError, FilterError, GeometryError, PoseLogError, SegmentationError};
pub use geometry::{CameraIntrinsics, CameraPose, Pixel, PixelPoint, WorldPoint};
pub use mask::BinaryMask;
