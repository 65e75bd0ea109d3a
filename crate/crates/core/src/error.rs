use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("rotation matrix is not orthonormal with determinant 1")]
    NotARotation,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("rays are parallel; no unique midpoint")]
    ParallelRays,
    #[error("invalid pose noise: {0}")]
    InvalidNoise(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("initialisation rays are parallel")]
    ParallelRays,
    #[error("camera baseline between initialisation views is below 1 m")]
    WeakBaseline,
    #[error("observation centroid lies outside the frame")]
    CentroidOutsideFrame,
    #[error("mask has no positive pixels")]
    EmptyMask,
    #[error("all particle weights are zero")]
    AllZeroWeights,
    #[error("invalid filter parameter: {0}")]
    InvalidParams(&'static str),
}

impl From<GeometryError> for FilterError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::ParallelRays => FilterError::ParallelRays,
            _ => FilterError::InvalidParams("geometry"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentationError {
    #[error("image is {width}x{height}; at least 3x3 required")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("sample buffer length {len} does not match {width}x{height}")]
    BadDimensions { width: u32, height: u32, len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseLogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: alloc::string::String },
    #[error("line {line}: frame id {frame_id} does not increase")]
    NonMonotonicFrameIds { line: usize, frame_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid {
        field: &'static str,
        reason: &'static str,
    },
}

impl ConfigError {
    pub const fn invalid(field: &'static str, reason: &'static str) -> Self {
        ConfigError::Invalid { field, reason }
    }

    pub fn field(&self) -> &'static str {
        match self {
            ConfigError::Invalid { field, .. } => field,
        }
    }
}
