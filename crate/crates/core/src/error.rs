use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fusion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate projection: homogeneous w = {w:e}")]
    DegenerateProjection { w: f64 },

    #[error("degenerate ray configuration (condition number {condition:e})")]
    DegenerateConfiguration { condition: f64 },

    #[error("invalid calibration for camera {camera}: {reason}")]
    InvalidCalibration { camera: String, reason: String },

    #[error("heat map has no mass (total {total:e})")]
    EmptyHeatmap { total: f64 },

    #[error("invalid heat map: {0}")]
    InvalidHeatmap(String),

    #[error("degenerate bounding box: all visible joints coincide")]
    DegenerateBox,

    #[error("need at least two cameras, got {0}")]
    TooFewCameras(usize),

    #[error("person track has no frames after pruning")]
    EmptyTrack,

    #[error("message sum {sum:e} underflowed before normalization")]
    NumericalUnderflow { sum: f64 },

    #[error("limb has zero length in ground truth")]
    ZeroLengthLimb,

    #[error("no frame has both an estimate and ground truth for actor {0}")]
    NoOverlap(u32),

    #[error("actor {actor} joint {joint} projects outside every camera in more than half of the frames")]
    ActorOutOfView { actor: u32, joint: usize },

    #[error("invalid scene spec: {0}")]
    InvalidScene(String),

    #[error("config error: {message}")]
    Config { message: String, path: Option<PathBuf> },

    #[error("{stage} failed at frame {frame:?}: {source}")]
    Stage {
        stage: &'static str,
        frame: Option<u32>,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }

    pub(crate) fn config(message: impl Into<String>, path: Option<PathBuf>) -> Self {
        Error::Config { message: message.into(), path }
    }

    pub(crate) fn in_stage(self, stage: &'static str, frame: Option<u32>) -> Self {
        Error::Stage { stage, frame, source: Box::new(self) }
    }

    /// True for configuration problems (CLI exit code 2) as opposed to data errors.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
