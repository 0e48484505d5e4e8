//! Multi-view 3D human pose fusion.
//!
//! Per-camera 2D joint heat maps and keypoint detections are associated
//! into person tracks, turned into discrete 3D hypotheses by sampling and
//! triangulation, and fused over time with a CRF solved by loopy
//! sum-product belief propagation.

pub mod association;
pub mod body;
pub mod bp;
pub mod crf;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod graph;
pub mod heatmap;
pub mod overlay;
pub mod pipeline;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraCalibration, CameraId, PixelCoord, Point3, Ray};
