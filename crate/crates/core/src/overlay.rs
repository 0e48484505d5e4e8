//! Per-frame, per-camera PNG overlays of projected 3D skeletons.
//!
//! Estimates are drawn in red over the ground truth in green, so an
//! estimate that matches the ground truth hides it completely.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};
use imageproc::drawing::{draw_filled_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::evaluation::{FrameSkeletons, Skeleton3D};
use crate::geometry::{CameraCalibration, CameraId};
use crate::pipeline::write_atomic;

pub const ESTIMATE_COLOR: Rgb<u8> = Rgb([230, 40, 40]);
pub const GROUND_TRUTH_COLOR: Rgb<u8> = Rgb([40, 200, 70]);

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayOptions {
    /// Markers are squares of side `2 * marker_radius + 1`.
    pub marker_radius: u32,
    /// Directory of `<frame>_<camera>.png` backgrounds; blank when absent.
    pub background_dir: Option<PathBuf>,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        Self { marker_radius: 2, background_dir: None }
    }
}

/// Rounded pixel position of each joint's marker; `None` for missing joints
/// and joints behind the camera.
pub fn marker_positions(cal: &CameraCalibration, skeleton: &Skeleton3D) -> Vec<Option<(i32, i32)>> {
    skeleton
        .joints
        .iter()
        .map(|j| {
            let p = cal.project(j.as_ref()?).ok()?;
            if !p.in_front || !p.pixel.is_finite() {
                return None;
            }
            let (x, y) = (p.pixel.x.round(), p.pixel.y.round());
            // far off-image points would overflow the line rasterizer
            if x.abs() > 1e6 || y.abs() > 1e6 {
                return None;
            }
            Some((x as i32, y as i32))
        })
        .collect()
}

pub fn draw_skeleton(img: &mut RgbImage, cal: &CameraCalibration, skeleton: &Skeleton3D, body: &BodyModel, color: Rgb<u8>, radius: u32) {
    let markers = marker_positions(cal, skeleton);
    for limb in &body.limbs {
        if let (Some(Some(a)), Some(Some(b))) = (markers.get(limb.a), markers.get(limb.b)) {
            draw_line_segment_mut(img, (a.0 as f32, a.1 as f32), (b.0 as f32, b.1 as f32), color);
        }
    }
    let side = 2 * radius + 1;
    for &(x, y) in markers.iter().flatten() {
        draw_filled_rect_mut(img, Rect::at(x - radius as i32, y - radius as i32).of_size(side, side), color);
    }
}

/// One camera's view of a frame.
pub fn render(
    cal: &CameraCalibration,
    estimates: &[Skeleton3D],
    ground_truth: &[Skeleton3D],
    body: &BodyModel,
    radius: u32,
    background: Option<RgbImage>,
) -> RgbImage {
    let mut img = background.unwrap_or_else(|| RgbImage::new(cal.image_width(), cal.image_height()));
    for s in ground_truth {
        draw_skeleton(&mut img, cal, s, body, GROUND_TRUTH_COLOR, radius);
    }
    for s in estimates {
        draw_skeleton(&mut img, cal, s, body, ESTIMATE_COLOR, radius);
    }
    img
}

pub fn overlay_path(dir: &Path, frame: u32, camera: &CameraId) -> PathBuf {
    dir.join(format!("{frame:06}_{camera}.png"))
}

fn background(opts: &OverlayOptions, frame: u32, cal: &CameraCalibration) -> Option<RgbImage> {
    let path = overlay_path(opts.background_dir.as_ref()?, frame, cal.camera_id());
    if !path.exists() {
        return None;
    }
    match image::open(&path) {
        Ok(img) => Some(img.into_rgb8()),
        Err(e) => {
            log::warn!("ignoring background {}: {e}", path.display());
            None
        }
    }
}

/// Writes one PNG per (estimated frame, camera) into `out_dir` and returns
/// the paths in frame then camera order.
pub fn emit_overlays(
    estimates: &[FrameSkeletons],
    ground_truth: Option<&[FrameSkeletons]>,
    cals: &[CameraCalibration],
    body: &BodyModel,
    out_dir: &Path,
    opts: &OverlayOptions,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for frame in estimates {
        let gt = ground_truth.and_then(|g| g.iter().find(|f| f.frame_index == frame.frame_index)).map_or(&[][..], |f| &f.skeletons[..]);
        for cal in cals {
            let bg = background(opts, frame.frame_index, cal);
            let img = render(cal, &frame.skeletons, gt, body, opts.marker_radius, bg);
            let mut png = Vec::new();
            img.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)?;
            let path = overlay_path(out_dir, frame.frame_index, cal.camera_id());
            write_atomic(&path, &png)?;
            written.push(path);
        }
    }
    Ok(written)
}
