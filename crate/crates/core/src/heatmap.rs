//! Per-joint 2D likelihood fields: lookup, probability mass functions and
//! sampling, plus the binary `PFHM` and 16-bit PNG file formats.
//!
//! Cell `(row, col)` sits at heat-map coordinate `(col, row)`; image pixels
//! map to heat-map coordinates by dividing by the declared `scale`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraCalibration, CameraId, PixelCoord, Projection};

/// Value returned for lookups outside the map or behind the camera.
pub const OUT_OF_IMAGE_FLOOR: f64 = 1e-6;
pub const PFHM_MAGIC: &[u8; 4] = b"PFHM";
pub const PFHM_VERSION: u16 = 1;
const MIN_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub joint_index: usize,
    pub camera_id: CameraId,
    pub frame_index: u32,
    width: usize,
    height: usize,
    /// Image pixels per heat-map cell.
    scale: f64,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn new(
        joint_index: usize,
        camera_id: CameraId,
        frame_index: u32,
        width: usize,
        height: usize,
        scale: f64,
        values: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidHeatmap(format!("{} values for a {}x{} grid", values.len(), width, height)));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidHeatmap(format!("scale {scale} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidHeatmap(format!("cell value {v} outside [0, 1]")));
        }
        Ok(Self { joint_index, camera_id, frame_index, width, height, scale, values })
    }

    pub fn zeros(joint_index: usize, camera_id: CameraId, frame_index: u32, width: usize, height: usize, scale: f64) -> Self {
        Self::new(joint_index, camera_id, frame_index, width, height, scale, vec![0.0; width * height]).expect("valid zero map")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col] as f64
    }

    /// Sets one cell, clamping into `[0, 1]`.
    pub fn set_cell(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value.clamp(0.0, 1.0) as f32;
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// Image pixel of a cell center.
    pub fn cell_pixel(&self, row: usize, col: usize) -> PixelCoord {
        PixelCoord::new(col as f64 * self.scale, row as f64 * self.scale)
    }

    /// Heat-map coordinates of an image pixel.
    pub fn to_cell_coords(&self, px: PixelCoord) -> (f64, f64) {
        (px.x / self.scale, px.y / self.scale)
    }

    /// Checks the map covers the camera image at its declared scale.
    pub fn matches_image(&self, cal: &CameraCalibration) -> bool {
        let w = self.width as f64 * self.scale;
        let h = self.height as f64 * self.scale;
        (w - cal.image_width() as f64).abs() < self.scale && (h - cal.image_height() as f64).abs() < self.scale
    }

    /// Bilinear lookup; `OUT_OF_IMAGE_FLOOR` outside the area the cells cover.
    pub fn value_at(&self, px: PixelCoord) -> f64 {
        let (x, y) = self.to_cell_coords(px);
        let w = self.width as f64;
        let h = self.height as f64;
        if !(x >= -0.5 && x < w - 0.5 && y >= -0.5 && y < h - 0.5) {
            return OUT_OF_IMAGE_FLOOR;
        }
        let x = x.clamp(0.0, w - 1.0);
        let y = y.clamp(0.0, h - 1.0);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.cell(y0, x0) * (1.0 - fx) + self.cell(y0, x1) * fx;
        let bottom = self.cell(y1, x0) * (1.0 - fx) + self.cell(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Lookup of a projected point; behind-camera projections get the floor.
    pub fn value_at_projection(&self, proj: &Projection) -> f64 {
        if !proj.in_front {
            return OUT_OF_IMAGE_FLOOR;
        }
        self.value_at(proj.pixel)
    }

    /// Cell of maximal value inside `region` (first in row-major order on ties).
    pub fn argmax_in(&self, region: &CellRegion) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for row in region.row_min..=region.row_max.min(self.height - 1) {
            for col in region.col_min..=region.col_max.min(self.width - 1) {
                let v = self.cell(row, col);
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((row, col, v));
                }
            }
        }
        best
    }

    pub fn full_region(&self) -> CellRegion {
        CellRegion { row_min: 0, row_max: self.height - 1, col_min: 0, col_max: self.width - 1 }
    }

    /// Cells whose centers fall inside the image-pixel rectangle, if any.
    pub fn region_for_pixels(&self, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Option<CellRegion> {
        let lo = |v: f64| (v / self.scale).ceil().max(0.0);
        let hi = |v: f64, n: usize| (v / self.scale).floor().min(n as f64 - 1.0);
        let (c0, c1) = (lo(x_min), hi(x_max, self.width));
        let (r0, r1) = (lo(y_min), hi(y_max, self.height));
        if c0 > c1 || r0 > r1 {
            return None;
        }
        Some(CellRegion { row_min: r0 as usize, row_max: r1 as usize, col_min: c0 as usize, col_max: c1 as usize })
    }
}

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRegion {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl CellRegion {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }
}

/// Heat map normalized into a probability mass function over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapPmf {
    cumulative: Vec<f64>,
    total_mass: f64,
    width: usize,
    scale: f64,
}

impl HeatmapPmf {
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, index: usize) -> f64 {
        let prev = if index == 0 { 0.0 } else { self.cumulative[index - 1] };
        self.cumulative[index] - prev
    }

    /// Draws a flattened cell index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1)
    }

    pub fn index_pixel(&self, index: usize) -> PixelCoord {
        let row = index / self.width;
        let col = index % self.width;
        PixelCoord::new(col as f64 * self.scale, row as f64 * self.scale)
    }
}

pub fn build_pmf(h: &Heatmap) -> Result<HeatmapPmf> {
    build_pmf_in(h, &h.full_region())
}

/// PMF restricted to `region`; cells outside get zero probability.
pub fn build_pmf_in(h: &Heatmap, region: &CellRegion) -> Result<HeatmapPmf> {
    let mut cumulative = Vec::with_capacity(h.values.len());
    let mut acc = 0.0f64;
    for (i, &v) in h.values.iter().enumerate() {
        if region.contains(i / h.width, i % h.width) {
            acc += v as f64;
        }
        cumulative.push(acc);
    }
    if !(acc >= MIN_MASS) {
        return Err(Error::EmptyHeatmap { total: acc });
    }
    for c in &mut cumulative {
        *c /= acc;
    }
    Ok(HeatmapPmf { cumulative, total_mass: acc, width: h.width, scale: h.scale })
}

/// Draws a cell with the PMF probabilities and returns its center pixel.
pub fn sample_pixel<R: Rng + ?Sized>(pmf: &HeatmapPmf, rng: &mut R) -> PixelCoord {
    pmf.index_pixel(pmf.sample_index(rng))
}

pub fn write_pfhm<W: Write>(mut w: W, maps: &[Heatmap]) -> std::io::Result<()> {
    let first = maps.first().ok_or_else(|| std::io::Error::other("no channels"))?;
    if maps.iter().any(|m| m.width != first.width || m.height != first.height || m.scale != first.scale) {
        return Err(std::io::Error::other("channels differ in shape"));
    }
    w.write_all(PFHM_MAGIC)?;
    w.write_all(&PFHM_VERSION.to_le_bytes())?;
    w.write_all(&(maps.len() as u16).to_le_bytes())?;
    w.write_all(&(first.height as u32).to_le_bytes())?;
    w.write_all(&(first.width as u32).to_le_bytes())?;
    w.write_all(&(first.scale as f32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(first.values.len() * 4);
    for m in maps {
        buf.clear();
        for v in &m.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_pfhm<R: Read>(mut r: R, camera_id: &CameraId, frame_index: u32) -> Result<Vec<Heatmap>> {
    let bad = |m: &str| Error::InvalidHeatmap(m.to_owned());
    let mut header = [0u8; 20];
    r.read_exact(&mut header).map_err(|_| bad("truncated PFHM header"))?;
    if &header[0..4] != PFHM_MAGIC {
        return Err(bad("bad PFHM magic"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != PFHM_VERSION {
        return Err(Error::InvalidHeatmap(format!("unsupported PFHM version {version}")));
    }
    let n_joints = u16::from_le_bytes([header[6], header[7]]) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let scale = f32::from_le_bytes(header[16..20].try_into().unwrap()) as f64;
    let cells = width * height;
    let mut raw = vec![0u8; cells * 4];
    let mut maps = Vec::with_capacity(n_joints);
    for joint in 0..n_joints {
        r.read_exact(&mut raw).map_err(|_| bad("truncated PFHM channel data"))?;
        let values = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        maps.push(Heatmap::new(joint, camera_id.clone(), frame_index, width, height, scale, values)?);
    }
    Ok(maps)
}

pub fn write_png_channel(path: &Path, map: &Heatmap) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(map.width as u32, map.height as u32, |x, y| {
        Luma([(map.cell(y as usize, x as usize) * 65535.0).round() as u16])
    });
    img.save(path)?;
    Ok(())
}

pub fn read_png_channel(path: &Path, joint_index: usize, camera_id: &CameraId, frame_index: u32, scale: f64) -> Result<Heatmap> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| (p.0[0] as f64 / 65535.0) as f32).collect();
    Heatmap::new(joint_index, camera_id.clone(), frame_index, w as usize, h as usize, scale, values)
}

/// Supplies all joint channels of one (frame, camera).
pub trait HeatmapSource: Sync {
    fn load(&self, frame: u32, camera: &CameraCalibration) -> Result<Vec<Heatmap>>;
}

/// Heat maps on disk: `{frame:06}_{camera}.pfhm`, or per-channel
/// `{frame:06}_{camera}_j{joint:02}.png` with the scale taken from the
/// calibrated image width.
#[derive(Debug, Clone)]
pub struct HeatmapDir {
    pub dir: PathBuf,
    pub n_joints: usize,
}

impl HeatmapDir {
    pub fn new(dir: impl Into<PathBuf>, n_joints: usize) -> Self {
        Self { dir: dir.into(), n_joints }
    }

    pub fn pfhm_path(dir: &Path, frame: u32, camera: &CameraId) -> PathBuf {
        dir.join(format!("{frame:06}_{camera}.pfhm"))
    }

    pub fn png_path(dir: &Path, frame: u32, camera: &CameraId, joint: usize) -> PathBuf {
        dir.join(format!("{frame:06}_{camera}_j{joint:02}.png"))
    }
}

impl HeatmapSource for HeatmapDir {
    fn load(&self, frame: u32, camera: &CameraCalibration) -> Result<Vec<Heatmap>> {
        let id = camera.camera_id();
        let pfhm = Self::pfhm_path(&self.dir, frame, id);
        let maps = if pfhm.exists() {
            let file = std::fs::File::open(&pfhm).map_err(|e| Error::io(&pfhm, e))?;
            read_pfhm(std::io::BufReader::new(file), id, frame)?
        } else {
            let mut maps = Vec::with_capacity(self.n_joints);
            for joint in 0..self.n_joints {
                let path = Self::png_path(&self.dir, frame, id, joint);
                if !path.exists() {
                    return Err(Error::io(&pfhm, std::io::Error::from(std::io::ErrorKind::NotFound)));
                }
                let (w, _) = image::image_dimensions(&path)?;
                let scale = camera.image_width() as f64 / w as f64;
                maps.push(read_png_channel(&path, joint, id, frame, scale)?);
            }
            maps
        };
        if maps.len() != self.n_joints {
            return Err(Error::InvalidHeatmap(format!("{} channels, expected {}", maps.len(), self.n_joints)));
        }
        if let Some(m) = maps.iter().find(|m| !m.matches_image(camera)) {
            return Err(Error::InvalidHeatmap(format!(
                "{}x{} at scale {} does not cover the {}x{} image of camera {}",
                m.width,
                m.height,
                m.scale,
                camera.image_width(),
                camera.image_height(),
                id
            )));
        }
        Ok(maps)
    }
}
