//! Synthetic multi-camera scenes with exact ground truth.
//!
//! Actors walk with sinusoidal arm and leg swing in front of a ring of
//! look-at cameras. Heat maps are unit-peak Gaussians at the projected
//! joints, optionally corrupted by displaced peaks, left/right confusions
//! and per-camera occlusion windows.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::association::{keypoint_path, write_keypoints, Keypoint, Skeleton2D};
use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::evaluation::{FrameSkeletons, GroundTruthFile, Skeleton3D};
use crate::geometry::{calibrations_to_json, look_at_camera, triangulate, CameraCalibration, CameraId, PixelCoord, Point3, Ray};
use crate::heatmap::{write_pfhm, Heatmap, HeatmapDir, HeatmapSource};
use crate::sampling::enumerate_subsets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Independent (frame, joint, camera) triples.
    Triple,
    /// Whole joint-frames, displaced consistently in every camera.
    JointFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub granularity: Granularity,
    /// Fraction of units corrupted, per actor.
    pub fraction: f64,
    /// Minimum peak displacement in image pixels.
    pub displacement_px: f64,
    /// Height of the peak left at the true location.
    pub residual_peak: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self { granularity: Granularity::Triple, fraction: 0.0, displacement_px: 32.0, residual_peak: 0.5 }
    }
}

/// For frames `start..=end`, the joint's heat maps in every camera peak at
/// its collision partner, keeping a weaker peak of height `residual_peak`
/// at its own location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapEvent {
    pub actor: u32,
    pub joint: usize,
    pub start_frame: u32,
    pub end_frame: u32,
    #[serde(default = "default_swap_residual")]
    pub residual_peak: f64,
}

fn default_swap_residual() -> f64 {
    0.6
}

/// The actor is absent from one camera (no heat and no keypoints) for `start..=end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionWindow {
    pub actor: u32,
    pub camera: usize,
    pub start_frame: u32,
    pub end_frame: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_actors: u32,
    pub n_frames: u32,
    pub n_cameras: usize,
    pub ring_radius_mm: f64,
    pub camera_height_mm: f64,
    pub target_height_mm: f64,
    pub focal_px: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Image pixels per heat-map cell.
    pub heatmap_scale: f64,
    /// Gaussian width in image pixels.
    pub heatmap_sigma_px: f64,
    pub actor_spacing_mm: f64,
    pub walk_speed_mm: f64,
    pub swing_period_frames: f64,
    pub arm_swing_deg: f64,
    pub leg_swing_deg: f64,
    /// Actors walk toward each other and pass instead of walking side by side.
    pub crossing: bool,
    pub corruption: CorruptionSpec,
    pub swaps: Vec<SwapEvent>,
    pub occlusions: Vec<OcclusionWindow>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_actors: 2,
            n_frames: 50,
            n_cameras: 3,
            ring_radius_mm: 5000.0,
            camera_height_mm: 2000.0,
            target_height_mm: 1000.0,
            focal_px: 400.0,
            image_width: 360,
            image_height: 288,
            heatmap_scale: 2.0,
            heatmap_sigma_px: 4.0,
            actor_spacing_mm: 2000.0,
            walk_speed_mm: 15.0,
            swing_period_frames: 30.0,
            arm_swing_deg: 20.0,
            leg_swing_deg: 20.0,
            crossing: false,
            corruption: CorruptionSpec::default(),
            swaps: Vec::new(),
            occlusions: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self, body: &BodyModel) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(2..=3).contains(&self.n_cameras) {
            return bad(format!("n_cameras must be 2 or 3, got {}", self.n_cameras));
        }
        if self.n_frames < 3 {
            return bad(format!("n_frames must be at least 3, got {}", self.n_frames));
        }
        if self.n_actors == 0 {
            return bad("n_actors must be positive".into());
        }
        if !(self.heatmap_sigma_px > 0.0) || !(self.heatmap_scale > 0.0) || !(self.focal_px > 0.0) {
            return bad("heatmap_sigma_px, heatmap_scale and focal_px must be positive".into());
        }
        let c = &self.corruption;
        if !(0.0..=1.0).contains(&c.fraction) || !(0.0..=1.0).contains(&c.residual_peak) || !(c.displacement_px >= 0.0) {
            return bad("corruption fraction and residual_peak must lie in [0, 1], displacement_px >= 0".into());
        }
        for s in &self.swaps {
            if s.actor >= self.n_actors || s.start_frame > s.end_frame || !(0.0..=1.0).contains(&s.residual_peak) {
                return bad(format!("invalid swap event {s:?}"));
            }
            if partner_of(body, s.joint).is_none() {
                return bad(format!("swap joint {} has no collision partner", s.joint));
            }
        }
        for o in &self.occlusions {
            if o.actor >= self.n_actors || o.camera >= self.n_cameras || o.start_frame > o.end_frame {
                return bad(format!("invalid occlusion window {o:?}"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read scene spec {}: {e}", path.display()), Some(path.to_path_buf())))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display()), Some(path.to_path_buf())))
    }

    /// Ring positions: three cameras 120 degrees apart, or two at a right angle.
    pub fn camera_angles_deg(&self) -> Vec<f64> {
        match self.n_cameras {
            2 => vec![90.0, 0.0],
            n => (0..n).map(|k| 90.0 + 120.0 * k as f64).collect(),
        }
    }

    pub fn calibrations(&self) -> Result<Vec<CameraCalibration>> {
        let target = Point3::new(0.0, 0.0, self.target_height_mm);
        self.camera_angles_deg()
            .iter()
            .enumerate()
            .map(|(k, deg)| {
                let a = deg.to_radians();
                let eye = Point3::new(self.ring_radius_mm * a.cos(), self.ring_radius_mm * a.sin(), self.camera_height_mm);
                look_at_camera(format!("cam{k}").as_str(), eye, target, self.focal_px, self.image_width, self.image_height)
            })
            .collect()
    }
}

fn partner_of(body: &BodyModel, joint: usize) -> Option<usize> {
    body.collision_pairs.iter().find_map(|&(a, b)| match joint {
        j if j == a => Some(b),
        j if j == b => Some(a),
        _ => None,
    })
}

/// Ground-truth pose of one actor at one frame (default 14-joint layout).
pub fn actor_pose(spec: &SceneSpec, actor: u32, frame: u32, phase: f64) -> Vec<Point3> {
    let n = spec.n_actors as f64;
    let k = actor as f64;
    let t = frame as f64;
    let half_walk = spec.walk_speed_mm * spec.n_frames as f64 / 2.0;
    let (root, heading) = if spec.crossing {
        let dir = if actor.is_multiple_of(2) { 1.0 } else { -1.0 };
        let y = (k - (n - 1.0) / 2.0) * 600.0;
        (Point3::new(dir * (-half_walk + spec.walk_speed_mm * t), y, 0.0), Vector3::new(dir, 0.0, 0.0))
    } else {
        let x = (k - (n - 1.0) / 2.0) * spec.actor_spacing_mm;
        (Point3::new(x, -half_walk + spec.walk_speed_mm * t, 0.0), Vector3::new(0.0, 1.0, 0.0))
    };
    let up = Vector3::z();
    let left = up.cross(&heading);
    let w = 2.0 * std::f64::consts::PI / spec.swing_period_frames;
    let arm_amp = spec.arm_swing_deg.to_radians();
    let leg_amp = spec.leg_swing_deg.to_radians();
    let along = |angle: f64| heading * angle.sin() - up * angle.cos();

    let neck = root + up * 1450.0;
    let head = neck + up * 250.0;
    let mut joints = vec![head, neck];
    let mut arms = Vec::new();
    let mut legs = Vec::new();
    for (side, offset) in [(1.0, 0.0), (-1.0, std::f64::consts::PI)] {
        let phi = arm_amp * (w * t + phase + offset).sin();
        let shoulder = root + left * (190.0 * side) + up * 1450.0;
        let elbow = shoulder + along(phi) * 300.0 + left * (15.0 * side);
        let wrist = elbow + along(1.4 * phi + 0.2) * 250.0 + left * (15.0 * side);
        arms.push((shoulder, elbow, wrist));
        // legs swing against the arm on the same side
        let psi = leg_amp * (w * t + phase + offset + std::f64::consts::PI).sin();
        let hip = root + left * (100.0 * side) + up * 950.0;
        let knee = hip + along(psi) * 450.0;
        let ankle = knee + along(0.8 * psi) * 430.0;
        legs.push((hip, knee, ankle));
    }
    joints.extend([arms[0].0, arms[1].0, arms[0].1, arms[1].1, arms[0].2, arms[1].2]);
    joints.extend([legs[0].0, legs[1].0, legs[0].1, legs[1].1, legs[0].2, legs[1].2]);
    joints
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    pixel: PixelCoord,
    amplitude: f64,
}

/// A generated scene held in memory. Heat maps are rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub seed: u64,
    pub body: BodyModel,
    pub calibrations: Vec<CameraCalibration>,
    /// Per frame, one skeleton per actor (`person_id` is the actor id).
    pub ground_truth: Vec<FrameSkeletons>,
    pub keypoints: BTreeMap<u32, BTreeMap<CameraId, Vec<Skeleton2D>>>,
    /// Displaced peak per corrupted (actor, frame, joint, camera).
    displaced: BTreeMap<(u32, u32, usize, usize), PixelCoord>,
    /// Joint-frames with at least one corrupted camera: (actor, frame, joint).
    pub corrupted_joint_frames: BTreeSet<(u32, u32, usize)>,
    swaps: BTreeMap<(u32, u32, usize), (usize, f64)>,
}

impl SyntheticScene {
    pub fn gt_point(&self, actor: u32, frame: u32, joint: usize) -> Point3 {
        self.ground_truth[frame as usize].skeletons[actor as usize].joints[joint].expect("ground truth is complete")
    }

    /// Number of corrupted (actor, frame, joint, camera) units.
    pub fn corrupted_triples(&self) -> usize {
        self.displaced.len()
    }

    fn occluded(&self, actor: u32, camera: usize, frame: u32) -> bool {
        self.spec.occlusions.iter().any(|o| o.actor == actor && o.camera == camera && (o.start_frame..=o.end_frame).contains(&frame))
    }

    fn peaks(&self, actor: u32, frame: u32, joint: usize, camera: usize) -> Vec<Peak> {
        let cal = &self.calibrations[camera];
        let project = |p: Point3| cal.project(&p).ok().filter(|q| q.in_front).map(|q| q.pixel);
        let Some(own) = project(self.gt_point(actor, frame, joint)) else {
            return Vec::new();
        };
        if let Some(&displaced) = self.displaced.get(&(actor, frame, joint, camera)) {
            return vec![Peak { pixel: displaced, amplitude: 1.0 }, Peak { pixel: own, amplitude: self.spec.corruption.residual_peak }];
        }
        if let Some(&(partner, residual)) = self.swaps.get(&(actor, frame, joint)) {
            let mut out = vec![Peak { pixel: own, amplitude: residual }];
            if let Some(p) = project(self.gt_point(actor, frame, partner)) {
                out.push(Peak { pixel: p, amplitude: 1.0 });
            }
            return out;
        }
        vec![Peak { pixel: own, amplitude: 1.0 }]
    }

    /// All joint channels of one camera at one frame.
    pub fn render(&self, frame: u32, camera: usize) -> Vec<Heatmap> {
        let spec = &self.spec;
        let cal = &self.calibrations[camera];
        let w = (spec.image_width as f64 / spec.heatmap_scale).round() as usize;
        let h = (spec.image_height as f64 / spec.heatmap_scale).round() as usize;
        let sigma = spec.heatmap_sigma_px;
        let reach = 5.0 * sigma;
        (0..self.body.n_joints())
            .map(|joint| {
                let mut values = vec![0.0f32; w * h];
                for actor in 0..spec.n_actors {
                    if self.occluded(actor, camera, frame) {
                        continue;
                    }
                    for peak in self.peaks(actor, frame, joint, camera) {
                        let s = spec.heatmap_scale;
                        let c0 = ((peak.pixel.x - reach) / s).ceil().max(0.0) as usize;
                        let c1 = ((peak.pixel.x + reach) / s).floor().min(w as f64 - 1.0);
                        let r0 = ((peak.pixel.y - reach) / s).ceil().max(0.0) as usize;
                        let r1 = ((peak.pixel.y + reach) / s).floor().min(h as f64 - 1.0);
                        if c1 < 0.0 || r1 < 0.0 {
                            continue;
                        }
                        for r in r0..=r1 as usize {
                            for c in c0..=c1 as usize {
                                let dx = c as f64 * s - peak.pixel.x;
                                let dy = r as f64 * s - peak.pixel.y;
                                let v = (peak.amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()) as f32;
                                let cell = &mut values[r * w + c];
                                *cell = cell.max(v);
                            }
                        }
                    }
                }
                Heatmap::new(joint, cal.camera_id().clone(), frame, w, h, spec.heatmap_scale, values)
                    .expect("rendered values lie in [0, 1]")
            })
            .collect()
    }

    /// Writes `calibration.json`, `gt.json`, `scene.json`, `keypoints/` and `heatmaps/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let kp_dir = dir.join("keypoints");
        let hm_dir = dir.join("heatmaps");
        for d in [dir, &kp_dir, &hm_dir] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let write = |path: &Path, text: String| std::fs::write(path, text).map_err(|e| Error::io(path, e));
        write(&dir.join("calibration.json"), calibrations_to_json(&self.calibrations))?;
        let gt = GroundTruthFile::from_frames(&self.ground_truth);
        write(&dir.join("gt.json"), serde_json::to_string_pretty(&gt).expect("ground truth serializes"))?;
        write(&dir.join("scene.json"), serde_json::to_string_pretty(&self.spec).expect("spec serializes"))?;
        for frame in 0..self.spec.n_frames {
            for (k, cal) in self.calibrations.iter().enumerate() {
                let skels = self.keypoints.get(&frame).and_then(|m| m.get(cal.camera_id())).map_or(&[][..], |v| v.as_slice());
                write_keypoints(&keypoint_path(&kp_dir, frame, cal.camera_id()), skels)?;
                let path = HeatmapDir::pfhm_path(&hm_dir, frame, cal.camera_id());
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = std::io::BufWriter::new(file);
                write_pfhm(&mut w, &self.render(frame, k)).map_err(|e| Error::io(&path, e))?;
                std::io::Write::flush(&mut w).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }

    fn keypoint(&self, map: &Heatmap, gt: PixelCoord) -> Option<Keypoint> {
        // search within 2 sigma of the true projection
        let radius = 2.0 * self.spec.heatmap_sigma_px;
        let region = map.region_for_pixels(gt.x - radius, gt.y - radius, gt.x + radius, gt.y + radius)?;
        let mut best: Option<(usize, usize, f64)> = None;
        for r in region.row_min..=region.row_max {
            for c in region.col_min..=region.col_max {
                let px = map.cell_pixel(r, c);
                if px.distance(&gt) > radius {
                    continue;
                }
                let v = map.cell(r, c);
                if best.is_none_or(|b| v > b.2) {
                    best = Some((r, c, v));
                }
            }
        }
        let (r, c, v) = best.filter(|b| b.2 > 0.0)?;
        // parabolic refinement in log space, exact for a Gaussian peak
        let refine = |lo: Option<f64>, mid: f64, hi: Option<f64>| -> f64 {
            match (lo, hi) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => {
                    let (la, lm, lb) = (a.ln(), mid.ln(), b.ln());
                    let denom = la - 2.0 * lm + lb;
                    if denom < 0.0 {
                        (0.5 * (la - lb) / denom).clamp(-0.5, 0.5)
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        };
        let get = |r: isize, c: isize| {
            (r >= 0 && c >= 0 && (r as usize) < map.height() && (c as usize) < map.width()).then(|| map.cell(r as usize, c as usize))
        };
        let (ri, ci) = (r as isize, c as isize);
        let dc = refine(get(ri, ci - 1), v, get(ri, ci + 1));
        let dr = refine(get(ri - 1, ci), v, get(ri + 1, ci));
        let s = map.scale();
        Some(Keypoint { pixel: PixelCoord::new((c as f64 + dc) * s, (r as f64 + dr) * s), confidence: v })
    }
}

impl HeatmapSource for SyntheticScene {
    fn load(&self, frame: u32, camera: &CameraCalibration) -> Result<Vec<Heatmap>> {
        let k = self
            .calibrations
            .iter()
            .position(|c| c.camera_id() == camera.camera_id())
            .ok_or_else(|| Error::InvalidHeatmap(format!("no synthetic camera {}", camera.camera_id())))?;
        if frame >= self.spec.n_frames {
            return Err(Error::InvalidHeatmap(format!("frame {frame} outside the scene")));
        }
        Ok(self.render(frame, k))
    }
}

/// Smallest step along `dir` (10 mm resolution) that moves the projection
/// of `p` by at least `px` pixels in every camera.
fn displacement_for(p: Point3, dir: Vector3<f64>, px: f64, cals: &[CameraCalibration]) -> Option<Point3> {
    let base: Vec<PixelCoord> = cals.iter().map(|c| c.project(&p).map(|q| q.pixel)).collect::<Result<_>>().ok()?;
    let mut step = 10.0;
    while step <= 5000.0 {
        let q = p + dir * step;
        let moved = cals.iter().zip(&base).map(|(c, b)| c.project(&q).map_or(0.0, |r| r.pixel.distance(b))).fold(f64::INFINITY, f64::min);
        if moved >= px {
            return Some(q);
        }
        step += 10.0;
    }
    None
}

/// Builds a scene from `spec`; deterministic in `seed`.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    let body = BodyModel::default();
    spec.validate(&body)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let calibrations = spec.calibrations()?;
    let n_joints = body.n_joints();
    let phases: Vec<f64> = (0..spec.n_actors).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();

    let ground_truth: Vec<FrameSkeletons> = (0..spec.n_frames)
        .map(|t| FrameSkeletons {
            frame_index: t,
            skeletons: (0..spec.n_actors)
                .map(|a| Skeleton3D {
                    frame_index: t,
                    person_id: a,
                    joints: actor_pose(spec, a, t, phases[a as usize]).into_iter().map(Some).collect(),
                })
                .collect(),
        })
        .collect();

    for actor in 0..spec.n_actors {
        for joint in 0..n_joints {
            let outside = (0..spec.n_frames)
                .filter(|&t| {
                    let p = ground_truth[t as usize].skeletons[actor as usize].joints[joint].unwrap();
                    !calibrations.iter().any(|c| c.project(&p).is_ok_and(|q| q.is_visible()))
                })
                .count();
            if 2 * outside > spec.n_frames as usize {
                return Err(Error::ActorOutOfView { actor, joint });
            }
        }
    }

    let mut scene = SyntheticScene {
        spec: spec.clone(),
        seed,
        body: body.clone(),
        calibrations,
        ground_truth,
        keypoints: BTreeMap::new(),
        displaced: BTreeMap::new(),
        corrupted_joint_frames: BTreeSet::new(),
        swaps: BTreeMap::new(),
    };

    let c = &spec.corruption;
    for actor in 0..spec.n_actors {
        match c.granularity {
            Granularity::Triple => {
                let mut units: Vec<(u32, usize, usize)> = Vec::new();
                for t in 0..spec.n_frames {
                    for j in 0..n_joints {
                        for k in 0..spec.n_cameras {
                            units.push((t, j, k));
                        }
                    }
                }
                let n = (c.fraction * units.len() as f64).round() as usize;
                let (chosen, _) = units.partial_shuffle(&mut rng, n);
                for &mut (t, j, k) in chosen {
                    let gt = scene.gt_point(actor, t, j);
                    let cal = &scene.calibrations[k];
                    let Ok(own) = cal.project(&gt) else { continue };
                    let center = body_center(&scene, actor, t);
                    let dy = match cal.project(&center) {
                        Ok(q) if q.pixel.y < own.pixel.y => -c.displacement_px,
                        _ => c.displacement_px,
                    };
                    scene.displaced.insert((actor, t, j, k), PixelCoord::new(own.pixel.x, own.pixel.y + dy));
                    scene.corrupted_joint_frames.insert((actor, t, j));
                }
            }
            Granularity::JointFrame => {
                // interior frames only, and never two consecutive frames of a joint
                let mut units: Vec<(u32, usize)> = Vec::new();
                for t in 1..spec.n_frames - 1 {
                    for j in 0..n_joints {
                        units.push((t, j));
                    }
                }
                let n = (c.fraction * (spec.n_frames as usize * n_joints) as f64).round() as usize;
                units.shuffle(&mut rng);
                let mut picked: BTreeSet<(u32, usize)> = BTreeSet::new();
                for (t, j) in units {
                    if picked.len() == n {
                        break;
                    }
                    if picked.contains(&(t - 1, j)) || picked.contains(&(t + 1, j)) {
                        continue;
                    }
                    let gt = scene.gt_point(actor, t, j);
                    let center = body_center(&scene, actor, t);
                    let dir = if center.z < gt.z { -Vector3::z() } else { Vector3::z() };
                    let Some(q) = displacement_for(gt, dir, c.displacement_px, &scene.calibrations) else { continue };
                    picked.insert((t, j));
                    for (k, cal) in scene.calibrations.iter().enumerate() {
                        let px = cal.project(&q)?.pixel;
                        scene.displaced.insert((actor, t, j, k), px);
                    }
                    scene.corrupted_joint_frames.insert((actor, t, j));
                }
            }
        }
    }

    for s in &spec.swaps {
        let partner = partner_of(&body, s.joint).expect("validated");
        for t in s.start_frame..=s.end_frame.min(spec.n_frames - 1) {
            scene.swaps.insert((s.actor, t, s.joint), (partner, s.residual_peak));
        }
    }

    for t in 0..spec.n_frames {
        let mut per_cam = BTreeMap::new();
        for (k, cal) in scene.calibrations.iter().enumerate() {
            let maps = scene.render(t, k);
            let mut skels = Vec::new();
            for actor in 0..spec.n_actors {
                if scene.occluded(actor, k, t) {
                    continue;
                }
                let joints = (0..n_joints)
                    .map(|j| {
                        let q = cal.project(&scene.gt_point(actor, t, j)).ok().filter(|q| q.in_front)?;
                        scene.keypoint(&maps[j], q.pixel)
                    })
                    .collect();
                if let Some(s) = Skeleton2D::new(joints, cal.camera_id().clone(), t).sanitized(cal) {
                    skels.push(s);
                }
            }
            per_cam.insert(cal.camera_id().clone(), skels);
        }
        scene.keypoints.insert(t, per_cam);
    }
    Ok(scene)
}

fn body_center(scene: &SyntheticScene, actor: u32, frame: u32) -> Point3 {
    let joints = &scene.ground_truth[frame as usize].skeletons[actor as usize].joints;
    let sum = joints.iter().flatten().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / joints.len() as f64)
}

/// Triangulation error from a `3 sigma` pixel shift, propagated one image
/// axis at a time and combined in quadrature.
pub fn triangulation_radius_at(point: &Point3, cals: &[&CameraCalibration], sigma_px: f64) -> Option<f64> {
    let pixels: Vec<PixelCoord> =
        cals.iter().map(|c| c.project(point).ok().filter(|q| q.in_front).map(|q| q.pixel)).collect::<Option<_>>()?;
    let rays = |px: &[PixelCoord]| -> Vec<Ray> { cals.iter().zip(px).map(|(c, p)| c.backproject(*p)).collect() };
    let base = triangulate(&rays(&pixels)).ok()?.point;
    let mut sum = 0.0;
    for i in 0..pixels.len() {
        for axis in 0..2 {
            let mut px = pixels.clone();
            if axis == 0 {
                px[i].x += 3.0 * sigma_px;
            } else {
                px[i].y += 3.0 * sigma_px;
            }
            sum += (triangulate(&rays(&px)).ok()?.point - base).norm_squared();
        }
    }
    Some(sum.sqrt())
}

/// Three times the RMS triangulation error under isotropic Gaussian pixel noise.
pub fn monte_carlo_radius<R: Rng + ?Sized>(
    point: &Point3,
    cals: &[&CameraCalibration],
    sigma_px: f64,
    draws: usize,
    rng: &mut R,
) -> Option<f64> {
    let pixels: Vec<PixelCoord> =
        cals.iter().map(|c| c.project(point).ok().filter(|q| q.in_front).map(|q| q.pixel)).collect::<Option<_>>()?;
    if sigma_px == 0.0 {
        return Some(0.0);
    }
    let noise = Normal::new(0.0, sigma_px).ok()?;
    let mut sum = 0.0;
    for _ in 0..draws {
        let rays: Vec<Ray> = cals
            .iter()
            .zip(&pixels)
            .map(|(c, p)| c.backproject(PixelCoord::new(p.x + noise.sample(rng), p.y + noise.sample(rng))))
            .collect();
        sum += (triangulate(&rays).ok()?.point - point).norm_squared();
    }
    Some(3.0 * (sum / draws as f64).sqrt())
}

/// The largest [`triangulation_radius_at`] over every camera subset of two
/// or more and every ground-truth joint at the middle frame.
pub fn expected_triangulation_radius(scene: &SyntheticScene) -> f64 {
    let sigma = scene.spec.heatmap_sigma_px;
    let mid = &scene.ground_truth[scene.ground_truth.len() / 2];
    let points: Vec<Point3> = mid.skeletons.iter().flat_map(|s| s.joints.iter().flatten().copied()).collect();
    radius_over(&points, &scene.calibrations, sigma)
}

/// [`expected_triangulation_radius`] for explicit points and cameras.
pub fn radius_over(points: &[Point3], cals: &[CameraCalibration], sigma_px: f64) -> f64 {
    let refs: Vec<&CameraCalibration> = cals.iter().collect();
    let Ok(subsets) = enumerate_subsets(&refs) else { return 0.0 };
    let mut worst: f64 = 0.0;
    for p in points {
        for s in &subsets {
            if let Some(r) = triangulation_radius_at(p, s, sigma_px) {
                worst = worst.max(r);
            }
        }
    }
    worst
}
