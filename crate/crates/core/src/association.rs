//! Identity association of 2D skeletons.
//!
//! Skeletons are chained through time per camera by greedy IoU matching
//! (camera-local tracklets), tracklets are fused across cameras when their
//! joints back-project to nearly intersecting rays, and finally frames in
//! which an identity is seen by a single camera are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pairwise_ray_distance, CameraCalibration, CameraId, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub pixel: PixelCoord,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton2D {
    pub joints: Vec<Option<Keypoint>>,
    pub camera_id: CameraId,
    pub frame_index: u32,
}

impl Skeleton2D {
    pub fn new(joints: Vec<Option<Keypoint>>, camera_id: CameraId, frame_index: u32) -> Self {
        Self { joints, camera_id, frame_index }
    }

    pub fn visible(&self) -> impl Iterator<Item = (usize, PixelCoord)> + '_ {
        self.joints.iter().enumerate().filter_map(|(i, k)| k.map(|k| (i, k.pixel)))
    }

    pub fn n_visible(&self) -> usize {
        self.joints.iter().filter(|k| k.is_some()).count()
    }

    pub fn joint(&self, i: usize) -> Option<PixelCoord> {
        self.joints.get(i).copied().flatten().map(|k| k.pixel)
    }

    /// Drops joints further than 10% of the image size outside the image.
    /// Returns `None` when nothing visible remains.
    pub fn sanitized(mut self, cal: &CameraCalibration) -> Option<Self> {
        let mx = 0.1 * cal.image_width() as f64;
        let my = 0.1 * cal.image_height() as f64;
        for k in &mut self.joints {
            if let Some(kp) = k {
                let p = kp.pixel;
                let ok = p.is_finite()
                    && p.x >= -mx
                    && p.y >= -my
                    && p.x <= cal.image_width() as f64 + mx
                    && p.y <= cal.image_height() as f64 + my;
                if !ok {
                    *k = None;
                }
            }
        }
        (self.n_visible() > 0).then_some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Box grown by `fraction` of its width/height on every side.
    pub fn expanded(&self, fraction: f64) -> BoundingBox {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        BoundingBox { x_min: self.x_min - dx, y_min: self.y_min - dy, x_max: self.x_max + dx, y_max: self.y_max + dy }
    }
}

/// Padding on each side, as a fraction of the tight box diagonal.
pub const BOX_PADDING: f64 = 0.05;

/// Tight box over the visible joints, padded by 5% of its diagonal.
pub fn bounding_box(s: &Skeleton2D) -> Result<BoundingBox> {
    let mut it = s.visible().map(|(_, p)| p);
    let first = it.next().ok_or(Error::DegenerateBox)?;
    let mut b = BoundingBox { x_min: first.x, y_min: first.y, x_max: first.x, y_max: first.y };
    for p in it {
        b.x_min = b.x_min.min(p.x);
        b.y_min = b.y_min.min(p.y);
        b.x_max = b.x_max.max(p.x);
        b.y_max = b.y_max.max(p.y);
    }
    let diag = b.width().hypot(b.height());
    if !(diag > 0.0) {
        return Err(Error::DegenerateBox);
    }
    let pad = BOX_PADDING * diag;
    Ok(BoundingBox { x_min: b.x_min - pad, y_min: b.y_min - pad, x_max: b.x_max + pad, y_max: b.y_max + pad })
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter =
        BoundingBox { x_min: a.x_min.max(b.x_min), y_min: a.y_min.max(b.y_min), x_max: a.x_max.min(b.x_max), y_max: a.y_max.min(b.y_max) }
            .area();
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationParams {
    pub iou_threshold: f64,
    pub max_ray_distance_mm: f64,
    pub min_mutual_joints: usize,
    pub gap_max: u32,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self { iou_threshold: 0.7, max_ray_distance_mm: 20.0, min_mutual_joints: 5, gap_max: 2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeLinks {
    /// (index in prev, index in curr)
    pub matches: Vec<(usize, usize)>,
    /// Indices in curr that start a new identity.
    pub new_identities: Vec<usize>,
}

/// Greedy descending-IoU matching between consecutive frames of one camera.
pub fn link_time(prev: &[Skeleton2D], curr: &[Skeleton2D], iou_threshold: f64) -> TimeLinks {
    let prev_boxes: Vec<_> = prev.iter().map(|s| bounding_box(s).ok()).collect();
    let curr_boxes: Vec<_> = curr.iter().map(|s| bounding_box(s).ok()).collect();
    let mut pairs = Vec::new();
    for (i, pb) in prev_boxes.iter().enumerate() {
        for (j, cb) in curr_boxes.iter().enumerate() {
            if let (Some(pb), Some(cb)) = (pb, cb) {
                let score = iou(pb, cb);
                if score >= iou_threshold {
                    pairs.push((score, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut prev_used = vec![false; prev.len()];
    let mut curr_used = vec![false; curr.len()];
    let mut links = TimeLinks::default();
    for (_, i, j) in pairs {
        if !prev_used[i] && !curr_used[j] {
            prev_used[i] = true;
            curr_used[j] = true;
            links.matches.push((i, j));
        }
    }
    links.matches.sort_unstable_by_key(|&(_, j)| j);
    links.new_identities = (0..curr.len()).filter(|&j| !curr_used[j]).collect();
    links
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewLink {
    pub linked: bool,
    pub mutual_joints: usize,
    /// Mean closest-approach distance of the mutual joints' rays, mm.
    pub mean_distance: Option<f64>,
}

/// Cross-camera identity test for two skeletons of the same frame.
pub fn link_views(
    a: &Skeleton2D,
    b: &Skeleton2D,
    cal_a: &CameraCalibration,
    cal_b: &CameraCalibration,
    params: &AssociationParams,
) -> ViewLink {
    let mut sum = 0.0;
    let mut mutual = 0usize;
    for (i, pa) in a.visible() {
        if let Some(pb) = b.joint(i) {
            sum += pairwise_ray_distance(&cal_a.backproject(pa), &cal_b.backproject(pb));
            mutual += 1;
        }
    }
    let mean_distance = (mutual > 0).then(|| sum / mutual as f64);
    let linked = mutual >= params.min_mutual_joints && mean_distance.is_some_and(|d| d < params.max_ray_distance_mm);
    ViewLink { linked, mutual_joints: mutual, mean_distance }
}

/// One identity's skeletons, keyed by frame then camera.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    pub person_id: u32,
    pub frames: BTreeMap<u32, BTreeMap<CameraId, Skeleton2D>>,
}

impl PersonTrack {
    pub fn first_frame(&self) -> Option<u32> {
        self.frames.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.frames.keys().next_back().copied()
    }
}

/// Drops `frame` from identities seen by a single camera in it.
pub fn prune_single_view(tracks: &mut Vec<PersonTrack>, frame: u32) {
    for t in tracks.iter_mut() {
        if t.frames.get(&frame).is_some_and(|cams| cams.len() < 2) {
            t.frames.remove(&frame);
        }
    }
    tracks.retain(|t| !t.frames.is_empty());
}

#[derive(Debug)]
struct Tracklet {
    camera: CameraId,
    person: usize,
    observations: BTreeMap<u32, Skeleton2D>,
}

#[derive(Debug, Default)]
struct PersonState {
    /// Frames observed per camera.
    frames_by_camera: BTreeMap<CameraId, BTreeSet<u32>>,
    tracklets: Vec<usize>,
}

/// Frame-by-frame identity association over all cameras.
#[derive(Debug)]
pub struct Associator<'a> {
    cals: BTreeMap<CameraId, &'a CameraCalibration>,
    params: AssociationParams,
    tracklets: Vec<Tracklet>,
    persons: Vec<PersonState>,
    parent: Vec<usize>,
    /// Per camera: frame index and (skeleton, tracklet) pairs of the last processed frame.
    previous: BTreeMap<CameraId, (u32, Vec<(Skeleton2D, usize)>)>,
}

impl<'a> Associator<'a> {
    pub fn new(cals: &'a [CameraCalibration], params: AssociationParams) -> Self {
        Self {
            cals: cals.iter().map(|c| (c.camera_id().clone(), c)).collect(),
            params,
            tracklets: Vec::new(),
            persons: Vec::new(),
            parent: Vec::new(),
            previous: BTreeMap::new(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Whether two identities can be one person: never in the same camera at
    /// the same frame, and any hand-over within a camera leaves a gap of at
    /// most `gap_max` frames.
    fn compatible(&self, p: usize, q: usize) -> bool {
        let (a, b) = (&self.persons[p], &self.persons[q]);
        for (cam, fa) in &a.frames_by_camera {
            let Some(fb) = b.frames_by_camera.get(cam) else { continue };
            let (a_lo, a_hi) = (*fa.first().unwrap(), *fa.last().unwrap());
            let (b_lo, b_hi) = (*fb.first().unwrap(), *fb.last().unwrap());
            let gap = if a_hi < b_lo {
                b_lo - a_hi - 1
            } else if b_hi < a_lo {
                a_lo - b_hi - 1
            } else {
                return false;
            };
            if gap > self.params.gap_max {
                return false;
            }
        }
        true
    }

    fn merge(&mut self, p: usize, q: usize) {
        let (root, child) = if p < q { (p, q) } else { (q, p) };
        self.parent[child] = root;
        let moved = std::mem::take(&mut self.persons[child]);
        let target = &mut self.persons[root];
        for (cam, frames) in moved.frames_by_camera {
            target.frames_by_camera.entry(cam).or_default().extend(frames);
        }
        target.tracklets.extend(moved.tracklets);
    }

    fn new_tracklet(&mut self, camera: CameraId) -> usize {
        let person = self.persons.len();
        self.persons.push(PersonState::default());
        self.parent.push(person);
        let id = self.tracklets.len();
        self.tracklets.push(Tracklet { camera, person, observations: BTreeMap::new() });
        self.persons[person].tracklets.push(id);
        id
    }

    /// Ingests one frame of detections. Cameras without an entry (or with an
    /// empty list) contribute nothing.
    pub fn process_frame(&mut self, frame: u32, detections: &BTreeMap<CameraId, Vec<Skeleton2D>>) {
        let mut current: BTreeMap<CameraId, Vec<(Skeleton2D, usize)>> = BTreeMap::new();
        for (cam, skels) in detections {
            if !self.cals.contains_key(cam) {
                log::warn!("frame {frame}: detections for unknown camera {cam} ignored");
                continue;
            }
            let prev: Vec<(Skeleton2D, usize)> = match self.previous.get(cam) {
                Some((f, p)) if *f + 1 == frame => p.clone(),
                _ => Vec::new(),
            };
            let prev_skels: Vec<Skeleton2D> = prev.iter().map(|(s, _)| s.clone()).collect();
            let links = link_time(&prev_skels, skels, self.params.iou_threshold);
            let mut assigned = vec![usize::MAX; skels.len()];
            for &(i, j) in &links.matches {
                assigned[j] = prev[i].1;
            }
            for &j in &links.new_identities {
                assigned[j] = self.new_tracklet(cam.clone());
            }
            let mut entries = Vec::with_capacity(skels.len());
            for (s, tid) in skels.iter().zip(assigned) {
                self.tracklets[tid].observations.insert(frame, s.clone());
                let person = self.tracklets[tid].person;
                let root = self.find(person);
                self.persons[root].frames_by_camera.entry(cam.clone()).or_default().insert(frame);
                entries.push((s.clone(), tid));
            }
            current.insert(cam.clone(), entries);
        }

        let cams: Vec<&CameraId> = current.keys().collect();
        let mut candidates = Vec::new();
        for (ci, ca) in cams.iter().enumerate() {
            for cb in &cams[ci + 1..] {
                let (cal_a, cal_b) = (self.cals[*ca], self.cals[*cb]);
                for (sa, ta) in &current[*ca] {
                    for (sb, tb) in &current[*cb] {
                        let link = link_views(sa, sb, cal_a, cal_b, &self.params);
                        if let (true, Some(d)) = (link.linked, link.mean_distance) {
                            candidates.push((d, *ta, *tb));
                        }
                    }
                }
            }
        }
        // Smallest ray distance wins when a skeleton links to several identities.
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, ta, tb) in candidates {
            let p = self.find(self.tracklets[ta].person);
            let q = self.find(self.tracklets[tb].person);
            if p != q && self.compatible(p, q) {
                self.merge(p, q);
            }
        }

        for (cam, entries) in current {
            self.previous.insert(cam, (frame, entries));
        }
    }

    /// Identities with single-camera frames pruned, numbered by first appearance.
    pub fn finish(mut self) -> Vec<PersonTrack> {
        let mut by_root: BTreeMap<usize, BTreeMap<u32, BTreeMap<CameraId, Skeleton2D>>> = BTreeMap::new();
        for tid in 0..self.tracklets.len() {
            let root = self.find(self.tracklets[tid].person);
            let t = &self.tracklets[tid];
            let frames = by_root.entry(root).or_default();
            for (f, s) in &t.observations {
                frames.entry(*f).or_default().insert(t.camera.clone(), s.clone());
            }
        }
        let mut tracks: Vec<PersonTrack> = by_root.into_values().map(|frames| PersonTrack { person_id: 0, frames }).collect();
        let all_frames: BTreeSet<u32> = tracks.iter().flat_map(|t| t.frames.keys().copied()).collect();
        for f in all_frames {
            prune_single_view(&mut tracks, f);
        }
        // by_root iteration order already ties on the lowest root id
        tracks.sort_by_key(|t| t.first_frame());
        for (i, t) in tracks.iter_mut().enumerate() {
            t.person_id = i as u32;
        }
        tracks
    }
}

/// Runs association over a whole sequence.
pub fn associate(
    cals: &[CameraCalibration],
    detections: &BTreeMap<u32, BTreeMap<CameraId, Vec<Skeleton2D>>>,
    params: &AssociationParams,
) -> Vec<PersonTrack> {
    let mut assoc = Associator::new(cals, params.clone());
    for (frame, dets) in detections {
        assoc.process_frame(*frame, dets);
    }
    assoc.finish()
}

// ---- file formats ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonRecord {
    pub joints: Vec<Option<[f64; 3]>>,
}

impl SkeletonRecord {
    pub fn from_skeleton(s: &Skeleton2D) -> Self {
        Self { joints: s.joints.iter().map(|k| k.map(|k| [k.pixel.x, k.pixel.y, k.confidence])).collect() }
    }

    pub fn into_skeleton(self, camera_id: CameraId, frame_index: u32) -> Skeleton2D {
        let joints = self.joints.into_iter().map(|j| j.map(|[x, y, c]| Keypoint { pixel: PixelCoord::new(x, y), confidence: c })).collect();
        Skeleton2D { joints, camera_id, frame_index }
    }
}

pub fn keypoint_path(dir: &Path, frame: u32, camera: &CameraId) -> std::path::PathBuf {
    dir.join(format!("{frame:06}_{camera}.json"))
}

pub fn write_keypoints(path: &Path, skeletons: &[Skeleton2D]) -> Result<()> {
    let records: Vec<_> = skeletons.iter().map(SkeletonRecord::from_skeleton).collect();
    let json = serde_json::to_string(&records).expect("keypoints serialize");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Loads `{frame:06}_{camera}.json` files from `dir` for every calibrated camera.
pub fn load_keypoint_dir(dir: &Path, cals: &[CameraCalibration]) -> Result<BTreeMap<u32, BTreeMap<CameraId, Vec<Skeleton2D>>>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out: BTreeMap<u32, BTreeMap<CameraId, Vec<Skeleton2D>>> = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(name) = entry.file_name().to_str() {
            names.push(name.to_owned());
        }
    }
    names.sort();
    for name in names {
        let Some(stem) = name.strip_suffix(".json") else { continue };
        let Some((frame, cam)) = stem.split_once('_') else { continue };
        let Ok(frame) = frame.parse::<u32>() else { continue };
        let Some(cal) = cals.iter().find(|c| c.camera_id().0 == cam) else { continue };
        let path = dir.join(&name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let records: Vec<SkeletonRecord> = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
        let skels = records.into_iter().filter_map(|r| r.into_skeleton(cal.camera_id().clone(), frame).sanitized(cal)).collect();
        out.entry(frame).or_default().insert(cal.camera_id().clone(), skels);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackRecord {
    pub person_id: u32,
    pub frames: BTreeMap<u32, BTreeMap<CameraId, SkeletonRecord>>,
}

impl From<&PersonTrack> for TrackRecord {
    fn from(t: &PersonTrack) -> Self {
        let frames = t
            .frames
            .iter()
            .map(|(f, cams)| (*f, cams.iter().map(|(c, s)| (c.clone(), SkeletonRecord::from_skeleton(s))).collect()))
            .collect();
        Self { person_id: t.person_id, frames }
    }
}
