//! PCP scoring of 3D skeletons against ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Limbs shorter than this in ground truth cannot be scored.
pub const MIN_LIMB_LENGTH_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton3D {
    pub frame_index: u32,
    pub person_id: u32,
    pub joints: Vec<Option<Point3>>,
}

impl Skeleton3D {
    /// Mean distance over joints present in both skeletons.
    pub fn mean_distance(&self, other: &Skeleton3D) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for (a, b) in self.joints.iter().zip(&other.joints) {
            if let (Some(a), Some(b)) = (a, b) {
                sum += (a - b).norm();
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Skeleton3D {
        Skeleton3D { joints: self.joints.iter().map(|j| j.as_ref().map(&f)).collect(), ..self.clone() }
    }
}

/// Shifts the head joints up by `dz` mm along world z.
pub fn apply_head_offset(s: &Skeleton3D, head_joints: &[usize], dz: f64) -> Skeleton3D {
    let mut out = s.clone();
    for &j in head_joints {
        if let Some(Some(p)) = out.joints.get_mut(j) {
            p.z += dz;
        }
    }
    out
}

/// Both endpoints strictly within `alpha` times the ground-truth limb length.
pub fn limb_correct(est_a: &Point3, est_b: &Point3, gt_a: &Point3, gt_b: &Point3, alpha: f64) -> Result<bool> {
    let len = (gt_a - gt_b).norm();
    if len < MIN_LIMB_LENGTH_MM {
        return Err(Error::ZeroLengthLimb);
    }
    let t = alpha * len;
    Ok((est_a - gt_a).norm() < t && (est_b - gt_b).norm() < t)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub correct: u64,
    pub total: u64,
}

impl Count {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += u64::from(ok);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorScore {
    pub actor_id: u32,
    /// Ground-truth frames the actor appears in.
    pub appearances: u64,
    /// One count per part class, in `PcpReport::classes` order.
    pub per_class: Vec<Count>,
}

impl ActorScore {
    pub fn all(&self) -> Count {
        self.per_class.iter().fold(Count::default(), |acc, c| Count { correct: acc.correct + c.correct, total: acc.total + c.total })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpReport {
    pub classes: Vec<String>,
    pub actors: Vec<ActorScore>,
}

impl PcpReport {
    /// Appearance-weighted mean of the actors' percentages for one class
    /// (`None` for the pooled "All" column).
    pub fn average(&self, class: Option<usize>) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for a in &self.actors {
            let c = class.map_or_else(|| a.all(), |i| a.per_class[i]);
            if c.total > 0 {
                num += c.percent() * a.appearances as f64;
                den += a.appearances as f64;
            }
        }
        if den == 0.0 {
            f64::NAN
        } else {
            num / den
        }
    }

    /// Mean of the per-actor "All" percentages weighted by appearance.
    pub fn mean_pcp(&self) -> f64 {
        self.average(None)
    }

    fn rows(&self) -> Vec<(String, Vec<f64>)> {
        let mut rows: Vec<(String, Vec<f64>)> = self
            .actors
            .iter()
            .map(|a| {
                let mut v: Vec<f64> = a.per_class.iter().map(Count::percent).collect();
                v.push(a.all().percent());
                (format!("actor {}", a.actor_id), v)
            })
            .collect();
        let mut avg: Vec<f64> = (0..self.classes.len()).map(|i| self.average(Some(i))).collect();
        avg.push(self.average(None));
        rows.push(("Average".to_owned(), avg));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",All\n");
        for (name, vals) in self.rows() {
            out.push_str(&name);
            for v in vals {
                write!(out, ",{v:.2}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut header: Vec<String> = vec![String::new()];
        header.extend(self.classes.iter().cloned());
        header.push("All".into());
        let rows = self.rows();
        let mut out = String::new();
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(7);
        write!(out, "{:w0$}", "").unwrap();
        for h in &header[1..] {
            write!(out, " | {h:>9}").unwrap();
        }
        out.push('\n');
        out.push_str(&"-".repeat(w0 + 12 * (header.len() - 1)));
        out.push('\n');
        for (name, vals) in rows {
            write!(out, "{name:w0$}").unwrap();
            for v in vals {
                write!(out, " | {v:>9.2}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Ground truth or estimates of one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSkeletons {
    pub frame_index: u32,
    pub skeletons: Vec<Skeleton3D>,
}

/// Pairs ground-truth actors with estimates by ascending mean joint distance.
pub fn match_frame(gt: &[Skeleton3D], est: &[Skeleton3D]) -> Vec<(usize, Option<usize>)> {
    let mut cand = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, e) in est.iter().enumerate() {
            if let Some(d) = g.mean_distance(e) {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_match = vec![None; gt.len()];
    let mut used = vec![false; est.len()];
    for (_, i, j) in cand {
        if gt_match[i].is_none() && !used[j] {
            gt_match[i] = Some(j);
            used[j] = true;
        }
    }
    gt_match.into_iter().enumerate().collect()
}

/// Scores estimates against ground truth, frame by frame.
///
/// A ground-truth actor with no matched estimate in a frame gets every limb
/// marked incorrect. Limbs with a missing ground-truth endpoint are skipped.
pub fn score(estimates: &[FrameSkeletons], ground_truth: &[FrameSkeletons], body: &BodyModel, alpha: f64) -> Result<PcpReport> {
    let classes = body.part_classes();
    let class_of: Vec<usize> = body.limbs.iter().map(|l| classes.iter().position(|c| *c == l.class).unwrap()).collect();
    let est_by_frame: BTreeMap<u32, &[Skeleton3D]> = estimates.iter().map(|f| (f.frame_index, f.skeletons.as_slice())).collect();
    let mut actors: BTreeMap<u32, (ActorScore, bool)> = BTreeMap::new();
    for frame in ground_truth {
        let est = est_by_frame.get(&frame.frame_index).copied().unwrap_or(&[]);
        for (gi, ei) in match_frame(&frame.skeletons, est) {
            let g = &frame.skeletons[gi];
            let entry = actors.entry(g.person_id).or_insert_with(|| {
                (ActorScore { actor_id: g.person_id, appearances: 0, per_class: vec![Count::default(); classes.len()] }, false)
            });
            entry.0.appearances += 1;
            entry.1 |= ei.is_some();
            for (limb, &ci) in body.limbs.iter().zip(&class_of) {
                let (Some(Some(ga)), Some(Some(gb))) = (g.joints.get(limb.a), g.joints.get(limb.b)) else {
                    continue;
                };
                let ok = match ei.map(|j| &est[j]) {
                    Some(e) => match (e.joints.get(limb.a), e.joints.get(limb.b)) {
                        (Some(Some(ea)), Some(Some(eb))) => limb_correct(ea, eb, ga, gb, alpha)?,
                        _ => false,
                    },
                    None => false,
                };
                entry.0.per_class[ci].add(ok);
            }
        }
    }
    if let Some((id, _)) = actors.iter().find(|(_, (_, overlap))| !overlap) {
        return Err(Error::NoOverlap(*id));
    }
    Ok(PcpReport { classes, actors: actors.into_values().map(|(a, _)| a).collect() })
}

type JointList = Vec<Option<[f64; 3]>>;

fn to_points(joints: &JointList) -> Vec<Option<Point3>> {
    joints.iter().map(|j| j.map(|p| Point3::new(p[0], p[1], p[2]))).collect()
}

fn from_points(joints: &[Option<Point3>]) -> JointList {
    joints.iter().map(|j| j.map(|p| [p.x, p.y, p.z])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtActorRecord {
    pub actor_id: u32,
    pub joints: JointList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrameRecord {
    pub frame: u32,
    pub actors: Vec<GtActorRecord>,
}

/// Ground-truth file: `{"frames":[{"frame","actors":[{"actor_id","joints"}]}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub frames: Vec<GtFrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: u32,
    pub joints: JointList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFrameRecord {
    pub frame: u32,
    pub persons: Vec<PersonRecord>,
}

/// Estimated skeletons: `{"frames":[{"frame","persons":[{"person_id","joints"}]}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub frames: Vec<EstimateFrameRecord>,
}

impl GroundTruthFile {
    pub fn from_frames(frames: &[FrameSkeletons]) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|f| GtFrameRecord {
                    frame: f.frame_index,
                    actors: f.skeletons.iter().map(|s| GtActorRecord { actor_id: s.person_id, joints: from_points(&s.joints) }).collect(),
                })
                .collect(),
        }
    }

    pub fn to_frames(&self) -> Vec<FrameSkeletons> {
        self.frames
            .iter()
            .map(|f| FrameSkeletons {
                frame_index: f.frame,
                skeletons: f
                    .actors
                    .iter()
                    .map(|a| Skeleton3D { frame_index: f.frame, person_id: a.actor_id, joints: to_points(&a.joints) })
                    .collect(),
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

impl EstimatesFile {
    pub fn from_frames(frames: &[FrameSkeletons]) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|f| EstimateFrameRecord {
                    frame: f.frame_index,
                    persons: f.skeletons.iter().map(|s| PersonRecord { person_id: s.person_id, joints: from_points(&s.joints) }).collect(),
                })
                .collect(),
        }
    }

    pub fn to_frames(&self) -> Vec<FrameSkeletons> {
        self.frames
            .iter()
            .map(|f| FrameSkeletons {
                frame_index: f.frame,
                skeletons: f
                    .persons
                    .iter()
                    .map(|p| Skeleton3D { frame_index: f.frame, person_id: p.person_id, joints: to_points(&p.joints) })
                    .collect(),
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

pub(crate) fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
