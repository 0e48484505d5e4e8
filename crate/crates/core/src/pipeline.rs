//! End-to-end orchestration: association, hypothesis sampling, CRF
//! construction, belief propagation, MAP selection and scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate, bounding_box, load_keypoint_dir, AssociationParams, PersonTrack, Skeleton2D, TrackRecord};
use crate::body::BodyModel;
use crate::bp::{self, argmax_lowest, Belief, BpOptions};
use crate::crf::{build_graph, eval_data, CrfParams, FactorToggles, JointHypotheses, ModelConfig, PersonModel};
use crate::error::{Error, Result};
use crate::evaluation::{apply_head_offset, score, EstimatesFile, FrameSkeletons, GroundTruthFile, PcpReport, Skeleton3D};
use crate::geometry::{load_calibrations, CameraCalibration, CameraId, Point3};
use crate::graph::{floor_and_normalize, FactorKind};
use crate::heatmap::{build_pmf_in, Heatmap, HeatmapDir, HeatmapSource};
use crate::sampling::{sample_states, stream_rng, write_state_dump, JointStateSet, JointView, SamplingParams, StateKey};

/// Run configuration, read from JSON. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub calibration: PathBuf,
    pub heatmaps: PathBuf,
    pub keypoints: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// TOML body model and CRF parameters; replaces `crf` when given.
    pub model: Option<PathBuf>,
    pub crf: CrfParams,
    pub association: AssociationParams,
    pub sampling: SamplingParams,
    pub bp: BpOptions,
    pub seed: u64,
    /// Any of `data`, `temp`, `col`; `data` is required.
    pub factors: Vec<String>,
    pub head_offset_mm: f64,
    pub alpha: f64,
    pub dump_states: bool,
    pub dump_beliefs: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            calibration: "calibration.json".into(),
            heatmaps: "heatmaps".into(),
            keypoints: "keypoints".into(),
            ground_truth: None,
            output_dir: "out".into(),
            model: None,
            crf: CrfParams::default(),
            association: AssociationParams::default(),
            sampling: SamplingParams::default(),
            bp: BpOptions::default(),
            seed: 0,
            factors: vec!["data".into(), "temp".into(), "col".into()],
            head_offset_mm: 100.0,
            alpha: 0.5,
            dump_states: false,
            dump_beliefs: false,
        }
    }
}

impl PipelineConfig {
    /// Reads the config and checks that every input path exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display()), Some(path.to_path_buf())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display()), Some(path.to_path_buf())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.calibration);
        fix(&mut self.heatmaps);
        fix(&mut self.keypoints);
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.ground_truth {
            fix(p);
        }
        if let Some(p) = &mut self.model {
            fix(p);
        }
    }

    pub fn check_paths(&self) -> Result<()> {
        let mut required = vec![("calibration", &self.calibration), ("heatmaps", &self.heatmaps), ("keypoints", &self.keypoints)];
        if let Some(p) = &self.ground_truth {
            required.push(("ground_truth", p));
        }
        if let Some(p) = &self.model {
            required.push(("model", p));
        }
        for (name, p) in required {
            if !p.exists() {
                return Err(Error::config(format!("{name} path {} does not exist", p.display()), Some(p.clone())));
            }
        }
        Ok(())
    }

    pub fn toggles(&self) -> Result<FactorToggles> {
        FactorToggles::parse(&self.factors.join(","))
    }

    /// Body model and CRF parameters, from the model file when one is set.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = match &self.model {
            Some(p) => ModelConfig::load(p)?,
            None => ModelConfig { body: BodyModel::default(), crf: self.crf.clone() },
        };
        cfg.body.validate()?;
        cfg.crf.validate()?;
        Ok(cfg)
    }

    pub fn settings(&self) -> Result<Settings> {
        let model = self.model_config()?;
        if !(self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha), None));
        }
        if self.sampling.n_states == 0 {
            return Err(Error::config("sampling.n_states must be positive", None));
        }
        if !(0.0..1.0).contains(&self.bp.damping) {
            return Err(Error::config(format!("bp.damping must lie in [0, 1), got {}", self.bp.damping), None));
        }
        Ok(Settings {
            body: model.body,
            crf: model.crf,
            association: self.association.clone(),
            sampling: self.sampling.clone(),
            bp: self.bp.clone(),
            seed: self.seed,
            toggles: self.toggles()?,
            keep_beliefs: self.dump_beliefs,
        })
    }
}

/// Everything the estimation stages need besides the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub body: BodyModel,
    pub crf: CrfParams,
    pub association: AssociationParams,
    pub sampling: SamplingParams,
    pub bp: BpOptions,
    pub seed: u64,
    pub toggles: FactorToggles,
    /// Keep per-variable beliefs in the result (for dumps).
    pub keep_beliefs: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            body: BodyModel::default(),
            crf: CrfParams::default(),
            association: AssociationParams::default(),
            sampling: SamplingParams::default(),
            bp: BpOptions::default(),
            seed: 0,
            toggles: FactorToggles::ALL,
            keep_beliefs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonDiagnostics {
    pub person_id: u32,
    pub frames: usize,
    pub variables: usize,
    pub data_factors: usize,
    pub temporal_factors: usize,
    pub collision_factors: usize,
    /// Max message change per BP iteration (empty on the data-only path).
    pub bp_changes: Vec<f64>,
    pub data_only_fast_path: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub persons: Vec<PersonDiagnostics>,
    /// Camera views dropped because the heat map had no mass near the person.
    pub dropped_views: usize,
    /// Hypotheses substituted after repeated degenerate draws.
    pub fallback_states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonResult {
    pub person_id: u32,
    /// MAP state index per (frame, joint).
    pub map_index: BTreeMap<(u32, usize), usize>,
    pub states: BTreeMap<(u32, usize), JointStateSet>,
    /// Data-term values of every state.
    pub data: BTreeMap<(u32, usize), Vec<f64>>,
    pub beliefs: BTreeMap<(u32, usize), Belief>,
    pub diagnostics: PersonDiagnostics,
}

impl PersonResult {
    pub fn map_point(&self, frame: u32, joint: usize) -> Option<Point3> {
        let i = *self.map_index.get(&(frame, joint))?;
        Some(self.states[&(frame, joint)].states[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub tracks: Vec<PersonTrack>,
    pub persons: Vec<PersonResult>,
    pub diagnostics: Diagnostics,
}

impl Estimation {
    /// MAP skeletons grouped by frame, persons in id order.
    pub fn skeletons(&self, n_joints: usize) -> Vec<FrameSkeletons> {
        let mut frames: BTreeMap<u32, Vec<Skeleton3D>> = BTreeMap::new();
        for p in &self.persons {
            let person_frames: BTreeSet<u32> = p.map_index.keys().map(|k| k.0).collect();
            for f in person_frames {
                let joints = (0..n_joints).map(|j| p.map_point(f, j)).collect();
                frames.entry(f).or_default().push(Skeleton3D { frame_index: f, person_id: p.person_id, joints });
            }
        }
        frames.into_iter().map(|(frame_index, skeletons)| FrameSkeletons { frame_index, skeletons }).collect()
    }
}

struct JointJob<'a> {
    person: usize,
    joint: usize,
    views: Vec<(&'a CameraCalibration, &'a Heatmap, crate::heatmap::CellRegion)>,
}

struct JointSample {
    person: usize,
    joint: usize,
    set: JointStateSet,
    data: Vec<f64>,
    dropped: usize,
    fallbacks: usize,
}

/// Samples hypotheses for every tracked joint-frame, one frame at a time so
/// that only the current frame's heat maps are held in memory.
fn sample_all(
    cals: &[CameraCalibration],
    tracks: &[PersonTrack],
    source: &dyn HeatmapSource,
    settings: &Settings,
    diagnostics: &mut Diagnostics,
) -> Result<Vec<BTreeMap<(u32, usize), (JointStateSet, Vec<f64>)>>> {
    let cal_by_id: BTreeMap<&CameraId, &CameraCalibration> = cals.iter().map(|c| (c.camera_id(), c)).collect();
    let frames: BTreeSet<u32> = tracks.iter().flat_map(|t| t.frames.keys().copied()).collect();
    let mut out: Vec<BTreeMap<(u32, usize), (JointStateSet, Vec<f64>)>> = vec![BTreeMap::new(); tracks.len()];
    // best data-term state of the latest sampled frame, per (person, joint)
    let mut fallback: BTreeMap<(usize, usize), Point3> = BTreeMap::new();
    let n_joints = settings.body.n_joints();

    for frame in frames {
        let needed: BTreeSet<&CameraId> = tracks.iter().filter_map(|t| t.frames.get(&frame)).flat_map(|m| m.keys()).collect();
        let mut maps: BTreeMap<&CameraId, Vec<Heatmap>> = BTreeMap::new();
        for id in needed {
            let cal = cal_by_id.get(id).ok_or_else(|| Error::config(format!("no calibration for camera {id}"), None))?;
            let m = source.load(frame, cal).map_err(|e| e.in_stage("heatmap loading", Some(frame)))?;
            if m.len() < n_joints {
                return Err(
                    Error::InvalidHeatmap(format!("{} channels for {n_joints} joints", m.len())).in_stage("heatmap loading", Some(frame))
                );
            }
            maps.insert(id, m);
        }

        let mut jobs: Vec<JointJob<'_>> = Vec::new();
        for (pi, track) in tracks.iter().enumerate() {
            let Some(cams) = track.frames.get(&frame) else { continue };
            let boxes: Vec<(&CameraId, &Skeleton2D, _)> = cams
                .iter()
                .filter_map(|(id, s)| match bounding_box(s) {
                    Ok(b) => Some((id, s, b.expanded(settings.sampling.region_margin))),
                    Err(_) => {
                        warn!("frame {frame}: person {} has a degenerate box in camera {id}; view skipped", track.person_id);
                        None
                    }
                })
                .collect();
            for joint in 0..n_joints {
                let views: Vec<_> = boxes
                    .iter()
                    .filter(|(_, s, _)| s.joint(joint).is_some())
                    .filter_map(|(id, _, b)| {
                        let map = &maps[id][joint];
                        let region = map.region_for_pixels(b.x_min, b.y_min, b.x_max, b.y_max)?;
                        Some((cal_by_id[id], map, region))
                    })
                    .collect();
                if views.len() >= 2 {
                    jobs.push(JointJob { person: pi, joint, views });
                }
            }
        }

        let results: Vec<Result<Option<JointSample>>> = jobs
            .par_iter()
            .map(|job| {
                let mut pmfs = Vec::with_capacity(job.views.len());
                let mut dropped = 0;
                for (cal, map, region) in &job.views {
                    match build_pmf_in(map, region) {
                        Ok(p) => pmfs.push((*cal, *map, p)),
                        Err(Error::EmptyHeatmap { .. }) => dropped += 1,
                        Err(e) => return Err(e),
                    }
                }
                if pmfs.len() < 2 {
                    return Ok(None);
                }
                let views: Vec<JointView<'_>> = pmfs.iter().map(|(c, _, p)| JointView { calibration: c, pmf: p }).collect();
                let key = StateKey { person_id: tracks[job.person].person_id, frame_index: frame, joint_index: job.joint };
                let mut rng = stream_rng(settings.seed, key);
                let fb = fallback.get(&(job.person, job.joint)).copied();
                let set = sample_states(key, &views, &settings.sampling, fb, &mut rng)?;
                let lookups: Vec<(&CameraCalibration, &Heatmap)> = pmfs.iter().map(|(c, m, _)| (*c, *m)).collect();
                let data = set.states.iter().map(|s| eval_data(s, &lookups, settings.crf.epsilon_floor)).collect();
                let fallbacks = set.residuals.iter().filter(|r| r.is_nan()).count();
                Ok(Some(JointSample { person: job.person, joint: job.joint, set, data, dropped, fallbacks }))
            })
            .collect();

        for r in results {
            let Some(s) = r.map_err(|e| e.in_stage("sampling", Some(frame)))? else { continue };
            if s.dropped > 0 {
                warn!("frame {frame}: person {} joint {}: {} view(s) without heat dropped", tracks[s.person].person_id, s.joint, s.dropped);
            }
            diagnostics.dropped_views += s.dropped;
            diagnostics.fallback_states += s.fallbacks;
            let best = argmax_lowest(&s.data);
            fallback.insert((s.person, s.joint), s.set.states[best]);
            out[s.person].insert((frame, s.joint), (s.set, s.data));
        }
    }
    Ok(out)
}

fn infer_person(person_id: u32, samples: BTreeMap<(u32, usize), (JointStateSet, Vec<f64>)>, settings: &Settings) -> Result<PersonResult> {
    let model = PersonModel {
        person_id,
        hypotheses: samples
            .iter()
            .map(|(k, (set, data))| (*k, JointHypotheses { states: set.states.clone().into(), data: data.clone() }))
            .collect(),
    };
    let pg = build_graph(&model, &settings.body, &settings.crf, settings.toggles)?;
    let g = &pg.graph;
    let fast = settings.toggles == FactorToggles::DATA_ONLY;
    let (beliefs, changes) = if fast {
        let b: Vec<Belief> = model
            .hypotheses
            .values()
            .map(|h| {
                let mut t = h.data.clone();
                floor_and_normalize(&mut t, settings.crf.epsilon_floor);
                Belief::from_probs(t)
            })
            .collect();
        (b, Vec::new())
    } else {
        let out = bp::run(g, &settings.bp)?;
        (out.beliefs, out.changes)
    };
    let frames: BTreeSet<u32> = samples.keys().map(|k| k.0).collect();
    let diagnostics = PersonDiagnostics {
        person_id,
        frames: frames.len(),
        variables: g.n_variables(),
        data_factors: g.count(FactorKind::Data),
        temporal_factors: g.count(FactorKind::Temporal),
        collision_factors: g.count(FactorKind::Collision),
        bp_changes: changes,
        data_only_fast_path: fast,
    };
    // variables were added in key order, so beliefs line up with the map
    let mut map_index = BTreeMap::new();
    let mut kept = BTreeMap::new();
    for ((key, &var), belief) in pg.var_of.iter().zip(beliefs) {
        debug_assert_eq!(var, map_index.len());
        map_index.insert(*key, belief.argmax);
        if settings.keep_beliefs {
            kept.insert(*key, belief);
        }
    }
    let mut states = BTreeMap::new();
    let mut data = BTreeMap::new();
    for (k, (s, d)) in samples {
        states.insert(k, s);
        data.insert(k, d);
    }
    Ok(PersonResult { person_id, map_index, states, data, beliefs: kept, diagnostics })
}

/// Association through MAP selection on in-memory inputs.
pub fn estimate(
    cals: &[CameraCalibration],
    detections: &BTreeMap<u32, BTreeMap<CameraId, Vec<Skeleton2D>>>,
    source: &dyn HeatmapSource,
    settings: &Settings,
) -> Result<Estimation> {
    let tracks = associate(cals, detections, &settings.association);
    info!("association: {} person track(s)", tracks.len());
    let mut diagnostics = Diagnostics::default();
    let samples = sample_all(cals, &tracks, source, settings, &mut diagnostics)?;
    let results: Vec<Result<PersonResult>> = tracks
        .par_iter()
        .zip(samples)
        .filter(|(_, s)| !s.is_empty())
        .map(|(t, s)| infer_person(t.person_id, s, settings).map_err(|e| e.in_stage("inference", None)))
        .collect();
    let persons = results.into_iter().collect::<Result<Vec<_>>>()?;
    // logged after the pool joins so the order does not depend on scheduling
    for p in &persons {
        let d = &p.diagnostics;
        info!(
            "person {}: {} frames, {} variables, {}/{}/{} data/temporal/collision factors",
            d.person_id, d.frames, d.variables, d.data_factors, d.temporal_factors, d.collision_factors
        );
        for (i, c) in d.bp_changes.iter().enumerate() {
            info!("person {} bp iteration {}: max message change {c:.3e}", d.person_id, i + 1);
        }
    }
    diagnostics.persons = persons.iter().map(|p| p.diagnostics.clone()).collect();
    Ok(Estimation { tracks, persons, diagnostics })
}

/// Scores estimates after applying the head offset to them.
pub fn score_estimates(
    estimates: &[FrameSkeletons],
    gt: &[FrameSkeletons],
    body: &BodyModel,
    head_offset_mm: f64,
    alpha: f64,
) -> Result<PcpReport> {
    let shifted: Vec<FrameSkeletons> = estimates
        .iter()
        .map(|f| FrameSkeletons {
            frame_index: f.frame_index,
            skeletons: f.skeletons.iter().map(|s| apply_head_offset(s, &body.head_joints, head_offset_mm)).collect(),
        })
        .collect();
    score(&shifted, gt, body, alpha)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct BeliefRecord {
    person_id: u32,
    frame: u32,
    joint: usize,
    top: Vec<TopState>,
}

#[derive(Debug, Serialize)]
struct TopState {
    state: usize,
    probability: f64,
    point: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub estimates: Vec<FrameSkeletons>,
    pub report: Option<PcpReport>,
    pub diagnostics: Diagnostics,
}

/// Full run from files: reads the inputs named in `config`, writes
/// `skeletons.json`, `diagnostics.json`, `tracks.json`, the PCP report when
/// ground truth is configured, and any requested dumps.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutput> {
    config.check_paths()?;
    let settings = config.settings()?;
    let cals = load_calibrations(&config.calibration).map_err(|e| e.in_stage("calibration", None))?;
    let detections = load_keypoint_dir(&config.keypoints, &cals).map_err(|e| e.in_stage("keypoints", None))?;
    let source = HeatmapDir::new(&config.heatmaps, settings.body.n_joints());
    let est = estimate(&cals, &detections, &source, &settings)?;
    let estimates = est.skeletons(settings.body.n_joints());

    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("skeletons.json"), pretty(&EstimatesFile::from_frames(&estimates)).as_bytes())?;
    write_atomic(&out.join("diagnostics.json"), pretty(&est.diagnostics).as_bytes())?;
    let tracks: Vec<TrackRecord> = est.tracks.iter().map(TrackRecord::from).collect();
    write_atomic(&out.join("tracks.json"), pretty(&tracks).as_bytes())?;

    if config.dump_states {
        let sets: Vec<&JointStateSet> = est.persons.iter().flat_map(|p| p.states.values()).collect();
        let mut buf = Vec::new();
        write_state_dump(&mut buf, &sets).map_err(|e| Error::io(out.join("states.csv"), e))?;
        write_atomic(&out.join("states.csv"), &buf)?;
    }
    if config.dump_beliefs {
        let mut records = Vec::new();
        for p in &est.persons {
            for ((frame, joint), b) in &p.beliefs {
                let states = &p.states[&(*frame, *joint)].states;
                let top = b
                    .top(5)
                    .into_iter()
                    .map(|(i, pr)| TopState { state: i, probability: pr, point: [states[i].x, states[i].y, states[i].z] })
                    .collect();
                records.push(BeliefRecord { person_id: p.person_id, frame: *frame, joint: *joint, top });
            }
        }
        write_atomic(&out.join("beliefs.json"), pretty(&records).as_bytes())?;
    }

    let report = match &config.ground_truth {
        Some(p) => {
            let gt = GroundTruthFile::load(p)?.to_frames();
            let r = score_estimates(&estimates, &gt, &settings.body, config.head_offset_mm, config.alpha)
                .map_err(|e| e.in_stage("evaluation", None))?;
            write_atomic(&out.join("pcp.csv"), r.to_csv().as_bytes())?;
            write_atomic(&out.join("pcp.txt"), r.to_table().as_bytes())?;
            Some(r)
        }
        None => None,
    };
    Ok(RunOutput { estimates, report, diagnostics: est.diagnostics })
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}
