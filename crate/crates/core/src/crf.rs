//! The per-person CRF: data, temporal and collision factors over the
//! discrete joint hypotheses, and its construction as a factor graph.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::BodyModel;
use crate::error::{Error, Result};
use crate::geometry::{CameraCalibration, Point3};
use crate::graph::{floor_and_normalize, FactorGraph, FactorKind, Potential, TemporalForm, TemporalKernel, TernaryTable, VarId, VarKey};
use crate::heatmap::Heatmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalKernelKind {
    Gaussian,
    Literal,
}

impl From<TemporalKernelKind> for TemporalForm {
    fn from(k: TemporalKernelKind) -> Self {
        match k {
            TemporalKernelKind::Gaussian => TemporalForm::Gaussian,
            TemporalKernelKind::Literal => TemporalForm::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfParams {
    pub sigma_temp_mm: f64,
    pub theta1: f64,
    /// Slope per `collision_unit_mm` of separation.
    pub theta2: f64,
    /// Length unit of the collision sigmoid's distance (100 mm: decimeters).
    pub collision_unit_mm: f64,
    pub epsilon_floor: f64,
    pub temporal_kernel: TemporalKernelKind,
    /// Largest frame gap bridged by a temporal factor.
    pub max_temporal_gap: u32,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self {
            sigma_temp_mm: 20.0,
            theta1: 15.0,
            theta2: 10.0,
            collision_unit_mm: 100.0,
            epsilon_floor: 1e-6,
            temporal_kernel: TemporalKernelKind::Gaussian,
            max_temporal_gap: 2,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_temp_mm", self.sigma_temp_mm),
            ("theta2", self.theta2),
            ("collision_unit_mm", self.collision_unit_mm),
            ("epsilon_floor", self.epsilon_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("crf.{name} must be positive, got {v}"), None));
            }
        }
        if !self.theta1.is_finite() {
            return Err(Error::config("crf.theta1 must be finite", None));
        }
        if self.max_temporal_gap == 0 {
            return Err(Error::config("crf.max_temporal_gap must be at least 1", None));
        }
        Ok(())
    }
}

/// Mean projected heat value over the cameras observing the joint, floored.
///
/// A projection that cannot be formed (state at a camera center) counts as
/// the floor for that camera.
pub fn eval_data(state: &Point3, views: &[(&CameraCalibration, &Heatmap)], floor: f64) -> f64 {
    if views.is_empty() {
        return floor;
    }
    let sum: f64 = views.iter().map(|(cal, h)| cal.project(state).map_or(floor, |p| h.value_at_projection(&p))).sum();
    (sum / views.len() as f64).max(floor)
}

/// Constant-velocity agreement of `s_t` with its neighbours.
pub fn eval_temporal(s_t: &Point3, s_prev: &Point3, s_next: &Point3, params: &CrfParams) -> f64 {
    let mid = Point3::from((s_prev.coords + s_next.coords) * 0.5);
    let d2 = (s_t - mid).norm_squared();
    let k = 1.0 / (2.0 * params.sigma_temp_mm * params.sigma_temp_mm);
    match params.temporal_kernel {
        TemporalKernelKind::Gaussian => (-k * d2).exp(),
        TemporalKernelKind::Literal => (-k * d2.sqrt()).exp(),
    }
}

/// Sigmoid in the separation of two symmetric joints.
pub fn eval_collision(s_a: &Point3, s_b: &Point3, params: &CrfParams) -> f64 {
    let d = (s_a - s_b).norm() / params.collision_unit_mm;
    1.0 / (1.0 + (params.theta1 - params.theta2 * d).exp())
}

/// Body model and CRF parameters, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub body: BodyModel,
    pub crf: CrfParams,
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string(), None))?;
        cfg.body.validate()?;
        cfg.crf.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read model config {}: {e}", path.display()), Some(path.to_path_buf())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { message, .. } => Error::config(format!("{}: {message}", path.display()), Some(path.to_path_buf())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("model config serializes")
    }
}

/// Hypotheses of one joint at one frame with their data-term values.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHypotheses {
    pub states: Arc<[Point3]>,
    /// `eval_data` of every state (unnormalized).
    pub data: Vec<f64>,
}

/// Everything needed to build one person's CRF, keyed by (frame, joint).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersonModel {
    pub person_id: u32,
    pub hypotheses: BTreeMap<(u32, usize), JointHypotheses>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorToggles {
    pub temporal: bool,
    pub collision: bool,
}

impl Default for FactorToggles {
    fn default() -> Self {
        Self { temporal: true, collision: true }
    }
}

impl FactorToggles {
    pub const DATA_ONLY: Self = Self { temporal: false, collision: false };
    pub const ALL: Self = Self { temporal: true, collision: true };

    /// Parses a comma list such as `data,temp,col`; `data` is mandatory.
    pub fn parse(list: &str) -> Result<Self> {
        let mut t = Self::DATA_ONLY;
        let mut data = false;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "data" => data = true,
                "temp" | "temporal" => t.temporal = true,
                "col" | "collision" => t.collision = true,
                other => return Err(Error::config(format!("unknown factor '{other}' (expected data, temp, col)"), None)),
            }
        }
        if !data {
            return Err(Error::config("the data factor cannot be disabled", None));
        }
        Ok(t)
    }
}

/// A person's factor graph with the variable of each (frame, joint).
#[derive(Debug, Clone)]
pub struct PersonGraph {
    pub graph: FactorGraph,
    pub var_of: BTreeMap<(u32, usize), VarId>,
}

/// Builds the CRF of one person.
///
/// Each joint's frames form a chain; a temporal factor is centered on every
/// frame that has a neighbour on both sides within `max_temporal_gap`.
/// Across a gap the expected position is interpolated in time and the
/// kernel width grows with the square root of the gap.
pub fn build_graph(model: &PersonModel, body: &BodyModel, params: &CrfParams, toggles: FactorToggles) -> Result<PersonGraph> {
    if model.hypotheses.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let mut graph = FactorGraph::new();
    let mut var_of = BTreeMap::new();
    for (&(frame, joint), h) in &model.hypotheses {
        if joint >= body.n_joints() {
            return Err(Error::config(format!("joint {joint} outside the body model"), None));
        }
        let v = graph.add_variable(VarKey { joint, frame }, h.states.len());
        var_of.insert((frame, joint), v);
        let mut table = h.data.clone();
        floor_and_normalize(&mut table, params.epsilon_floor);
        graph.add_factor(FactorKind::Data, frame, vec![v], Potential::Unary(table));
    }

    if toggles.temporal {
        for joint in 0..body.n_joints() {
            let frames: Vec<u32> = model.hypotheses.keys().filter(|k| k.1 == joint).map(|k| k.0).collect();
            for w in frames.windows(3) {
                let (f0, f1, f2) = (w[0], w[1], w[2]);
                let (g0, g1) = (f1 - f0, f2 - f1);
                if g0 > params.max_temporal_gap || g1 > params.max_temporal_gap {
                    continue;
                }
                let get = |f| &model.hypotheses[&(f, joint)];
                let w_prev = g1 as f64 / (g0 + g1) as f64;
                let sigma = params.sigma_temp_mm * (g0.max(g1) as f64).sqrt();
                let kernel = TemporalKernel::new(
                    get(f0).states.clone(),
                    get(f1).states.clone(),
                    get(f2).states.clone(),
                    w_prev,
                    sigma,
                    params.temporal_kernel.into(),
                    params.epsilon_floor,
                );
                let vars = vec![var_of[&(f0, joint)], var_of[&(f1, joint)], var_of[&(f2, joint)]];
                graph.add_factor(FactorKind::Temporal, f1, vars, Potential::Ternary(TernaryTable::Kernel(kernel)));
            }
        }
    }

    if toggles.collision {
        let frames: Vec<u32> = {
            let mut f: Vec<u32> = model.hypotheses.keys().map(|k| k.0).collect();
            f.dedup();
            f
        };
        for &frame in &frames {
            for &(a, b) in &body.collision_pairs {
                let (Some(&va), Some(&vb)) = (var_of.get(&(frame, a)), var_of.get(&(frame, b))) else {
                    continue;
                };
                let sa = &model.hypotheses[&(frame, a)].states;
                let sb = &model.hypotheses[&(frame, b)].states;
                let mut values = Vec::with_capacity(sa.len() * sb.len());
                for pa in sa.iter() {
                    for pb in sb.iter() {
                        values.push(eval_collision(pa, pb, params));
                    }
                }
                floor_and_normalize(&mut values, params.epsilon_floor);
                graph.add_factor(FactorKind::Collision, frame, vec![va, vb], Potential::Pairwise { dims: [sa.len(), sb.len()], values });
            }
        }
    }
    Ok(PersonGraph { graph, var_of })
}
