//! Skeleton layout: joint names, limb edges, symmetric collision pairs and
//! the limb-to-part-class mapping used for PCP tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEAD_TOP: usize = 0;
pub const NECK: usize = 1;
pub const L_SHOULDER: usize = 2;
pub const R_SHOULDER: usize = 3;
pub const L_ELBOW: usize = 4;
pub const R_ELBOW: usize = 5;
pub const L_WRIST: usize = 6;
pub const R_WRIST: usize = 7;
pub const L_HIP: usize = 8;
pub const R_HIP: usize = 9;
pub const L_KNEE: usize = 10;
pub const R_KNEE: usize = 11;
pub const L_ANKLE: usize = 12;
pub const R_ANKLE: usize = 13;

pub const DEFAULT_JOINTS: usize = 14;

/// Part classes of the PCP table, in column order.
pub const PART_CLASSES: [&str; 6] = ["Head", "Torso", "Upper Arm", "Forearm", "Thigh", "Shin"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limb {
    pub a: usize,
    pub b: usize,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyModel {
    pub joint_names: Vec<String>,
    pub limbs: Vec<Limb>,
    /// Symmetric (left, right) pairs that must not coincide.
    pub collision_pairs: Vec<(usize, usize)>,
    /// Joints shifted by the head offset correction before scoring.
    pub head_joints: Vec<usize>,
}

impl Default for BodyModel {
    fn default() -> Self {
        let names = [
            "head_top",
            "neck",
            "l_shoulder",
            "r_shoulder",
            "l_elbow",
            "r_elbow",
            "l_wrist",
            "r_wrist",
            "l_hip",
            "r_hip",
            "l_knee",
            "r_knee",
            "l_ankle",
            "r_ankle",
        ];
        let limb = |a, b, class: &str| Limb { a, b, class: class.to_owned() };
        Self {
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            limbs: vec![
                limb(HEAD_TOP, NECK, "Head"),
                limb(NECK, L_SHOULDER, "Torso"),
                limb(NECK, R_SHOULDER, "Torso"),
                limb(NECK, L_HIP, "Torso"),
                limb(NECK, R_HIP, "Torso"),
                limb(L_SHOULDER, L_ELBOW, "Upper Arm"),
                limb(R_SHOULDER, R_ELBOW, "Upper Arm"),
                limb(L_ELBOW, L_WRIST, "Forearm"),
                limb(R_ELBOW, R_WRIST, "Forearm"),
                limb(L_HIP, L_KNEE, "Thigh"),
                limb(R_HIP, R_KNEE, "Thigh"),
                limb(L_KNEE, L_ANKLE, "Shin"),
                limb(R_KNEE, R_ANKLE, "Shin"),
            ],
            collision_pairs: vec![
                (L_SHOULDER, R_SHOULDER),
                (L_ELBOW, R_ELBOW),
                (L_WRIST, R_WRIST),
                (L_HIP, R_HIP),
                (L_KNEE, R_KNEE),
                (L_ANKLE, R_ANKLE),
            ],
            head_joints: vec![HEAD_TOP, NECK],
        }
    }
}

impl BodyModel {
    pub fn n_joints(&self) -> usize {
        self.joint_names.len()
    }

    /// A model with `n` anonymous joints and no limbs; used for small graphs.
    pub fn bare(n: usize, collision_pairs: Vec<(usize, usize)>) -> Self {
        Self { joint_names: (0..n).map(|i| format!("j{i}")).collect(), limbs: Vec::new(), collision_pairs, head_joints: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_joints();
        let bad = |m: String| Err(Error::config(m, None));
        if n == 0 {
            return bad("body model has no joints".into());
        }
        for l in &self.limbs {
            if l.a >= n || l.b >= n || l.a == l.b {
                return bad(format!("limb ({}, {}) invalid for {n} joints", l.a, l.b));
            }
        }
        let mut seen = vec![false; n];
        for &(a, b) in &self.collision_pairs {
            if a >= n || b >= n || a == b {
                return bad(format!("collision pair ({a}, {b}) invalid for {n} joints"));
            }
            if seen[a] || seen[b] {
                return bad(format!("collision pair ({a}, {b}) overlaps another pair"));
            }
            seen[a] = true;
            seen[b] = true;
        }
        if let Some(&j) = self.head_joints.iter().find(|&&j| j >= n) {
            return bad(format!("head joint {j} out of range"));
        }
        Ok(())
    }

    /// Distinct part classes in first-appearance order.
    pub fn part_classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.limbs {
            if !out.contains(&l.class) {
                out.push(l.class.clone());
            }
        }
        out
    }

    /// Limbs touching `joint`.
    pub fn limbs_of(&self, joint: usize) -> impl Iterator<Item = &Limb> {
        self.limbs.iter().filter(move |l| l.a == joint || l.b == joint)
    }
}
