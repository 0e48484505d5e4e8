//! Discretization of a joint's 3D state space: heat-map pixels drawn per
//! camera, back-projected and triangulated over every camera subset of size
//! two or more.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangulate, CameraCalibration, CameraId, Point3};
use crate::heatmap::{sample_pixel, HeatmapPmf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    /// Hypotheses per joint-frame (M).
    pub n_states: usize,
    /// Redraws of a degenerate sample before falling back.
    pub max_attempts: usize,
    /// Sampling window around the person's box, as a fraction of box size per side.
    pub region_margin: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { n_states: 64, max_attempts: 8, region_margin: 0.25 }
    }
}

/// All subsets of size >= 2, by size then lexicographically.
pub fn enumerate_subsets<T: Clone>(cameras: &[T]) -> Result<Vec<Vec<T>>> {
    let n = cameras.len();
    if n < 2 {
        return Err(Error::TooFewCameras(n));
    }
    let mut out = Vec::new();
    for size in 2..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| cameras[i].clone()).collect());
            // advance to the next combination
            let mut k = size;
            while k > 0 && idx[k - 1] == n - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Draw counts per subset: 64 split evenly (16 each for three cameras, 64
/// for a single pair), any remainder going to the first subsets.
pub fn samples_per_subset(n_subsets: usize, n_states: usize) -> Vec<usize> {
    let base = n_states / n_subsets;
    let extra = n_states % n_subsets;
    (0..n_subsets).map(|i| base + usize::from(i < extra)).collect()
}

/// The discrete hypotheses for one joint at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStateSet {
    pub person_id: u32,
    pub frame_index: u32,
    pub joint_index: usize,
    pub states: Vec<Point3>,
    /// Triangulation RMS residual per state, mm (diagnostic only).
    pub residuals: Vec<f64>,
    /// Index into `subsets` of the cameras each state was triangulated from.
    pub source_subset: Vec<usize>,
    pub subsets: Vec<Vec<CameraId>>,
}

impl JointStateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// One camera's contribution to sampling a joint.
#[derive(Debug, Clone, Copy)]
pub struct JointView<'a> {
    pub calibration: &'a CameraCalibration,
    pub pmf: &'a HeatmapPmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateKey {
    pub person_id: u32,
    pub frame_index: u32,
    pub joint_index: usize,
}

/// Independent random stream for one (person, frame, joint), derived from
/// the master seed by counter so results do not depend on scheduling.
pub fn stream_rng(master_seed: u64, key: StateKey) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let stream = ((key.person_id as u64) << 40) | ((key.frame_index as u64) << 8) | (key.joint_index as u64 & 0xff);
    rng.set_stream(stream);
    rng
}

/// Samples `params.n_states` hypotheses from the views' heat-map PMFs.
///
/// A draw whose rays are degenerate is redrawn up to `max_attempts` times;
/// after that `fallback` (the previous frame's best state for this joint)
/// is used, or the subset's first valid state when there is none.
pub fn sample_states<R: Rng + ?Sized>(
    key: StateKey,
    views: &[JointView<'_>],
    params: &SamplingParams,
    fallback: Option<Point3>,
    rng: &mut R,
) -> Result<JointStateSet> {
    let subsets = enumerate_subsets(&(0..views.len()).collect::<Vec<_>>())?;
    let counts = samples_per_subset(subsets.len(), params.n_states);
    let mut states = Vec::with_capacity(params.n_states);
    let mut residuals = Vec::with_capacity(params.n_states);
    let mut source_subset = Vec::with_capacity(params.n_states);
    for (si, (subset, &count)) in subsets.iter().zip(&counts).enumerate() {
        let mut first_valid: Option<Point3> = None;
        let mut pending = 0usize;
        for _ in 0..count {
            let mut drawn = None;
            for _ in 0..params.max_attempts.max(1) {
                let rays: Vec<_> = subset.iter().map(|&v| views[v].calibration.backproject(sample_pixel(views[v].pmf, rng))).collect();
                match triangulate(&rays) {
                    Ok(t) => {
                        drawn = Some(t);
                        break;
                    }
                    Err(Error::DegenerateConfiguration { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            match drawn {
                Some(t) => {
                    first_valid.get_or_insert(t.point);
                    states.push(t.point);
                    residuals.push(t.residual);
                    source_subset.push(si);
                }
                None => match fallback {
                    Some(p) => {
                        states.push(p);
                        residuals.push(f64::NAN);
                        source_subset.push(si);
                    }
                    None => pending += 1,
                },
            }
        }
        if pending > 0 {
            let p = first_valid.ok_or(Error::DegenerateConfiguration { condition: f64::INFINITY })?;
            for _ in 0..pending {
                states.push(p);
                residuals.push(f64::NAN);
                source_subset.push(si);
            }
        }
    }
    let subsets = subsets.into_iter().map(|s| s.into_iter().map(|v| views[v].calibration.camera_id().clone()).collect()).collect();
    Ok(JointStateSet {
        person_id: key.person_id,
        frame_index: key.frame_index,
        joint_index: key.joint_index,
        states,
        residuals,
        source_subset,
        subsets,
    })
}

/// Debug dump: `person_id,frame,joint,state_index,x,y,z,residual_mm`.
pub fn write_state_dump<W: Write>(mut w: W, sets: &[&JointStateSet]) -> std::io::Result<()> {
    writeln!(w, "person_id,frame,joint,state_index,x,y,z,residual_mm")?;
    for s in sets {
        for (i, (p, r)) in s.states.iter().zip(&s.residuals).enumerate() {
            writeln!(w, "{},{},{},{},{},{},{},{}", s.person_id, s.frame_index, s.joint_index, i, p.x, p.y, p.z, r)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_of_two_and_three() {
        assert_eq!(enumerate_subsets(&["A", "B"]).unwrap(), vec![vec!["A", "B"]]);
        assert_eq!(enumerate_subsets(&["A", "B", "C"]).unwrap(), vec![vec!["A", "B"], vec!["A", "C"], vec!["B", "C"], vec!["A", "B", "C"]]);
        assert!(matches!(enumerate_subsets(&["A"]), Err(Error::TooFewCameras(1))));
    }

    #[test]
    fn subset_count_for_four_cameras() {
        // 6 pairs + 4 triples + 1 quadruple
        assert_eq!(enumerate_subsets(&[0, 1, 2, 3]).unwrap().len(), 11);
    }

    #[test]
    fn draw_counts() {
        assert_eq!(samples_per_subset(4, 64), vec![16; 4]);
        assert_eq!(samples_per_subset(1, 64), vec![64]);
        assert_eq!(samples_per_subset(11, 64).iter().sum::<usize>(), 64);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let k = |joint| StateKey { person_id: 1, frame_index: 7, joint_index: joint };
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = stream_rng(9, k(2));
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = stream_rng(9, k(2));
                move |_| r.random()
            })
            .collect();
        let c: Vec<u64> = (0..4)
            .map({
                let mut r = stream_rng(9, k(3));
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
