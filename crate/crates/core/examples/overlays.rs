//! Runs the pipeline on a scene with corrupted heat maps and draws the
//! data-only and full-model estimates over each camera.
//!
//! cargo run --example overlays -- <out_dir>

use std::path::PathBuf;

use posefuse::crf::FactorToggles;
use posefuse::overlay::{emit_overlays, OverlayOptions};
use posefuse::pipeline::{estimate, Settings};
use posefuse::synth::{generate, CorruptionSpec, Granularity, SceneSpec};

fn main() -> posefuse::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "overlays".into()));
    let spec = SceneSpec {
        n_frames: 8,
        corruption: CorruptionSpec { granularity: Granularity::JointFrame, fraction: 0.05, ..Default::default() },
        ..Default::default()
    };
    let scene = generate(&spec, 4)?;
    for (name, toggles) in [("data", FactorToggles::DATA_ONLY), ("all", FactorToggles::ALL)] {
        let settings = Settings { toggles, ..Default::default() };
        let est = estimate(&scene.calibrations, &scene.keypoints, &scene, &settings)?;
        let frames = est.skeletons(settings.body.n_joints());
        let dir = out.join(name);
        let written =
            emit_overlays(&frames, Some(&scene.ground_truth), &scene.calibrations, &settings.body, &dir, &OverlayOptions::default())?;
        println!("{name}: {} images in {}", written.len(), dir.display());
    }
    for (actor, frame, joint) in &scene.corrupted_joint_frames {
        println!("corrupted: actor {actor} frame {frame} joint {}", scene.body.joint_names[*joint]);
    }
    Ok(())
}
