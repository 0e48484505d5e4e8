//! Generates a synthetic scene, runs the whole pipeline with all factors and
//! with the data term alone, and prints PCP tables and BP convergence.
//!
//! cargo run --example full_pipeline -- [frames] [corruption_fraction]

use std::time::Instant;

use posefuse::crf::FactorToggles;
use posefuse::pipeline::{estimate, score_estimates, Settings};
use posefuse::synth::{expected_triangulation_radius, generate, CorruptionSpec, Granularity, SceneSpec};

fn main() -> posefuse::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let n_frames: u32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let fraction: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let spec = SceneSpec {
        n_frames,
        corruption: CorruptionSpec { granularity: Granularity::JointFrame, fraction, ..Default::default() },
        ..Default::default()
    };
    let scene = generate(&spec, 7)?;
    println!("expected triangulation radius: {:.1} mm", expected_triangulation_radius(&scene));

    for (name, toggles) in [("data only", FactorToggles::DATA_ONLY), ("all factors", FactorToggles::ALL)] {
        let settings = Settings { toggles, seed: 11, ..Default::default() };
        let start = Instant::now();
        let est = estimate(&scene.calibrations, &scene.keypoints, &scene, &settings)?;
        let elapsed = start.elapsed();
        let skeletons = est.skeletons(settings.body.n_joints());
        let report = score_estimates(&skeletons, &scene.ground_truth, &settings.body, 0.0, 0.5)?;
        println!("== {name} ({:.2?}, {} tracks)", elapsed, est.tracks.len());
        print!("{}", report.to_table());
        for p in &est.diagnostics.persons {
            if !p.bp_changes.is_empty() {
                let changes: Vec<String> = p.bp_changes.iter().map(|c| format!("{c:.2e}")).collect();
                println!("person {} message change per iteration: {}", p.person_id, changes.join(" "));
            }
        }
    }
    Ok(())
}
