//! Generates a corrupted synthetic scene and writes it to disk in the
//! pipeline's input formats.
//!
//! cargo run --example synthetic_scene -- <out_dir> [seed]

use posefuse::synth::{expected_triangulation_radius, generate, CorruptionSpec, Granularity, OcclusionWindow, SceneSpec, SwapEvent};

fn main() -> posefuse::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic_scene".into());
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let spec = SceneSpec {
        n_frames: 20,
        corruption: CorruptionSpec { granularity: Granularity::JointFrame, fraction: 0.05, ..Default::default() },
        swaps: vec![SwapEvent { actor: 0, joint: posefuse::body::L_WRIST, start_frame: 8, end_frame: 11, residual_peak: 0.6 }],
        occlusions: vec![OcclusionWindow { actor: 1, camera: 2, start_frame: 4, end_frame: 6 }],
        ..Default::default()
    };
    let scene = generate(&spec, seed)?;
    println!("{} cameras, {} frames, {} actors", scene.calibrations.len(), spec.n_frames, spec.n_actors);
    println!("corrupted joint-frames: {}", scene.corrupted_joint_frames.len());
    for (actor, frame, joint) in scene.corrupted_joint_frames.iter().take(5) {
        println!("  actor {actor} frame {frame} joint {}", scene.body.joint_names[*joint]);
    }
    println!("expected triangulation radius: {:.1} mm", expected_triangulation_radius(&scene));
    scene.write(std::path::Path::new(&out))?;
    println!("written to {out}");
    Ok(())
}
