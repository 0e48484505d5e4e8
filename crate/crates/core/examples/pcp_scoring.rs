//! Scores perturbed estimates against synthetic ground truth with PCP.
//!
//! cargo run --example pcp_scoring -- [noise_mm]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use posefuse::body::BodyModel;
use posefuse::evaluation::{score, FrameSkeletons};
use posefuse::synth::{generate, SceneSpec};

fn main() -> posefuse::Result<()> {
    let noise: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60.0);
    let scene = generate(&SceneSpec { n_frames: 30, ..Default::default() }, 2)?;
    let body = BodyModel::default();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = Normal::new(0.0, noise).expect("finite sigma");
    let estimates: Vec<FrameSkeletons> = scene
        .ground_truth
        .iter()
        .map(|f| FrameSkeletons {
            frame_index: f.frame_index,
            skeletons: f
                .skeletons
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    for p in s.joints.iter_mut().flatten() {
                        p.coords.iter_mut().for_each(|c| *c += normal.sample(&mut rng));
                    }
                    s
                })
                .collect(),
        })
        .collect();

    for alpha in [0.25, 0.5, 1.0] {
        let report = score(&estimates, &scene.ground_truth, &body, alpha)?;
        println!("alpha {alpha}, noise sigma {noise} mm");
        print!("{}", report.to_table());
    }
    println!("\n{}", score(&estimates, &scene.ground_truth, &body, 0.5)?.to_csv());
    Ok(())
}
