//! Turns one joint's heat maps from three cameras into discrete 3D
//! hypotheses and ranks them by the data term.
//!
//! cargo run --example heatmap_sampling -- [n_states]

use posefuse::body::L_WRIST;
use posefuse::crf::eval_data;
use posefuse::heatmap::build_pmf;
use posefuse::sampling::{sample_states, stream_rng, JointView, SamplingParams, StateKey};
use posefuse::synth::{generate, SceneSpec};

fn main() -> posefuse::Result<()> {
    let n_states = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(64);
    let spec = SceneSpec { n_actors: 1, n_frames: 3, ..Default::default() };
    let scene = generate(&spec, 1)?;

    let maps: Vec<_> = (0..scene.calibrations.len()).map(|k| scene.render(0, k).swap_remove(L_WRIST)).collect();
    let pmfs = maps.iter().map(build_pmf).collect::<posefuse::Result<Vec<_>>>()?;
    let views: Vec<JointView> = scene.calibrations.iter().zip(&pmfs).map(|(calibration, pmf)| JointView { calibration, pmf }).collect();

    let key = StateKey { person_id: 0, frame_index: 0, joint_index: L_WRIST };
    let params = SamplingParams { n_states, ..Default::default() };
    let set = sample_states(key, &views, &params, None, &mut stream_rng(42, key))?;
    println!("{} states from {} camera subsets", set.states.len(), set.subsets.len());

    let pairs: Vec<_> = scene.calibrations.iter().zip(&maps).collect();
    let mut scored: Vec<(f64, usize)> = set.states.iter().enumerate().map(|(i, s)| (eval_data(s, &pairs, 1e-6), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let truth = scene.gt_point(0, 0, L_WRIST);
    println!("rank   f_data   error mm   residual mm   subset");
    for (rank, &(v, i)) in scored.iter().take(8).enumerate() {
        let err = (set.states[i] - truth).norm();
        let subset: Vec<String> = set.subsets[set.source_subset[i]].iter().map(|c| c.to_string()).collect();
        println!("{rank:>4} {v:8.4} {err:10.1} {:13.2}   {}", set.residuals[i], subset.join("+"));
    }
    Ok(())
}
