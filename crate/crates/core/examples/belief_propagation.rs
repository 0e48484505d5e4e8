//! Runs loopy belief propagation on a hand-built CRF: one joint over six
//! frames where frame 3's data term prefers an outlier.
//!
//! cargo run --example belief_propagation

use std::sync::Arc;

use posefuse::body::BodyModel;
use posefuse::bp::{self, BpOptions};
use posefuse::crf::{build_graph, CrfParams, FactorToggles, JointHypotheses, PersonModel};
use posefuse::Point3;

fn main() -> posefuse::Result<()> {
    let mut model = PersonModel::default();
    for f in 0..6u32 {
        let x = 20.0 * f as f64;
        let states: Arc<[Point3]> =
            vec![Point3::new(x, 0.0, 1000.0), Point3::new(x, 0.0, 1300.0), Point3::new(x + 200.0, 0.0, 1000.0)].into();
        let data = if f == 3 { vec![0.2, 0.9, 0.1] } else { vec![0.8, 0.1, 0.1] };
        model.hypotheses.insert((f, 0), JointHypotheses { states, data });
    }
    let body = BodyModel::bare(1, vec![]);
    let params = CrfParams::default();

    for (name, toggles) in [("data only", FactorToggles::DATA_ONLY), ("data + temporal", FactorToggles::ALL)] {
        let pg = build_graph(&model, &body, &params, toggles)?;
        let out = bp::run(&pg.graph, &BpOptions::default())?;
        println!("== {name}");
        for (&(frame, _), &v) in &pg.var_of {
            let b = &out.beliefs[v];
            let probs: Vec<String> = b.probs.iter().map(|p| format!("{p:.4}")).collect();
            println!("frame {frame}: MAP state {} beliefs [{}]", b.argmax, probs.join(", "));
        }
        let changes: Vec<String> = out.changes.iter().map(|c| format!("{c:.1e}")).collect();
        println!("message change per iteration: {}", changes.join(" "));
    }
    Ok(())
}
