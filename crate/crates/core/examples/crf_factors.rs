//! Prints the temporal and collision potentials over a range of inputs.
//!
//! cargo run --example crf_factors

use posefuse::crf::{eval_collision, eval_temporal, CrfParams, TemporalKernelKind};
use posefuse::Point3;

fn main() {
    let params = CrfParams::default();
    let literal = CrfParams { temporal_kernel: TemporalKernelKind::Literal, ..params.clone() };
    let prev = Point3::new(0.0, 0.0, 1000.0);
    let next = Point3::new(60.0, 0.0, 1000.0);

    println!("deviation from midpoint (mm)  gaussian  literal");
    for dev in [0.0, 10.0, 20.0, 40.0, 80.0, 160.0] {
        let s = Point3::new(30.0, dev, 1000.0);
        println!("{dev:>28} {:9.2e} {:8.2e}", eval_temporal(&s, &prev, &next, &params), eval_temporal(&s, &prev, &next, &literal));
    }

    println!("\nleft-right separation (mm)  f_col");
    let left = Point3::new(0.0, 0.0, 900.0);
    for d in [0.0, 50.0, 100.0, 140.0, 150.0, 160.0, 200.0, 300.0] {
        println!("{d:>26} {:.6}", eval_collision(&left, &Point3::new(d, 0.0, 900.0), &params));
    }
}
