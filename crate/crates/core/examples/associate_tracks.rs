//! Links 2D detections across cameras and time into person tracks.
//!
//! cargo run --example associate_tracks

use posefuse::association::{associate, bounding_box, iou, AssociationParams};
use posefuse::synth::{generate, SceneSpec};

fn main() -> posefuse::Result<()> {
    let spec = SceneSpec { n_frames: 12, crossing: true, ..Default::default() };
    let scene = generate(&spec, 5)?;

    let frame0 = &scene.keypoints[&0];
    for (cam, skels) in frame0 {
        let boxes: Vec<_> = skels.iter().filter_map(|s| bounding_box(s).ok()).collect();
        let overlap = if boxes.len() == 2 { iou(&boxes[0], &boxes[1]) } else { 0.0 };
        println!("{cam}: {} detections, mutual IoU {overlap:.3}", skels.len());
    }

    let tracks = associate(&scene.calibrations, &scene.keypoints, &AssociationParams::default());
    println!("{} tracks", tracks.len());
    for t in &tracks {
        let views: Vec<usize> = t.frames.values().map(|m| m.len()).collect();
        println!("person {}: frames {:?}..={:?}, cameras per frame {:?}", t.person_id, t.first_frame(), t.last_frame(), views);
    }
    Ok(())
}
