//! Projects a point into two and three cameras, back-projects the pixels and
//! triangulates it again.
//!
//! cargo run --example triangulate_rays

use posefuse::geometry::{look_at_camera, pairwise_ray_distance, triangulate};
use posefuse::{PixelCoord, Point3};

fn main() -> posefuse::Result<()> {
    let target = Point3::new(0.0, 0.0, 1000.0);
    let cams = [
        look_at_camera("front", Point3::new(0.0, -5000.0, 2000.0), target, 400.0, 360, 288)?,
        look_at_camera("side", Point3::new(5000.0, 0.0, 2000.0), target, 400.0, 360, 288)?,
        look_at_camera("back", Point3::new(-3000.0, 4000.0, 2000.0), target, 400.0, 360, 288)?,
    ];
    let truth = Point3::new(120.0, -80.0, 1450.0);

    let rays: Vec<_> = cams
        .iter()
        .map(|c| {
            let px = c.project(&truth).expect("point in front").pixel;
            println!("{:>5}: pixel ({:7.2}, {:7.2})", c.camera_id().to_string(), px.x, px.y);
            c.backproject(px)
        })
        .collect();

    let two = triangulate(&rays[..2])?;
    let three = triangulate(&rays)?;
    println!("two views:   {:?} residual {:.2e} mm", two.point.coords.as_slice(), two.residual);
    println!("three views: {:?} residual {:.2e} mm", three.point.coords.as_slice(), three.residual);

    // one pixel of error in the side view
    let px = cams[1].project(&truth).unwrap().pixel;
    let nudged = cams[1].backproject(PixelCoord::new(px.x + 1.0, px.y));
    println!("ray gap after a 1 px nudge: {:.2} mm", pairwise_ray_distance(&rays[0], &nudged));
    let t = triangulate(&[rays[0], nudged])?;
    println!("moved by {:.2} mm", (t.point - truth).norm());
    Ok(())
}
