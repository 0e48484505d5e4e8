//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! cargo test --test acceptance [-- 3 5]   (optional criterion filter)

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Translation3, UnitQuaternion, Vector3};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use posefuse::association::{
    bounding_box, iou, link_views, prune_single_view, AssociationParams, BoundingBox, Keypoint, PersonTrack, Skeleton2D,
};
use posefuse::body::{BodyModel, L_ANKLE, L_ELBOW, L_KNEE, L_WRIST};
use posefuse::bp::{self, BpOptions};
use posefuse::crf::{build_graph, eval_collision, eval_data, eval_temporal, CrfParams, FactorToggles, JointHypotheses, PersonModel};
use posefuse::evaluation::{limb_correct, match_frame, score, FrameSkeletons, PcpReport, Skeleton3D};
use posefuse::geometry::{look_at_camera, triangulate, CameraCalibration};
use posefuse::heatmap::Heatmap;
use posefuse::pipeline::{estimate, run_pipeline, PipelineConfig, RunOutput, Settings};
use posefuse::synth::{expected_triangulation_radius, generate, CorruptionSpec, Granularity, SceneSpec, SwapEvent, SyntheticScene};
use posefuse::{CameraId, PixelCoord, Point3, Ray};

enum Verdict {
    Pass(String),
    Fail(String),
    Info(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| filter.is_empty() || filter.contains(&n);
    let work = tempfile::tempdir().expect("temp dir");
    let mut shared: Option<(Arc<SyntheticScene>, RunOutput, Duration)> = None;

    let mut failed = 0;
    for n in 1..=10u32 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let verdict = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(noiseless_run(&mut shared, work.path())),
            4 => criterion_4(noiseless_run(&mut shared, work.path())),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            10 => criterion_10(noiseless_run(&mut shared, work.path()), work.path()),
            _ => unreachable!(),
        };
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(d) => println!("criterion {n:>2}: PASS ({secs:.1} s) {d}"),
            Verdict::Info(d) => println!("criterion {n:>2}: N/A  {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL ({secs:.1} s) {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- shared scene

fn noiseless_spec() -> SceneSpec {
    SceneSpec { n_actors: 2, n_frames: 50, n_cameras: 3, ..Default::default() }
}

fn file_run(scene: &SyntheticScene, dir: &Path, out: &str, seed: u64) -> RunOutput {
    if !dir.join("calibration.json").exists() {
        scene.write(dir).expect("scene written");
    }
    let cfg = PipelineConfig {
        calibration: dir.join("calibration.json"),
        heatmaps: dir.join("heatmaps"),
        keypoints: dir.join("keypoints"),
        ground_truth: Some(dir.join("gt.json")),
        output_dir: dir.join(out),
        seed,
        head_offset_mm: 0.0,
        ..Default::default()
    };
    run_pipeline(&cfg).expect("pipeline run")
}

/// The 50-frame noiseless run behind criteria 3, 4 and 10, computed once.
fn noiseless_run<'a>(
    shared: &'a mut Option<(Arc<SyntheticScene>, RunOutput, Duration)>,
    work: &Path,
) -> &'a (Arc<SyntheticScene>, RunOutput, Duration) {
    shared.get_or_insert_with(|| {
        let scene = Arc::new(generate(&noiseless_spec(), 21).expect("scene"));
        let start = Instant::now();
        let out = file_run(&scene, &work.join("noiseless"), "run_a", 5);
        (scene, out, start.elapsed())
    })
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Verdict {
    Verdict::Info("dataset PCP reproduction needs the external datasets and 2D detector; covered by the synthetic suites below".into())
}

/// Brute-force marginals of a single-joint chain by enumeration.
fn brute_marginals(states: &[Vec<Point3>], data: &[Vec<f64>], sigma: f64, floor: f64) -> Vec<Vec<f64>> {
    let t = states.len();
    let mut marg: Vec<Vec<f64>> = states.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut idx = vec![0usize; t];
    loop {
        let mut p = 1.0;
        for f in 0..t {
            p *= data[f][idx[f]].max(floor);
        }
        for f in 1..t - 1 {
            let mid = (states[f - 1][idx[f - 1]].coords + states[f + 1][idx[f + 1]].coords) / 2.0;
            let d2 = (states[f][idx[f]].coords - mid).norm_squared();
            p *= (-d2 / (2.0 * sigma * sigma)).exp().max(floor);
        }
        for f in 0..t {
            marg[f][idx[f]] += p;
        }
        let mut f = 0;
        loop {
            if f == t {
                return marg
                    .into_iter()
                    .map(|m| {
                        let z: f64 = m.iter().sum();
                        m.into_iter().map(|v| v / z).collect()
                    })
                    .collect();
            }
            idx[f] += 1;
            if idx[f] < states[f].len() {
                break;
            }
            idx[f] = 0;
            f += 1;
        }
    }
}

fn chain_error(t: usize, n_states: usize, rng: &mut ChaCha8Rng) -> f64 {
    let params = CrfParams::default();
    let mut states = Vec::new();
    let mut data = Vec::new();
    let mut model = PersonModel::default();
    for f in 0..t {
        let s: Vec<Point3> = (0..n_states)
            .map(|_| {
                Point3::new(
                    25.0 * f as f64 + rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                    1000.0 + rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let d: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.05..1.0)).collect();
        model.hypotheses.insert((f as u32, 0), JointHypotheses { states: s.clone().into(), data: d.clone() });
        states.push(s);
        data.push(d);
    }
    let pg = build_graph(&model, &BodyModel::bare(1, vec![]), &params, FactorToggles { temporal: true, collision: false }).unwrap();
    let out = bp::run(&pg.graph, &BpOptions { iterations: 50, ..Default::default() }).unwrap();
    let exact = brute_marginals(&states, &data, params.sigma_temp_mm, params.epsilon_floor);
    let mut err: f64 = 0.0;
    for f in 0..t {
        let b = &out.beliefs[pg.var_of[&(f as u32, 0)]];
        for (x, y) in b.probs.iter().zip(&exact[f]) {
            err = err.max((x - y).abs());
        }
    }
    err
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut acyclic: f64 = 0.0;
    for n_states in 2..=4 {
        for _ in 0..20 {
            acyclic = acyclic.max(chain_error(3, n_states, &mut rng));
        }
    }
    // four or more frames: consecutive ternary factors share two variables,
    // so the graph has cycles and BP is approximate
    let (e4, e5) = (chain_error(4, 4, &mut rng), chain_error(5, 4, &mut rng));
    let elapsed = start.elapsed();
    check(
        acyclic < 1e-9 && elapsed < Duration::from_secs(1),
        format!("3-frame chains, 2..4 states: max |BP - exact| = {acyclic:.2e} (< 1e-9) in {elapsed:.2?}; loopy 4/5-frame chains for reference: {e4:.2e}, {e5:.2e}"),
    )
}

fn criterion_3(run: &(Arc<SyntheticScene>, RunOutput, Duration)) -> Verdict {
    let (_, out, elapsed) = run;
    let mut at5: f64 = 0.0;
    let mut traces = Vec::new();
    for p in &out.diagnostics.persons {
        let Some(&c) = p.bp_changes.get(4) else {
            return Verdict::Fail(format!("person {} ran {} iterations", p.person_id, p.bp_changes.len()));
        };
        at5 = at5.max(c);
        let t: Vec<String> = p.bp_changes.iter().map(|c| format!("{c:.1e}")).collect();
        traces.push(format!("person {}: {}", p.person_id, t.join(" ")));
    }
    check(
        at5 < 1e-6 && *elapsed < Duration::from_secs(300),
        format!("max message change at iteration 5 = {at5:.3e} (< 1e-6), run {elapsed:.1?}; {}", traces.join("; ")),
    )
}

fn criterion_4(run: &(Arc<SyntheticScene>, RunOutput, Duration)) -> Verdict {
    let (scene, out, elapsed) = run;
    let Some(report) = &out.report else { return Verdict::Fail("no PCP report".into()) };
    let all_100 = report.actors.iter().all(|a| a.per_class.iter().all(|c| c.correct == c.total && c.total > 0));
    let (mut sum, mut n) = (0.0, 0usize);
    for (gt, est) in scene.ground_truth.iter().zip(&out.estimates) {
        for (i, j) in match_frame(&gt.skeletons, &est.skeletons) {
            let Some(j) = j else { continue };
            for (g, e) in gt.skeletons[i].joints.iter().zip(&est.skeletons[j].joints) {
                if let (Some(g), Some(e)) = (g, e) {
                    sum += (g - e).norm();
                    n += 1;
                }
            }
        }
    }
    let mean = sum / n.max(1) as f64;
    let radius = expected_triangulation_radius(scene);
    check(
        all_100 && n > 0 && mean < radius && *elapsed < Duration::from_secs(300),
        format!("PCP {:.2} on every class: {all_100}; mean joint error {mean:.1} mm < radius {radius:.1} mm", report.mean_pcp()),
    )
}

fn threshold(body: &BodyModel, gt: &Skeleton3D, joint: usize, alpha: f64) -> f64 {
    body.limbs_of(joint).filter_map(|l| Some((gt.joints[l.a]? - gt.joints[l.b]?).norm())).fold(f64::INFINITY, f64::min) * alpha
}

/// Estimate of `actor` at `frame` after matching by mean distance.
fn matched<'a>(gt: &'a [FrameSkeletons], est: &'a [FrameSkeletons], actor: u32, frame: u32) -> Option<(&'a Skeleton3D, &'a Skeleton3D)> {
    let g = gt.iter().find(|f| f.frame_index == frame)?;
    let e = est.iter().find(|f| f.frame_index == frame)?;
    let i = g.skeletons.iter().position(|s| s.person_id == actor)?;
    let j = match_frame(&g.skeletons, &e.skeletons)[i].1?;
    Some((&g.skeletons[i], &e.skeletons[j]))
}

fn criterion_5() -> Verdict {
    let spec = SceneSpec {
        n_frames: 40,
        corruption: CorruptionSpec { granularity: Granularity::JointFrame, fraction: 0.05, displacement_px: 32.0, ..Default::default() },
        ..Default::default()
    };
    let scene = generate(&spec, 8).expect("scene");
    let body = BodyModel::default();
    let run = |toggles| {
        let settings = Settings { toggles, seed: 3, ..Default::default() };
        estimate(&scene.calibrations, &scene.keypoints, &scene, &settings).expect("estimate").skeletons(body.n_joints())
    };
    let data = run(FactorToggles::DATA_ONLY);
    let all = run(FactorToggles::ALL);

    let (mut misplaced, mut corrected) = (0usize, 0usize);
    for &(actor, frame, joint) in &scene.corrupted_joint_frames {
        let err = |est: &[FrameSkeletons]| -> Option<(f64, f64)> {
            let (g, e) = matched(&scene.ground_truth, est, actor, frame)?;
            Some(((e.joints[joint]? - g.joints[joint]?).norm(), threshold(&body, g, joint, 0.5)))
        };
        if err(&data).is_none_or(|(d, t)| d >= t) {
            misplaced += 1;
            if err(&all).is_some_and(|(d, t)| d < t) {
                corrected += 1;
            }
        }
    }
    let total = scene.corrupted_joint_frames.len();
    let pd = score(&data, &scene.ground_truth, &body, 0.5).expect("score");
    let pa = score(&all, &scene.ground_truth, &body, 0.5).expect("score");
    let per_actor: Vec<String> = pa
        .actors
        .iter()
        .zip(&pd.actors)
        .map(|(a, d)| format!("actor {}: {:.2} vs {:.2}", a.actor_id, a.all().percent(), d.all().percent()))
        .collect();
    let dominates = pa.actors.iter().zip(&pd.actors).all(|(a, d)| a.all().percent() >= d.all().percent());
    let mis_frac = misplaced as f64 / total.max(1) as f64;
    let cor_frac = corrected as f64 / misplaced.max(1) as f64;
    check(
        total > 0 && mis_frac >= 0.8 && cor_frac >= 0.8 && dominates,
        format!(
            "{total} corrupted joint-frames; data-only misplaced {misplaced} ({:.1}%, need >= 80%); all factors corrected {corrected} ({:.1}%, need >= 80%); PCP all vs data: {}",
            100.0 * mis_frac,
            100.0 * cor_frac,
            per_actor.join(", ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let swaps = vec![
        SwapEvent { actor: 0, joint: L_WRIST, start_frame: 3, end_frame: 8, residual_peak: 0.6 },
        SwapEvent { actor: 1, joint: L_KNEE, start_frame: 10, end_frame: 15, residual_peak: 0.6 },
        SwapEvent { actor: 0, joint: L_ANKLE, start_frame: 14, end_frame: 18, residual_peak: 0.6 },
        SwapEvent { actor: 1, joint: L_ELBOW, start_frame: 4, end_frame: 7, residual_peak: 0.6 },
    ];
    let spec = SceneSpec { n_frames: 20, swaps, ..Default::default() };
    let scene = generate(&spec, 6).expect("scene");
    let body = BodyModel::default();
    let collapsed = |toggles| {
        let settings = Settings { toggles, seed: 4, ..Default::default() };
        let est = estimate(&scene.calibrations, &scene.keypoints, &scene, &settings).expect("estimate").skeletons(body.n_joints());
        let (mut near, mut total) = (0usize, 0usize);
        for f in &scene.ground_truth {
            for g in &f.skeletons {
                let Some((_, e)) = matched(&scene.ground_truth, &est, g.person_id, f.frame_index) else { continue };
                for &(a, b) in &body.collision_pairs {
                    if let (Some(pa), Some(pb)) = (e.joints[a], e.joints[b]) {
                        total += 1;
                        near += usize::from((pa - pb).norm() < 30.0);
                    }
                }
            }
        }
        near as f64 / total.max(1) as f64
    };
    let off = collapsed(FactorToggles::DATA_ONLY);
    let on = collapsed(FactorToggles { temporal: false, collision: true });
    let mid = eval_collision(&Point3::origin(), &Point3::new(150.0, 0.0, 0.0), &CrfParams::default());
    check(
        on < off && mid == 0.5,
        format!(
            "left/right pairs within 3 cm: data {:.2}% vs collision+data {:.2}%; eval_collision(150 mm) = {mid}",
            100.0 * off,
            100.0 * on
        ),
    )
}

/// Midpoint of the common perpendicular of two lines, in exact rational
/// arithmetic on the (already rounded) f64 inputs.
fn perpendicular_midpoint(r1: &Ray, r2: &Ray) -> Point3 {
    let q = |v: f64| BigRational::from_float(v).expect("finite");
    let vec = |v: &Vector3<f64>| [q(v.x), q(v.y), q(v.z)];
    let dot = |a: &[BigRational; 3], b: &[BigRational; 3]| &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2];
    let (o1, d1) = (vec(&r1.origin.coords), vec(r1.direction()));
    let (o2, d2) = (vec(&r2.origin.coords), vec(r2.direction()));
    let w: [BigRational; 3] = std::array::from_fn(|i| &o1[i] - &o2[i]);
    let (a, b, c) = (dot(&d1, &d1), dot(&d1, &d2), dot(&d2, &d2));
    let (d, e) = (dot(&d1, &w), dot(&d2, &w));
    let den = &a * &c - &b * &b;
    let s = (&b * &e - &c * &d) / &den;
    let t = (&a * &e - &b * &d) / &den;
    let two = BigRational::from_integer(2.into());
    let m: [f64; 3] = std::array::from_fn(|i| ((&o1[i] + &s * &d1[i] + &o2[i] + &t * &d2[i]) / &two).to_f64().expect("representable"));
    Point3::new(m[0], m[1], m[2])
}

fn constant_map(v: f32, cam: &str, w: usize, h: usize) -> Heatmap {
    Heatmap::new(0, CameraId::from(cam), 0, w, h, 1.0, vec![v; w * h]).unwrap()
}

fn criterion_7() -> Verdict {
    let p = CrfParams::default();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut expect = |name: &str, got: f64, want: f64, tol: f64| {
        let good = (got - want).abs() <= tol;
        ok &= good;
        if !good {
            notes.push(format!("{name}: got {got:e}, want {want:e}"));
        }
    };

    let a = Point3::new(-40.0, 10.0, 900.0);
    let c = Point3::new(60.0, 30.0, 1100.0);
    let mid = Point3::from((a.coords + c.coords) / 2.0);
    expect("temporal at midpoint", eval_temporal(&mid, &a, &c, &p), 1.0, 0.0);
    let off = mid + Vector3::new(0.0, 0.0, p.sigma_temp_mm);
    expect("temporal at one sigma", eval_temporal(&off, &a, &c, &p), (-0.5f64).exp(), 1e-12);
    expect("temporal symmetric", eval_temporal(&off, &c, &a, &p), eval_temporal(&off, &a, &c, &p), 0.0);

    let target = Point3::new(0.0, 0.0, 1000.0);
    let (w, h) = (1200, 800);
    let cam_a = look_at_camera("a", Point3::new(0.0, -3000.0, 1000.0), target, 400.0, w as u32, h as u32).unwrap();
    let cam_b = look_at_camera("b", Point3::new(3000.0, 0.0, 1000.0), target, 400.0, w as u32, h as u32).unwrap();
    let cam_c = look_at_camera("c", Point3::new(-3000.0, 0.0, 1000.0), target, 400.0, w as u32, h as u32).unwrap();
    let (one_a, one_b) = (constant_map(1.0, "a", w, h), constant_map(1.0, "b", w, h));
    expect("data 1.0 in both views", eval_data(&target, &[(&cam_a, &one_a), (&cam_b, &one_b)], 1e-6), 1.0, 1e-7);
    let (m08, m04) = (constant_map(0.8, "a", w, h), constant_map(0.4, "b", w, h));
    expect("data mean of 0.8 and 0.4", eval_data(&target, &[(&cam_a, &m08), (&cam_b, &m04)], 1e-6), 0.6, 1e-7);
    let behind_a = Point3::new(0.0, -4000.0, 1000.0);
    let (m09b, m09c) = (constant_map(0.9, "b", w, h), constant_map(0.9, "c", w, h));
    let v = eval_data(&behind_a, &[(&cam_a, &one_a), (&cam_b, &m09b), (&cam_c, &m09c)], 1e-6);
    expect("data with one view behind", v, (1e-6 + 0.9 + 0.9) / 3.0, 1e-7);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let o1 = Point3::new(rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0), rng.random_range(0.0..3000.0));
        let o2 = Point3::new(rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0), rng.random_range(0.0..3000.0));
        let d1 = Vector3::from_column_slice(&UnitSphere.sample(&mut rng));
        let d2 = Vector3::from_column_slice(&UnitSphere.sample(&mut rng));
        let (r1, r2) = (Ray::new(o1, d1), Ray::new(o2, d2));
        match triangulate(&[r1, r2]) {
            Ok(t) => worst = worst.max((t.point - perpendicular_midpoint(&r1, &r2)).norm()),
            Err(e) => {
                ok = false;
                notes.push(format!("skew pair rejected: {e}"));
                break;
            }
        }
    }
    ok &= worst < 1e-9;
    check(
        ok,
        format!("factor values as listed; 1000 skew pairs: max |triangulate - closed form| = {worst:.2e} mm (< 1e-9) {}", notes.join("; ")),
    )
}

fn project_skeleton(cal: &CameraCalibration, joints: &[Point3], frame: u32) -> Skeleton2D {
    let kp = joints.iter().map(|p| Some(Keypoint { pixel: cal.project(p).unwrap().pixel, confidence: 1.0 })).collect();
    Skeleton2D::new(kp, cal.camera_id().clone(), frame)
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    let unit = BoundingBox { x_min: 0.0, y_min: 0.0, x_max: 1.0, y_max: 1.0 };
    let shifted = BoundingBox { x_min: 0.5, y_min: 0.0, x_max: 1.5, y_max: 1.0 };
    let far = BoundingBox { x_min: 5.0, y_min: 5.0, x_max: 6.0, y_max: 6.0 };
    ok &= iou(&unit, &unit) == 1.0 && iou(&unit, &far) == 0.0 && iou(&unit, &shifted) == 1.0 / 3.0;
    notes.push(format!("iou cases {}", iou(&unit, &shifted)));

    let spec = SceneSpec { n_actors: 1, n_frames: 3, ..Default::default() };
    let pose = posefuse::synth::actor_pose(&spec, 0, 0, 0.0);
    let cals = spec.calibrations().unwrap();
    let params = AssociationParams::default();
    let a = project_skeleton(&cals[0], &pose, 0);
    let b = project_skeleton(&cals[1], &pose, 0);
    let same = link_views(&a, &b, &cals[0], &cals[1], &params);
    ok &= same.linked && link_views(&b, &a, &cals[1], &cals[0], &params).linked;

    // shift the second view horizontally until the mean ray gap is 50 mm
    let gap = |dx: f64| {
        let mut s = b.clone();
        for k in s.joints.iter_mut().flatten() {
            k.pixel = PixelCoord::new(k.pixel.x + dx, k.pixel.y);
        }
        (link_views(&a, &s, &cals[0], &cals[1], &params), s)
    };
    let (mut lo, mut hi) = (0.0, 50.0);
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        if gap(m).0.mean_distance.unwrap() < 50.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let (off, _) = gap(hi);
    ok &= !off.linked && (off.mean_distance.unwrap() - 50.0).abs() < 1e-3;

    let mut few = b.clone();
    for k in few.joints.iter_mut().skip(3) {
        *k = None;
    }
    let three = link_views(&a, &few, &cals[0], &cals[1], &params);
    ok &= !three.linked && three.mutual_joints == 3;

    let track = |id: u32, n_cams: usize| {
        let views = cals.iter().take(n_cams).map(|c| (c.camera_id().clone(), project_skeleton(c, &pose, 0))).collect();
        PersonTrack { person_id: id, frames: BTreeMap::from([(0, views)]) }
    };
    let mut tracks = vec![track(0, 3), track(1, 1), track(2, 2)];
    prune_single_view(&mut tracks, 0);
    let kept: Vec<(u32, usize)> = tracks.iter().filter_map(|t| t.frames.get(&0).map(|v| (t.person_id, v.len()))).collect();
    ok &= kept == vec![(0, 3), (2, 2)];
    ok &= bounding_box(&a).is_ok();
    check(
        ok,
        format!(
            "IoU exact; same body linked ({:.2e} mm); 50 mm offset unlinked ({:.3} mm); 3 mutual joints unlinked; pruning kept {kept:?}",
            same.mean_distance.unwrap(),
            off.mean_distance.unwrap()
        ),
    )
}

fn counts(r: &PcpReport) -> Vec<(u32, Vec<(u64, u64)>)> {
    r.actors.iter().map(|a| (a.actor_id, a.per_class.iter().map(|c| (c.correct, c.total)).collect())).collect()
}

fn criterion_9() -> Verdict {
    let body = BodyModel::default();
    let scene = generate(&SceneSpec { n_frames: 20, ..Default::default() }, 9).expect("scene");
    let gt = &scene.ground_truth;
    let perfect = score(gt, gt, &body, 0.5).unwrap();
    let all_perfect = perfect.actors.iter().all(|a| a.per_class.iter().all(|c| c.percent() == 100.0)) && perfect.mean_pcp() == 100.0;

    let ga = Point3::new(0.0, 0.0, 0.0);
    let gb = Point3::new(0.0, 0.0, 400.0);
    let boundary = limb_correct(&Point3::new(200.0, 0.0, 0.0), &gb, &ga, &gb, 0.5).unwrap();
    let inside = limb_correct(&Point3::new(150.0, 0.0, 0.0), &Point3::new(0.0, 190.0, 400.0), &ga, &gb, 0.5).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let noise = Normal::new(0.0, 70.0).unwrap();
    let est: Vec<FrameSkeletons> = gt
        .iter()
        .map(|f| FrameSkeletons {
            frame_index: f.frame_index,
            skeletons: f
                .skeletons
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    for p in s.joints.iter_mut().flatten() {
                        *p += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                    }
                    s
                })
                .collect(),
        })
        .collect();
    let base = score(&est, gt, &body, 0.5).unwrap();
    let transform = |frames: &[FrameSkeletons], iso: &nalgebra::Isometry3<f64>| -> Vec<FrameSkeletons> {
        frames
            .iter()
            .map(|f| FrameSkeletons {
                frame_index: f.frame_index,
                skeletons: f.skeletons.iter().map(|s| s.map_points(|p| iso * p)).collect(),
            })
            .collect()
    };
    let mut invariant = 0;
    for _ in 0..20 {
        let axis = Vector3::from_column_slice(&UnitSphere.sample(&mut rng));
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::new(axis * rng.random_range(0.0..std::f64::consts::PI)));
        let shift =
            Translation3::new(rng.random_range(-5000.0..5000.0), rng.random_range(-5000.0..5000.0), rng.random_range(-5000.0..5000.0));
        let iso = nalgebra::Isometry3::from_parts(shift, rot);
        let moved = score(&transform(&est, &iso), &transform(gt, &iso), &body, 0.5).unwrap();
        let same = counts(&moved) == counts(&base)
            && moved
                .actors
                .iter()
                .zip(&base.actors)
                .all(|(m, b)| m.per_class.iter().zip(&b.per_class).all(|(x, y)| x.percent().to_bits() == y.percent().to_bits()));
        invariant += usize::from(same);
    }
    check(
        all_perfect && !boundary && inside && invariant == 20,
        format!("perfect = 100: {all_perfect}; 0.5 L displacement correct: {boundary}; 150/190 mm of 400 correct: {inside}; {invariant}/20 rigid transforms bit-identical (mean PCP {:.2})", base.mean_pcp()),
    )
}

fn criterion_10(run: &(Arc<SyntheticScene>, RunOutput, Duration), work: &Path) -> Verdict {
    let (scene, _, _) = run;
    let dir = work.join("noiseless");
    file_run(scene, &dir, "run_b", 5);
    let mut diffs = Vec::new();
    for name in ["skeletons.json", "diagnostics.json", "tracks.json", "pcp.csv"] {
        let a = std::fs::read(dir.join("run_a").join(name)).unwrap();
        let b = std::fs::read(dir.join("run_b").join(name)).unwrap();
        if a != b {
            diffs.push(name);
        }
    }
    check(diffs.is_empty(), format!("two runs with seed 5: differing outputs {diffs:?}"))
}
