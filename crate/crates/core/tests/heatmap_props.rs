use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use posefuse::heatmap::{build_pmf, read_pfhm, sample_pixel, write_pfhm, Heatmap};
use posefuse::{CameraId, PixelCoord};

fn map(values: Vec<f32>, w: usize, h: usize) -> Heatmap {
    Heatmap::new(0, CameraId::from("c"), 0, w, h, 1.0, values).unwrap()
}

fn grid() -> impl Strategy<Value = (usize, usize, Vec<f32>)> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0.0f32..=1.0, w * h)))
}

proptest! {
    #[test]
    fn pmf_ignores_power_of_two_scaling((w, h, values) in grid(), k in 1i32..6) {
        prop_assume!(values.iter().map(|&v| v as f64).sum::<f64>() > 1e-3);
        let c = 0.5f32.powi(k);
        let a = build_pmf(&map(values.clone(), w, h)).unwrap();
        let b = build_pmf(&map(values.iter().map(|v| v * c).collect(), w, h)).unwrap();
        prop_assert_eq!(a.cumulative(), b.cumulative());
    }

    #[test]
    fn pmf_ignores_any_scaling_up_to_storage_precision((w, h, values) in grid(), c in 0.01f32..1.0) {
        prop_assume!(values.iter().map(|&v| v as f64).sum::<f64>() > 1e-3);
        let a = build_pmf(&map(values.clone(), w, h)).unwrap();
        let b = build_pmf(&map(values.iter().map(|v| v * c).collect(), w, h)).unwrap();
        for (x, y) in a.cumulative().iter().zip(b.cumulative()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn lookup_is_continuous((w, h, values) in grid(), fx in 0.0..1.0, fy in 0.0..1.0) {
        let m = map(values, w, h);
        let px = PixelCoord::new(fx * (w - 1) as f64, fy * (h - 1) as f64);
        let nudged = PixelCoord::new(px.x + 1e-6, px.y - 1e-6);
        // bilinear slope is at most 2 per pixel for values in [0, 1]
        prop_assert!((m.value_at(px) - m.value_at(nudged)).abs() <= 4e-6);
    }
}

#[test]
fn uniform_two_cell_frequencies() {
    let pmf = build_pmf(&map(vec![1.0, 1.0], 2, 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let left = (0..10_000).filter(|_| sample_pixel(&pmf, &mut rng).x == 0.0).count();
    assert!((left as f64 / 10_000.0 - 0.5).abs() <= 0.02, "{left}");
}

#[test]
fn empirical_cdf_passes_kolmogorov_smirnov() {
    let values: Vec<f32> = (0..64).map(|i| ((i * 37 % 64) as f32 / 64.0).powi(2)).collect();
    let pmf = build_pmf(&map(values, 8, 8)).unwrap();
    let n = 100_000;
    let mut counts = vec![0u64; pmf.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..n {
        counts[pmf.sample_index(&mut rng)] += 1;
    }
    let mut acc = 0u64;
    let mut d: f64 = 0.0;
    for (i, c) in counts.iter().enumerate() {
        acc += c;
        d = d.max((acc as f64 / n as f64 - pmf.cumulative()[i]).abs());
    }
    // critical value at significance 0.001
    let critical = 1.9495 / (n as f64).sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn pfhm_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cam = CameraId::from("cam7");
    let maps: Vec<Heatmap> = (0..3)
        .map(|j| Heatmap::new(j, cam.clone(), 4, 5, 3, 2.0, (0..15).map(|i| ((i + j) % 7) as f32 / 7.0).collect()).unwrap())
        .collect();
    let path = dir.path().join("m.pfhm");
    write_pfhm(std::fs::File::create(&path).unwrap(), &maps).unwrap();
    let back = read_pfhm(std::fs::File::open(&path).unwrap(), &cam, 4).unwrap();
    assert_eq!(back, maps);
}
