use std::f64::consts::PI;

use gdmp_core::sampling::{spatial_sample, TimedTrajectory};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth 3-D curve with a hold inserted at `hold_at` for `hold` seconds.
fn demo(coef: &[f64; 9], hold_at: f64, hold: f64, tremor: f64, seed: u64) -> TimedTrajectory {
    let shape = |u: f64| {
        DVector::from_fn(3, |i, _| {
            let [a, b, c] = [coef[3 * i], coef[3 * i + 1], coef[3 * i + 2]];
            a * u + b * (PI * u).sin() + c * (2.0 * PI * u).sin()
        })
    };
    let period = 0.01;
    let mut pts = Vec::new();
    let n = 300;
    let hold_k = (hold_at * n as f64) as usize;
    for k in 0..=n {
        pts.push(shape(k as f64 / n as f64));
        if k == hold_k {
            for _ in 0..(hold / period) as usize {
                pts.push(shape(k as f64 / n as f64));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in pts.iter_mut() {
        for v in p.iter_mut() {
            *v += tremor * rng.random_range(-1.0..1.0);
        }
    }
    TimedTrajectory::new(period, pts, None).unwrap()
}

fn coefs() -> impl Strategy<Value = [f64; 9]> {
    prop::array::uniform9(-0.5f64..0.5).prop_map(|mut c| {
        c[0] += 1.0;
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chords_are_delta_and_tangents_unit(c in coefs(), delta in 0.002f64..0.05, at in 0.1f64..0.9) {
        let traj = demo(&c, at, 1.0, 0.0, 0);
        let path = spatial_sample(&traj, delta, &[0, 1, 2]).unwrap();
        for w in path.points.windows(2) {
            let chord = (&w[1] - &w[0]).norm();
            prop_assert!((chord - delta).abs() <= 1e-9 * delta);
            prop_assert!(((&w[1] - &w[0]) / delta).norm() - 1.0 <= 1e-9);
        }
        for (k, s) in path.arclengths.iter().enumerate() {
            prop_assert!((s - k as f64 * delta).abs() <= 1e-9 * delta * (k as f64 + 1.0));
        }
    }

    #[test]
    fn sub_delta_hold_emits_nothing(c in coefs(), delta in 0.005f64..0.05, at in 0.1f64..0.9, seed in 0u64..1000) {
        let tremor = 0.1 * delta;
        let traj = demo(&c, at, 2.0, tremor, seed);
        let path = spatial_sample(&traj, delta, &[0, 1, 2]).unwrap();
        let pts = traj.points();
        let n = 300;
        let a = (at * n as f64) as usize;
        let b = a + 200;
        let (ta, tb) = (traj.time(a), traj.time(b));
        let before = path.times.iter().rposition(|&t| t <= ta).unwrap();
        let reach = (a..=b).map(|k| (&pts[k] - &path.points[before]).norm()).fold(0.0, f64::max);
        prop_assume!(reach < delta);
        let inside = path.times.iter().filter(|&&t| t > ta && t <= tb).count();
        prop_assert_eq!(inside, 0);
    }

    #[test]
    fn resampling_a_path_is_idempotent(c in coefs(), delta in 0.005f64..0.05) {
        let traj = demo(&c, 0.5, 0.0, 0.0, 0);
        let path = spatial_sample(&traj, delta, &[0, 1, 2]).unwrap();
        let again = spatial_sample(&path.as_timed().unwrap(), delta, &[0, 1, 2]).unwrap();
        prop_assert_eq!(again.points.len(), path.points.len());
        for (a, b) in again.points.iter().zip(&path.points) {
            prop_assert!((a - b).norm() <= 1e-9);
        }
    }
}

#[test]
fn length_converges_as_delta_shrinks() {
    // Unit circle polyline with 10⁵ vertices; its length is the reference.
    let n = 100_000;
    let pts: Vec<DVector<f64>> = (0..=n)
        .map(|k| {
            let th = 1.5 * PI * k as f64 / n as f64;
            DVector::from_vec(vec![th.cos(), th.sin()])
        })
        .collect();
    let exact: f64 = pts.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
    let traj = TimedTrajectory::new(1e-4, pts, None).unwrap();
    let mut last = f64::INFINITY;
    for delta in [0.1, 0.01, 0.001] {
        let path = spatial_sample(&traj, delta, &[0, 1]).unwrap();
        let err = (exact - path.length()).abs();
        assert!(err < last, "Δ = {delta}: error {err} did not shrink from {last}");
        last = err;
    }
    assert!(last < 2e-3);
}
