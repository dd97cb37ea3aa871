use gdmp_core::curvefit::{fit_samples, ParametricCurve};
use gdmp_core::gdmp::{Gains, GdmpSystem};
use gdmp_core::hilsim::{metrics, passivity_monitor, simulate, HilConfig, HumanKind, HumanModel, SimTrace};
use nalgebra::DVector;
use proptest::prelude::*;

fn bent_curve() -> ParametricCurve {
    let s: Vec<f64> = (0..=400).map(|k| k as f64 * 0.0025).collect();
    let v: Vec<DVector<f64>> = s
        .iter()
        .map(|&x| DVector::from_vec(vec![x, 0.2 * (std::f64::consts::PI * x).sin(), 0.1 * x * x]))
        .collect();
    fit_samples(&s, &v, 1.0, 30, 2.0, 1e-10, 0.0025).unwrap().curve
}

fn line_curve() -> ParametricCurve {
    let s: Vec<f64> = (0..=200).map(|k| k as f64 * 0.005).collect();
    let v: Vec<DVector<f64>> = s.iter().map(|&x| DVector::from_vec(vec![0.8 * x, 0.6 * x])).collect();
    fit_samples(&s, &v, 1.0, 20, 2.0, 1e-10, 0.005).unwrap().curve
}

fn system(c: ParametricCurve) -> GdmpSystem {
    let d = c.dim();
    GdmpSystem::new(c, Gains::critically_damped(40.0, d), None, None).unwrap()
}

fn human(intent: bool, goal: f64, tremor: f64, seed: u64) -> HumanModel {
    HumanModel {
        kind: if intent { HumanKind::Intent } else { HumanKind::Impedance },
        s_goal: Some(goal),
        ref_duration: 1.5,
        tremor,
        seed,
        ..Default::default()
    }
}

fn tangent_bound_holds(tr: &SimTrace) -> bool {
    (0..tr.len()).all(|k| tr.f_tau[k].abs() <= tr.tangent_norm[k] * tr.f_h[k].norm() * (1.0 + 1e-12) + 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn storage_is_nonnegative_and_projection_bounded(
        m in 0.2f64..4.0,
        b in 1.7f64..34.0,
        delayed in any::<bool>(),
        intent in any::<bool>(),
        goal in 0.3f64..0.95,
        tremor in 0.0f64..2.0,
        seed in 0u64..100,
    ) {
        let sys = system(bent_curve());
        let cfg = HilConfig {
            m, b,
            t0: if delayed { 0.01 } else { 0.0 },
            duration: 1.5,
            human: human(intent, goal, tremor, seed),
            ..Default::default()
        };
        let tr = simulate(&sys, &cfg).unwrap();
        prop_assert!(tr.storage.iter().all(|s| *s >= 0.0));
        prop_assert!(tangent_bound_holds(&tr));
    }

    #[test]
    fn delay_free_loop_is_passive_on_every_prefix(
        m in 0.2f64..4.0,
        b in 1.7f64..34.0,
        intent in any::<bool>(),
        goal in 0.3f64..0.95,
        tremor in 0.0f64..2.0,
        seed in 0u64..100,
    ) {
        let sys = system(bent_curve());
        let cfg = HilConfig { m, b, duration: 1.5, human: human(intent, goal, tremor, seed), ..Default::default() };
        let rep = passivity_monitor(&simulate(&sys, &cfg).unwrap());
        prop_assert_eq!(rep.violations, 0);
        prop_assert!(rep.max_prefix_excess <= 0.0, "{}", rep.max_prefix_excess);
    }
}

#[test]
fn unforced_storage_only_dissipates() {
    let sys = system(bent_curve());
    let cfg = HilConfig {
        s_start: 0.4,
        duration: 2.0,
        human: HumanModel { k_h: 0.0, b_h: 0.0, ..Default::default() },
        ..Default::default()
    };
    let tr = simulate(&sys, &cfg).unwrap();
    assert!(tr.storage_rate.iter().all(|r| *r <= 0.0));
}

#[test]
fn storage_derivative_error_is_second_order() {
    let sys = system(bent_curve());
    let cfg = HilConfig { duration: 2.0, human: human(true, 0.8, 1.0, 4), ..Default::default() };
    let coarse = passivity_monitor(&simulate(&sys, &HilConfig { dt: 2e-3, ..cfg.clone() }).unwrap());
    let fine = passivity_monitor(&simulate(&sys, &cfg).unwrap());
    let ratio = coarse.rate_error / fine.rate_error;
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    assert!(fine.rate_consistent && coarse.rate_consistent);
}

#[test]
fn intent_drives_phase_to_its_goal() {
    let sys = system(line_curve());
    let cfg = HilConfig { m: 2.0, b: 17.0, duration: 4.0, human: human(true, 0.7, 0.0, 0), ..Default::default() };
    let tr = simulate(&sys, &cfg).unwrap();
    let reference = simulate(&sys, &HilConfig { dt: 1e-4, ..cfg.clone() }).unwrap();
    let s_end = *tr.s.last().unwrap();
    let s_ref = *reference.s.last().unwrap();
    assert!((s_end - 0.7).abs() <= 0.02 * 0.7, "{s_end}");
    assert!((s_end - s_ref).abs() <= 1e-6, "{s_end} vs {s_ref}");
    let m = metrics(&tr, 0.5).unwrap();
    assert!(m.sd_rmsd < 0.05, "{}", m.sd_rmsd);
}

#[test]
fn returning_intent_retraces_the_path() {
    let sys = system(bent_curve());
    let cfg = HilConfig {
        duration: 5.0,
        human: HumanModel { s_return: Some(0.0), ..human(true, 0.8, 0.0, 0) },
        ..Default::default()
    };
    let tr = simulate(&sys, &cfg).unwrap();
    let peak = tr.s.iter().cloned().enumerate().fold((0, f64::MIN), |a, (k, s)| if s > a.1 { (k, s) } else { a });
    assert!(peak.1 > 0.7, "phase peaked at {}", peak.1);
    assert!(tr.s.last().unwrap().abs() < 0.02, "phase ended at {}", tr.s.last().unwrap());
    let forward = &tr.y[..=peak.0];
    let worst = tr.y[peak.0..]
        .iter()
        .map(|y| forward.iter().map(|f| (y - f).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-2, "return leg strays {worst} m from the outbound path");
}

#[test]
fn delayed_soft_corner_oscillates() {
    let sys = system(line_curve());
    for dt in [1e-3, 5e-4] {
        let base = HilConfig { m: 0.2, b: 1.7, dt, duration: 3.0, human: human(false, 0.8, 0.0, 0), ..Default::default() };
        let calm = metrics(&simulate(&sys, &base).unwrap(), 0.5).unwrap().sd_rmsd;
        let tr = simulate(&sys, &HilConfig { t0: 0.02, ..base }).unwrap();
        let wild = metrics(&tr, 0.5).unwrap().sd_rmsd;
        assert!(wild >= 5.0 * calm, "dt {dt}: {wild} vs {calm}");
        assert!(passivity_monitor(&tr).violations > 0);
    }
}
