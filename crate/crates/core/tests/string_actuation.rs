use std::f64::consts::PI;

use foldwright_core::fold::embed_fold;
use foldwright_core::presets::miura_string_rig;
use foldwright_core::string_sim::{
    angle_at, default_twist_schedule, evaluate_configuration, hole_positions, solve_quasi_static, tsa_segment_length,
    twist_schedule, Pose2, QuasiStaticState, TAUT_TOLERANCE,
};
use proptest::prelude::*;

fn run_rig() -> (foldwright_core::presets::StringRig, Vec<QuasiStaticState>) {
    let rig = miura_string_rig().unwrap();
    let states = solve_quasi_static(&rig.pattern, &rig.plan, &rig.config, &default_twist_schedule(), rig.theta_max()).unwrap();
    (rig, states)
}

#[test]
fn rig_conserves_taut_strings_and_folds_monotonically() {
    let (rig, states) = run_rig();
    assert!(states.len() > 1);
    let lengths: Vec<f64> = states[0].strings.iter().map(|s| s.total()).collect();
    for pair in states.windows(2) {
        assert!(pair[1].fold_theta >= pair[0].fold_theta);
    }
    for s in &states {
        assert!(s.fold_theta <= rig.theta_max() + 1e-6);
        assert!(s.strings.iter().any(|st| st.is_taut()), "state {} has no taut string", s.index);
        for (st, l0) in s.strings.iter().zip(&lengths) {
            assert!(st.slack >= -1e-9);
            assert!((st.slack - (l0 - st.total())).abs() < 1e-9);
            if st.slack < TAUT_TOLERANCE {
                assert!((st.total() - l0).abs() < 1e-6);
            }
        }
    }
    assert!(states.last().unwrap().is_final);
}

#[test]
fn rig_trades_sheet_length_for_actuator_length() {
    let (rig, states) = run_rig();
    let (first, last) = (&states[0], states.last().unwrap());
    assert!(last.fold_theta > 1.0);
    for (a, b) in first.strings.iter().zip(&last.strings) {
        assert!(b.tsa_side_length > a.tsa_side_length);
        for (x, y) in a.segment_lengths.iter().zip(&b.segment_lengths) {
            assert!(y < x);
        }
    }
    let angle = |s: &QuasiStaticState| -> Vec<f64> {
        let folded = embed_fold(&rig.pattern, s.fold_theta).unwrap();
        hole_positions(&rig.pattern, &rig.plan, &folded, s.pose)
            .iter()
            .map(|h| angle_at(h[0], h[1], h[2]))
            .collect()
    };
    for (a, b) in angle(first).iter().zip(angle(last)) {
        assert!(b > *a, "{a} -> {b}");
    }
}

#[test]
fn mirror_pairs_share_initial_length() {
    let (_, states) = run_rig();
    let l: Vec<f64> = states[0].strings.iter().map(|s| s.total()).collect();
    assert!((l[0] - l[1]).abs() < 1e-9);
    assert!((l[2] - l[3]).abs() < 1e-9);
}

#[test]
fn deterministic() {
    let rig = miura_string_rig().unwrap();
    let schedule = twist_schedule(4.0 * PI, PI / 12.0);
    let a = solve_quasi_static(&rig.pattern, &rig.plan, &rig.config, &schedule, rig.theta_max()).unwrap();
    let b = solve_quasi_static(&rig.pattern, &rig.plan, &rig.config, &schedule, rig.theta_max()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stops_at_last_feasible_twist() {
    let rig = miura_string_rig().unwrap();
    let theta_max = 1.9;
    let schedule = twist_schedule(20.0 * PI, PI / 4.0);
    let states = solve_quasi_static(&rig.pattern, &rig.plan, &rig.config, &schedule, theta_max).unwrap();
    assert!(states.len() < schedule.len(), "expected an early stop");
    let last = states.last().unwrap();
    assert!(last.is_final);
    // brute force: no fold on a 0.1° grid fits the next twist
    let next = schedule[states.len()];
    let mut theta = last.fold_theta;
    while theta <= theta_max {
        let strings = evaluate_configuration(&rig.pattern, &rig.plan, &rig.config, theta, next, Pose2::default()).unwrap();
        assert!(strings.iter().any(|s| s.slack < 0.0), "feasible at θ = {theta}");
        theta += 0.1f64.to_radians();
    }
    let strings = evaluate_configuration(&rig.pattern, &rig.plan, &rig.config, theta_max, next, Pose2::default()).unwrap();
    assert!(strings.iter().any(|s| s.slack < 0.0));
}

proptest! {
    #[test]
    fn actuator_length_grows_with_twist(
        d1 in 1.0f64..20.0, d2 in 1.0f64..100.0, ds in 0.1f64..2.0, x in 0.0f64..200.0, twist in 0.0f64..60.0, dt in 0.0f64..1.0,
    ) {
        let a = tsa_segment_length(d1, d2, ds, x, twist).unwrap();
        let b = tsa_segment_length(d1, d2, ds, x, twist + dt).unwrap();
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn actuator_length_continuous_at_half_turn(d1 in 1.0f64..20.0, d2 in 1.0f64..100.0, ds in 0.1f64..2.0, x in 0.0f64..200.0) {
        let below = tsa_segment_length(d1, d2, ds, x, PI * (1.0 - 1e-15)).unwrap();
        let at = tsa_segment_length(d1, d2, ds, x, PI).unwrap();
        prop_assert!((below - at).abs() < 1e-9);
    }
}
