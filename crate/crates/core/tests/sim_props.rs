use proptest::prelude::*;

use lanecheck_core::controllers::{ControllerSpec, Oracle};
use lanecheck_core::covergen::generate_covering_array;
use lanecheck_core::domain::DomainModel;
use lanecheck_core::sim::{run_online, step_vehicle, OnlineResult, SimConfig, VehicleState};

/// Worst lateral offset the oracle may reach on any default-model scenario.
const ORACLE_TOLERANCE: f64 = 0.1;

proptest! {
    #[test]
    fn displacement_is_speed_times_dt(
        x in -1e3..1e3f64, y in -1e3..1e3f64, heading in -3.14..3.14f64,
        cmd in -1.0..1.0f64, speed in 0.0..20.0f64, dt in 0.001..0.2f64,
    ) {
        let s0 = VehicleState { x, y, heading, step: 0 };
        let s1 = step_vehicle(&s0, cmd, speed, dt);
        let d = ((s1.x - x).powi(2) + (s1.y - y).powi(2)).sqrt();
        prop_assert!((d - speed * dt).abs() <= 1e-9, "{} vs {}", d, speed * dt);
    }

    #[test]
    fn mdcl_is_bounded_and_monotone(devs in prop::collection::vec(-20.0..20.0f64, 1..100), extra in 0.0..20.0f64) {
        let r = OnlineResult::from_deviations(&devs, 0.7);
        prop_assert!((0.0..=1.0).contains(&r.mdcl));
        let last = devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut longer = devs.clone();
        longer.push(last + extra);
        prop_assert!(OnlineResult::from_deviations(&longer, 0.7).mdcl_raw >= r.mdcl_raw);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn traces_are_deterministic(seed in any::<u64>(), preset in 0usize..5, duration in 1.0..20.0f64) {
        let dm = DomainModel::default_model();
        let s = dm.sample_scenario(seed).unwrap();
        let compiled = ControllerSpec::preset(lanecheck_core::controllers::PRESETS[preset]).unwrap().compile(&dm).unwrap();
        let cfg = SimConfig { duration, ..SimConfig::default() };
        let run = || {
            let mut c = compiled.bind(Some(&s), s.seed).unwrap();
            run_online(&s, c.as_mut(), &cfg).unwrap()
        };
        let (a, ra) = run();
        let (b, rb) = run();
        prop_assert_eq!(format!("{:?}", a), format!("{:?}", b));
        prop_assert_eq!(ra, rb);
        if a.reached_road_end {
            prop_assert!(a.steps.len() < cfg.planned_steps());
        } else {
            prop_assert_eq!(a.steps.len(), cfg.planned_steps());
        }
    }
}

#[test]
fn oracle_stays_in_lane_on_covering_array() {
    let dm = DomainModel::default_model();
    let ca = generate_covering_array(&dm, 2, 0).unwrap();
    let mut worst = 0.0f64;
    for s in &ca.scenarios {
        let (trace, _) = run_online(s, &mut Oracle::default(), &SimConfig::default()).unwrap();
        for step in &trace.steps {
            worst = worst.max(step.observation.lateral_offset.abs());
        }
    }
    assert!(worst <= ORACLE_TOLERANCE, "oracle drifted {worst} m");
}
