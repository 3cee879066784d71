use proptest::prelude::*;
use rayon::prelude::*;

use lanecheck_core::domain::{Assignment, DomainModel};

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn sampled_scenarios_are_valid(seed in any::<u64>()) {
        let dm = DomainModel::default_model();
        let s = dm.sample_scenario(seed).unwrap();
        prop_assert!(dm.validate(&s.values).unwrap().is_empty());
    }

    #[test]
    fn empty_completion_is_sampling(seed in any::<u64>()) {
        let dm = DomainModel::default_model();
        prop_assert_eq!(dm.complete_partial(&Assignment::new(), seed).unwrap(), dm.sample_scenario(seed).unwrap());
    }

    #[test]
    fn completion_keeps_fixed_values(seed in any::<u64>(), road in 0usize..4, speed in 10i64..=50) {
        let dm = DomainModel::default_model();
        let road_type = ["Straight", "Curved", "SteepStraight", "SteepCurved"][road];
        let mut fixed = Assignment::new();
        fixed.insert("Road.type".into(), road_type.into());
        fixed.insert("Vehicle.speed".into(), speed.into());
        match dm.complete_partial(&fixed, seed) {
            Ok(s) => {
                prop_assert!(dm.validate(&s.values).unwrap().is_empty());
                prop_assert_eq!(s.get("Road.type"), fixed.get("Road.type"));
                prop_assert_eq!(s.get("Vehicle.speed"), fixed.get("Vehicle.speed"));
            }
            // Only the speed constraints can make a fixed pair infeasible.
            Err(_) => prop_assert!(
                (road_type == "SteepCurved" && speed > 20) || (road < 2 && speed < 30)
            ),
        }
    }
}

#[test]
fn sampling_is_identical_across_threads() {
    let dm = DomainModel::default_model();
    let serial: Vec<_> = (0..256u64).map(|s| dm.sample_scenario(s).unwrap()).collect();
    let parallel: Vec<_> = (0..256u64).into_par_iter().map(|s| dm.sample_scenario(s).unwrap()).collect();
    assert_eq!(serial, parallel);
}
