use proptest::prelude::*;
use proptest::strategy::ValueTree;

use lanecheck_core::controllers::{Controller, ControllerSpec, DegradationParams, Degraded, Oracle, PRESETS};
use lanecheck_core::domain::DomainModel;
use lanecheck_core::sim::Observation;

fn observation() -> impl Strategy<Value = Observation> {
    (-1e3..1e3f64, -10.0..10.0f64, -1.0..1.0f64, prop::collection::vec(-5.0..5.0f64, 4), 0.0..600.0f64, any::<bool>())
        .prop_map(|(lateral_offset, heading_error, curvature_ahead, noise_channels, station, saturated)| Observation {
            lateral_offset,
            heading_error,
            curvature_ahead,
            noise_channels,
            station,
            saturated,
        })
}

#[test]
fn identity_degradation_equals_base() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let obs: Vec<Observation> =
        (0..1000).map(|_| observation().new_tree(&mut runner).unwrap().current()).collect();
    let mut base = Oracle::default();
    let mut wrapped = Degraded::new(Box::new(Oracle::default()), DegradationParams::default(), 42);
    for (i, o) in obs.iter().enumerate() {
        assert_eq!(base.steer(i, o).unwrap(), wrapped.steer(i, o).unwrap(), "step {i}");
    }
}

proptest! {
    #[test]
    fn outputs_are_clamped(obs in prop::collection::vec(observation(), 1..40), preset in 0usize..5, seed in any::<u64>()) {
        let dm = DomainModel::default_model();
        let s = dm.sample_scenario(seed).unwrap();
        let mut c = ControllerSpec::preset(PRESETS[preset]).unwrap().compile(&dm).unwrap().bind(Some(&s), seed).unwrap();
        for (i, o) in obs.iter().enumerate() {
            let v = c.steer(i, o).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v), "{} gave {}", PRESETS[preset], v);
        }
    }

    #[test]
    fn large_bias_is_clamped(bias in -5.0..5.0f64, o in observation()) {
        let dm = DomainModel::default_model();
        let mut c = ControllerSpec::constant_bias(bias).compile(&dm).unwrap().bind(None, 0).unwrap();
        let v = c.steer(0, &o).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v));
    }
}
