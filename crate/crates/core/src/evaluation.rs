//! One scenario through both testing modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{run_reference, CompiledController, ControllerError, LabeledSequence};
use crate::domain::Scenario;
use crate::offline::{classify, replay, AgreementRecord, OfflineError, OfflineResult, Thresholds};
use crate::sim::{run_online, OnlineResult, SimConfig, SimError, Trace, DEFAULT_DURATION, T_DELTA};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scenario {id}: {source}")]
    Sim {
        id: String,
        #[source]
        source: SimError,
    },
    #[error("scenario {id}: {source}")]
    Controller {
        id: String,
        #[source]
        source: ControllerError,
    },
    #[error("scenario {id}: {source}")]
    Offline {
        id: String,
        #[source]
        source: OfflineError,
    },
}

/// Simulation and decision settings shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Harness {
    /// Simulated duration T, seconds.
    pub duration: f64,
    pub t_delta: f64,
    pub thresholds: Thresholds,
}

impl Default for Harness {
    fn default() -> Self {
        Harness { duration: DEFAULT_DURATION, t_delta: T_DELTA, thresholds: Thresholds::default() }
    }
}

impl Harness {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig { duration: self.duration, t_delta: self.t_delta, online_threshold: self.thresholds.online }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub record: AgreementRecord,
    pub offline: OfflineResult,
    pub online: OnlineResult,
    pub reference: LabeledSequence,
    /// Kept only on request.
    pub trace: Option<Trace>,
}

/// Offline: replay the controller on the oracle's reference drive.
/// Online: let the controller drive. Both use noise keyed on the scenario seed.
pub fn evaluate(
    scenario: &Scenario,
    controller: &CompiledController,
    harness: &Harness,
    keep_trace: bool,
) -> Result<Evaluation, EvalError> {
    let id = || scenario.id.clone();
    let cfg = harness.sim_config();
    let reference = run_reference(scenario, &cfg).map_err(|source| EvalError::Sim { id: id(), source })?;
    let mut bound = controller
        .bind(Some(scenario), scenario.seed)
        .map_err(|source| EvalError::Controller { id: id(), source })?;
    let offline = replay(bound.as_mut(), &reference, harness.thresholds.offline)
        .map_err(|source| EvalError::Offline { id: id(), source })?;
    let (trace, online) = run_online(scenario, bound.as_mut(), &cfg).map_err(|source| EvalError::Sim { id: id(), source })?;
    let record = classify(&scenario.id, &offline, &online, &harness.thresholds)
        .map_err(|source| EvalError::Offline { id: id(), source })?;
    Ok(Evaluation { record, offline, online, reference, trace: keep_trace.then_some(trace) })
}

/// Evaluates scenarios in parallel; results come back sorted by scenario id.
pub fn evaluate_all(
    scenarios: &[Scenario],
    controller: &CompiledController,
    harness: &Harness,
    keep_traces: bool,
) -> Result<Vec<Evaluation>, EvalError> {
    let mut out: Vec<Evaluation> = scenarios
        .par_iter()
        .map(|s| evaluate(s, controller, harness, keep_traces))
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| a.record.scenario_id.cmp(&b.record.scenario_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::ControllerSpec;
    use crate::domain::{Assignment, DomainModel};
    use crate::offline::Label;

    #[test]
    fn small_bias_disagrees_on_straight_road() {
        let dm = DomainModel::default_model();
        let mut fixed = Assignment::new();
        fixed.insert("Road.type".into(), "Straight".into());
        fixed.insert("Vehicle.speed".into(), 30.into());
        let s = dm.complete_partial(&fixed, 3).unwrap();
        let c = ControllerSpec::preset("biased-small").unwrap().compile(&dm).unwrap();
        let e = evaluate(&s, &c, &Harness::default(), false).unwrap();
        assert!((e.offline.mae - 0.05).abs() < 1e-9);
        assert_eq!(e.online.mdcl, 1.0);
        assert_eq!(e.record.label, Label::Disagree);
        assert!(e.trace.is_none());
    }

    #[test]
    fn oracle_agrees() {
        let dm = DomainModel::default_model();
        let c = ControllerSpec::preset("oracle").unwrap().compile(&dm).unwrap();
        let s = dm.sample_scenario(8).unwrap();
        let e = evaluate(&s, &c, &Harness::default(), true).unwrap();
        assert_eq!(e.offline.mae, 0.0);
        assert!(e.online.mdcl_raw < 0.1);
        assert_eq!(e.record.label, Label::Agree);
        assert!(e.trace.is_some());
    }
}
