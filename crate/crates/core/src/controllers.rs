//! Steering controllers: the ground-truth oracle, a constant command and a
//! degradation wrapper with scenario-dependent triggers.
//!
//! A [`ControllerSpec`] is plain data (TOML or a named preset). Compiling it
//! against a [`DomainModel`] validates trigger expressions; binding the
//! compiled form to a scenario yields a stateful [`Controller`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainModel, Expr, Scenario};
use crate::rng;
use crate::sim::{max_steer_rad, run_online, Observation, SimConfig, SimError, Trace, WHEELBASE};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("trigger `{when}`: {reason}")]
    Trigger { when: String, reason: String },
    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter { name: &'static str, value: f64, reason: &'static str },
    #[error("unknown controller preset `{0}`")]
    UnknownPreset(String),
    #[error("controller spec: {0}")]
    Parse(String),
    #[error("scenario {id}: {reason}")]
    Scenario { id: String, reason: String },
    #[error("controller produced a non-finite command {0}")]
    NonFinite(f64),
}

/// A steering policy. Commands are in [-1, 1]; positive steers right.
pub trait Controller: Send {
    /// Clears internal state before a new run.
    fn reset(&mut self) {}
    fn steer(&mut self, step: usize, obs: &Observation) -> Result<f64, ControllerError>;
}

/// Gains of the ground-truth controller:
/// `angle = feedforward * atan(L * kappa) - offset * e_y - heading * e_psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleGains {
    pub feedforward: f64,
    /// rad per metre of lateral offset.
    pub offset: f64,
    /// rad per rad of heading error.
    pub heading: f64,
}

impl Default for OracleGains {
    fn default() -> Self {
        OracleGains { feedforward: 1.0, offset: 0.012, heading: 0.3 }
    }
}

impl OracleGains {
    /// Damping ratio of the linearised closed loop; independent of speed
    /// for the kinematic model.
    pub fn damping_ratio(&self) -> f64 {
        self.heading / (2.0 * (WHEELBASE * self.offset).sqrt())
    }

    pub fn steer(&self, obs: &Observation) -> f64 {
        let angle = self.feedforward * (WHEELBASE * obs.curvature_ahead).atan()
            - self.offset * obs.lateral_offset
            - self.heading * obs.heading_error;
        (angle / max_steer_rad()).clamp(-1.0, 1.0)
    }
}

/// Ground-truth steering with the default gains.
pub fn oracle_steering(obs: &Observation) -> f64 {
    OracleGains::default().steer(obs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Oracle {
    pub gains: OracleGains,
}

impl Controller for Oracle {
    fn steer(&mut self, _step: usize, obs: &Observation) -> Result<f64, ControllerError> {
        Ok(self.gains.steer(obs))
    }
}

/// Ignores its input; useful as a feedback-free base for bias studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub value: f64,
}

impl Constant {
    pub fn new(value: f64) -> Self {
        Constant { value }
    }
}

impl Controller for Constant {
    fn steer(&mut self, _step: usize, _obs: &Observation) -> Result<f64, ControllerError> {
        Ok(self.value.clamp(-1.0, 1.0))
    }
}

/// Degradation parameters. The identity (all defaults) leaves the base
/// controller's output unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationParams {
    /// Observation delay in steps.
    pub latency_steps: usize,
    pub bias: f64,
    pub noise_sigma: f64,
    /// Multiplier on the curvature the base controller sees.
    pub curvature_gain: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams { latency_steps: 0, bias: 0.0, noise_sigma: 0.0, curvature_gain: 1.0 }
    }
}

impl DegradationParams {
    fn validate(&self) -> Result<(), ControllerError> {
        let bad = |name, value, reason| Err(ControllerError::Parameter { name, value, reason });
        if !self.bias.is_finite() {
            return bad("bias", self.bias, "must be finite");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma", self.noise_sigma, "must be finite and >= 0");
        }
        if !self.curvature_gain.is_finite() {
            return bad("curvature_gain", self.curvature_gain, "must be finite");
        }
        Ok(())
    }
}

/// Parameter overrides applied when `when` holds for the scenario. Later
/// triggers override earlier ones field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub when: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_gain: Option<f64>,
}

impl Trigger {
    fn apply(&self, p: &mut DegradationParams) {
        if let Some(v) = self.latency_steps {
            p.latency_steps = v;
        }
        if let Some(v) = self.bias {
            p.bias = v;
        }
        if let Some(v) = self.noise_sigma {
            p.noise_sigma = v;
        }
        if let Some(v) = self.curvature_gain {
            p.curvature_gain = v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationSpec {
    #[serde(flatten)]
    pub params: DegradationParams,
    #[serde(default, rename = "trigger", skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
}

/// Controller description, loadable from TOML:
///
/// ```toml
/// kind = "degraded"
/// base = { kind = "oracle" }
/// [degradation]
/// bias = 0.02
/// [[degradation.trigger]]
/// when = "Weather.type = Rainy"
/// noise_sigma = 0.25
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSpec {
    Oracle {
        #[serde(default)]
        gains: OracleGains,
    },
    Constant {
        value: f64,
    },
    Degraded {
        base: Box<ControllerSpec>,
        #[serde(default)]
        degradation: DegradationSpec,
    },
}

pub const PRESETS: [&str; 5] = ["oracle", "biased-small", "biased-large", "rain-blind", "curve-weak"];

impl ControllerSpec {
    pub fn oracle() -> Self {
        ControllerSpec::Oracle { gains: OracleGains::default() }
    }

    pub fn constant_bias(bias: f64) -> Self {
        ControllerSpec::Degraded {
            base: Box::new(ControllerSpec::Constant { value: 0.0 }),
            degradation: DegradationSpec {
                params: DegradationParams { bias, ..Default::default() },
                triggers: vec![],
            },
        }
    }

    fn triggered(when: &str, trigger: Trigger) -> Self {
        ControllerSpec::Degraded {
            base: Box::new(Self::oracle()),
            degradation: DegradationSpec {
                params: DegradationParams::default(),
                triggers: vec![Trigger { when: when.to_string(), ..trigger }],
            },
        }
    }

    /// Named presets:
    ///
    /// * `oracle`: the ground-truth controller
    /// * `biased-small` / `biased-large`: constant command 0.05 / 0.15
    /// * `rain-blind`: oracle with noise sigma 0.25 when it rains
    /// * `curve-weak`: oracle seeing 60% of the curvature on `Curved` roads
    pub fn preset(name: &str) -> Result<Self, ControllerError> {
        let blank = Trigger {
            when: String::new(),
            latency_steps: None,
            bias: None,
            noise_sigma: None,
            curvature_gain: None,
        };
        Ok(match name {
            "oracle" => Self::oracle(),
            "biased-small" => Self::constant_bias(0.05),
            "biased-large" => Self::constant_bias(0.15),
            "rain-blind" => {
                Self::triggered("Weather.type = Rainy", Trigger { noise_sigma: Some(0.25), ..blank })
            }
            "curve-weak" => {
                Self::triggered("Road.type = Curved", Trigger { curvature_gain: Some(0.6), ..blank })
            }
            other => return Err(ControllerError::UnknownPreset(other.to_string())),
        })
    }

    pub fn from_toml_str(source: &str) -> Result<Self, ControllerError> {
        toml::from_str(source).map_err(|e| ControllerError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("controller specs serialize")
    }

    /// Validates parameters and parses triggers against the domain model.
    pub fn compile(&self, dm: &DomainModel) -> Result<CompiledController, ControllerError> {
        Ok(CompiledController { node: compile_node(self, dm)?, model: dm.clone() })
    }
}

#[derive(Debug, Clone)]
enum Node {
    Oracle(OracleGains),
    Constant(f64),
    Degraded { base: Box<Node>, params: DegradationParams, triggers: Vec<(Expr, Trigger)> },
}

fn compile_node(spec: &ControllerSpec, dm: &DomainModel) -> Result<Node, ControllerError> {
    Ok(match spec {
        ControllerSpec::Oracle { gains } => {
            for (name, value) in [("feedforward", gains.feedforward), ("offset", gains.offset), ("heading", gains.heading)] {
                if !value.is_finite() {
                    return Err(ControllerError::Parameter { name, value, reason: "must be finite" });
                }
            }
            Node::Oracle(*gains)
        }
        ControllerSpec::Constant { value } => {
            if !value.is_finite() {
                return Err(ControllerError::Parameter { name: "value", value: *value, reason: "must be finite" });
            }
            Node::Constant(*value)
        }
        ControllerSpec::Degraded { base, degradation } => {
            degradation.params.validate()?;
            let mut triggers = Vec::with_capacity(degradation.triggers.len());
            for t in &degradation.triggers {
                let expr = dm.parse_expr(&t.when).map_err(|e| ControllerError::Trigger {
                    when: t.when.clone(),
                    reason: e.to_string(),
                })?;
                let mut probe = degradation.params;
                t.apply(&mut probe);
                probe.validate()?;
                triggers.push((expr, t.clone()));
            }
            Node::Degraded { base: Box::new(compile_node(base, dm)?), params: degradation.params, triggers }
        }
    })
}

/// A validated controller description, ready to bind to scenarios.
#[derive(Debug, Clone)]
pub struct CompiledController {
    node: Node,
    model: DomainModel,
}

impl CompiledController {
    /// Instantiates the controller for one run. Triggers are resolved
    /// against `scenario` (none fire without one); `noise_seed` keys the
    /// command noise.
    pub fn bind(&self, scenario: Option<&Scenario>, noise_seed: u64) -> Result<Box<dyn Controller>, ControllerError> {
        let codes = match scenario {
            Some(s) => Some(self.model.encode(&s.values).map_err(|e| ControllerError::Scenario {
                id: s.id.clone(),
                reason: e.to_string(),
            })?),
            None => None,
        };
        Ok(bind_node(&self.node, codes.as_deref(), noise_seed))
    }

    /// Parameters of the outermost degradation after triggers, if any.
    pub fn resolved_params(&self, scenario: &Scenario) -> Result<Option<DegradationParams>, ControllerError> {
        let codes = self.model.encode(&scenario.values).map_err(|e| ControllerError::Scenario {
            id: scenario.id.clone(),
            reason: e.to_string(),
        })?;
        Ok(match &self.node {
            Node::Degraded { params, triggers, .. } => Some(resolve(*params, triggers, Some(&codes))),
            _ => None,
        })
    }
}

fn resolve(mut params: DegradationParams, triggers: &[(Expr, Trigger)], codes: Option<&[i64]>) -> DegradationParams {
    if let Some(codes) = codes {
        for (expr, t) in triggers {
            if expr.eval(codes) {
                t.apply(&mut params);
            }
        }
    }
    params
}

fn bind_node(node: &Node, codes: Option<&[i64]>, noise_seed: u64) -> Box<dyn Controller> {
    match node {
        Node::Oracle(gains) => Box::new(Oracle { gains: *gains }),
        Node::Constant(v) => Box::new(Constant::new(*v)),
        Node::Degraded { base, params, triggers } => Box::new(Degraded::new(
            bind_node(base, codes, noise_seed),
            resolve(*params, triggers, codes),
            noise_seed,
        )),
    }
}

const COMMAND_NOISE_STREAM: u64 = 0x434d_444e;

/// Wraps a base controller:
/// `clamp(base(delayed obs with scaled curvature) + bias + N(0, sigma))`.
pub struct Degraded {
    base: Box<dyn Controller>,
    params: DegradationParams,
    noise_seed: u64,
    buffer: VecDeque<Observation>,
}

impl Degraded {
    pub fn new(base: Box<dyn Controller>, params: DegradationParams, noise_seed: u64) -> Self {
        Degraded { base, params, noise_seed, buffer: VecDeque::new() }
    }

    pub fn params(&self) -> &DegradationParams {
        &self.params
    }
}

impl Controller for Degraded {
    fn reset(&mut self) {
        self.buffer.clear();
        self.base.reset();
    }

    fn steer(&mut self, step: usize, obs: &Observation) -> Result<f64, ControllerError> {
        let p = self.params;
        self.buffer.push_back(obs.clone());
        // Holds the oldest observation until the delay line fills.
        while self.buffer.len() > p.latency_steps + 1 {
            self.buffer.pop_front();
        }
        let seen = &self.buffer[0];
        let out = if p.curvature_gain == 1.0 {
            self.base.steer(step, seen)?
        } else {
            let scaled = Observation { curvature_ahead: seen.curvature_ahead * p.curvature_gain, ..seen.clone() };
            self.base.steer(step, &scaled)?
        };
        let mut cmd = out + p.bias;
        if p.noise_sigma > 0.0 {
            let seed = rng::derive(self.noise_seed, COMMAND_NOISE_STREAM);
            cmd += p.noise_sigma * rng::gaussian(seed, step as u64);
        }
        if !cmd.is_finite() {
            return Err(ControllerError::NonFinite(cmd));
        }
        Ok(cmd.clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    External,
}

/// Observations paired with ground-truth steering, as recorded on a
/// reference drive. External sequences may carry no observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub scenario_id: String,
    pub provenance: Provenance,
    pub observations: Vec<Observation>,
    pub labels: Vec<f64>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn from_trace(trace: &Trace) -> Self {
        LabeledSequence {
            scenario_id: trace.scenario_id.clone(),
            provenance: Provenance::Simulated,
            observations: trace.steps.iter().map(|s| s.observation.clone()).collect(),
            labels: trace.steps.iter().map(|s| s.theta).collect(),
        }
    }

    /// Labels only; clamped into [-1, 1].
    pub fn external(id: &str, labels: Vec<f64>) -> Self {
        LabeledSequence {
            scenario_id: id.to_string(),
            provenance: Provenance::External,
            observations: Vec::new(),
            labels: labels.into_iter().map(|l| l.clamp(-1.0, 1.0)).collect(),
        }
    }
}

/// Closed-loop oracle drive; its trace supplies the offline dataset.
pub fn run_reference(scenario: &Scenario, cfg: &SimConfig) -> Result<LabeledSequence, SimError> {
    let (trace, _) = run_online(scenario, &mut Oracle::default(), cfg)?;
    Ok(LabeledSequence::from_trace(&trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Assignment;

    fn obs(offset: f64, heading: f64, curvature: f64) -> Observation {
        Observation {
            lateral_offset: offset,
            heading_error: heading,
            curvature_ahead: curvature,
            noise_channels: vec![0.0; 4],
            station: 0.0,
            saturated: false,
        }
    }

    fn scenario(road: &str, weather: &str, seed: u64) -> Scenario {
        let dm = DomainModel::default_model();
        let mut fixed = Assignment::new();
        fixed.insert("Road.type".into(), road.into());
        fixed.insert("Weather.type".into(), weather.into());
        dm.complete_partial(&fixed, seed).unwrap()
    }

    #[test]
    fn oracle_is_zero_when_centered_on_straight() {
        assert_eq!(oracle_steering(&obs(0.0, 0.0, 0.0)), 0.0);
        assert!(oracle_steering(&obs(1.0, 0.0, 0.0)) < 0.0);
        assert!(oracle_steering(&obs(0.0, 0.1, 0.0)) < 0.0);
        assert!(oracle_steering(&obs(0.0, 0.0, 0.02)) > 0.0);
        assert_eq!(oracle_steering(&obs(-1e6, 0.0, 0.0)), 1.0);
    }

    #[test]
    fn feedforward_matches_arc_steering() {
        // On an arc of radius R the bicycle needs tan(delta) = L / R.
        let r = 80.0;
        let cmd = oracle_steering(&obs(0.0, 0.0, 1.0 / r));
        let delta = cmd * max_steer_rad();
        assert!((delta.tan() - WHEELBASE / r).abs() < 1e-12);
    }

    #[test]
    fn default_gains_are_damped() {
        let z = OracleGains::default().damping_ratio();
        assert!((0.5..=1.5).contains(&z), "{z}");
    }

    #[test]
    fn identity_degradation_matches_base() {
        let mut base = Oracle::default();
        let mut d = Degraded::new(Box::new(Oracle::default()), DegradationParams::default(), 9);
        for i in 0..200 {
            let o = obs((i as f64 * 0.1).sin(), (i as f64 * 0.07).cos() * 0.1, 0.01);
            assert_eq!(d.steer(i, &o).unwrap(), base.steer(i, &o).unwrap());
        }
    }

    #[test]
    fn latency_delays_observations() {
        let params = DegradationParams { latency_steps: 3, ..Default::default() };
        let mut d = Degraded::new(Box::new(Oracle::default()), params, 0);
        let seq: Vec<_> = (0..10).map(|i| obs(i as f64 * 0.1, 0.0, 0.0)).collect();
        let out: Vec<f64> = seq.iter().enumerate().map(|(i, o)| d.steer(i, o).unwrap()).collect();
        for i in 0..10 {
            let src = (i as usize).saturating_sub(3);
            assert_eq!(out[i], oracle_steering(&seq[src]));
        }
        d.reset();
        assert_eq!(d.steer(0, &seq[9]).unwrap(), oracle_steering(&seq[9]));
    }

    #[test]
    fn command_noise_is_reproducible() {
        let params = DegradationParams { noise_sigma: 0.25, ..Default::default() };
        let run = |seed| {
            let mut d = Degraded::new(Box::new(Constant::new(0.0)), params, seed);
            (0..50).map(|i| d.steer(i, &obs(0.0, 0.0, 0.0)).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn presets_resolve_triggers() {
        let dm = DomainModel::default_model();
        let rain = ControllerSpec::preset("rain-blind").unwrap().compile(&dm).unwrap();
        let p = rain.resolved_params(&scenario("Straight", "Rainy", 1)).unwrap().unwrap();
        assert_eq!(p.noise_sigma, 0.25);
        let p = rain.resolved_params(&scenario("Straight", "Sunny", 1)).unwrap().unwrap();
        assert_eq!(p.noise_sigma, 0.0);
        let weak = ControllerSpec::preset("curve-weak").unwrap().compile(&dm).unwrap();
        let p = weak.resolved_params(&scenario("Curved", "Sunny", 1)).unwrap().unwrap();
        assert_eq!(p.curvature_gain, 0.6);
        let p = weak.resolved_params(&scenario("SteepCurved", "Sunny", 1)).unwrap().unwrap();
        assert_eq!(p.curvature_gain, 1.0);
        for name in PRESETS {
            ControllerSpec::preset(name).unwrap().compile(&dm).unwrap();
        }
        assert!(matches!(ControllerSpec::preset("nope"), Err(ControllerError::UnknownPreset(_))));
    }

    #[test]
    fn unknown_trigger_attribute_rejected_at_load() {
        let dm = DomainModel::default_model();
        let src = r#"
kind = "degraded"
base = { kind = "oracle" }
[[degradation.trigger]]
when = "Road.surface = Icy"
bias = 0.1
"#;
        let spec = ControllerSpec::from_toml_str(src).unwrap();
        assert!(matches!(spec.compile(&dm), Err(ControllerError::Trigger { .. })));
    }

    #[test]
    fn negative_sigma_rejected() {
        let dm = DomainModel::default_model();
        let src = "kind = \"degraded\"\nbase = { kind = \"oracle\" }\n[degradation]\nnoise_sigma = -0.1\n";
        let spec = ControllerSpec::from_toml_str(src).unwrap();
        assert!(matches!(spec.compile(&dm), Err(ControllerError::Parameter { name: "noise_sigma", .. })));
    }

    #[test]
    fn spec_toml_round_trip() {
        for name in PRESETS {
            let spec = ControllerSpec::preset(name).unwrap();
            let text = spec.to_toml_string();
            assert_eq!(ControllerSpec::from_toml_str(&text).unwrap(), spec, "{text}");
        }
    }

    #[test]
    fn reference_runs_are_deterministic_and_calm_on_straights() {
        let s = scenario("Straight", "Sunny", 11);
        let mut s30 = s.clone();
        s30.values.insert("Vehicle.speed".into(), 30.into());
        let cfg = SimConfig::default();
        let a = run_reference(&s30, &cfg).unwrap();
        assert_eq!(a.len(), 1200);
        assert_eq!(a, run_reference(&s30, &cfg).unwrap());
        assert_eq!(a.provenance, Provenance::Simulated);
        assert!(a.labels.iter().all(|t| t.abs() < 1e-9));
    }

    #[test]
    fn oracle_based_bias_is_offset_exactly() {
        let s = scenario("Curved", "Sunny", 12);
        let params = DegradationParams { bias: 0.05, ..Default::default() };
        let mut c = Degraded::new(Box::new(Oracle::default()), params, s.seed);
        let (trace, _) = run_online(&s, &mut c, &SimConfig::default()).unwrap();
        for st in &trace.steps {
            assert!((st.theta_hat - st.theta - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn sunny_scenario_ignores_rain_trigger() {
        let dm = DomainModel::default_model();
        let src = "kind = \"degraded\"\nbase = { kind = \"oracle\" }\n[[degradation.trigger]]\nwhen = \"Weather.type = Rainy\"\nnoise_sigma = 0.2\n";
        let c = ControllerSpec::from_toml_str(src).unwrap().compile(&dm).unwrap();
        let sunny = scenario("Straight", "Sunny", 2);
        assert_eq!(c.resolved_params(&sunny).unwrap().unwrap(), DegradationParams::default());
        let mut bound = c.bind(Some(&sunny), sunny.seed).unwrap();
        let o = obs(0.3, -0.02, 0.01);
        assert_eq!(bound.steer(0, &o).unwrap(), oracle_steering(&o));
    }
}
