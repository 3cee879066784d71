//! Open-loop evaluation, sequence matching and offline/online agreement.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{Controller, ControllerError, LabeledSequence};
use crate::rng;
use crate::sim::OnlineResult;

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error("sequence {0} is empty")]
    EmptySequence(String),
    #[error("sequence {0} carries labels only; replay needs observations")]
    NoObservations(String),
    #[error("controller failed at index {index}: {source}")]
    Controller {
        index: usize,
        #[source]
        source: ControllerError,
    },
    #[error("simulated sequence ({sim}) is longer than the real one ({real})")]
    SequenceTooLong { sim: usize, real: usize },
    #[error("epsilon must be finite and >= 0, got {0}")]
    Epsilon(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("rank variance is zero; correlation is undefined")]
    ZeroVariance,
    #[error("scenario mismatch: offline {offline}, online {online}")]
    ScenarioMismatch { offline: String, online: String },
    #[error("threshold {name} = {value} outside {range}")]
    Threshold { name: &'static str, value: f64, range: &'static str },
}

/// Decision thresholds. Acceptability uses strict `<`; `epsilon` and
/// `consist` use `<=`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// MAE bound for offline acceptability.
    pub offline: f64,
    /// Normalised MDCL bound for online acceptability.
    pub online: f64,
    /// Mean steering difference for comparable sequences.
    pub epsilon: f64,
    /// MAE difference for consistent offline results.
    pub consist: f64,
    /// Target confidence-interval width for rule confirmation.
    pub lambda: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { offline: 0.1, online: 0.7, epsilon: 0.1, consist: 0.1, lambda: 0.2 }
    }
}

impl Thresholds {
    /// All thresholds must lie in (0, 1], except `epsilon` which may be 0.
    pub fn validate(&self) -> Result<(), OfflineError> {
        let unit = |name, value: f64| {
            if value > 0.0 && value <= 1.0 {
                Ok(())
            } else {
                Err(OfflineError::Threshold { name, value, range: "(0, 1]" })
            }
        };
        unit("offline", self.offline)?;
        unit("online", self.online)?;
        unit("consist", self.consist)?;
        unit("lambda", self.lambda)?;
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(OfflineError::Threshold { name: "epsilon", value: self.epsilon, range: "[0, 1]" });
        }
        Ok(())
    }

    pub fn label(&self, mae: f64, mdcl: f64) -> Label {
        if (mae < self.offline) == (mdcl < self.online) {
            Label::Agree
        } else {
            Label::Disagree
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineResult {
    pub scenario_id: String,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
    pub acceptable: bool,
}

impl OfflineResult {
    pub fn from_errors(scenario_id: &str, errors: &[f64], offline_threshold: f64) -> Self {
        let n = errors.len();
        let mae = mean(errors.iter().map(|e| e.abs()), n);
        let rmse = mean(errors.iter().map(|e| e * e), n).sqrt();
        OfflineResult { scenario_id: scenario_id.to_string(), mae, rmse, n, acceptable: mae < offline_threshold }
    }
}

/// Mean of `n` values, taken as offsets from the first one with Neumaier
/// summation. A constant error `b` then averages to exactly `b` instead of
/// drifting across a threshold after a thousand steps.
fn mean(mut xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    let pivot = xs.next().unwrap_or(0.0);
    pivot + compensated_sum(xs.map(|x| x - pivot)) / n as f64
}

fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Feeds the sequence's observations to a freshly reset controller and
/// scores its commands against the labels.
pub fn replay(
    controller: &mut dyn Controller,
    seq: &LabeledSequence,
    offline_threshold: f64,
) -> Result<OfflineResult, OfflineError> {
    if seq.is_empty() {
        return Err(OfflineError::EmptySequence(seq.scenario_id.clone()));
    }
    if seq.observations.len() != seq.labels.len() {
        return Err(OfflineError::NoObservations(seq.scenario_id.clone()));
    }
    controller.reset();
    let mut errors = Vec::with_capacity(seq.len());
    for (index, (obs, theta)) in seq.observations.iter().zip(&seq.labels).enumerate() {
        let predicted = controller
            .steer(index, obs)
            .map_err(|source| OfflineError::Controller { index, source })?
            .clamp(-1.0, 1.0);
        errors.push(theta - predicted);
    }
    Ok(OfflineResult::from_errors(&seq.scenario_id, &errors, offline_threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// Start index of the best window in the real sequence.
    pub x: usize,
    /// Window length, equal to the simulated sequence length.
    pub l: usize,
    pub mean_diff: f64,
    pub comparable: bool,
    /// Number of windows attaining the minimum.
    pub ties: usize,
    /// Seed used to pick among tied windows.
    pub tie_seed: u64,
}

/// Finds the window of `real` closest to `sim` in mean absolute steering
/// difference. Every offset is scanned; a window is abandoned once its
/// partial sum exceeds the best complete sum, which cannot change the
/// minimum. Tied windows are resolved by a uniform draw keyed on `tie_seed`.
pub fn match_subsequence(sim: &[f64], real: &[f64], epsilon: f64, tie_seed: u64) -> Result<MatchResult, OfflineError> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(OfflineError::Epsilon(epsilon));
    }
    let l = sim.len();
    if l == 0 {
        return Err(OfflineError::EmptySequence("sim".into()));
    }
    if l > real.len() {
        return Err(OfflineError::SequenceTooLong { sim: l, real: real.len() });
    }
    let mut best = f64::INFINITY;
    let mut argmins: Vec<usize> = Vec::new();
    'windows: for x in 0..=real.len() - l {
        let mut sum = 0.0;
        for (a, b) in sim.iter().zip(&real[x..x + l]) {
            sum += (a - b).abs();
            if sum > best {
                continue 'windows;
            }
        }
        if sum < best {
            best = sum;
            argmins.clear();
        }
        argmins.push(x);
    }
    let pick = if argmins.len() == 1 {
        0
    } else {
        rng::rng(tie_seed).random_range(0..argmins.len())
    };
    let mean_diff = best / l as f64;
    Ok(MatchResult {
        x: argmins[pick],
        l,
        mean_diff,
        comparable: mean_diff <= epsilon,
        ties: argmins.len(),
        tie_seed,
    })
}

pub fn consistent(mae_sim: f64, mae_real: f64, tau_consist: f64) -> bool {
    (mae_sim - mae_real).abs() <= tau_consist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Agree,
    Disagree,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Agree => "agree",
            Label::Disagree => "disagree",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agree" => Ok(Label::Agree),
            "disagree" => Ok(Label::Disagree),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRecord {
    pub scenario_id: String,
    pub mae: f64,
    pub rmse: f64,
    pub mdcl_raw: f64,
    pub mdcl: f64,
    pub acceptable_offline: bool,
    pub acceptable_online: bool,
    pub label: Label,
}

/// Combines the two verdicts for one scenario. Acceptability is recomputed
/// from the raw metrics with `thresholds`.
pub fn classify(
    scenario_id: &str,
    offline: &OfflineResult,
    online: &OnlineResult,
    thresholds: &Thresholds,
) -> Result<AgreementRecord, OfflineError> {
    if offline.scenario_id != scenario_id {
        return Err(OfflineError::ScenarioMismatch {
            offline: offline.scenario_id.clone(),
            online: scenario_id.to_string(),
        });
    }
    let acceptable_offline = offline.mae < thresholds.offline;
    let acceptable_online = online.mdcl < thresholds.online;
    Ok(AgreementRecord {
        scenario_id: scenario_id.to_string(),
        mae: offline.mae,
        rmse: offline.rmse,
        mdcl_raw: online.mdcl_raw,
        mdcl: online.mdcl,
        acceptable_offline,
        acceptable_online,
        label: thresholds.label(offline.mae, online.mdcl),
    })
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, OfflineError> {
    if xs.len() != ys.len() {
        return Err(OfflineError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(OfflineError::TooFewSamples(xs.len()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(OfflineError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Scenario counts by online (rows) and offline (columns) acceptability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Contingency {
    pub online_ok_offline_ok: usize,
    pub online_ok_offline_bad: usize,
    pub online_bad_offline_ok: usize,
    pub online_bad_offline_bad: usize,
}

impl Contingency {
    pub fn total(&self) -> usize {
        self.online_ok_offline_ok + self.online_ok_offline_bad + self.online_bad_offline_ok + self.online_bad_offline_bad
    }

    pub fn disagreements(&self) -> usize {
        self.online_ok_offline_bad + self.online_bad_offline_ok
    }

    pub fn to_markdown(&self, offline: f64, online: f64) -> String {
        format!(
            "| | MAE < {offline} | MAE >= {offline} |\n|---|---|---|\n\
             | MDCL < {online} | {} | {} |\n| MDCL >= {online} | {} | {} |\n",
            self.online_ok_offline_ok, self.online_ok_offline_bad, self.online_bad_offline_ok, self.online_bad_offline_bad
        )
    }
}

pub fn contingency(records: &[AgreementRecord]) -> Contingency {
    let mut c = Contingency::default();
    for r in records {
        match (r.acceptable_online, r.acceptable_offline) {
            (true, true) => c.online_ok_offline_ok += 1,
            (true, false) => c.online_ok_offline_bad += 1,
            (false, true) => c.online_bad_offline_ok += 1,
            (false, false) => c.online_bad_offline_bad += 1,
        }
    }
    c
}
