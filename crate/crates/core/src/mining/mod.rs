//! Explaining offline/online disagreement: attribute selection by forest
//! importance, rule induction, and interval-driven rule confirmation.

pub mod data;
pub mod forest;
pub mod ripper;
pub mod wilson;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub use data::{Dataset, LabeledVector, Schema};
pub use forest::{permutation_importance, select_attributes, train_forest, Forest, ForestParams, Importance, Selection};
pub use ripper::{ripper, ripper_unchecked, Condition, Rule, RuleSet};
pub use wilson::{confirm_rule, wilson_ci, wilson_width, ConfirmConfig, Confirmation, Z95};

use crate::controllers::CompiledController;
use crate::covergen::{self, CoverError};
use crate::domain::{DomainError, DomainModel, Scenario};
use crate::evaluation::{evaluate, evaluate_all, EvalError, Harness};
use crate::offline::{AgreementRecord, Label};
use crate::rng;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("need at least {need} vectors, got {got}")]
    TooFewVectors { got: usize, need: usize },
    #[error("all vectors carry the same label")]
    SingleLabel,
    #[error("dataset has no attributes")]
    NoAttributes,
    #[error("forest and data disagree on the schema")]
    SchemaMismatch,
    #[error("configuration: {0}")]
    Config(String),
    #[error("rule antecedent `{0}` is unsatisfiable in the domain model")]
    Unsatisfiable(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiningConfig {
    pub seed: u64,
    pub forest: ForestParams,
    /// Permutation repetitions per attribute.
    pub repetitions: usize,
    pub confirm: ConfirmConfig,
    /// Covering strength of the first scenario batch.
    pub initial_strength: usize,
    /// Upper bound on the strength of the second batch.
    pub refine_strength: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            seed: 0,
            forest: ForestParams::default(),
            repetitions: 20,
            confirm: ConfirmConfig::default(),
            initial_strength: 2,
            refine_strength: 3,
        }
    }
}

/// One evaluated scenario, kept for auditing.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRow {
    /// `initial`, `refine` or `confirm-<rule>`.
    pub stage: String,
    pub scenario: Scenario,
    pub record: AgreementRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub antecedent: String,
    /// `(attribute, level)` pairs; empty for the default rule.
    pub conditions: Vec<(String, String)>,
    pub label: Label,
    pub training_support: usize,
    pub training_accuracy: f64,
    /// Prior plus confirmation samples.
    pub support: usize,
    pub accuracy: f64,
    pub ci: (f64, f64),
    pub half_width: f64,
    pub n_confirm: usize,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiningReport {
    pub seed: u64,
    pub lambda: f64,
    pub initial_vectors: usize,
    pub refine_vectors: usize,
    /// `(agree, disagree)` over the initial batch.
    pub initial_labels: (usize, usize),
    pub oob_accuracy: Option<f64>,
    pub importances: Vec<Importance>,
    pub selected: Vec<String>,
    /// No attribute passed the importance test; the top two were used.
    pub selection_fallback: bool,
    /// Labels were uniform, so only a default rule was produced.
    pub degenerate: bool,
    pub rules: Vec<RuleReport>,
}

impl MiningReport {
    pub fn budget_flags(&self) -> usize {
        self.rules.iter().filter(|r| r.budget_exhausted).count()
    }

    /// Rules with accuracy and symmetric half-width, one row per rule.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Mined rules\n");
        let _ = writeln!(
            s,
            "Seed {}; initial vectors {} ({} agree, {} disagree); refine vectors {}.\n",
            self.seed, self.initial_vectors, self.initial_labels.0, self.initial_labels.1, self.refine_vectors
        );
        let sel = if self.selected.is_empty() { "(none)".to_string() } else { self.selected.join(", ") };
        let _ = writeln!(s, "Selected attributes: {sel}{}\n", if self.selection_fallback { " (fallback: low confidence)" } else { "" });
        if self.degenerate {
            let _ = writeln!(s, "Labels are uniform; the rule set is degenerate.\n");
        }
        let _ = writeln!(s, "| # | Rule | Label | Accuracy | 95% CI | Support | Confirmed |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for (i, r) in self.rules.iter().enumerate() {
            let flag = if r.budget_exhausted { " (budget exhausted)" } else { "" };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.2} ± {:.2} | [{:.3}, {:.3}] | {} | {}{} |",
                i + 1,
                r.antecedent,
                r.label,
                r.accuracy,
                r.half_width,
                r.ci.0,
                r.ci.1,
                r.support,
                r.n_confirm,
                flag
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct MiningOutcome {
    pub report: MiningReport,
    pub rule_set: RuleSet,
    /// Sorted by stage, then scenario id.
    pub rows: Vec<ScenarioRow>,
}

fn rows_for(stage: &str, scenarios: &[Scenario], records: Vec<AgreementRecord>) -> Vec<ScenarioRow> {
    let mut by_id: Vec<&Scenario> = scenarios.iter().collect();
    by_id.sort_by(|a, b| a.id.cmp(&b.id));
    by_id
        .into_iter()
        .zip(records)
        .map(|(s, record)| ScenarioRow { stage: stage.to_string(), scenario: s.clone(), record })
        .collect()
}

fn vectors(schema: &Schema, dm: &DomainModel, rows: &[ScenarioRow]) -> Result<Vec<LabeledVector>, MiningError> {
    rows.iter()
        .map(|r| Ok(schema.vectorize(dm, &r.scenario, r.record.label)?))
        .collect()
}

/// Three steps:
///
/// 1. Evaluate a covering array over the whole model, train a forest on the
///    labels and select attributes by permutation importance.
/// 2. Evaluate a covering array over the selected attributes (strength
///    `min(refine_strength, selected)`; other attributes random) and learn
///    rules on the union, restricted to the selected attributes.
/// 3. Confirm every rule with fresh samples from its first-match region.
pub fn mine_pipeline(
    dm: &DomainModel,
    controller: &CompiledController,
    harness: &Harness,
    cfg: &MiningConfig,
) -> Result<MiningOutcome, MiningError> {
    let stream = |k: u64| rng::derive_path(cfg.seed, &[0x4d49_4e45, k]);
    let full = Schema::from_model(dm, None)?;

    let strength = cfg.initial_strength.min(dm.attributes().len());
    let initial = covergen::generate_covering_array(dm, strength, stream(1))?;
    let evals = evaluate_all(&initial.scenarios, controller, harness, false)?;
    let mut rows = rows_for("initial", &initial.scenarios, evals.into_iter().map(|e| e.record).collect());
    let initial_data = Dataset::new(full.clone(), vectors(&full, dm, &rows)?);
    let initial_labels = initial_data.label_counts();
    let degenerate = initial_labels.0 == 0 || initial_labels.1 == 0;

    let mut oob_accuracy = None;
    let mut importances = Vec::new();
    let mut selection = Selection { selected: Vec::new(), fallback: false };
    let mut refine_vectors = 0;
    let rule_set = if degenerate {
        ripper_unchecked(&initial_data, stream(5))
    } else {
        let forest = train_forest(&initial_data, cfg.forest, stream(2))?;
        oob_accuracy = Some(forest.oob_accuracy);
        importances = permutation_importance(&forest, &initial_data, cfg.repetitions, stream(3))?;
        selection = select_attributes(&importances);
        let names: Vec<String> = selection.selected.iter().map(|&i| full.attributes[i].clone()).collect();

        let strength = cfg.refine_strength.min(names.len()).max(1);
        let refine = covergen::generate_over(dm, &selection.selected, strength, stream(4), "refine")?;
        let evals = evaluate_all(&refine.scenarios, controller, harness, false)?;
        let refine_rows = rows_for("refine", &refine.scenarios, evals.into_iter().map(|e| e.record).collect());
        refine_vectors = refine_rows.len();
        rows.extend(refine_rows);

        let union = Dataset::new(full.clone(), vectors(&full, dm, &rows)?).project(&selection.selected);
        let (a, d) = union.label_counts();
        if a == 0 || d == 0 {
            ripper_unchecked(&union, stream(5))
        } else {
            ripper(&union, stream(5))?
        }
    };

    let oracle = |s: &Scenario| -> Result<(Label, AgreementRecord), MiningError> {
        let e = evaluate(s, controller, harness, false)?;
        Ok((e.record.label, e.record))
    };
    let mut reports = Vec::with_capacity(rule_set.rules.len());
    for (i, trained) in rule_set.rules.iter().enumerate() {
        let c = confirm_rule(&rule_set, i, dm, &oracle, &cfg.confirm, stream(6))?;
        let stage = format!("confirm-{:02}", i + 1);
        rows.extend(c.samples.into_iter().map(|s| ScenarioRow { stage: stage.clone(), scenario: s.scenario, record: s.payload }));
        let r = &c.rule;
        reports.push(RuleReport {
            antecedent: r.antecedent_text(&rule_set.schema),
            conditions: r
                .conditions
                .iter()
                .map(|c| (rule_set.schema.attributes[c.attr].clone(), rule_set.schema.levels[c.attr][c.level].clone()))
                .collect(),
            label: r.label,
            training_support: trained.support,
            training_accuracy: trained.accuracy,
            support: r.support,
            accuracy: r.accuracy,
            ci: r.ci,
            half_width: (r.ci.1 - r.ci.0) / 2.0,
            n_confirm: r.support - c.prior.1,
            budget_exhausted: c.budget_exhausted,
        });
    }

    let report = MiningReport {
        seed: cfg.seed,
        lambda: cfg.confirm.lambda,
        initial_vectors: initial.scenarios.len(),
        refine_vectors,
        initial_labels,
        oob_accuracy,
        importances,
        selected: selection.selected.iter().map(|&i| full.attributes[i].clone()).collect(),
        selection_fallback: selection.fallback,
        degenerate: degenerate || rule_set.rules.len() == 1,
        rules: reports,
    };
    Ok(MiningOutcome { report, rule_set, rows })
}
