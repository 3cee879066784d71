//! Wilson score intervals and interval-driven rule confirmation.

use rayon::prelude::*;
use serde::Serialize;

use super::ripper::{Rule, RuleSet};
use super::MiningError;
use crate::domain::{DomainModel, Expr, Outcome, Scenario};
use crate::offline::Label;
use crate::rng;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Wilson score interval for `k` successes in `n` trials at 95%.
/// `k = 0` gives a lower bound of exactly 0 and `k = n` an upper bound of
/// exactly 1.
pub fn wilson_ci(k: usize, n: usize) -> (f64, f64) {
    assert!(n >= 1 && k <= n, "wilson_ci needs 0 <= k <= n, n >= 1 (k={k}, n={n})");
    let (kf, nf) = (k as f64, n as f64);
    let p = kf / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if k == n { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

pub fn wilson_width(k: usize, n: usize) -> f64 {
    let (lo, hi) = wilson_ci(k, n);
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfirmConfig {
    /// Target interval width.
    pub lambda: f64,
    /// Maximum number of new samples per rule.
    pub budget: usize,
    /// Samples evaluated concurrently; results are consumed in order.
    pub batch: usize,
}

impl Default for ConfirmConfig {
    fn default() -> Self {
        ConfirmConfig { lambda: 0.2, budget: 200, batch: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct ConfirmSample<T> {
    pub scenario: Scenario,
    pub label: Label,
    pub payload: T,
}

#[derive(Debug, Clone)]
pub struct Confirmation<T> {
    /// The rule with accuracy and interval over prior plus new evidence.
    pub rule: Rule,
    /// `(correct, support)` the rule started from.
    pub prior: (usize, usize),
    pub samples: Vec<ConfirmSample<T>>,
    pub budget_exhausted: bool,
}

const CONFIRM_STREAM: u64 = 0x434f_4e46;

/// Scenarios for which `rules[index]` is the first match: its conditions
/// hold and no earlier rule's conditions all hold.
fn first_match_region(rules: &RuleSet, index: usize, dm: &DomainModel) -> Result<(Vec<crate::domain::Allowed>, Vec<Expr>), MiningError> {
    let mut allowed = dm.full_domains();
    for c in &rules.rules[index].conditions {
        let (i, dom) = rules.schema.level_domain(dm, c.attr, c.level)?;
        allowed[i] = dom;
    }
    let mut extra = Vec::new();
    for earlier in &rules.rules[..index] {
        let parts = earlier
            .conditions
            .iter()
            .map(|c| rules.schema.level_expr(dm, c.attr, c.level))
            .collect::<Result<Vec<_>, _>>()?;
        extra.push(Expr::Not(Box::new(Expr::And(parts))));
    }
    Ok((allowed, extra))
}

/// Adds labelled samples from the rule's first-match region until the
/// Wilson interval of its accuracy is narrower than `lambda` or the budget
/// runs out. Sampling starts from the rule's existing `(correct, support)`.
/// Sample `i` of rule `index` is seeded from `(seed, index, i)`, so results
/// do not depend on the batch size or thread count.
pub fn confirm_rule<T, F>(
    rules: &RuleSet,
    index: usize,
    dm: &DomainModel,
    oracle: &F,
    cfg: &ConfirmConfig,
    seed: u64,
) -> Result<Confirmation<T>, MiningError>
where
    T: Send,
    F: Fn(&Scenario) -> Result<(Label, T), MiningError> + Sync,
{
    if !(cfg.lambda > 0.0) || cfg.batch == 0 {
        return Err(MiningError::Config(format!("lambda {} / batch {} invalid", cfg.lambda, cfg.batch)));
    }
    let mut rule = rules.rules[index].clone();
    let (allowed, extra) = first_match_region(rules, index, dm)?;
    let extra_refs: Vec<&Expr> = extra.iter().collect();
    if dm.search(&allowed, &extra_refs, None) == Outcome::Infeasible {
        return Err(MiningError::Unsatisfiable(rule.antecedent_text(&rules.schema)));
    }

    let prior = (rule.correct, rule.support);
    let (mut k, mut n) = prior;
    let done = |k: usize, n: usize| n >= 1 && wilson_width(k, n) < cfg.lambda;
    let mut samples: Vec<ConfirmSample<T>> = Vec::new();
    let mut budget_exhausted = false;
    'outer: while !done(k, n) {
        let used = samples.len();
        if used >= cfg.budget {
            budget_exhausted = true;
            break;
        }
        let take = cfg.batch.min(cfg.budget - used);
        let batch: Vec<Result<ConfirmSample<T>, MiningError>> = (used..used + take)
            .into_par_iter()
            .map(|i| {
                let s = rng::derive_path(seed, &[CONFIRM_STREAM, index as u64, i as u64]);
                let codes = dm.complete_within(&allowed, &extra_refs, s)?;
                let scenario = dm.scenario_from_codes(format!("cf{index:02}-{i:03}"), s, &codes);
                let (label, payload) = oracle(&scenario)?;
                Ok(ConfirmSample { scenario, label, payload })
            })
            .collect();
        for sample in batch {
            let sample = sample?;
            n += 1;
            if sample.label == rule.label {
                k += 1;
            }
            samples.push(sample);
            if done(k, n) {
                break 'outer;
            }
        }
    }
    rule.set_evidence(k, n);
    Ok(Confirmation { rule, prior, samples, budget_exhausted })
}
