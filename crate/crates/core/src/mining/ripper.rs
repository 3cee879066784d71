//! Rule induction: the IREP* core of RIPPER with a description-length stop.
//!
//! The minority label is learned as the positive class. Each rule is grown
//! on two thirds of the remaining data by FOIL gain and pruned on the other
//! third; rules are added until one covers no positives or the total
//! description length exceeds the best seen by more than [`MDL_SLACK_BITS`].
//! A default rule predicting the majority of the uncovered rows closes the
//! list. The global optimisation passes of full RIPPER are not run.

use rand::seq::SliceRandom;
use serde::Serialize;

use super::data::{label_index, Dataset, Schema, LABELS};
use super::wilson::wilson_ci;
use super::MiningError;
use crate::offline::Label;
use crate::rng;

pub const MDL_SLACK_BITS: f64 = 64.0;
/// Weight of the theory bits relative to the exception bits.
const THEORY_WEIGHT: f64 = 0.5;

/// `attribute = level` on level-coded vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Condition {
    pub attr: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    /// Conjunction; empty for the default rule.
    pub conditions: Vec<Condition>,
    pub label: Label,
    /// Rows this rule is the first match for.
    pub support: usize,
    /// Of those, rows carrying `label`.
    pub correct: usize,
    pub accuracy: f64,
    pub ci: (f64, f64),
}

impl Rule {
    pub fn matches(&self, levels: &[usize]) -> bool {
        self.conditions.iter().all(|c| levels[c.attr] == c.level)
    }

    pub fn is_default(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Recomputes accuracy and interval from `correct` and `support`.
    pub fn set_evidence(&mut self, correct: usize, support: usize) {
        self.correct = correct;
        self.support = support;
        if support == 0 {
            self.accuracy = 0.0;
            self.ci = (0.0, 1.0);
        } else {
            self.accuracy = correct as f64 / support as f64;
            self.ci = wilson_ci(correct, support);
        }
    }

    pub fn antecedent_text(&self, schema: &Schema) -> String {
        if self.conditions.is_empty() {
            return "(default)".into();
        }
        self.conditions
            .iter()
            .map(|c| {
                let level = &schema.levels[c.attr][c.level];
                if level.starts_with('[') {
                    format!("{} in {}", schema.attributes[c.attr], level)
                } else {
                    format!("{} = {}", schema.attributes[c.attr], level)
                }
            })
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    pub schema: Schema,
    /// Ordered; the last rule is the default rule.
    pub rules: Vec<Rule>,
}

impl RuleSet {
    /// Index of the first rule matching `levels`.
    pub fn first_match(&self, levels: &[usize]) -> usize {
        self.rules.iter().position(|r| r.matches(levels)).expect("default rule matches everything")
    }

    pub fn predict(&self, levels: &[usize]) -> Label {
        self.rules[self.first_match(levels)].label
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let hits = data.rows.iter().filter(|r| self.predict(&r.levels) == r.label).count();
        hits as f64 / data.len().max(1) as f64
    }

    /// First-match support and accuracy of every rule on `data`.
    pub fn score(&mut self, data: &Dataset) {
        let mut support = vec![0usize; self.rules.len()];
        let mut correct = vec![0usize; self.rules.len()];
        for row in &data.rows {
            let i = self.first_match(&row.levels);
            support[i] += 1;
            if self.rules[i].label == row.label {
                correct[i] += 1;
            }
        }
        for (i, rule) in self.rules.iter_mut().enumerate() {
            rule.set_evidence(correct[i], support[i]);
        }
    }
}

fn log2(x: f64) -> f64 {
    x.log2()
}

/// Bits to identify `k` elements of a `t`-set when each is chosen with
/// probability `p`.
fn subset_dl(t: f64, k: f64, p: f64) -> f64 {
    let mut bits = 0.0;
    if k > 0.0 {
        bits -= k * log2(p);
    }
    if t - k > 0.0 {
        bits -= (t - k) * log2(1.0 - p);
    }
    bits
}

fn theory_dl(k: usize, possible: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    let mut bits = log2(k);
    if k > 1.0 {
        bits += 2.0 * log2(bits);
    }
    bits += subset_dl(possible as f64, k, k / possible as f64);
    THEORY_WEIGHT * bits
}

/// Bits for the exceptions of a rule set that covers `cover` rows (with `fp`
/// false positives) and leaves `uncover` rows (with `fn_` false negatives).
fn data_dl(exp_fp_rate: f64, cover: f64, uncover: f64, fp: f64, fn_: f64) -> f64 {
    let total = log2(cover + uncover + 1.0);
    let (cover_bits, uncover_bits) = if cover > uncover {
        let exp_err = exp_fp_rate * (fp + fn_);
        let c = subset_dl(cover, fp, (exp_err / cover).clamp(0.0, 1.0));
        let u = if uncover > 0.0 { subset_dl(uncover, fn_, fn_ / uncover) } else { 0.0 };
        (c, u)
    } else {
        let exp_err = (1.0 - exp_fp_rate) * (fp + fn_);
        let c = if cover > 0.0 { subset_dl(cover, fp, fp / cover) } else { 0.0 };
        let u = subset_dl(uncover, fn_, (exp_err / uncover).clamp(0.0, 1.0));
        (c, u)
    };
    total + cover_bits + uncover_bits
}

struct Learner<'a> {
    data: &'a Dataset,
    positive: Label,
}

impl Learner<'_> {
    fn is_pos(&self, i: usize) -> bool {
        self.data.rows[i].label == self.positive
    }

    fn covers(&self, conds: &[Condition], i: usize) -> bool {
        conds.iter().all(|c| self.data.rows[i].levels[c.attr] == c.level)
    }

    fn pn(&self, conds: &[Condition], rows: &[usize]) -> (usize, usize) {
        let mut p = 0;
        let mut n = 0;
        for &i in rows {
            if self.covers(conds, i) {
                if self.is_pos(i) {
                    p += 1;
                } else {
                    n += 1;
                }
            }
        }
        (p, n)
    }

    /// Adds conditions by FOIL gain until no negatives are covered or no
    /// condition has positive gain. Candidates are scanned in (attribute,
    /// level) order; the first maximum wins.
    fn grow(&self, rows: &[usize]) -> Vec<Condition> {
        let mut conds: Vec<Condition> = Vec::new();
        let mut covered: Vec<usize> = rows.to_vec();
        loop {
            let (p0, n0) = self.pn(&[], &covered);
            if n0 == 0 || p0 == 0 {
                return conds;
            }
            let base = log2(p0 as f64 / (p0 + n0) as f64);
            let mut best: Option<(f64, Condition)> = None;
            for attr in 0..self.data.schema.len() {
                if conds.iter().any(|c| c.attr == attr) {
                    continue;
                }
                for level in 0..self.data.schema.level_count(attr) {
                    let c = Condition { attr, level };
                    let (p1, n1) = self.pn(&[c], &covered);
                    if p1 == 0 {
                        continue;
                    }
                    let gain = p1 as f64 * (log2(p1 as f64 / (p1 + n1) as f64) - base);
                    if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                        best = Some((gain, c));
                    }
                }
            }
            let Some((_, c)) = best else {
                return conds;
            };
            conds.push(c);
            covered.retain(|&i| self.data.rows[i].levels[c.attr] == c.level);
        }
    }

    /// Keeps the prefix maximising `(p - n) / (p + n)` on the prune rows;
    /// ties keep the longer prefix. A prefix covering no prune rows scores
    /// 0: it makes no error there, which beats covering only negatives.
    fn prune(&self, conds: Vec<Condition>, rows: &[usize]) -> Vec<Condition> {
        let mut best: Option<(f64, usize)> = None;
        for k in (1..=conds.len()).rev() {
            let (p, n) = self.pn(&conds[..k], rows);
            let v = if p + n == 0 { 0.0 } else { (p as f64 - n as f64) / (p + n) as f64 };
            if best.is_none_or(|b| v > b.0) {
                best = Some((v, k));
            }
        }
        match best {
            Some((_, k)) => conds[..k].to_vec(),
            None => conds,
        }
    }

    fn ruleset_dl(&self, rules: &[Vec<Condition>], exp_fp_rate: f64) -> f64 {
        let possible = self.data.schema.condition_count();
        let theory: f64 = rules.iter().map(|r| theory_dl(r.len(), possible)).sum();
        let (mut cover, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..self.data.len() {
            let hit = rules.iter().any(|r| self.covers(r, i));
            if hit {
                cover += 1.0;
                if !self.is_pos(i) {
                    fp += 1.0;
                }
            } else if self.is_pos(i) {
                fn_ += 1.0;
            }
        }
        let uncover = self.data.len() as f64 - cover;
        theory + data_dl(exp_fp_rate, cover, uncover, fp, fn_)
    }
}

const SPLIT_STREAM: u64 = 0x4952_4550;

/// Learns an ordered rule list. Requires at least 10 rows and both labels.
pub fn ripper(data: &Dataset, seed: u64) -> Result<RuleSet, MiningError> {
    if data.len() < super::forest::MIN_VECTORS {
        return Err(MiningError::TooFewVectors { got: data.len(), need: super::forest::MIN_VECTORS });
    }
    let (a, d) = data.label_counts();
    if a == 0 || d == 0 {
        return Err(MiningError::SingleLabel);
    }
    Ok(ripper_unchecked(data, seed))
}

/// [`ripper`] without the input checks; degenerate data yields only the
/// default rule.
pub fn ripper_unchecked(data: &Dataset, seed: u64) -> RuleSet {
    let (agree, disagree) = data.label_counts();
    // Ties make `disagree` the positive class.
    let positive = if disagree <= agree { Label::Disagree } else { Label::Agree };
    let negative = LABELS[1 - label_index(positive)];
    let learner = Learner { data, positive };
    let total_pos = agree.min(disagree);
    let exp_fp_rate = if data.is_empty() { 0.0 } else { total_pos as f64 / data.len() as f64 };

    let mut rules: Vec<Vec<Condition>> = Vec::new();
    let mut remaining: Vec<usize> = (0..data.len()).collect();
    let mut best_dl = learner.ruleset_dl(&rules, exp_fp_rate);
    let mut round = 0u64;
    while remaining.iter().any(|&i| learner.is_pos(i)) && !data.schema.is_empty() {
        let mut r = rng::rng(rng::derive_path(seed, &[SPLIT_STREAM, round]));
        round += 1;
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&i| learner.is_pos(i));
        pos.shuffle(&mut r);
        neg.shuffle(&mut r);
        let gp = (2 * pos.len()).div_ceil(3);
        let gn = (2 * neg.len()).div_ceil(3);
        let grow_rows: Vec<usize> = pos[..gp].iter().chain(&neg[..gn]).copied().collect();
        let prune_rows: Vec<usize> = pos[gp..].iter().chain(&neg[gn..]).copied().collect();

        let conds = learner.prune(learner.grow(&grow_rows), &prune_rows);
        let (p, _) = learner.pn(&conds, &remaining);
        if p == 0 || conds.is_empty() {
            break;
        }
        rules.push(conds);
        let dl = learner.ruleset_dl(&rules, exp_fp_rate);
        if dl > best_dl + MDL_SLACK_BITS {
            rules.pop();
            break;
        }
        best_dl = best_dl.min(dl);
        let last = rules.last().unwrap();
        remaining.retain(|&i| !learner.covers(last, i));
    }

    // Delete rules, newest first, whenever that shortens the description.
    let mut dl = learner.ruleset_dl(&rules, exp_fp_rate);
    for i in (0..rules.len()).rev() {
        let mut without = rules.clone();
        without.remove(i);
        let shorter = learner.ruleset_dl(&without, exp_fp_rate);
        if shorter < dl {
            rules = without;
            dl = shorter;
        }
    }
    let remaining: Vec<usize> =
        (0..data.len()).filter(|&i| !rules.iter().any(|r| learner.covers(r, i))).collect();

    let left_pos = remaining.iter().filter(|&&i| learner.is_pos(i)).count();
    let default_label = if left_pos > remaining.len() - left_pos { positive } else { negative };
    let mut set = RuleSet {
        schema: data.schema.clone(),
        rules: rules
            .into_iter()
            .map(|mut conditions| {
                conditions.sort();
                Rule { conditions, label: positive, support: 0, correct: 0, accuracy: 0.0, ci: (0.0, 1.0) }
            })
            .chain(std::iter::once(Rule {
                conditions: vec![],
                label: default_label,
                support: 0,
                correct: 0,
                accuracy: 0.0,
                ci: (0.0, 1.0),
            }))
            .collect(),
    };
    set.score(data);
    set
}
