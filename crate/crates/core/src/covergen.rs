//! Constraint-aware n-way covering arrays and a coverage auditor.
//!
//! Coverage is measured over attribute *levels* (see
//! [`AttributeDef::levels`](crate::domain::AttributeDef::levels)). A tuple
//! is a choice of `n` attributes together with one level for each; it is
//! feasible when some valid scenario contains it. Feasibility is decided by
//! bounded backtracking search, and tuples the search cannot decide stay in
//! the target set.
//!
//! Rows are added greedily: each round builds [`CANDIDATES`] candidate rows
//! (seeded with an uncovered tuple, then filled attribute by attribute with
//! the level that covers the most uncovered tuples while keeping the partial
//! row completable) and keeps the one covering the most uncovered tuples.
//! Ties go to the lowest candidate index, so the result is independent of
//! how the candidates are scheduled across threads.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{Allowed, DomainError, DomainModel, Outcome, Scenario};
use crate::rng;

/// Candidate rows scored per greedy round.
pub const CANDIDATES: usize = 50;
/// Node budget for each tuple-feasibility decision.
pub const FEASIBILITY_BUDGET: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error("strength {strength} out of range 1..={attributes}")]
    Strength { strength: usize, attributes: usize },
    #[error("tuple {0} could not be covered by any valid scenario")]
    Uncoverable(String),
    #[error("scenario `{id}` is not valid: {reason}")]
    InvalidScenario { id: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringArray {
    pub strength: usize,
    pub scenarios: Vec<Scenario>,
    pub covered: usize,
    pub feasible_total: usize,
}

/// One n-way combination of attribute levels, by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub entries: Vec<(String, String)>,
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, l)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}={l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub covered: usize,
    pub feasible_total: usize,
    pub missing: Vec<Tuple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Infeasible,
    Feasible,
    Undecided,
}

/// Enumeration of all n-way tuples over a set of attributes.
struct TupleSpace<'a> {
    dm: &'a DomainModel,
    levels: Vec<Vec<Allowed>>,
    /// Attribute subsets (sorted attribute indices).
    subsets: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    total: usize,
    /// For each attribute, the subsets containing it.
    by_attr: Vec<Vec<usize>>,
}

impl<'a> TupleSpace<'a> {
    fn new(dm: &'a DomainModel, attrs: &[usize], strength: usize) -> Self {
        let levels: Vec<Vec<Allowed>> = dm
            .attributes()
            .iter()
            .map(|a| a.levels().into_iter().map(|l| l.allowed).collect())
            .collect();
        let subsets = combinations(attrs, strength);
        let mut offsets = Vec::with_capacity(subsets.len());
        let mut total = 0;
        let mut by_attr = vec![Vec::new(); dm.attributes().len()];
        for (si, s) in subsets.iter().enumerate() {
            offsets.push(total);
            total += s.iter().map(|&a| levels[a].len()).product::<usize>();
            for &a in s {
                by_attr[a].push(si);
            }
        }
        TupleSpace { dm, levels, subsets, offsets, total, by_attr }
    }

    /// Mixed-radix index of a level choice within a subset.
    fn index(&self, subset: usize, level_of: impl Fn(usize) -> usize) -> usize {
        let mut idx = 0;
        for &a in &self.subsets[subset] {
            idx = idx * self.levels[a].len() + level_of(a);
        }
        self.offsets[subset] + idx
    }

    fn decode(&self, tuple: usize) -> (usize, Vec<usize>) {
        let subset = self.offsets.partition_point(|&o| o <= tuple) - 1;
        let mut rem = tuple - self.offsets[subset];
        let attrs = &self.subsets[subset];
        let mut lv = vec![0; attrs.len()];
        for (k, &a) in attrs.iter().enumerate().rev() {
            let n = self.levels[a].len();
            lv[k] = rem % n;
            rem /= n;
        }
        (subset, lv)
    }

    fn restriction(&self, tuple: usize) -> Vec<Allowed> {
        let (subset, lv) = self.decode(tuple);
        let mut allowed = self.dm.full_domains();
        for (&a, &l) in self.subsets[subset].iter().zip(&lv) {
            allowed[a] = self.levels[a][l].clone();
        }
        allowed
    }

    fn describe(&self, tuple: usize) -> Tuple {
        let (subset, lv) = self.decode(tuple);
        let attrs = self.dm.attributes();
        Tuple {
            entries: self.subsets[subset]
                .iter()
                .zip(&lv)
                .map(|(&a, &l)| (attrs[a].name.clone(), attrs[a].levels()[l].label.clone()))
                .collect(),
        }
    }

    fn status(&self) -> Vec<Status> {
        (0..self.total)
            .into_par_iter()
            .map(|t| match self.dm.search(&self.restriction(t), &[], Some(FEASIBILITY_BUDGET)) {
                Outcome::Found(_) => Status::Feasible,
                Outcome::Infeasible => Status::Infeasible,
                Outcome::Undecided => Status::Undecided,
            })
            .collect()
    }

    /// Tuples covered by a complete row of codes.
    fn covered_by(&self, codes: &[i64]) -> impl Iterator<Item = usize> + '_ {
        let attrs = self.dm.attributes();
        let row_levels: Vec<usize> = attrs.iter().zip(codes).map(|(a, &c)| a.level_of(c)).collect();
        (0..self.subsets.len()).map(move |s| self.index(s, |a| row_levels[a]))
    }
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    rec(&sorted, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Generates a covering array of the given strength over every attribute.
pub fn generate_covering_array(
    dm: &DomainModel,
    strength: usize,
    seed: u64,
) -> Result<CoveringArray, CoverError> {
    let all: Vec<usize> = (0..dm.attributes().len()).collect();
    generate_over(dm, &all, strength, seed, &format!("ca{strength}"))
}

/// Generates a covering array over a subset of attributes; attributes
/// outside `attrs` are filled with random valid values.
pub fn generate_over(
    dm: &DomainModel,
    attrs: &[usize],
    strength: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<CoveringArray, CoverError> {
    if strength == 0 || strength > attrs.len() {
        return Err(CoverError::Strength { strength, attributes: attrs.len() });
    }
    let space = TupleSpace::new(dm, attrs, strength);
    let status = space.status();
    let mut uncovered: Vec<bool> = status.iter().map(|s| *s != Status::Infeasible).collect();
    let feasible_total = uncovered.iter().filter(|u| **u).count();
    let mut remaining = feasible_total;
    let mut rows: Vec<(u64, Vec<i64>)> = Vec::new();

    while remaining > 0 {
        let row = rows.len() as u64;
        let open: Vec<usize> = (0..space.total).filter(|&t| uncovered[t]).collect();
        let candidates: Vec<Result<(usize, u64, Vec<i64>), CoverError>> = (0..CANDIDATES)
            .into_par_iter()
            .map(|c| {
                let cseed = rng::derive_path(seed, &[row, c as u64]);
                let codes = build_candidate(&space, attrs, &uncovered, &open, c, cseed)?;
                let score = space.covered_by(&codes).filter(|&t| uncovered[t]).count();
                Ok((score, cseed, codes))
            })
            .collect();
        let mut best: Option<(usize, u64, Vec<i64>)> = None;
        for cand in candidates {
            let cand = cand?;
            if best.as_ref().is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
        let (score, cseed, codes) = best.expect("at least one candidate");
        if score == 0 {
            return Err(CoverError::Uncoverable(space.describe(open[0]).to_string()));
        }
        for t in space.covered_by(&codes).collect::<Vec<_>>() {
            if uncovered[t] {
                uncovered[t] = false;
                remaining -= 1;
            }
        }
        rows.push((cseed, codes));
    }

    let width = rows.len().to_string().len().max(3);
    let scenarios = rows
        .iter()
        .enumerate()
        .map(|(i, (s, codes))| dm.scenario_from_codes(format!("{id_prefix}-{i:0width$}"), *s, codes))
        .collect();
    Ok(CoveringArray { strength, scenarios, covered: feasible_total, feasible_total })
}

fn build_candidate(
    space: &TupleSpace<'_>,
    attrs: &[usize],
    uncovered: &[bool],
    open: &[usize],
    candidate: usize,
    seed: u64,
) -> Result<Vec<i64>, CoverError> {
    let dm = space.dm;
    let mut r = rng::rng(seed);
    let seed_tuple = if candidate == 0 { open[0] } else { open[r.random_range(0..open.len())] };
    let mut allowed = space.restriction(seed_tuple);
    match dm.search(&allowed, &[], Some(FEASIBILITY_BUDGET)) {
        Outcome::Found(_) => {}
        _ => return Err(CoverError::Uncoverable(space.describe(seed_tuple).to_string())),
    }
    let (subset, lv) = space.decode(seed_tuple);
    let mut level: Vec<Option<usize>> = vec![None; dm.attributes().len()];
    for (&a, &l) in space.subsets[subset].iter().zip(&lv) {
        level[a] = Some(l);
    }

    let mut order: Vec<usize> = attrs.iter().copied().filter(|&a| level[a].is_none()).collect();
    order.shuffle(&mut r);
    for a in order {
        let mut choices: Vec<(usize, usize)> = (0..space.levels[a].len())
            .map(|l| {
                let gain = space.by_attr[a]
                    .iter()
                    .filter(|&&s| space.subsets[s].iter().all(|&b| b == a || level[b].is_some()))
                    .filter(|&&s| uncovered[space.index(s, |b| if b == a { l } else { level[b].unwrap() })])
                    .count();
                (l, gain)
            })
            .collect();
        choices.shuffle(&mut r);
        choices.sort_by_key(|c| std::cmp::Reverse(c.1));
        for (l, _) in choices {
            let previous = std::mem::replace(&mut allowed[a], space.levels[a][l].clone());
            if let Outcome::Found(_) = dm.search(&allowed, &[], Some(FEASIBILITY_BUDGET)) {
                level[a] = Some(l);
                break;
            }
            allowed[a] = previous;
        }
    }
    Ok(dm.complete_within(&allowed, &[], r.random())?)
}

/// Audits the n-way coverage of a scenario list against the model.
pub fn coverage_report(
    dm: &DomainModel,
    scenarios: &[Scenario],
    strength: usize,
) -> Result<CoverageReport, CoverError> {
    let n_attrs = dm.attributes().len();
    if strength == 0 || strength > n_attrs {
        return Err(CoverError::Strength { strength, attributes: n_attrs });
    }
    let space = TupleSpace::new(dm, &(0..n_attrs).collect::<Vec<_>>(), strength);
    let mut hit = vec![false; space.total];
    for s in scenarios {
        let codes = dm.encode(&s.values)?;
        let violated = dm.violations(&codes);
        if !violated.is_empty() {
            return Err(CoverError::InvalidScenario {
                id: s.id.clone(),
                reason: format!("violates `{}`", violated[0]),
            });
        }
        for t in space.covered_by(&codes) {
            hit[t] = true;
        }
    }
    let status = space.status();
    let mut covered = 0;
    let mut feasible_total = 0;
    let mut missing = Vec::new();
    for t in 0..space.total {
        // A covered tuple is feasible by witness, whatever the search said.
        if hit[t] {
            covered += 1;
            feasible_total += 1;
        } else if status[t] != Status::Infeasible {
            feasible_total += 1;
            missing.push(space.describe(t));
        }
    }
    Ok(CoverageReport { covered, feasible_total, missing })
}
