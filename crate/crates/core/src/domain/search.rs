//! Bounded completion search over restricted attribute domains.

use rand::seq::SliceRandom;
use rand::Rng;

use super::expr::Expr;
use crate::rng::HarnessRng;

/// Values an attribute may still take during a search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allowed {
    Values(Vec<i64>),
    /// Inclusive integer range.
    Range(i64, i64),
}

impl Allowed {
    pub fn len(&self) -> u64 {
        match self {
            Allowed::Values(v) => v.len() as u64,
            Allowed::Range(lo, hi) if hi >= lo => (hi - lo) as u64 + 1,
            Allowed::Range(..) => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nth(&self, i: u64) -> i64 {
        match self {
            Allowed::Values(v) => v[i as usize],
            Allowed::Range(lo, _) => lo + i as i64,
        }
    }

    pub fn contains(&self, code: i64) -> bool {
        match self {
            Allowed::Values(v) => v.contains(&code),
            Allowed::Range(lo, hi) => (*lo..=*hi).contains(&code),
        }
    }

    fn draw(&self, rng: &mut HarnessRng) -> i64 {
        self.nth(rng.random_range(0..self.len()))
    }

    /// Enumeration order for backtracking: shuffled lists, rotated ranges.
    fn order(&self, rng: Option<&mut HarnessRng>) -> Vec<i64> {
        match (self, rng) {
            (Allowed::Values(v), Some(r)) => {
                let mut v = v.clone();
                v.shuffle(r);
                v
            }
            (Allowed::Values(v), None) => v.clone(),
            (Allowed::Range(..), r) => {
                let n = self.len();
                let start = r.map_or(0, |r| r.random_range(0..n));
                (0..n).map(|i| self.nth((start + i) % n)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Found(Vec<i64>),
    /// The search space was exhausted: no completion exists.
    Infeasible,
    /// The node budget ran out before a decision.
    Undecided,
}

/// Uniform rejection sampling within the allowed domains.
pub fn rejection(
    constraints: &[&Expr],
    allowed: &[Allowed],
    rng: &mut HarnessRng,
    attempts: usize,
) -> Option<Vec<i64>> {
    if allowed.iter().any(Allowed::is_empty) {
        return None;
    }
    let mut codes = vec![0i64; allowed.len()];
    for _ in 0..attempts {
        for (slot, a) in codes.iter_mut().zip(allowed) {
            *slot = a.draw(rng);
        }
        if constraints.iter().all(|c| c.eval(&codes)) {
            return Some(codes);
        }
    }
    None
}

/// Depth-first search with three-valued constraint pruning. With `rng` the
/// value order is randomized; without it the search is in declaration order.
pub fn backtrack(
    constraints: &[&Expr],
    allowed: &[Allowed],
    mut rng: Option<&mut HarnessRng>,
    node_budget: usize,
) -> Outcome {
    if allowed.iter().any(Allowed::is_empty) {
        return Outcome::Infeasible;
    }
    // Attributes mentioned by constraints first, smallest domains first;
    // ties keep declaration order.
    let mut mentioned = vec![false; allowed.len()];
    for c in constraints {
        for a in c.attributes() {
            mentioned[a] = true;
        }
    }
    let mut order: Vec<usize> = (0..allowed.len()).collect();
    order.sort_by_key(|&i| (!mentioned[i], allowed[i].len()));
    let choices: Vec<Vec<i64>> = order
        .iter()
        .map(|&i| allowed[i].order(rng.as_deref_mut()))
        .collect();

    let mut partial: Vec<Option<i64>> = vec![None; allowed.len()];
    let mut cursor = vec![0usize; order.len()];
    let mut depth = 0usize;
    let mut nodes = 0usize;

    if constraints.iter().any(|c| c.eval_partial(&partial) == Some(false)) {
        return Outcome::Infeasible;
    }
    loop {
        // Once every constraint is decided true the rest is unconstrained.
        if depth == order.len() || constraints.iter().all(|c| c.eval_partial(&partial) == Some(true)) {
            for d in depth..order.len() {
                partial[order[d]] = Some(choices[d][0]);
            }
            return Outcome::Found(partial.iter().map(|c| c.unwrap()).collect());
        }
        let attr = order[depth];
        if cursor[depth] == choices[depth].len() {
            cursor[depth] = 0;
            partial[attr] = None;
            if depth == 0 {
                return Outcome::Infeasible;
            }
            depth -= 1;
            continue;
        }
        nodes += 1;
        if nodes > node_budget {
            return Outcome::Undecided;
        }
        partial[attr] = Some(choices[depth][cursor[depth]]);
        cursor[depth] += 1;
        if constraints.iter().all(|c| c.eval_partial(&partial) != Some(false)) {
            depth += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeDef, Group};
    use crate::rng;

    fn attrs() -> Vec<AttributeDef> {
        vec![
            AttributeDef::enumeration("A", Group::Road, &["a0", "a1", "a2"]),
            AttributeDef::integer("B", Group::Vehicle, 0, 99, None),
        ]
    }

    #[test]
    fn backtracking_proves_infeasibility() {
        let a = attrs();
        let c = Expr::parse("A = a1 => B > 200", &a).unwrap();
        let allowed = vec![Allowed::Values(vec![1]), Allowed::Range(0, 99)];
        assert_eq!(backtrack(&[&c], &allowed, None, 10_000), Outcome::Infeasible);
        let allowed = vec![Allowed::Values(vec![0, 1, 2]), Allowed::Range(0, 99)];
        match backtrack(&[&c], &allowed, Some(&mut rng::rng(3)), 10_000) {
            Outcome::Found(codes) => assert!(c.eval(&codes)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn budget_is_reported() {
        let a = attrs();
        let c = Expr::parse("B = 99 and A = a2", &a).unwrap();
        let allowed = vec![Allowed::Values(vec![0, 1, 2]), Allowed::Range(0, 99)];
        assert_eq!(backtrack(&[&c], &allowed, None, 5), Outcome::Undecided);
    }

    #[test]
    fn rejection_respects_domains() {
        let allowed = vec![Allowed::Values(vec![2]), Allowed::Range(5, 7)];
        let mut r = rng::rng(1);
        for _ in 0..50 {
            let codes = rejection(&[], &allowed, &mut r, 1).unwrap();
            assert_eq!(codes[0], 2);
            assert!((5..=7).contains(&codes[1]));
        }
    }
}
