//! Random forest over level-coded attributes, with out-of-bag scoring and
//! permutation importance.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::data::{label_index, Dataset, LABELS};
use super::MiningError;
use crate::offline::Label;
use crate::rng::{self, HarnessRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Attributes tried per split; `None` means `ceil(sqrt(attributes))`.
    pub feature_subset: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 200, max_depth: None, feature_subset: None, min_leaf: 2 }
    }
}

pub const MIN_VECTORS: usize = 10;

#[derive(Debug, Clone)]
enum Node {
    Leaf { counts: [usize; 2] },
    /// Rows with `levels[attr] == level` go to `eq`, the rest to `ne`.
    Split { attr: usize, level: usize, eq: usize, ne: usize },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_counts(&self, row: impl Fn(usize) -> usize) -> [usize; 2] {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { attr, level, eq, ne } => i = if row(attr) == level { eq } else { ne },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { eq, ne, .. } => 1 + go(nodes, eq).max(go(nodes, ne)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Rows left out of each tree's bootstrap sample, ascending.
    pub oob: Vec<Vec<usize>>,
    pub params: ForestParams,
    pub attributes: usize,
    pub oob_accuracy: f64,
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    data: &'a Dataset,
    params: ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, r: &mut HarnessRng) -> usize {
        let mut counts = [0usize; 2];
        for &i in &rows {
            counts[label_index(self.data.rows[i].label)] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || rows.len() < 2 * self.params.min_leaf {
            return id;
        }
        let Some((attr, level)) = self.best_split(&rows, counts, r) else {
            return id;
        };
        let (eq_rows, ne_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.data.rows[i].levels[attr] == level);
        let eq = self.grow(eq_rows, depth + 1, r);
        let ne = self.grow(ne_rows, depth + 1, r);
        self.nodes[id] = Node::Split { attr, level, eq, ne };
        id
    }

    /// Best one-vs-rest split among a random attribute subset. If none of
    /// the sampled attributes gives a valid split that lowers impurity, the
    /// remaining attributes are tried in the same shuffled order.
    fn best_split(&self, rows: &[usize], counts: [usize; 2], r: &mut HarnessRng) -> Option<(usize, usize)> {
        let n_attrs = self.data.schema.len();
        let mut order: Vec<usize> = (0..n_attrs).collect();
        order.shuffle(r);
        let parent = gini(counts);
        let n = rows.len() as f64;
        let mut best: Option<(f64, usize, usize)> = None;
        for (k, &attr) in order.iter().enumerate() {
            if k >= self.mtry && best.is_some() {
                break;
            }
            let levels = self.data.schema.level_count(attr);
            let mut per_level = vec![[0usize; 2]; levels];
            for &i in rows {
                let row = &self.data.rows[i];
                per_level[row.levels[attr]][label_index(row.label)] += 1;
            }
            for (level, eq) in per_level.iter().enumerate() {
                let ne = [counts[0] - eq[0], counts[1] - eq[1]];
                let (neq, nne) = (eq[0] + eq[1], ne[0] + ne[1]);
                if neq < self.params.min_leaf || nne < self.params.min_leaf {
                    continue;
                }
                let impurity = (neq as f64 * gini(*eq) + nne as f64 * gini(ne)) / n;
                if impurity < parent - 1e-12 && best.is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, attr, level));
                }
            }
        }
        best.map(|(_, a, l)| (a, l))
    }
}

const TREE_STREAM: u64 = 0x5452_4545;

fn check_trainable(data: &Dataset) -> Result<(), MiningError> {
    if data.len() < MIN_VECTORS {
        return Err(MiningError::TooFewVectors { got: data.len(), need: MIN_VECTORS });
    }
    let (a, d) = data.label_counts();
    if a == 0 || d == 0 {
        return Err(MiningError::SingleLabel);
    }
    if data.schema.is_empty() {
        return Err(MiningError::NoAttributes);
    }
    Ok(())
}

/// Trains trees in parallel; tree `t` draws its bootstrap sample and split
/// candidates from its own stream, so the forest does not depend on the
/// thread count.
pub fn train_forest(data: &Dataset, params: ForestParams, seed: u64) -> Result<Forest, MiningError> {
    check_trainable(data)?;
    if params.trees == 0 {
        return Err(MiningError::Config("forest needs at least one tree".into()));
    }
    // An empty child is never a useful leaf.
    let params = ForestParams { min_leaf: params.min_leaf.max(1), ..params };
    let n_attrs = data.schema.len();
    let mtry = params
        .feature_subset
        .unwrap_or_else(|| (n_attrs as f64).sqrt().ceil() as usize)
        .clamp(1, n_attrs);
    let n = data.len();
    let grown: Vec<(Tree, Vec<usize>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::rng(rng::derive_path(seed, &[TREE_STREAM, t as u64]));
            let mut in_bag = vec![false; n];
            let sample: Vec<usize> = (0..n)
                .map(|_| {
                    let i = r.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let mut g = Grower { data, params, mtry, nodes: Vec::new() };
            g.grow(sample, 0, &mut r);
            let oob = (0..n).filter(|&i| !in_bag[i]).collect();
            (Tree { nodes: g.nodes }, oob)
        })
        .collect();
    let (trees, oob) = grown.into_iter().unzip();
    let mut forest = Forest { trees, oob, params, attributes: n_attrs, oob_accuracy: 0.0 };
    forest.oob_accuracy = forest.oob_score(data, None);
    Ok(forest)
}

impl Forest {
    /// Soft vote over all trees; ties go to `agree`.
    pub fn predict(&self, levels: &[usize]) -> Label {
        let mut votes = [0.0f64; 2];
        for t in &self.trees {
            add_vote(&mut votes, t.leaf_counts(|a| levels[a]));
        }
        decide(votes)
    }

    /// Out-of-bag accuracy, optionally with column `attr` replaced by
    /// `column` values. Rows never out of bag are skipped.
    fn oob_score(&self, data: &Dataset, replaced: Option<(usize, &[usize])>) -> f64 {
        let n = data.len();
        let mut votes = vec![[0.0f64; 2]; n];
        let mut seen = vec![false; n];
        for (tree, oob) in self.trees.iter().zip(&self.oob) {
            for &i in oob {
                let row = &data.rows[i].levels;
                let counts = tree.leaf_counts(|a| match replaced {
                    Some((attr, column)) if a == attr => column[i],
                    _ => row[a],
                });
                add_vote(&mut votes[i], counts);
                seen[i] = true;
            }
        }
        let (mut correct, mut total) = (0usize, 0usize);
        for i in 0..n {
            if seen[i] {
                total += 1;
                if decide(votes[i]) == data.rows[i].label {
                    correct += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

fn add_vote(votes: &mut [f64; 2], counts: [usize; 2]) {
    let n = (counts[0] + counts[1]) as f64;
    votes[0] += counts[0] as f64 / n;
    votes[1] += counts[1] as f64 / n;
}

fn decide(votes: [f64; 2]) -> Label {
    if votes[1] > votes[0] {
        LABELS[1]
    } else {
        LABELS[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Importance {
    pub attribute: String,
    /// Mean OOB-accuracy drop over the repetitions.
    pub mean: f64,
    /// Sample standard deviation of the drops.
    pub std: f64,
    pub drops: Vec<f64>,
}

const PERMUTE_STREAM: u64 = 0x5045_524d;

/// Drop in OOB accuracy when one column is shuffled across all rows,
/// repeated `repetitions` times per attribute.
pub fn permutation_importance(
    forest: &Forest,
    data: &Dataset,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<Importance>, MiningError> {
    if forest.attributes != data.schema.len() || forest.oob.iter().flatten().any(|&i| i >= data.len()) {
        return Err(MiningError::SchemaMismatch);
    }
    if repetitions == 0 {
        return Err(MiningError::Config("importance repetitions must be >= 1".into()));
    }
    let baseline = forest.oob_score(data, None);
    let out = (0..data.schema.len())
        .into_par_iter()
        .map(|attr| {
            let drops: Vec<f64> = (0..repetitions)
                .map(|b| {
                    let mut r = rng::rng(rng::derive_path(seed, &[PERMUTE_STREAM, attr as u64, b as u64]));
                    let mut column: Vec<usize> = data.rows.iter().map(|row| row.levels[attr]).collect();
                    column.shuffle(&mut r);
                    baseline - forest.oob_score(data, Some((attr, &column)))
                })
                .collect();
            let mean = drops.iter().sum::<f64>() / repetitions as f64;
            let std = if repetitions > 1 {
                (drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (repetitions - 1) as f64).sqrt()
            } else {
                0.0
            };
            Importance { attribute: data.schema.attributes[attr].clone(), mean, std, drops }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Column indices in schema order.
    pub selected: Vec<usize>,
    /// True when no attribute passed the test and the top two were taken.
    pub fallback: bool,
}

/// Keeps attributes whose mean drop is positive and at least two standard
/// errors above zero. Falls back to the two largest means (ties: schema
/// order) when nothing qualifies.
pub fn select_attributes(importances: &[Importance]) -> Selection {
    let mut selected: Vec<usize> = importances
        .iter()
        .enumerate()
        .filter(|(_, imp)| {
            let se = imp.std / (imp.drops.len().max(1) as f64).sqrt();
            imp.mean > 0.0 && imp.mean >= 2.0 * se
        })
        .map(|(i, _)| i)
        .collect();
    if !selected.is_empty() {
        return Selection { selected, fallback: false };
    }
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].mean.total_cmp(&importances[a].mean).then(a.cmp(&b)));
    selected = order.into_iter().take(2).collect();
    selected.sort_unstable();
    Selection { selected, fallback: true }
}
