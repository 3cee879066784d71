//! Level-coded training vectors.

use serde::Serialize;

use crate::domain::{Allowed, CmpOp, DomainError, DomainModel, Expr, Scenario};
use crate::offline::Label;

/// Column names and level labels of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub attributes: Vec<String>,
    pub levels: Vec<Vec<String>>,
}

impl Schema {
    pub fn new(attributes: Vec<String>, levels: Vec<Vec<String>>) -> Self {
        assert_eq!(attributes.len(), levels.len());
        Schema { attributes, levels }
    }

    /// Anonymous schema: attributes `A0..`, levels `0..`.
    pub fn synthetic(level_counts: &[usize]) -> Self {
        Schema {
            attributes: (0..level_counts.len()).map(|i| format!("A{i}")).collect(),
            levels: level_counts.iter().map(|&n| (0..n).map(|l| l.to_string()).collect()).collect(),
        }
    }

    /// The named attributes of `dm` (all of them when `names` is `None`),
    /// in model order.
    pub fn from_model(dm: &DomainModel, names: Option<&[String]>) -> Result<Self, DomainError> {
        if let Some(names) = names {
            if let Some(missing) = names.iter().find(|n| dm.attribute_index(n).is_none()) {
                return Err(DomainError::UnknownAttribute(missing.clone()));
            }
        }
        let mut attributes = Vec::new();
        let mut levels = Vec::new();
        for a in dm.attributes() {
            if names.is_some_and(|n| !n.contains(&a.name)) {
                continue;
            }
            attributes.push(a.name.clone());
            levels.push(a.levels().into_iter().map(|l| l.label).collect());
        }
        Ok(Schema { attributes, levels })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn level_count(&self, attr: usize) -> usize {
        self.levels[attr].len()
    }

    /// Total number of (attribute, level) conditions.
    pub fn condition_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Level codes of a scenario for this schema's columns.
    pub fn vectorize(&self, dm: &DomainModel, scenario: &Scenario, label: Label) -> Result<LabeledVector, DomainError> {
        let codes = dm.encode(&scenario.values)?;
        let levels = self
            .attributes
            .iter()
            .map(|name| {
                let i = dm.attribute_index(name).ok_or_else(|| DomainError::UnknownAttribute(name.clone()))?;
                Ok(dm.attributes()[i].level_of(codes[i]))
            })
            .collect::<Result<_, DomainError>>()?;
        Ok(LabeledVector { levels, label })
    }

    /// Domain restriction for `attr = level` under `dm`.
    pub fn level_domain(&self, dm: &DomainModel, attr: usize, level: usize) -> Result<(usize, Allowed), DomainError> {
        let name = &self.attributes[attr];
        let i = dm.attribute_index(name).ok_or_else(|| DomainError::UnknownAttribute(name.clone()))?;
        let allowed = dm.attributes()[i].levels()[level].allowed.clone();
        Ok((i, allowed))
    }

    /// Boolean expression for `attr = level` under `dm`.
    pub fn level_expr(&self, dm: &DomainModel, attr: usize, level: usize) -> Result<Expr, DomainError> {
        let (i, allowed) = self.level_domain(dm, attr, level)?;
        Ok(match allowed {
            Allowed::Values(codes) => Expr::In { attr: i, codes },
            Allowed::Range(lo, hi) => Expr::And(vec![
                Expr::Cmp { attr: i, op: CmpOp::Ge, code: lo },
                Expr::Cmp { attr: i, op: CmpOp::Le, code: hi },
            ]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledVector {
    pub levels: Vec<usize>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<LabeledVector>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<LabeledVector>) -> Self {
        debug_assert!(rows.iter().all(|r| r.levels.len() == schema.len()));
        Dataset { schema, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(agree, disagree)` counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let d = self.rows.iter().filter(|r| r.label == Label::Disagree).count();
        (self.rows.len() - d, d)
    }

    /// Keeps only the named columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Dataset {
        let schema = Schema {
            attributes: columns.iter().map(|&c| self.schema.attributes[c].clone()).collect(),
            levels: columns.iter().map(|&c| self.schema.levels[c].clone()).collect(),
        };
        let rows = self
            .rows
            .iter()
            .map(|r| LabeledVector { levels: columns.iter().map(|&c| r.levels[c]).collect(), label: r.label })
            .collect();
        Dataset { schema, rows }
    }
}

pub(crate) fn label_index(label: Label) -> usize {
    match label {
        Label::Agree => 0,
        Label::Disagree => 1,
    }
}

pub(crate) const LABELS: [Label; 2] = [Label::Agree, Label::Disagree];
