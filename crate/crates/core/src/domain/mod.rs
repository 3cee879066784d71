//! Scenario domain model: attribute definitions, constraints, validation and
//! constraint-respecting sampling.
//!
//! A model is loaded from TOML:
//!
//! ```toml
//! description = "optional free text"
//!
//! [[attribute]]
//! name = "Road.type"
//! group = "Road"
//! values = ["Straight", "Curved"]
//!
//! [[attribute]]
//! name = "Vehicle.speed"
//! group = "Vehicle"
//! min = 10
//! max = 50
//! unit = "km/h"
//!
//! [[constraint]]
//! name = "optional label"
//! expr = "Road.type = Curved => Vehicle.speed >= 30"
//! ```
//!
//! An attribute carries either `values` (an enumeration) or `min`/`max`
//! (a bounded integer). Constraint syntax is documented in [`expr`].

pub mod expr;
pub mod search;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{CmpOp, Expr, ExprError};
pub use search::{Allowed, Outcome};

use crate::rng;

/// Attempts made by rejection sampling before falling back to search.
pub const REJECTION_ATTEMPTS: usize = 10_000;
/// Node budget for the backtracking completion search.
pub const SEARCH_NODE_BUDGET: usize = 200_000;
/// Maximum number of coverage/mining levels an integer attribute is split into.
pub const INTEGER_LEVELS: i64 = 4;

const DEFAULT_MODEL: &str = include_str!("../../models/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Road,
    Vehicle,
    Weather,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    Enumeration { values: Vec<String> },
    Integer { min: i64, max: i64, unit: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub group: Group,
    pub kind: AttributeKind,
}

impl AttributeDef {
    pub fn enumeration(name: &str, group: Group, values: &[&str]) -> Self {
        AttributeDef {
            name: name.to_string(),
            group,
            kind: AttributeKind::Enumeration {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    pub fn integer(name: &str, group: Group, min: i64, max: i64, unit: Option<&str>) -> Self {
        AttributeDef {
            name: name.to_string(),
            group,
            kind: AttributeKind::Integer { min, max, unit: unit.map(str::to_string) },
        }
    }

    /// Full domain of codes.
    pub fn domain(&self) -> Allowed {
        match &self.kind {
            AttributeKind::Enumeration { values } => Allowed::Values((0..values.len() as i64).collect()),
            AttributeKind::Integer { min, max, .. } => Allowed::Range(*min, *max),
        }
    }

    pub fn value_of(&self, code: i64) -> Value {
        match &self.kind {
            AttributeKind::Enumeration { values } => Value::Sym(values[code as usize].clone()),
            AttributeKind::Integer { .. } => Value::Int(code),
        }
    }

    pub fn code_of(&self, value: &Value) -> Option<i64> {
        match (&self.kind, value) {
            (AttributeKind::Enumeration { values }, Value::Sym(s)) => {
                values.iter().position(|v| v == s).map(|i| i as i64)
            }
            (AttributeKind::Integer { min, max, .. }, Value::Int(n)) if (*min..=*max).contains(n) => {
                Some(*n)
            }
            _ => None,
        }
    }

    /// Parses a textual cell (CSV, CLI) into a value of this attribute.
    pub fn parse_value(&self, text: &str) -> Option<Value> {
        let text = text.trim();
        let v = match self.kind {
            AttributeKind::Enumeration { .. } => Value::Sym(text.to_string()),
            AttributeKind::Integer { .. } => Value::Int(text.parse().ok()?),
        };
        self.code_of(&v).map(|_| v)
    }

    /// Coverage/mining levels: one per enumeration value; integer ranges are
    /// split into at most [`INTEGER_LEVELS`] contiguous, near-equal bins.
    pub fn levels(&self) -> Vec<Level> {
        match &self.kind {
            AttributeKind::Enumeration { values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| Level { allowed: Allowed::Values(vec![i as i64]), label: v.clone() })
                .collect(),
            AttributeKind::Integer { min, max, .. } => {
                let count = max - min + 1;
                let bins = count.min(INTEGER_LEVELS);
                (0..bins)
                    .map(|k| {
                        let lo = min + (k * count + bins - 1) / bins;
                        let hi = min + ((k + 1) * count + bins - 1) / bins - 1;
                        let label = if lo == hi { lo.to_string() } else { format!("[{lo}, {hi}]") };
                        Level { allowed: Allowed::Range(lo, hi), label }
                    })
                    .collect()
            }
        }
    }

    /// Index of the level containing `code`.
    pub fn level_of(&self, code: i64) -> usize {
        match &self.kind {
            AttributeKind::Enumeration { .. } => code as usize,
            AttributeKind::Integer { min, max, .. } => {
                let count = max - min + 1;
                let bins = count.min(INTEGER_LEVELS);
                ((code - min) * bins / count) as usize
            }
        }
    }
}

/// A contiguous slice of an attribute's domain used as one coverage level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub allowed: Allowed,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => write!(f, "{s}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Sym(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: Option<String>,
    pub source: String,
    pub expr: Expr,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "{n}: {}", self.source),
            None => write!(f, "{}", self.source),
        }
    }
}

/// A total assignment of attribute values.
pub type Assignment = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub values: Assignment,
}

impl Scenario {
    pub fn get(&self, attr: &str) -> Option<&Value> {
        self.values.get(attr)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("malformed domain model: {0}")]
    Parse(String),
    #[error("duplicate attribute `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` has an empty enumeration")]
    EmptyEnumeration(String),
    #[error("attribute `{0}` has an invalid kind (need `values` or `min` <= `max`)")]
    InvalidKind(String),
    #[error("constraint #{index} (`{source_text}`): {error}")]
    Constraint { index: usize, source_text: String, error: ExprError },
    #[error("constraints are unsatisfiable")]
    Unsatisfiable,
    #[error("could not establish satisfiability within the search budget")]
    SatisfiabilityUndecided,
    #[error("assignment is missing attribute `{0}`")]
    MissingAttribute(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("value `{value}` is not valid for attribute `{attr}`")]
    InvalidValue { attr: String, value: String },
    #[error("no valid completion exists for the fixed values")]
    NoCompletion,
    #[error("sampling budget exhausted before a valid scenario was found")]
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub description: Option<String>,
    attributes: Vec<AttributeDef>,
    constraints: Vec<Constraint>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, rename = "attribute")]
    attributes: Vec<AttributeEntry>,
    #[serde(default, rename = "constraint")]
    constraints: Vec<ConstraintEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeEntry {
    name: String,
    group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    expr: String,
}

impl DomainModel {
    /// Builds and validates a model, including a bounded satisfiability check.
    pub fn new(
        attributes: Vec<AttributeDef>,
        constraints: Vec<(Option<String>, String)>,
    ) -> Result<Self, DomainError> {
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(DomainError::DuplicateAttribute(a.name.clone()));
            }
            match &a.kind {
                AttributeKind::Enumeration { values } if values.is_empty() => {
                    return Err(DomainError::EmptyEnumeration(a.name.clone()))
                }
                AttributeKind::Integer { min, max, .. } if min > max => {
                    return Err(DomainError::InvalidKind(a.name.clone()))
                }
                _ => {}
            }
        }
        let constraints = constraints
            .into_iter()
            .enumerate()
            .map(|(index, (name, source))| {
                Expr::parse(&source, &attributes)
                    .map(|expr| Constraint { name, source: source.clone(), expr })
                    .map_err(|error| DomainError::Constraint { index, source_text: source, error })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let dm = DomainModel { description: None, attributes, constraints };
        match dm.search(&dm.full_domains(), &[], None) {
            Outcome::Found(_) => Ok(dm),
            Outcome::Infeasible => Err(DomainError::Unsatisfiable),
            Outcome::Undecided => Err(DomainError::SatisfiabilityUndecided),
        }
    }

    /// Parses a TOML model (see module docs).
    pub fn from_toml_str(source: &str) -> Result<Self, DomainError> {
        let file: ModelFile = toml::from_str(source).map_err(|e| DomainError::Parse(e.to_string()))?;
        let attributes = file
            .attributes
            .into_iter()
            .map(|e| {
                let kind = match (e.values, e.min, e.max) {
                    (Some(values), None, None) => {
                        if e.unit.is_some() {
                            return Err(DomainError::InvalidKind(e.name));
                        }
                        AttributeKind::Enumeration { values }
                    }
                    (None, Some(min), Some(max)) => AttributeKind::Integer { min, max, unit: e.unit },
                    _ => return Err(DomainError::InvalidKind(e.name)),
                };
                Ok(AttributeDef { name: e.name, group: e.group, kind })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let constraints = file.constraints.into_iter().map(|c| (c.name, c.expr)).collect();
        let mut dm = DomainModel::new(attributes, constraints)?;
        dm.description = file.description;
        Ok(dm)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            description: self.description.clone(),
            attributes: self
                .attributes
                .iter()
                .map(|a| {
                    let (values, min, max, unit) = match &a.kind {
                        AttributeKind::Enumeration { values } => (Some(values.clone()), None, None, None),
                        AttributeKind::Integer { min, max, unit } => {
                            (None, Some(*min), Some(*max), unit.clone())
                        }
                    };
                    AttributeEntry { name: a.name.clone(), group: a.group, values, min, max, unit }
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintEntry { name: c.name.clone(), expr: c.source.clone() })
                .collect(),
        };
        toml::to_string(&file).expect("domain model serializes")
    }

    /// The shipped 12-attribute model (a subset of the attributes the
    /// original study names; extend it through a model file).
    pub fn default_model() -> Self {
        Self::from_toml_str(DEFAULT_MODEL).expect("shipped model is valid")
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Parses an expression against this model's attributes.
    pub fn parse_expr(&self, source: &str) -> Result<Expr, ExprError> {
        Expr::parse(source, &self.attributes)
    }

    pub fn encode(&self, assignment: &Assignment) -> Result<Vec<i64>, DomainError> {
        if let Some(extra) = assignment.keys().find(|k| self.attribute_index(k).is_none()) {
            return Err(DomainError::UnknownAttribute(extra.clone()));
        }
        self.attributes
            .iter()
            .map(|a| {
                let v = assignment
                    .get(&a.name)
                    .ok_or_else(|| DomainError::MissingAttribute(a.name.clone()))?;
                a.code_of(v)
                    .ok_or_else(|| DomainError::InvalidValue { attr: a.name.clone(), value: v.to_string() })
            })
            .collect()
    }

    pub fn decode(&self, codes: &[i64]) -> Assignment {
        self.attributes
            .iter()
            .zip(codes)
            .map(|(a, &c)| (a.name.clone(), a.value_of(c)))
            .collect()
    }

    /// Returns the constraints the assignment violates (empty means valid).
    pub fn validate(&self, assignment: &Assignment) -> Result<Vec<&Constraint>, DomainError> {
        let codes = self.encode(assignment)?;
        Ok(self.violations(&codes))
    }

    pub fn violations(&self, codes: &[i64]) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| !c.expr.eval(codes)).collect()
    }

    pub fn is_valid(&self, codes: &[i64]) -> bool {
        self.constraints.iter().all(|c| c.expr.eval(codes))
    }

    pub fn full_domains(&self) -> Vec<Allowed> {
        self.attributes.iter().map(AttributeDef::domain).collect()
    }

    /// Draws a valid scenario; identical seeds give identical scenarios.
    pub fn sample_scenario(&self, seed: u64) -> Result<Scenario, DomainError> {
        self.complete_partial(&Assignment::new(), seed)
    }

    /// Completes a partial assignment into a valid scenario that keeps every
    /// fixed value.
    pub fn complete_partial(&self, fixed: &Assignment, seed: u64) -> Result<Scenario, DomainError> {
        let mut allowed = self.full_domains();
        for (name, value) in fixed {
            let idx = self
                .attribute_index(name)
                .ok_or_else(|| DomainError::UnknownAttribute(name.clone()))?;
            let code = self.attributes[idx].code_of(value).ok_or_else(|| DomainError::InvalidValue {
                attr: name.clone(),
                value: value.to_string(),
            })?;
            allowed[idx] = Allowed::Values(vec![code]);
        }
        let codes = self.complete_within(&allowed, &[], seed)?;
        Ok(self.scenario_from_codes(format!("s-{seed:016x}"), seed, &codes))
    }

    pub fn scenario_from_codes(&self, id: String, seed: u64, codes: &[i64]) -> Scenario {
        Scenario { id, seed, values: self.decode(codes) }
    }

    /// Randomized completion within restricted domains, subject to the model
    /// constraints plus `extra`. Rejection sampling first (uniform over valid
    /// completions), then a randomized backtracking search that either finds
    /// a completion or proves none exists.
    pub fn complete_within(
        &self,
        allowed: &[Allowed],
        extra: &[&Expr],
        seed: u64,
    ) -> Result<Vec<i64>, DomainError> {
        let mut r = rng::rng(seed);
        let constraints = self.constraint_refs(extra);
        if let Some(codes) = search::rejection(&constraints, allowed, &mut r, REJECTION_ATTEMPTS) {
            return Ok(codes);
        }
        match search::backtrack(&constraints, allowed, Some(&mut r), SEARCH_NODE_BUDGET) {
            Outcome::Found(codes) => Ok(codes),
            Outcome::Infeasible => Err(DomainError::NoCompletion),
            Outcome::Undecided => Err(DomainError::BudgetExhausted),
        }
    }

    /// Deterministic feasibility decision for restricted domains.
    pub fn search(&self, allowed: &[Allowed], extra: &[&Expr], budget: Option<usize>) -> Outcome {
        let constraints = self.constraint_refs(extra);
        search::backtrack(&constraints, allowed, None, budget.unwrap_or(SEARCH_NODE_BUDGET))
    }

    fn constraint_refs<'a>(&'a self, extra: &[&'a Expr]) -> Vec<&'a Expr> {
        self.constraints.iter().map(|c| &c.expr).chain(extra.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(pairs: &[(&str, Value)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn default_valid() -> Assignment {
        assignment(&[
            ("Road.type", "Straight".into()),
            ("Road.laneLineColor", "White".into()),
            ("Road.curbLinePattern", "Solid".into()),
            ("Road.roadSpecificProperty", "None".into()),
            ("Vehicle.speed", 30.into()),
            ("Vehicle.laneNumber", 1.into()),
            ("Vehicle.headLights", "False".into()),
            ("Vehicle.fogLights", "False".into()),
            ("Weather.type", "Sunny".into()),
            ("Weather.condition", "None".into()),
            ("Environment.buildings", "True".into()),
            ("Environment.underlay", "Pavement".into()),
        ])
    }

    #[test]
    fn default_model_shape() {
        let dm = DomainModel::default_model();
        assert_eq!(dm.attributes().len(), 12);
        assert!(dm.constraints().len() >= 3);
        assert!(dm.validate(&default_valid()).unwrap().is_empty());
    }

    #[test]
    fn minimal_binary_model_has_two_assignments() {
        let dm = DomainModel::from_toml_str(
            "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = [\"0\", \"1\"]\n",
        )
        .unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            seen.insert(dm.sample_scenario(seed).unwrap().values);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn contradiction_is_unsatisfiable() {
        let src = r#"
[[attribute]]
name = "A"
group = "Road"
values = ["v1", "v2"]

[[constraint]]
expr = "A = v1"

[[constraint]]
expr = "A = v2"
"#;
        assert_eq!(DomainModel::from_toml_str(src), Err(DomainError::Unsatisfiable));
    }

    #[test]
    fn semantic_errors() {
        let unknown = "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = [\"x\"]\n[[constraint]]\nexpr = \"B = x\"\n";
        assert!(matches!(
            DomainModel::from_toml_str(unknown),
            Err(DomainError::Constraint { error: ExprError::UnknownAttribute(_), .. })
        ));
        let empty = "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = []\n";
        assert_eq!(DomainModel::from_toml_str(empty), Err(DomainError::EmptyEnumeration("A".into())));
        assert!(matches!(DomainModel::from_toml_str("[[attribute]\n"), Err(DomainError::Parse(_))));
        let dup = "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = [\"x\"]\n[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = [\"y\"]\n";
        assert_eq!(DomainModel::from_toml_str(dup), Err(DomainError::DuplicateAttribute("A".into())));
        let inverted = "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nmin = 3\nmax = 1\n";
        assert_eq!(DomainModel::from_toml_str(inverted), Err(DomainError::InvalidKind("A".into())));
    }

    #[test]
    fn weather_condition_needs_precipitation() {
        let dm = DomainModel::default_model();
        let mut a = default_valid();
        a.insert("Weather.condition".into(), "Heavy".into());
        let v = dm.validate(&a).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0].source.contains("Weather.type"));
    }

    #[test]
    fn slow_speed_on_steep_curves_is_valid() {
        let dm = DomainModel::default_model();
        let mut a = default_valid();
        a.insert("Road.type".into(), "SteepCurved".into());
        a.insert("Vehicle.speed".into(), 15.into());
        assert!(dm.validate(&a).unwrap().is_empty());
        a.insert("Vehicle.speed".into(), 25.into());
        assert_eq!(dm.validate(&a).unwrap().len(), 1);
    }

    #[test]
    fn constraint_free_model_never_violates() {
        let dm = DomainModel::from_toml_str(
            "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nmin = 0\nmax = 9\n",
        )
        .unwrap();
        for v in 0..10 {
            assert!(dm.validate(&assignment(&[("A", v.into())])).unwrap().is_empty());
        }
    }

    #[test]
    fn validate_reports_missing_attribute() {
        let dm = DomainModel::default_model();
        let mut a = default_valid();
        a.remove("Vehicle.speed");
        assert_eq!(dm.validate(&a), Err(DomainError::MissingAttribute("Vehicle.speed".into())));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let dm = DomainModel::default_model();
        assert_eq!(dm.sample_scenario(42).unwrap(), dm.sample_scenario(42).unwrap());
    }

    #[test]
    fn thousand_samples_are_valid() {
        let dm = DomainModel::default_model();
        for seed in 0..1000 {
            let s = dm.sample_scenario(seed).unwrap();
            assert!(dm.validate(&s.values).unwrap().is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn single_assignment_model_is_forced() {
        let src = r#"
[[attribute]]
name = "A"
group = "Road"
values = ["x", "y"]

[[attribute]]
name = "N"
group = "Vehicle"
min = 1
max = 3

[[constraint]]
expr = "A = y and N = 2"
"#;
        let dm = DomainModel::from_toml_str(src).unwrap();
        for seed in 0..20 {
            let s = dm.sample_scenario(seed).unwrap();
            assert_eq!(s.values, assignment(&[("A", "y".into()), ("N", 2.into())]));
        }
    }

    #[test]
    fn completion_keeps_fixed_values() {
        let dm = DomainModel::default_model();
        let fixed = assignment(&[("Road.type", "Curved".into())]);
        for seed in 0..50 {
            let s = dm.complete_partial(&fixed, seed).unwrap();
            assert_eq!(s.get("Road.type"), Some(&Value::from("Curved")));
            assert!(dm.validate(&s.values).unwrap().is_empty());
        }
    }

    #[test]
    fn completion_of_full_assignment_is_identity() {
        let dm = DomainModel::default_model();
        let full = default_valid();
        assert_eq!(dm.complete_partial(&full, 9).unwrap().values, full);
    }

    #[test]
    fn blocked_completion_errors() {
        let dm = DomainModel::default_model();
        let fixed = assignment(&[("Weather.type", "Sunny".into()), ("Weather.condition", "Heavy".into())]);
        assert_eq!(dm.complete_partial(&fixed, 1), Err(DomainError::NoCompletion));
    }

    #[test]
    fn empty_completion_equals_sampling() {
        let dm = DomainModel::default_model();
        for seed in [0, 1, 77, u64::MAX] {
            assert_eq!(dm.complete_partial(&Assignment::new(), seed), dm.sample_scenario(seed));
        }
    }

    #[test]
    fn toml_round_trip() {
        let dm = DomainModel::default_model();
        let again = DomainModel::from_toml_str(&dm.to_toml_string()).unwrap();
        assert_eq!(dm, again);
    }

    #[test]
    fn integer_levels_partition_the_range() {
        let a = AttributeDef::integer("Vehicle.speed", Group::Vehicle, 10, 50, None);
        let levels = a.levels();
        assert_eq!(levels.len(), 4);
        let labels: Vec<_> = levels.iter().map(|l| l.label.as_str()).collect();
        assert_eq!(labels, ["[10, 20]", "[21, 30]", "[31, 40]", "[41, 50]"]);
        for v in 10..=50 {
            assert!(levels[a.level_of(v)].allowed.contains(v));
        }
        let small = AttributeDef::integer("Vehicle.laneNumber", Group::Vehicle, 1, 3, None);
        assert_eq!(small.levels().len(), 3);
        assert_eq!(small.level_of(3), 2);
    }
}
