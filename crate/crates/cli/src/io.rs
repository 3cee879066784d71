//! Report files. Every writer is deterministic: fixed column order, rows in
//! the order given, shortest round-trip float formatting.

use std::fs;
use std::path::Path;

use serde::Serialize;

use lanecheck_core::domain::{Assignment, DomainModel, Scenario};
use lanecheck_core::sim::Trace;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Builds a CSV document from a header and rows of cells.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// `id, seed, <attributes in model order>`.
pub fn scenario_header(dm: &DomainModel) -> Vec<String> {
    let mut h = vec!["id".to_string(), "seed".to_string()];
    h.extend(dm.attributes().iter().map(|a| a.name.clone()));
    h
}

pub fn scenario_cells(dm: &DomainModel, s: &Scenario) -> Vec<String> {
    let mut cells = vec![s.id.clone(), s.seed.to_string()];
    cells.extend(
        dm.attributes()
            .iter()
            .map(|a| s.values.get(&a.name).map(ToString::to_string).unwrap_or_default()),
    );
    cells
}

pub fn scenarios_csv(dm: &DomainModel, scenarios: &[Scenario]) -> String {
    let mut t = Table::new(&scenario_header(dm));
    for s in scenarios {
        t.row(scenario_cells(dm, s));
    }
    t.finish()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

/// Reads scenarios written by [`scenarios_csv`] (extra columns are ignored)
/// and checks each against the model.
pub fn read_scenarios(path: &Path, dm: &DomainModel) -> Result<Vec<Scenario>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let id_col = column("id")?;
    let seed_col = column("seed")?;
    let attr_cols = dm
        .attributes()
        .iter()
        .map(|a| column(&a.name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let id = record[id_col].to_string();
        let seed = record[seed_col]
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{}: row {}: bad seed", path.display(), line + 1)))?;
        let mut values = Assignment::new();
        for (a, &col) in dm.attributes().iter().zip(&attr_cols) {
            let v = a.parse_value(&record[col]).ok_or_else(|| {
                CliError::Config(format!("{}: scenario {id}: bad value `{}` for {}", path.display(), &record[col], a.name))
            })?;
            values.insert(a.name.clone(), v);
        }
        let violated = dm.validate(&values)?;
        if !violated.is_empty() {
            let names: Vec<String> = violated.iter().map(ToString::to_string).collect();
            return Err(CliError::Config(format!("scenario {id} violates: {}", names.join("; "))));
        }
        out.push(Scenario { id, seed, values });
    }
    Ok(out)
}

/// A single scenario as TOML (`id`, `seed`, `[values]`), or one row of a
/// scenario CSV selected by `id` (first row when `id` is `None`).
pub fn read_scenario(path: &Path, dm: &DomainModel, id: Option<&str>) -> Result<Scenario, CliError> {
    if path.extension().is_some_and(|e| e == "csv") {
        let all = read_scenarios(path, dm)?;
        return match id {
            Some(id) => all
                .into_iter()
                .find(|s| s.id == id)
                .ok_or_else(|| CliError::Config(format!("{}: no scenario `{id}`", path.display()))),
            None => all
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Config(format!("{}: no scenarios", path.display()))),
        };
    }
    let scenario: Scenario =
        toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let violated = dm.validate(&scenario.values)?;
    if !violated.is_empty() {
        let names: Vec<String> = violated.iter().map(ToString::to_string).collect();
        return Err(CliError::Config(format!("scenario {} violates: {}", scenario.id, names.join("; "))));
    }
    Ok(scenario)
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut t = Table::new(&["step", "offset", "headingError", "curvature", "theta", "theta_hat", "deviation"]);
    for (j, s) in trace.steps.iter().enumerate() {
        t.row([
            j.to_string(),
            s.observation.lateral_offset.to_string(),
            s.observation.heading_error.to_string(),
            s.observation.curvature_ahead.to_string(),
            s.theta.to_string(),
            s.theta_hat.to_string(),
            s.deviation.to_string(),
        ]);
    }
    t.finish()
}

/// Steering values from a CSV file: the `steering`, `theta` or `label`
/// column, or the only column. A header row is required.
pub fn read_sequence(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let col = ["steering", "theta", "label"]
        .iter()
        .find_map(|name| headers.iter().position(|h| h.trim() == *name))
        .or(if headers.len() == 1 { Some(0) } else { None })
        .ok_or_else(|| CliError::Config(format!("{}: no steering column", path.display())))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let v: f64 = record[col].trim().parse().map_err(|_| {
            CliError::Config(format!("{}: row {}: `{}` is not a number", path.display(), line + 1, &record[col]))
        })?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("{}: row {}: non-finite value", path.display(), line + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: empty sequence", path.display())));
    }
    Ok(out)
}
