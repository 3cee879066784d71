//! Subcommand drivers. Each writes its reports under the configured output
//! path and returns what should be printed plus the exit code.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use lanecheck_core::controllers::{run_reference, LabeledSequence};
use lanecheck_core::covergen::{coverage_report, generate_covering_array};
use lanecheck_core::domain::{DomainModel, Scenario};
use lanecheck_core::evaluation::evaluate_all;
use lanecheck_core::mining::{mine_pipeline, ConfirmConfig, MiningConfig};
use lanecheck_core::offline::{
    consistent, contingency, match_subsequence, replay, spearman, AgreementRecord, OfflineError, OfflineResult,
};
use lanecheck_core::rng;
use lanecheck_core::sim::run_online;

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_FLAGGED, EXIT_OK};
use crate::io::{
    read_scenario, read_scenarios, read_sequence, scenario_cells, scenario_header, scenarios_csv, to_json, trace_csv,
    write_text, Table,
};

/// What a subcommand leaves for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { exit_code: EXIT_OK, stdout }
    }
}

const RQ1_STREAM: u64 = 0x5251_3101;
const JITTER_STREAM: u64 = 0x4a49_5454;
const TIE_STREAM: u64 = 0x5449_4553;

fn f(x: f64) -> String {
    x.to_string()
}

/// The scenarios of a `--scenarios` file, or a covering array of the given
/// strength when no file is named.
fn scenario_set(
    cfg: &ExperimentConfig,
    dm: &DomainModel,
    file: Option<&Path>,
    strength: usize,
) -> Result<Vec<Scenario>, CliError> {
    match file {
        Some(path) => read_scenarios(path, dm),
        None => Ok(generate_covering_array(dm, strength, cfg.seed)?.scenarios),
    }
}

pub fn gen(cfg: &ExperimentConfig, strength: usize) -> Result<Outcome, CliError> {
    let dm = cfg.model()?;
    let ca = generate_covering_array(&dm, strength, cfg.seed)?;
    let audit = coverage_report(&dm, &ca.scenarios, strength)?;
    let out = cfg.out_or("scenarios.csv");
    write_text(&out, &scenarios_csv(&dm, &ca.scenarios))?;
    let summary = json!({
        "scenarios": ca.scenarios.len(),
        "strength": strength,
        "seed": cfg.seed,
        "coveredTuples": audit.covered,
        "feasibleTuples": audit.feasible_total,
        "missing": audit.missing.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "output": out.display().to_string(),
    });
    Ok(Outcome::ok(to_json(&summary)))
}

pub fn simulate(cfg: &ExperimentConfig, scenario: &Path, id: Option<&str>) -> Result<Outcome, CliError> {
    let dm = cfg.model()?;
    let scenario = read_scenario(scenario, &dm, id)?;
    let (_, compiled) = cfg.compiled_controller(&dm)?;
    let mut controller = compiled.bind(Some(&scenario), scenario.seed)?;
    let (trace, online) = run_online(&scenario, controller.as_mut(), &cfg.harness().sim_config())?;
    let out = cfg.out_or("trace.csv");
    write_text(&out, &trace_csv(&trace))?;
    let summary = json!({
        "scenarioId": scenario.id,
        "controller": cfg.controller,
        "steps": trace.steps.len(),
        "plannedSteps": trace.planned_steps,
        "reachedRoadEnd": trace.reached_road_end,
        "mdclRaw": online.mdcl_raw,
        "mdcl": online.mdcl,
        "acceptableOnline": online.acceptable,
        "output": out.display().to_string(),
    });
    Ok(Outcome::ok(to_json(&summary)))
}

pub fn offline(cfg: &ExperimentConfig, scenarios: Option<&Path>, strength: usize) -> Result<Outcome, CliError> {
    let dm = cfg.model()?;
    let (_, compiled) = cfg.compiled_controller(&dm)?;
    let mut set = scenario_set(cfg, &dm, scenarios, strength)?;
    set.sort_by(|a, b| a.id.cmp(&b.id));
    let sim = cfg.harness().sim_config();
    let tau = cfg.thresholds.offline;
    let results: Vec<OfflineResult> = set
        .par_iter()
        .map(|s| -> Result<OfflineResult, CliError> {
            let reference = run_reference(s, &sim)?;
            let mut c = compiled.bind(Some(s), s.seed)?;
            Ok(replay(c.as_mut(), &reference, tau)?)
        })
        .collect::<Result<_, _>>()?;

    let dir = cfg.out_or("out");
    let mut t = Table::new(&["scenarioId", "mae", "rmse", "n", "acceptableOffline"]);
    for r in &results {
        t.row([r.scenario_id.clone(), f(r.mae), f(r.rmse), r.n.to_string(), r.acceptable.to_string()]);
    }
    write_text(&dir.join("offline.csv"), &t.finish())?;
    let accepted = results.iter().filter(|r| r.acceptable).count();
    let summary = json!({
        "controller": cfg.controller,
        "scenarios": results.len(),
        "acceptableOffline": accepted,
        "meanMae": results.iter().map(|r| r.mae).sum::<f64>() / results.len().max(1) as f64,
        "thresholds": cfg.thresholds,
    });
    write_text(&dir.join("summary.json"), &to_json(&summary))?;
    Ok(Outcome::ok(to_json(&summary)))
}

pub fn match_files(cfg: &ExperimentConfig, sim: &Path, real: &Path) -> Result<Outcome, CliError> {
    let sim = read_sequence(sim)?;
    let real = read_sequence(real)?;
    let m = match_subsequence(&sim, &real, cfg.thresholds.epsilon, rng::derive(cfg.seed, TIE_STREAM))?;
    let body = to_json(&json!({
        "x": m.x,
        "l": m.l,
        "meanDiff": m.mean_diff,
        "comparable": m.comparable,
        "epsilon": cfg.thresholds.epsilon,
        "ties": m.ties,
        "tieSeed": m.tie_seed,
    }));
    if let Some(out) = &cfg.out {
        write_text(&out.join("match.json"), &body)?;
    }
    Ok(Outcome::ok(body))
}

fn record_row(r: &AgreementRecord) -> [String; 8] {
    [
        r.scenario_id.clone(),
        f(r.mae),
        f(r.rmse),
        f(r.mdcl_raw),
        f(r.mdcl),
        r.acceptable_offline.to_string(),
        r.acceptable_online.to_string(),
        r.label.to_string(),
    ]
}

const RECORD_HEADER: [&str; 8] =
    ["scenarioId", "mae", "rmse", "mdclRaw", "mdcl", "acceptableOffline", "acceptableOnline", "label"];

/// Offline and online evaluation of every scenario: agreement records,
/// rank correlation of MAE against MDCL and the 2x2 contingency table.
pub fn compare(cfg: &ExperimentConfig, scenarios: Option<&Path>, strength: usize) -> Result<Outcome, CliError> {
    let dm = cfg.model()?;
    let (_, compiled) = cfg.compiled_controller(&dm)?;
    let mut set = scenario_set(cfg, &dm, scenarios, strength)?;
    set.sort_by(|a, b| a.id.cmp(&b.id));
    let evals = evaluate_all(&set, &compiled, &cfg.harness(), cfg.keep_traces)?;
    let records: Vec<AgreementRecord> = evals.iter().map(|e| e.record.clone()).collect();

    let dir = cfg.out_or("out");
    write_text(&dir.join("scenarios.csv"), &scenarios_csv(&dm, &set))?;
    let mut t = Table::new(&RECORD_HEADER);
    for r in &records {
        t.row(record_row(r));
    }
    write_text(&dir.join("records.csv"), &t.finish())?;
    let mut scatter = Table::new(&["scenarioId", "mae", "mdcl", "label"]);
    for r in &records {
        scatter.row([r.scenario_id.clone(), f(r.mae), f(r.mdcl), r.label.to_string()]);
    }
    write_text(&dir.join("scatter.csv"), &scatter.finish())?;
    if cfg.keep_traces {
        for e in &evals {
            if let Some(trace) = &e.trace {
                write_text(&dir.join("traces").join(format!("{}.csv", trace.scenario_id)), &trace_csv(trace))?;
            }
        }
    }

    let maes: Vec<f64> = records.iter().map(|r| r.mae).collect();
    let mdcls: Vec<f64> = records.iter().map(|r| r.mdcl).collect();
    let (rho, note) = match spearman(&maes, &mdcls) {
        Ok(rho) => (Json::from(rho), None),
        Err(e @ (OfflineError::ZeroVariance | OfflineError::TooFewSamples(_))) => (Json::Null, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let table = contingency(&records);
    let summary = json!({
        "controller": cfg.controller,
        "seed": cfg.seed,
        "scenarios": records.len(),
        "spearman": rho,
        "spearmanNote": note,
        "contingency": {
            "onlineOkOfflineOk": table.online_ok_offline_ok,
            "onlineOkOfflineBad": table.online_ok_offline_bad,
            "onlineBadOfflineOk": table.online_bad_offline_ok,
            "onlineBadOfflineBad": table.online_bad_offline_bad,
        },
        "disagreements": table.disagreements(),
        "thresholds": cfg.thresholds,
    });
    write_text(&dir.join("summary.json"), &to_json(&summary))?;

    let rho_text = match rho.as_f64() {
        Some(r) => format!("{r:.3}"),
        None => format!("undefined ({})", note.unwrap_or_default()),
    };
    let report = format!(
        "# Offline vs online\n\nController `{}`, {} scenarios, seed {}.\n\n{}\nDisagreements: {}.\n\nSpearman rho (MAE, MDCL): {}\n",
        cfg.controller,
        records.len(),
        cfg.seed,
        table.to_markdown(cfg.thresholds.offline, cfg.thresholds.online),
        table.disagreements(),
        rho_text
    );
    write_text(&dir.join("report.md"), &report)?;
    Ok(Outcome::ok(to_json(&summary)))
}

/// The synthetic stand-in for recorded human driving: every simulated
/// reference sequence in order, with seeded Gaussian jitter on the labels.
pub fn jittered_reference(seqs: &[LabeledSequence], sigma: f64, seed: u64) -> LabeledSequence {
    let mut observations = Vec::new();
    let mut labels = Vec::new();
    let jitter_seed = rng::derive(seed, JITTER_STREAM);
    for s in seqs {
        observations.extend(s.observations.iter().cloned());
        labels.extend(s.labels.iter().copied());
    }
    for (i, l) in labels.iter_mut().enumerate() {
        *l = (*l + sigma * rng::gaussian(jitter_seed, i as u64)).clamp(-1.0, 1.0);
    }
    let mut reference = LabeledSequence::external("reference", labels);
    reference.observations = observations;
    reference
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq1Row {
    pub scenario_id: String,
    pub x: usize,
    pub mean_diff: f64,
    pub comparable: bool,
    pub ties: usize,
    pub mae_sim: f64,
    pub mae_real: f64,
    pub consistent: bool,
}

pub struct Rq1Options<'a> {
    pub scenarios: usize,
    pub jitter: f64,
    /// External steering sequence used instead of the synthetic reference.
    pub reference: Option<&'a Path>,
}

/// Matches each simulated sequence to its closest window of the reference
/// and compares the controller's offline error on both.
pub fn rq1(cfg: &ExperimentConfig, opts: &Rq1Options<'_>) -> Result<Outcome, CliError> {
    if opts.scenarios == 0 {
        return Err(CliError::Usage("--scenarios must be at least 1".into()));
    }
    if !(opts.jitter >= 0.0 && opts.jitter.is_finite()) {
        return Err(CliError::Config(format!("jitter {} must be non-negative", opts.jitter)));
    }
    let dm = cfg.model()?;
    let (_, compiled) = cfg.compiled_controller(&dm)?;
    let sim_cfg = cfg.harness().sim_config();
    let base = rng::derive(cfg.seed, RQ1_STREAM);
    let scenarios: Vec<Scenario> = (0..opts.scenarios)
        .map(|i| {
            let mut s = dm.sample_scenario(rng::derive(base, i as u64))?;
            s.id = format!("rq1-{i:03}");
            Ok(s)
        })
        .collect::<Result<_, CliError>>()?;
    let sims: Vec<LabeledSequence> =
        scenarios.par_iter().map(|s| run_reference(s, &sim_cfg)).collect::<Result<_, _>>()?;
    let reference = match opts.reference {
        Some(path) => LabeledSequence::external("reference", read_sequence(path)?),
        None => jittered_reference(&sims, opts.jitter, cfg.seed),
    };

    let th = cfg.thresholds;
    let rows: Vec<Rq1Row> = scenarios
        .par_iter()
        .zip(&sims)
        .enumerate()
        .map(|(i, (s, sim))| -> Result<Rq1Row, CliError> {
            let tie_seed = rng::derive_path(cfg.seed, &[TIE_STREAM, i as u64]);
            let m = match_subsequence(&sim.labels, &reference.labels, th.epsilon, tie_seed)?;
            let mut c = compiled.bind(Some(s), s.seed)?;
            let mae_sim = replay(c.as_mut(), sim, th.offline)?.mae;
            let window = reference.labels[m.x..m.x + m.l].to_vec();
            let observations = if reference.observations.is_empty() {
                sim.observations.clone()
            } else {
                reference.observations[m.x..m.x + m.l].to_vec()
            };
            let mut real = LabeledSequence::external(&s.id, window);
            real.observations = observations;
            let mae_real = replay(c.as_mut(), &real, th.offline)?.mae;
            Ok(Rq1Row {
                scenario_id: s.id.clone(),
                x: m.x,
                mean_diff: m.mean_diff,
                comparable: m.comparable,
                ties: m.ties,
                mae_sim,
                mae_real,
                consistent: consistent(mae_sim, mae_real, th.consist),
            })
        })
        .collect::<Result<_, _>>()?;

    let dir = cfg.out_or("out");
    let mut t = Table::new(&["scenarioId", "x", "meanDiff", "comparable", "ties", "maeSim", "maeReal", "consistent"]);
    for r in &rows {
        t.row([
            r.scenario_id.clone(),
            r.x.to_string(),
            f(r.mean_diff),
            r.comparable.to_string(),
            r.ties.to_string(),
            f(r.mae_sim),
            f(r.mae_real),
            r.consistent.to_string(),
        ]);
    }
    write_text(&dir.join("rq1.csv"), &t.finish())?;
    write_text(&dir.join("scenarios.csv"), &scenarios_csv(&dm, &scenarios))?;

    let comparable: Vec<&Rq1Row> = rows.iter().filter(|r| r.comparable).collect();
    let mut deltas: Vec<f64> = comparable.iter().map(|r| (r.mae_sim - r.mae_real).abs()).collect();
    deltas.sort_by(f64::total_cmp);
    let summary = json!({
        "controller": cfg.controller,
        "seed": cfg.seed,
        "scenarios": rows.len(),
        "reference": match opts.reference {
            Some(p) => json!({ "file": p.display().to_string(), "length": reference.labels.len() }),
            None => json!({ "jitter": opts.jitter, "length": reference.labels.len() }),
        },
        "comparable": comparable.len(),
        "comparableFraction": comparable.len() as f64 / rows.len() as f64,
        "consistent": comparable.iter().filter(|r| r.consistent).count(),
        "maeDelta": if deltas.is_empty() { Json::Null } else { json!({
            "min": deltas[0],
            "median": deltas[deltas.len() / 2],
            "max": deltas[deltas.len() - 1],
        }) },
        "thresholds": th,
    });
    write_text(&dir.join("summary.json"), &to_json(&summary))?;
    Ok(Outcome::ok(to_json(&summary)))
}

pub struct MineOptions {
    pub budget: usize,
}

/// Attribute selection, rule induction and confirmation. Exits with the
/// flag code when any rule ran out of confirmation budget.
pub fn mine(cfg: &ExperimentConfig, opts: &MineOptions) -> Result<Outcome, CliError> {
    let dm = cfg.model()?;
    let (_, compiled) = cfg.compiled_controller(&dm)?;
    let mining = MiningConfig {
        seed: cfg.seed,
        confirm: ConfirmConfig { lambda: cfg.thresholds.lambda, budget: opts.budget, ..ConfirmConfig::default() },
        ..MiningConfig::default()
    };
    let outcome = mine_pipeline(&dm, &compiled, &cfg.harness(), &mining)?;
    let report = &outcome.report;

    let dir = cfg.out_or("out");
    let rules: Vec<Json> = report
        .rules
        .iter()
        .map(|r| {
            json!({
                "antecedent": r.antecedent,
                "conditions": r.conditions,
                "label": r.label,
                "support": r.support,
                "accuracy": r.accuracy,
                "ci": [r.ci.0, r.ci.1],
                "halfWidth": r.half_width,
                "nConfirm": r.n_confirm,
                "trainingSupport": r.training_support,
                "trainingAccuracy": r.training_accuracy,
                "budgetExhausted": r.budget_exhausted,
            })
        })
        .collect();
    let importances: Vec<Json> = report
        .importances
        .iter()
        .map(|i| json!({ "attribute": i.attribute, "mean": i.mean, "std": i.std }))
        .collect();
    let body = json!({
        "controller": cfg.controller,
        "seed": report.seed,
        "lambda": report.lambda,
        "budget": opts.budget,
        "initialVectors": report.initial_vectors,
        "refineVectors": report.refine_vectors,
        "initialLabels": { "agree": report.initial_labels.0, "disagree": report.initial_labels.1 },
        "oobAccuracy": report.oob_accuracy,
        "importances": importances,
        "selected": report.selected,
        "selectionFallback": report.selection_fallback,
        "degenerate": report.degenerate,
        "rules": rules,
        "budgetFlags": report.budget_flags(),
    });
    write_text(&dir.join("report.json"), &to_json(&body))?;
    write_text(&dir.join("report.md"), &report.to_markdown())?;

    let mut header = vec!["stage".to_string()];
    header.extend(scenario_header(&dm));
    header.extend(RECORD_HEADER.iter().skip(1).map(|s| s.to_string()));
    let mut t = Table::new(&header);
    for row in &outcome.rows {
        let mut cells = vec![row.stage.clone()];
        cells.extend(scenario_cells(&dm, &row.scenario));
        cells.extend(record_row(&row.record).into_iter().skip(1));
        t.row(cells);
    }
    write_text(&dir.join("evaluations.csv"), &t.finish())?;

    let exit_code = if report.budget_flags() > 0 { EXIT_FLAGGED } else { EXIT_OK };
    Ok(Outcome { exit_code, stdout: report.to_markdown() })
}
