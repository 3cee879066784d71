use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use lanecheck_cli::io::read_scenarios;
use lanecheck_core::domain::DomainModel;

const STRAIGHT_MODEL: &str = r#"
[[attribute]]
name = "Road.type"
group = "Road"
values = ["Straight"]

[[attribute]]
name = "Vehicle.speed"
group = "Vehicle"
min = 30
max = 50

[[attribute]]
name = "Weather.type"
group = "Weather"
values = ["Sunny", "Rainy", "Snowy"]

[[attribute]]
name = "Environment.buildings"
group = "Environment"
values = ["True", "False"]
"#;

fn lanecheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanecheck")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = lanecheck(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_rows_reparse_as_valid_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("ca.csv");
    let stdout = run_ok(&["gen", "--strength", "2", "--seed", "5", "--out", s(&csv)]);
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["coveredTuples"], summary["feasibleTuples"]);
    let dm = DomainModel::default_model();
    let scenarios = read_scenarios(&csv, &dm).unwrap();
    assert_eq!(scenarios.len() as u64, summary["scenarios"].as_u64().unwrap());
    assert!(scenarios.iter().all(|sc| sc.id.starts_with("ca2-")));
}

#[test]
fn simulate_writes_trace_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("ca.csv");
    run_ok(&["gen", "--strength", "1", "--out", s(&csv)]);
    let trace = tmp.path().join("trace.csv");
    let stdout = run_ok(&["simulate", "--scenario", s(&csv), "--controller", "oracle", "--T", "5", "--out", s(&trace)]);
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,offset,headingError,curvature,theta,theta_hat,deviation");
    assert_eq!(lines.count(), 100);
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["acceptableOnline"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(lanecheck(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lanecheck(&["gen", "--strength", "x"]).status.code(), Some(1));
    assert_eq!(lanecheck(&["--help"]).status.code(), Some(0));
    assert_eq!(lanecheck(&["compare", "--tau-online", "0"]).status.code(), Some(2));
    assert_eq!(lanecheck(&["compare", "--controller", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(lanecheck(&["compare", "--T=-1"]).status.code(), Some(2));
    assert_eq!(lanecheck(&["gen", "--strength", "13"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let unsat = tmp.path().join("unsat.toml");
    fs::write(&unsat, "[[attribute]]\nname = \"A\"\ngroup = \"Road\"\nvalues = [\"x\"]\n\n[[constraint]]\nexpr = \"A != x\"\n")
        .unwrap();
    assert_eq!(lanecheck(&["gen", "--model", s(&unsat)]).status.code(), Some(3));

    let out = tmp.path().join("mine");
    let o = lanecheck(&["mine", "--controller", "curve-weak", "--budget", "2", "--lambda", "0.05", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(json(&out.join("report.json"))["budgetFlags"].as_u64().unwrap() > 0);
}

#[test]
fn rq1_reference_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["rq1", "--scenarios", "25", "--T", "20", "--seed", "11"];
    let run = |extra: &[&str], name: &str| -> Value {
        let out = tmp.path().join(name);
        run_ok(&[&base[..], extra, &["--out", s(&out)]].concat());
        json(&out.join("summary.json"))
    };

    let own = run(&["--jitter", "0"], "self");
    assert_eq!(own["comparableFraction"], 1.0);
    assert_eq!(own["maeDelta"]["max"], 0.0);
    let rows = fs::read_to_string(tmp.path().join("self/rq1.csv")).unwrap();
    assert!(rows.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")), "{rows}");

    let jittered = run(&["--jitter", "0.02"], "jitter");
    assert!(jittered["comparableFraction"].as_f64().unwrap() >= 0.9, "{jittered}");

    let strict = run(&["--jitter", "0.02", "--epsilon", "0"], "strict");
    assert_eq!(strict["comparable"], 0);
}

#[test]
fn rq1_accepts_external_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let reference = tmp.path().join("human.csv");
    let mut text = String::from("steering\n");
    for i in 0..2000 {
        text.push_str(&format!("{}\n", ((i as f64) / 50.0).sin() * 0.05));
    }
    fs::write(&reference, text).unwrap();
    let out = tmp.path().join("ext");
    run_ok(&["rq1", "--scenarios", "5", "--T", "10", "--reference", s(&reference), "--out", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["reference"]["length"], 2000);
    assert_eq!(summary["scenarios"], 5);
}

#[test]
fn compare_on_straight_roads() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("straight.toml");
    fs::write(&model, STRAIGHT_MODEL).unwrap();

    let biased = tmp.path().join("biased");
    run_ok(&["compare", "--model", s(&model), "--controller", "biased-small", "--out", s(&biased)]);
    let sum = json(&biased.join("summary.json"));
    let n = sum["scenarios"].as_u64().unwrap();
    assert!(n > 0);
    assert_eq!(sum["contingency"]["onlineBadOfflineOk"].as_u64().unwrap(), n, "{sum}");

    let oracle = tmp.path().join("oracle");
    run_ok(&["compare", "--model", s(&model), "--controller", "oracle", "--out", s(&oracle), "--keep-traces"]);
    let sum = json(&oracle.join("summary.json"));
    let c = &sum["contingency"];
    assert_eq!(c["onlineOkOfflineOk"].as_u64().unwrap(), sum["scenarios"].as_u64().unwrap());
    let cells: u64 = ["onlineOkOfflineOk", "onlineOkOfflineBad", "onlineBadOfflineOk", "onlineBadOfflineBad"]
        .iter()
        .map(|k| c[*k].as_u64().unwrap())
        .sum();
    assert_eq!(cells, n);
    assert_eq!(fs::read_dir(oracle.join("traces")).unwrap().count() as u64, n);
    // Every MAE is zero for the oracle, so the rank correlation is undefined.
    assert!(sum["spearman"].is_null());

    let dm = DomainModel::from_toml_str(STRAIGHT_MODEL).unwrap();
    assert_eq!(read_scenarios(&oracle.join("scenarios.csv"), &dm).unwrap().len() as u64, n);
}

#[test]
fn compare_reuses_a_scenario_file() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("ca.csv");
    run_ok(&["gen", "--strength", "1", "--seed", "2", "--out", s(&csv)]);
    let out = tmp.path().join("cmp");
    run_ok(&["compare", "--scenarios", s(&csv), "--controller", "rain-blind", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("scenarios.csv")).unwrap(), fs::read_to_string(&csv).unwrap());
}

#[test]
fn offline_and_match() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("off");
    run_ok(&["offline", "--controller", "biased-large", "--strength", "1", "--out", s(&out)]);
    let sum = json(&out.join("summary.json"));
    // Clamping near full lock can absorb part of the bias on tight curves.
    assert!(sum["acceptableOffline"].as_u64().unwrap() * 2 < sum["scenarios"].as_u64().unwrap(), "{sum}");
    let rows = fs::read_to_string(out.join("offline.csv")).unwrap();
    assert!(rows.starts_with("scenarioId,mae,rmse,n,acceptableOffline\n"));

    let sim = tmp.path().join("sim.csv");
    let real = tmp.path().join("real.csv");
    fs::write(&sim, "theta\n0.2\n0.3\n").unwrap();
    fs::write(&real, "steering\n0\n0.1\n0.2\n0.3\n0.4\n").unwrap();
    let m: Value = serde_json::from_str(&run_ok(&["match", "--sim", s(&sim), "--real", s(&real)])).unwrap();
    assert_eq!(m["x"], 2);
    assert_eq!(m["meanDiff"], 0.0);
    assert_eq!(m["comparable"], true);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "theta\nabc\n").unwrap();
    assert_eq!(lanecheck(&["match", "--sim", s(&bad), "--real", s(&real)]).status.code(), Some(2));
}

#[test]
fn mine_with_loose_lambda_confirms_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mine");
    run_ok(&["mine", "--controller", "curve-weak", "--seed", "3", "--lambda", "0.9", "--out", s(&out)]);
    let report = json(&out.join("report.json"));
    for rule in report["rules"].as_array().unwrap() {
        assert!(rule["nConfirm"].as_u64().unwrap() <= 5, "{rule}");
    }
    assert!(report["selected"].as_array().unwrap().iter().any(|a| a == "Road.type"));
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("| # | Rule |"));
    let evals = fs::read_to_string(out.join("evaluations.csv")).unwrap();
    assert!(evals.starts_with("stage,id,seed,Road.type,"));
}

#[test]
fn config_file_and_controller_file() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("ctl.toml");
    fs::write(&spec, "kind = \"degraded\"\nbase = { kind = \"oracle\" }\n[degradation]\nbias = 0.2\n").unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "controller = \"{}\"\nduration = 10.0\nseed = 4\n[thresholds]\noffline = 0.3\n",
            spec.display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("cmp");
    run_ok(&["compare", "--config", s(&cfg), "--strength", "1", "--out", s(&out)]);
    let sum = json(&out.join("summary.json"));
    assert_eq!(sum["thresholds"]["offline"], 0.3);
    assert_eq!(sum["seed"], 4);
    // MAE 0.2 is acceptable under the relaxed bound, the drive is not.
    let n = sum["scenarios"].as_u64().unwrap();
    assert_eq!(sum["contingency"]["onlineBadOfflineOk"].as_u64().unwrap(), n, "{sum}");

    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(lanecheck(&["compare", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn output_directories_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["compare", "--controller", "rain-blind", "--seed", "8", "--keep-traces", "--T", "10"],
        vec!["rq1", "--scenarios", "10", "--T", "10", "--seed", "8"],
        vec!["offline", "--controller", "curve-weak", "--seed", "8"],
    ] {
        let a = tmp.path().join(format!("{}-a", args[0]));
        let b = tmp.path().join(format!("{}-b", args[0]));
        run_ok(&[&args[..], &["--jobs", "1", "--out", s(&a)]].concat());
        run_ok(&[&args[..], &["--jobs", "4", "--out", s(&b)]].concat());
        assert_eq!(dir_bytes(&a), dir_bytes(&b), "{}", args[0]);
    }
}
