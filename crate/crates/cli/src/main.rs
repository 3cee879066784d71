use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lanecheck_cli::error::{CliError, EXIT_OK, EXIT_USAGE};
use lanecheck_cli::experiments::{self, MineOptions, Outcome, Rq1Options};
use lanecheck_cli::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "lanecheck", version, about = "Offline versus online testing of lane-keeping controllers")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment config (TOML); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Domain model file (TOML); the built-in model by default.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Preset name or controller spec file.
    #[arg(long, global = true)]
    controller: Option<String>,
    /// Output file for `gen` and `simulate`, output directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Simulated duration in seconds.
    #[arg(long = "T", alias = "duration", global = true)]
    duration: Option<f64>,
    /// Control period in seconds.
    #[arg(long = "dt", global = true)]
    t_delta: Option<f64>,
    #[arg(long, global = true)]
    keep_traces: bool,
    #[arg(long, global = true)]
    tau_offline: Option<f64>,
    #[arg(long, global = true)]
    tau_online: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    tau_consist: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an n-way covering array as a scenario CSV.
    Gen {
        #[arg(long, default_value_t = 2)]
        strength: usize,
    },
    /// Drive one scenario in closed loop and write its trace.
    Simulate {
        /// Scenario TOML, or a scenario CSV.
        #[arg(long)]
        scenario: PathBuf,
        /// Row of a scenario CSV; the first row by default.
        #[arg(long)]
        id: Option<String>,
    },
    /// Replay the controller on reference drives.
    Offline {
        /// Scenario CSV; a covering array when omitted.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        strength: usize,
    },
    /// Find the window of a real sequence closest to a simulated one.
    Match {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        real: PathBuf,
    },
    /// Offline and online verdicts side by side.
    Compare {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        strength: usize,
    },
    /// Explain disagreements with attribute selection and rules.
    Mine {
        /// Confirmation samples per rule.
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Match simulated drives against a reference drive.
    Rq1 {
        #[arg(long, default_value_t = 100)]
        scenarios: usize,
        /// Label jitter of the synthetic reference.
        #[arg(long, default_value_t = 0.02)]
        jitter: f64,
        /// Steering CSV used instead of the synthetic reference.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn config(g: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::from_toml_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.model {
        cfg.model = Some(v.clone());
    }
    if let Some(v) = &g.controller {
        cfg.controller = v.clone();
    }
    if let Some(v) = &g.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = g.duration {
        cfg.duration = v;
    }
    if let Some(v) = g.t_delta {
        cfg.t_delta = v;
    }
    cfg.keep_traces |= g.keep_traces;
    let th = &mut cfg.thresholds;
    for (flag, slot) in [
        (g.tau_offline, &mut th.offline),
        (g.tau_online, &mut th.online),
        (g.epsilon, &mut th.epsilon),
        (g.tau_consist, &mut th.consist),
        (g.lambda, &mut th.lambda),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let cfg = config(&cli.global)?;
    let work = || match &cli.command {
        Command::Gen { strength } => experiments::gen(&cfg, *strength),
        Command::Simulate { scenario, id } => experiments::simulate(&cfg, scenario, id.as_deref()),
        Command::Offline { scenarios, strength } => experiments::offline(&cfg, scenarios.as_deref(), *strength),
        Command::Match { sim, real } => experiments::match_files(&cfg, sim, real),
        Command::Compare { scenarios, strength } => experiments::compare(&cfg, scenarios.as_deref(), *strength),
        Command::Mine { budget } => experiments::mine(&cfg, &MineOptions { budget: *budget }),
        Command::Rq1 { scenarios, jitter, reference } => experiments::rq1(
            &cfg,
            &Rq1Options { scenarios: *scenarios, jitter: *jitter, reference: reference.as_deref() },
        ),
    };
    match cli.global.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
