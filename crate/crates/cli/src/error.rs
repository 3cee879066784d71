use std::path::PathBuf;

use thiserror::Error;

use lanecheck_core::controllers::ControllerError;
use lanecheck_core::covergen::CoverError;
use lanecheck_core::domain::DomainError;
use lanecheck_core::evaluation::EvalError;
use lanecheck_core::mining::MiningError;
use lanecheck_core::offline::OfflineError;
use lanecheck_core::sim::SimError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn budget_or_unsat_domain(e: &DomainError) -> bool {
    matches!(
        e,
        DomainError::BudgetExhausted
            | DomainError::SatisfiabilityUndecided
            | DomainError::Unsatisfiable
            | DomainError::NoCompletion
    )
}

impl CliError {
    /// 1 for usage errors, 3 when a search budget ran out or a required
    /// combination is unsatisfiable, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Cover(CoverError::Uncoverable(_)) => EXIT_FLAGGED,
            CliError::Mining(MiningError::Cover(CoverError::Uncoverable(_)) | MiningError::Unsatisfiable(_)) => {
                EXIT_FLAGGED
            }
            CliError::Domain(e) | CliError::Mining(MiningError::Domain(e)) if budget_or_unsat_domain(e) => EXIT_FLAGGED,
            _ => EXIT_CONFIG,
        }
    }
}
