use thiserror::Error;

use crate::topology::BigPower;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel model: {0}")]
    InvalidChannel(String),
    #[error("channel chain is not irreducible and aperiodic")]
    NonErgodic,
    #[error("invalid delay table: {0}")]
    InvalidTable(String),
    #[error("invalid interference spec: {0}")]
    InvalidInterference(String),
    #[error("off-diagonal delays in row {row} are not distinct")]
    NonDistinctDelays { row: usize },
    #[error(
        "enumeration needs {threshold_vectors} threshold vectors x {sample_paths} sample paths, over budget {budget}"
    )]
    BudgetExceeded { threshold_vectors: BigPower, sample_paths: BigPower, budget: u64 },
    #[error("enumeration of {0} realizations exceeds budget {1}")]
    RealizationBudgetExceeded(BigPower, u64),
    #[error("history does not reach delay {delay} for link {link}")]
    InsufficientHistory { link: usize, delay: u32 },
    #[error("transmitter {observer} cannot see link {link} at delay {delay}")]
    NotObservable { observer: usize, link: usize, delay: u32 },
    #[error("no packets were served over the horizon")]
    EmptyServiceSet,
    #[error("no typical sample found after {0} attempts")]
    TypicalityUnreachable(usize),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
