use crate::types::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {side} preference table: {detail}")]
    InvalidTable { side: Side, detail: String },

    #[error("expected a {expected} table, got a {found} table")]
    WrongSide { expected: Side, found: Side },

    #[error("proposal cap of {cap} exceeded")]
    ProposalCapExceeded { cap: usize },

    #[error("nothing to factorize: the score matrix has no observed entries")]
    NothingToFactorize,

    #[error("factorization rank {rank} must be between 1 and {max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("non-finite loss {loss} at iteration {iteration} (step size {step})")]
    NonFiniteLoss { iteration: usize, loss: f64, step: f64 },

    #[error("{agent} matched to {counterpart} in round {round}, which is absent from its consulted row")]
    CounterpartNotInRow { agent: crate::AgentId, counterpart: usize, round: usize },

    #[error("an inferred match needs a dense preference table")]
    MissingDenseTable,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
