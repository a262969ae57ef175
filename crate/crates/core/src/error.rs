use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("enumeration budget exceeded: {required} items required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error(
        "infeasible allocation in stratum {stratum}: {requested} requested, {available} available"
    )]
    InfeasibleAllocation {
        stratum: usize,
        requested: u64,
        available: u64,
    },

    #[error("allocation error: {0}")]
    Allocation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale mismatch: {0} vs {1}")]
    ScaleMismatch(f64, f64),

    #[error("indicator of record {0} is constant; correlation undefined")]
    DegenerateIndicator(usize),

    #[error("record index {index} out of range for population of {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Checks an enumeration size against a budget.
pub(crate) fn check_budget(required: u128, budget: u64) -> Result<()> {
    if required > budget as u128 {
        Err(Error::BudgetExceeded { required, budget })
    } else {
        Ok(())
    }
}
