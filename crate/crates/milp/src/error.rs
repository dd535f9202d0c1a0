use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable {var} out of range (num_vars = {num_vars}) in {}", row_label(*.row))]
    VarOutOfRange {
        var: usize,
        num_vars: usize,
        row: Option<usize>,
    },
    #[error("variable {var} listed twice in {}", row_label(*.row))]
    DuplicateVar { var: usize, row: Option<usize> },
    #[error("constraint row {row} has no terms")]
    EmptyRow { row: usize },
    #[error("non-finite coefficient in {}", row_label(*.row))]
    NonFinite { row: Option<usize> },
    #[error("expected {expected} variable names, found {found}")]
    NameCount { expected: usize, found: usize },
}

fn row_label(row: Option<usize>) -> String {
    match row {
        Some(r) => format!("row {r}"),
        None => "objective".to_string(),
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("time limit must be positive")]
    ZeroTimeLimit,
    #[error("linear relaxation is infeasible")]
    RelaxationInfeasible,
    #[error("simplex did not converge within {0} iterations")]
    IterationLimit(u64),
    #[error("start assignment names variable {var}, model has {num_vars}")]
    StartOutOfRange { var: usize, num_vars: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}
