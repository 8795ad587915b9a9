use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("row `{0}` has no nonzero coefficients")]
    EmptyRow(String),
    #[error("column `{column}` has invalid bounds [{lower}, {upper}]")]
    BadBounds { column: String, lower: f64, upper: f64 },
    #[error("row `{row}` references column {column} which does not exist")]
    ColumnOutOfRange { row: String, column: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported MPS section `{section}` at line {line}")]
    Unsupported { section: String, line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
