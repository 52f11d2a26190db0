use crate::measure::CellId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("duplicate cell id {0}")]
    DuplicateCell(CellId),
    #[error("cell {0} has non-positive or non-finite mass {1}")]
    InvalidMass(CellId, f64),
    #[error("a space needs at least one cell")]
    EmptySpace,
    #[error("block {0} has no cells")]
    EmptyBlock(usize),
    #[error("cell {0} belongs to more than one block")]
    BlockOverlap(CellId),
    #[error("cell {0} is not covered by any block")]
    BlockCoverage(CellId),
    #[error("weight table has no value for cell {0}")]
    MissingValue(CellId),
    #[error("weight is not finite on cell {cell}: {value}")]
    Eval { cell: CellId, value: f64 },
    #[error("cannot parse expression: {0}")]
    ExprParse(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("regime unsupported: {0}")]
    RegimeUnsupported(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("atom family produced invalid data at index {index}: {reason}")]
    Generator { index: usize, reason: String },
    #[error("non-finite data: {0}")]
    NonFiniteData(String),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
