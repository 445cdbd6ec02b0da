use thiserror::Error;

/// Errors raised anywhere in the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("no header row beginning with `Year,` found")]
    MissingHeader,

    #[error("no parsable rows in input")]
    EmptySeries,

    #[error("years are not consecutive: {prev} is followed by {next}")]
    NonConsecutiveYears { prev: i32, next: i32 },

    #[error("unparsable value `{value}` on line {line}")]
    BadValue { line: usize, value: String },

    #[error("Box-Cox requires strictly positive input, found {0}")]
    NonPositiveInput(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(&'static str),

    #[error("inverse transform undefined for {0} (requires lambda*x + 1 > 0)")]
    InverseDomain(f64),

    #[error("singular regression system")]
    SingularRegression,

    #[error("window {window} too large for series of length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("k = {k} exceeds the {rows} available rows")]
    KTooLarge { k: usize, rows: usize },

    #[error("insufficient data: {n_train} training points cannot hold {folds} folds of {horizon} plus a training block")]
    InsufficientData {
        n_train: usize,
        horizon: usize,
        folds: usize,
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("length {len} is not divisible by block size {block}")]
    NotDivisible { len: usize, block: usize },

    #[error("all {0} search candidates failed")]
    AllCandidatesFailed(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        Err(Error::TooShort { needed, got })
    } else {
        Ok(())
    }
}
