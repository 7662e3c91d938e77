use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("exact enumeration needs {subsets} subsets, above the cap of {cap}")]
    EnumerationCap { subsets: u128, cap: u128 },

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("sensing matrix is rank deficient (A Aᵀ is singular)")]
    RankDeficient,

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("this check needs the exact restricted isometry constant of order {0}")]
    InexactRic(usize),

    #[error("vector is not sorted in non-increasing order at position {0}")]
    NotSorted(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot emit a report with no records")]
    EmptyRecords,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}
