//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("column `{name}`: {message}")]
    InvalidColumn { name: String, message: String },

    #[error("dataset is empty")]
    EmptyData,

    #[error("formula error: {0}")]
    Formula(String),

    #[error("design matrix error: {0}")]
    Design(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    BootstrapUnstable { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
