use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value outside the domain of the quantity (negative amplitude, bad wavelength, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An index, lag or length outside the usable range.
    #[error("range error: {0}")]
    Range(String),

    /// Two inputs that must share a grid or length do not.
    #[error("shape error: {0}")]
    Shape(String),

    /// A fit or estimate could not be formed from the data.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Delta pulses have unbounded point variance; only the PSD is finite.
    #[error("delta pulses have unbounded current variance: use the PSD form instead")]
    UsePsdForm,

    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}
