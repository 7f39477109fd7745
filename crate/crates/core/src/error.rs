use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid privacy parameters q={q}, q'={q_prime}: {reason}")]
    Privacy { q: f64, q_prime: f64, reason: &'static str },

    #[error("empty community {0}")]
    EmptyCommunity(usize),

    #[error("connectivity matrix is rank deficient (rank {rank} < {k})")]
    RankDeficientConnectivity { rank: usize, k: usize },

    #[error("aggregated eigenspace is rank deficient at column {column} (|R_jj| = {value:e})")]
    RankDeficientAggregate { column: usize, value: f64 },

    #[error(transparent)]
    Wire(#[from] WireError),

    #[error("parse error in {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Rejections raised while decoding a federation summary frame.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),
    #[error("truncated header: got {got} bytes, need {need}")]
    TruncatedHeader { got: usize, need: usize },
    #[error("truncated payload: got {got} bytes, need {need}")]
    TruncatedPayload { got: usize, need: usize },
    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),
    #[error("invalid eigenspace: ||U^T U - I||_F = {0:e}")]
    InvalidEigenspace(f64),
    #[error("invalid header field: {0}")]
    InvalidHeader(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
