use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of an operation (out-of-bounds
    /// point, non-unit direction, negative density, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes, channel counts or model counts do not line up.
    #[error("structural error: {0}")]
    Structure(String),

    /// A quantized alphabet exceeded the configured maximum.
    #[error("range error: {0}")]
    Range(String),

    /// Malformed or corrupted bitstream / manifest.
    #[error("format error: {0}")]
    Format(String),

    /// API called out of order.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration or scene description.
    #[error("config error: {0}")]
    Config(String),

    /// Optimization produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
