use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode order {0} is not supported (maximum {max})", max = crate::physics::MAX_ORDER)]
    UnsupportedOrder(u32),

    #[error("image has no positive power")]
    ZeroPower,

    #[error("infeasible radius bounds for order {order}: w0min {min} > w0max {max}")]
    InfeasibleBounds { order: u32, min: f64, max: f64 },

    #[error("fields do not share the same sensor geometry")]
    GeometryMismatch,

    #[error("first-order window out of bounds: {0}")]
    WindowOutOfBounds(String),

    #[error("signal has zero variance")]
    ZeroVariance,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("batch of {0} is too small for batch-norm statistics")]
    BatchTooSmall(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("crop of {crop} px does not fit an image of {width}x{height}")]
    CropTooLarge { crop: usize, width: usize, height: usize },

    #[error("class set mismatch: {0}")]
    ClassSetMismatch(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ClassSetMismatch(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}
