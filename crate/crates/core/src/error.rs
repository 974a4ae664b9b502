//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or image dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter value outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A network configuration that cannot be built.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed binary weights file; `offset` is the byte position of the
    /// first offending byte.
    #[error("weights format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Malformed image file.
    #[error("image error{}: {message}", path_suffix(.path))]
    Image {
        path: Option<PathBuf>,
        message: String,
    },

    /// A bad record in a detection / ground-truth JSON Lines file.
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },

    /// Malformed VOC annotation.
    #[error("annotation error{}: {message}", path_suffix(.path))]
    Annotation {
        path: Option<PathBuf>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn path_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn image(path: Option<&std::path::Path>, msg: impl Into<String>) -> Self {
        Error::Image {
            path: path.map(|p| p.to_path_buf()),
            message: msg.into(),
        }
    }

    pub fn annotation(path: Option<&std::path::Path>, msg: impl Into<String>) -> Self {
        Error::Annotation {
            path: path.map(|p| p.to_path_buf()),
            message: msg.into(),
        }
    }
}
