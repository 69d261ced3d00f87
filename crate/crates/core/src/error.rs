use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration is unusable as given (missing corpus, unknown preset, infeasible layout).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument or spec failed its stated constraints.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("{what} {value} outside of [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown {kind} {id}")]
    Lookup { kind: &'static str, id: u64 },

    /// Identity has no pixels when rendered alone, so a visible fraction is meaningless.
    #[error("identity {0} is not visible in the isolated render")]
    UndefinedVisibility(u32),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Error raised while running one pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The innermost error, with stage annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.to_string(),
        }
    }
}
