use std::path::PathBuf;

use thiserror::Error;

use crate::engine::EvalError;
use crate::oracle::OracleError;
use crate::plan::{PlanError, UnstratifiableNegation};
use crate::provenance::ProvError;
use crate::syntax::{ParseError, ValidateError};
use crate::term::TermError;

/// Process exit codes, one per failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const VALIDATE: i32 = 5;
    pub const STRATIFY: i32 = 6;
    pub const GUARD: i32 = 7;
    pub const RUNTIME: i32 = 8;
    pub const CHECK_DIFF: i32 = 9;
    pub const CHECK_INCONCLUSIVE: i32 = 10;
    pub const NOT_FOUND: i32 = 11;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {source}")]
    Parse {
        origin: String,
        #[source]
        source: ParseError,
    },
    #[error("{origin}: {message}")]
    Manifest { origin: String, message: String },
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Stratify(#[from] UnstratifiableNegation),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Provenance(#[from] ProvError),
    #[error("reference evaluator: {0}")]
    Oracle(#[from] OracleError),
    #[error("not found: {0}")]
    NotFound(String),
}

impl From<PlanError> for Error {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Unstratifiable(u) => Error::Stratify(u),
            PlanError::Term(t) => Error::Term(t),
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(origin: impl Into<String>, source: ParseError) -> Self {
        Error::Parse {
            origin: origin.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => exit::USAGE,
            Error::Io { .. } => exit::IO,
            Error::Parse { .. } | Error::Manifest { .. } => exit::PARSE,
            Error::Validate(_) | Error::Term(_) => exit::VALIDATE,
            Error::Stratify(_) => exit::STRATIFY,
            Error::Eval(e) => match e {
                EvalError::Config(_) => exit::USAGE,
                EvalError::Ingest { .. } | EvalError::Term(_) => exit::VALIDATE,
                EvalError::IterationLimitExceeded { .. } | EvalError::HeightLimitExceeded { .. } => exit::GUARD,
                EvalError::Capacity(_) | EvalError::Runtime(_) => exit::RUNTIME,
            },
            Error::Provenance(p) => match p {
                ProvError::NotFound(_) => exit::NOT_FOUND,
                ProvError::NoDerivations => exit::USAGE,
                ProvError::Reserved(_) | ProvError::NonGround(_) => exit::VALIDATE,
            },
            Error::Oracle(o) => match o {
                OracleError::Unstratifiable(_) => exit::STRATIFY,
                OracleError::NonGround(_) => exit::VALIDATE,
                _ => exit::GUARD,
            },
            Error::NotFound(_) => exit::NOT_FOUND,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
