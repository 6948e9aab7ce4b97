use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One semantic problem found while validating a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based line of the offending record (the header is line 1).
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(row) => write!(f, "row {row}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every violation found in a rubric or roster. Never empty when returned as an error.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn push(&mut self, row: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            row,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    /// True if any violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    pub(crate) fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation problem(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

/// Two gradees whose identifiers resolve to the same path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionReport {
    pub first: String,
    pub second: String,
    pub path: String,
}

/// Grader input that cannot be turned into an action. The session re-prompts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("empty input")]
    Empty,
    #[error("unknown prompt code {0:?}")]
    UnknownCode(String),
    #[error("prompt code {0:?} given more than once")]
    DuplicateCode(String),
    #[error("issue recording is disabled; restart with --github-issues to note issues")]
    IssuesDisabled,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("{0}")]
    Validation(ValidationReport),
    #[error("unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("prompt code {code:?} is not available for {section}")]
    UnknownCode { code: String, section: String },
    #[error("identifier {identifier:?} does not occur in example path {path:?}")]
    IdentifierNotInPath { identifier: String, path: String },
    #[error("path {path:?} for {identifier:?} escapes the course directory")]
    PathEscapesRoot { identifier: String, path: String },
    #[error("{} and {} both resolve to {:?}", .0.first, .0.second, .0.path)]
    PathCollision(CollisionReport),
    #[error("malformed progress log: {0}")]
    MalformedLog(String),
    #[error("progress log does not match the current inputs: {0}")]
    AxesMismatch(String),
    #[error("no cell for gradee {gradee:?} and question {section:?}")]
    UnknownCell { gradee: String, section: String },
    #[error("unknown gradee {0:?}")]
    UnknownGradee(String),
    #[error("progress log is locked by another session (remove {} if that session is gone)", .0.display())]
    LogLocked(PathBuf),
    #[error("feedback file for {gradee:?} not found at {path:?}; run finalize first")]
    MissingFeedbackFile { gradee: String, path: String },
    #[error("cannot start a progress log with no {0}")]
    EmptyAxis(&'static str),
    #[error("nothing left to grade")]
    AllGraded,
    #[error("grading session has ended")]
    SessionFinished,
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
