//! Rubric-driven grading workflow assistant.
//!
//! The grader applies short prompt codes per question; everything else
//! (paths, grade arithmetic, grade sheets, feedback files, repository
//! distribution) is derived from a codes-only progress log.

pub mod engine;
pub mod error;
pub mod outputs;
pub mod fsutil;
pub mod paths;
pub mod points;
pub mod progress;
pub mod push;
pub mod roster;
pub mod rubric;
pub mod server;
mod table;
pub mod terminal;
pub mod workspace;

pub use error::{Error, InputError, Result, ValidationReport};
pub use paths::PathTemplate;
pub use progress::{CellKey, CellRecord, CellStatus, LogStore, ProgressLog};
pub use roster::{Gradee, Roster};
pub use rubric::{Applicability, GradingMode, Rubric, RubricItem, Section};
pub use engine::{Action, Effect, Session, SessionSnapshot};
pub use workspace::{HookSetting, SessionConfig, Workspace};
