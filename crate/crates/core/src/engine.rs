//! The grading state machine.
//!
//! A [`Session`] walks the ungraded cells of the progress log in gradee-major
//! order, offering the rubric items visible for each cell. Every accepted
//! action is persisted before the next prompt, so a session can be quit at
//! any point and resumed later with identical results.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, InputError, Result};
use crate::points::{format_points, parse_points};
use crate::progress::{CellKey, CellRecord, LogMeta, LogStore, ProgressLog};
use crate::rubric::{Applicability, Rubric, RubricItem, Section};
use crate::workspace::{FinalizeReport, SessionConfig, Workspace};

/// What the grader asked for at the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    ApplyCodes { codes: Vec<String> },
    PersonalizedMessage { text: String },
    NewRubricItem { item: ItemDraft },
    NoteIssue { title: String, body: String },
    Skip,
    Quit,
}

/// A rubric item as entered while grading. The question total is taken from
/// the rubric; applicability defaults to the cell being graded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDraft {
    #[serde(default)]
    pub applicability: Option<String>,
    pub prompt_code: String,
    pub prompt_message: String,
    pub feedback: String,
    pub points: String,
}

/// A parsed prompt line. Message, rubric-item and issue entries need more
/// input before they become an [`Action`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Apply(Vec<String>),
    Message,
    NewItem,
    Issue,
    Skip,
    Quit,
}

/// Interpret one line typed at the grading prompt.
pub fn parse_input(
    raw: &str,
    visible_codes: &[&str],
    github_issues: bool,
) -> std::result::Result<Command, InputError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(InputError::Empty);
    }
    match trimmed.to_ascii_lowercase().as_str() {
        "p" => return Ok(Command::Message),
        "r" => return Ok(Command::NewItem),
        "i" if github_issues => return Ok(Command::Issue),
        "i" => return Err(InputError::IssuesDisabled),
        "s" => return Ok(Command::Skip),
        "q" => return Ok(Command::Quit),
        "n" => return Ok(Command::Apply(Vec::new())),
        _ => {}
    }
    let codes: Vec<String> = trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    check_codes(&codes, visible_codes)?;
    Ok(Command::Apply(codes))
}

fn check_codes(codes: &[String], visible: &[&str]) -> std::result::Result<(), InputError> {
    let mut seen = HashSet::new();
    for code in codes {
        if !visible.contains(&code.as_str()) {
            return Err(InputError::UnknownCode(code.clone()));
        }
        if !seen.insert(code.as_str()) {
            return Err(InputError::DuplicateCode(code.clone()));
        }
    }
    Ok(())
}

/// Side effects the driver performs after an action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Open(PathBuf),
    Close(PathBuf),
    /// Regenerate the grade sheet and feedback files.
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurrentCell {
    pub gradee: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemView {
    pub code: String,
    pub message: String,
    /// Signed as applied, e.g. "-0.75".
    pub points: String,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub graded: usize,
    pub total: usize,
    pub remaining_in_scope: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmissionDescriptor {
    pub path: String,
    pub media_kind: MediaKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Markdown,
    Text,
    Binary,
    Directory,
    Missing,
}

impl MediaKind {
    pub fn detect(path: &Path) -> MediaKind {
        if path.is_dir() {
            return MediaKind::Directory;
        }
        if !path.exists() {
            return MediaKind::Missing;
        }
        use std::io::Read;
        let mut head = Vec::with_capacity(8192);
        let readable = std::fs::File::open(path)
            .and_then(|f| f.take(8192).read_to_end(&mut head))
            .is_ok();
        let utf8 = match std::str::from_utf8(&head) {
            Ok(_) => true,
            // a multi-byte character cut at the read boundary
            Err(e) => e.error_len().is_none(),
        };
        if !readable || !utf8 || head.contains(&0) {
            return MediaKind::Binary;
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("md" | "rmd" | "qmd" | "markdown")) {
            MediaKind::Markdown
        } else {
            MediaKind::Text
        }
    }
}

/// Immutable copy of what a grader (or the web console) needs to see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionSnapshot {
    pub current: Option<CurrentCell>,
    pub visible_items: Vec<ItemView>,
    pub progress: Progress,
    pub pending_message: bool,
    pub noted_issue: bool,
    pub submission: Option<SubmissionDescriptor>,
    pub github_issues: bool,
    pub missing_submissions: Vec<String>,
    pub finished: bool,
}

#[derive(Debug)]
pub struct Session {
    ws: Workspace,
    store: LogStore,
    current: Option<CellKey>,
    finished: bool,
}

impl Session {
    /// Load inputs, open (or create) the progress log and position the
    /// session at the first pending cell in scope.
    pub fn start(config: SessionConfig) -> Result<(Session, Vec<Effect>)> {
        let mut session = Session::open(config)?;
        let effects = session.position()?;
        Ok((session, effects))
    }

    /// Clear the chosen cells (all, if no subset is configured) and grade
    /// them again.
    pub fn regrade(config: SessionConfig) -> Result<(Session, Vec<Effect>)> {
        let mut session = Session::open(config)?;
        let gradees: Vec<String> = match &session.ws.config.students {
            Some(s) => s.clone(),
            None => session.store.log().gradees().to_vec(),
        };
        let sections: Vec<Section> = match &session.ws.config.questions {
            Some(q) => q.iter().map(|n| Section::parse(n)).collect(),
            None => session.store.log().sections(),
        };
        session.store.clear_cells(&gradees, &sections)?;
        let effects = session.position()?;
        Ok((session, effects))
    }

    fn open(config: SessionConfig) -> Result<Session> {
        let ws = Workspace::load(config)?;
        let gradees = ws.gradee_ids();
        let questions = ws.question_names();
        let log_path = ws.config.log_path.clone();
        let mut store = if log_path.exists() {
            LogStore::open(&log_path, &gradees, &questions)?
        } else {
            let meta = LogMeta::new(&ws.config.rubric_path, ws.config.mode);
            LogStore::init(&log_path, &gradees, &questions, ws.rubric.has_general(), meta)?
        };
        if ws.rubric.has_general() && !store.log().has_general() {
            store.add_general()?;
        }
        Ok(Session {
            ws,
            store,
            current: None,
            finished: false,
        })
    }

    fn position(&mut self) -> Result<Vec<Effect>> {
        self.current = self.next_after(None);
        match &self.current {
            None => Err(Error::AllGraded),
            Some(k) => Ok(self.ws.submission_path(&k.gradee).map(Effect::Open).into_iter().collect()),
        }
    }

    fn next_after(&self, after: Option<&CellKey>) -> Option<CellKey> {
        let ws = &self.ws;
        self.store
            .log()
            .next_pending_where(after, |c| ws.in_scope(&c.gradee, &c.section))
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn rubric(&self) -> &Rubric {
        &self.ws.rubric
    }

    pub fn log(&self) -> &ProgressLog {
        self.store.log()
    }

    pub fn current(&self) -> Option<&CellKey> {
        self.current.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn github_issues(&self) -> bool {
        self.ws.config.github_issues
    }

    /// Items offered for the current cell.
    pub fn visible_items(&self) -> Vec<&RubricItem> {
        match &self.current {
            Some(k) => self.ws.rubric.items_for(&k.section).unwrap_or_default(),
            None => Vec::new(),
        }
    }

    pub fn visible_codes(&self) -> Vec<&str> {
        self.visible_items()
            .into_iter()
            .map(|i| i.prompt_code.as_str())
            .collect()
    }

    fn current_record(&self) -> Result<(CellKey, CellRecord)> {
        let key = self.current.clone().ok_or(Error::SessionFinished)?;
        let record = self
            .store
            .log()
            .cell(&key.gradee, &key.section)
            .cloned()
            .ok_or_else(|| Error::UnknownCell {
                gradee: key.gradee.clone(),
                section: key.section.to_string(),
            })?;
        Ok((key, record))
    }

    /// Process one action. Input problems leave the session unchanged.
    pub fn apply(&mut self, action: Action) -> Result<Vec<Effect>> {
        if self.finished {
            return Err(Error::SessionFinished);
        }
        match action {
            Action::Quit => {
                self.finished = true;
                let mut effects = Vec::new();
                if let Some(k) = self.current.take() {
                    effects.extend(self.ws.submission_path(&k.gradee).map(Effect::Close));
                }
                effects.push(Effect::Finalize);
                Ok(effects)
            }
            Action::ApplyCodes { codes } => {
                check_codes(&codes, &self.visible_codes())?;
                let (_, record) = self.current_record()?;
                self.store.commit_cell(CellRecord {
                    applied_codes: codes,
                    ..record
                })?;
                Ok(self.advance())
            }
            Action::PersonalizedMessage { text } => {
                let (_, record) = self.current_record()?;
                self.store.update_cell(CellRecord {
                    personalized_message: Some(text),
                    ..record
                })?;
                Ok(Vec::new())
            }
            Action::NoteIssue { title, body } => {
                if !self.github_issues() {
                    return Err(InputError::IssuesDisabled.into());
                }
                let (_, record) = self.current_record()?;
                self.store.update_cell(CellRecord {
                    issue_title: Some(title),
                    issue_body: Some(body),
                    ..record
                })?;
                Ok(Vec::new())
            }
            Action::NewRubricItem { item } => {
                let (key, _) = self.current_record()?;
                let item = self.build_item(&key.section, item)?;
                let general = item.applicability == Applicability::General;
                self.ws.rubric = self.ws.rubric.add_item(item, &self.ws.config.rubric_path)?;
                if general && !self.store.log().has_general() {
                    self.store.add_general()?;
                }
                Ok(Vec::new())
            }
            Action::Skip => {
                self.current_record()?;
                Ok(self.advance())
            }
        }
    }

    fn build_item(&self, section: &Section, draft: ItemDraft) -> Result<RubricItem> {
        let applicability = match draft.applicability.as_deref().map(str::trim) {
            None | Some("") => match section {
                Section::Question(q) => Applicability::Question(q.clone()),
                Section::General => Applicability::General,
            },
            Some(name) => Applicability::parse(name),
        };
        let total_points = match &applicability {
            Applicability::Question(q) => Some(self.ws.rubric.total_points(q).ok_or_else(|| {
                InputError::Invalid(format!(
                    "{q:?} is not a question of this assignment; questions cannot be added while grading"
                ))
            })?),
            _ => None,
        };
        let points: Decimal = parse_points(&draft.points).map_err(InputError::Invalid)?;
        Ok(RubricItem {
            applicability,
            total_points,
            prompt_code: draft.prompt_code.trim().to_string(),
            prompt_message: draft.prompt_message,
            feedback: draft.feedback,
            points,
        })
    }

    fn advance(&mut self) -> Vec<Effect> {
        let prev = self.current.take();
        let next = self.next_after(prev.as_ref());
        let mut effects = Vec::new();
        let changed = prev.as_ref().map(|k| &k.gradee) != next.as_ref().map(|k| &k.gradee);
        if changed {
            if let Some(p) = &prev {
                effects.extend(self.ws.submission_path(&p.gradee).map(Effect::Close));
            }
            if let Some(n) = &next {
                effects.extend(self.ws.submission_path(&n.gradee).map(Effect::Open));
            }
        }
        if next.is_none() {
            self.finished = true;
            effects.push(Effect::Finalize);
        }
        self.current = next;
        effects
    }

    /// Write the grade sheet and feedback files from the current log.
    pub fn finalize(&self) -> Result<FinalizeReport> {
        self.ws.finalize(self.store.log())
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let log = self.store.log();
        let mode = self.ws.rubric.mode();
        let record = self
            .current
            .as_ref()
            .and_then(|k| log.cell(&k.gradee, &k.section));
        let remaining = log
            .cells()
            .iter()
            .filter(|c| !c.is_graded() && self.ws.in_scope(&c.gradee, &c.section))
            .count();
        SessionSnapshot {
            current: self.current.as_ref().map(|k| CurrentCell {
                gradee: k.gradee.clone(),
                question: k.section.to_string(),
            }),
            visible_items: self
                .visible_items()
                .into_iter()
                .map(|i| ItemView {
                    code: i.prompt_code.clone(),
                    message: i.prompt_message.clone(),
                    points: format_points(i.points * mode.direction()),
                    display: i.prompt_line(mode),
                })
                .collect(),
            progress: Progress {
                graded: log.graded_count(),
                total: log.cells().len(),
                remaining_in_scope: remaining,
            },
            pending_message: record.is_some_and(|r| r.personalized_message.is_some()),
            noted_issue: record.is_some_and(CellRecord::has_issue),
            submission: self.current.as_ref().and_then(|k| {
                let path = self.ws.submission_path(&k.gradee)?;
                Some(SubmissionDescriptor {
                    media_kind: MediaKind::detect(&path),
                    path: self.ws.submissions.get(&k.gradee)?.clone(),
                })
            }),
            github_issues: self.github_issues(),
            missing_submissions: self.ws.presence.missing.clone(),
            finished: self.finished,
        }
    }
}
