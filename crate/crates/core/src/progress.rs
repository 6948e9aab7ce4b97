//! The grading progress log.
//!
//! The log records which prompt codes were applied to each (gradee, question)
//! cell, plus free-text messages and noted issues. It never records points:
//! grades are recomputed from the rubric whenever outputs are generated, so
//! re-pricing a rubric item between sessions changes every affected grade.
//!
//! On disk the log is a CSV with one row per cell and a JSON side-file with
//! metadata. Every write replaces the file atomically.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{atomic_write, read_to_string};
use crate::rubric::{GradingMode, Section};
use crate::table::{read_table, write_table};

pub const LOG_COLUMNS: [&str; 7] = [
    "gradee_identifier",
    "question",
    "applied_codes",
    "personalized_message",
    "issue_title",
    "issue_body",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellStatus {
    Ungraded,
    Graded,
}

impl CellStatus {
    fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ungraded => "UNGRADED",
            CellStatus::Graded => "GRADED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub gradee: String,
    pub section: Section,
}

impl CellKey {
    pub fn new(gradee: impl Into<String>, section: Section) -> Self {
        CellKey {
            gradee: gradee.into(),
            section,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRecord {
    pub gradee: String,
    pub section: Section,
    pub applied_codes: Vec<String>,
    pub personalized_message: Option<String>,
    pub issue_title: Option<String>,
    pub issue_body: Option<String>,
    pub status: CellStatus,
}

impl CellRecord {
    pub fn ungraded(gradee: &str, section: Section) -> CellRecord {
        CellRecord {
            gradee: gradee.to_string(),
            section,
            applied_codes: Vec::new(),
            personalized_message: None,
            issue_title: None,
            issue_body: None,
            status: CellStatus::Ungraded,
        }
    }

    pub fn key(&self) -> CellKey {
        CellKey::new(self.gradee.clone(), self.section.clone())
    }

    pub fn is_graded(&self) -> bool {
        self.status == CellStatus::Graded
    }

    pub fn has_issue(&self) -> bool {
        self.issue_title.is_some() || self.issue_body.is_some()
    }

    fn normalize(mut self) -> Self {
        for text in [
            &mut self.personalized_message,
            &mut self.issue_title,
            &mut self.issue_body,
        ] {
            if text.as_deref() == Some("") {
                *text = None;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMeta {
    pub rubric_path: String,
    pub mode: GradingMode,
}

impl LogMeta {
    pub fn new(rubric_path: &Path, mode: GradingMode) -> LogMeta {
        LogMeta {
            rubric_path: rubric_path.display().to_string(),
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressLog {
    meta: LogMeta,
    gradees: Vec<String>,
    questions: Vec<String>,
    has_general: bool,
    /// Gradee-major, section-minor; GENERAL last within a gradee.
    cells: Vec<CellRecord>,
}

impl ProgressLog {
    /// A log with every cell ungraded.
    pub fn new(
        gradees: &[String],
        questions: &[String],
        has_general: bool,
        meta: LogMeta,
    ) -> Result<ProgressLog> {
        if gradees.is_empty() {
            return Err(Error::EmptyAxis("gradees"));
        }
        if questions.is_empty() {
            return Err(Error::EmptyAxis("questions"));
        }
        let mut log = ProgressLog {
            meta,
            gradees: gradees.to_vec(),
            questions: questions.to_vec(),
            has_general,
            cells: Vec::new(),
        };
        log.cells = log
            .keys()
            .map(|k| CellRecord::ungraded(&k.gradee, k.section))
            .collect();
        Ok(log)
    }

    pub fn meta(&self) -> &LogMeta {
        &self.meta
    }

    pub fn gradees(&self) -> &[String] {
        &self.gradees
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn has_general(&self) -> bool {
        self.has_general
    }

    /// Sections of one gradee, in prompting order.
    pub fn sections(&self) -> Vec<Section> {
        let mut out: Vec<Section> = self
            .questions
            .iter()
            .map(|q| Section::Question(q.clone()))
            .collect();
        if self.has_general {
            out.push(Section::General);
        }
        out
    }

    /// Every cell key in log order.
    pub fn keys(&self) -> impl Iterator<Item = CellKey> + '_ {
        let sections = self.sections();
        self.gradees.iter().flat_map(move |g| {
            sections
                .clone()
                .into_iter()
                .map(move |s| CellKey::new(g.clone(), s))
        })
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.cells
    }

    fn width(&self) -> usize {
        self.questions.len() + usize::from(self.has_general)
    }

    fn index(&self, gradee: &str, section: &Section) -> Option<usize> {
        let g = self.gradees.iter().position(|x| x == gradee)?;
        let s = match section {
            Section::Question(q) => self.questions.iter().position(|x| x == q)?,
            Section::General if self.has_general => self.questions.len(),
            Section::General => return None,
        };
        Some(g * self.width() + s)
    }

    fn index_or_err(&self, gradee: &str, section: &Section) -> Result<usize> {
        self.index(gradee, section).ok_or_else(|| Error::UnknownCell {
            gradee: gradee.to_string(),
            section: section.to_string(),
        })
    }

    pub fn cell(&self, gradee: &str, section: &Section) -> Option<&CellRecord> {
        self.index(gradee, section).map(|i| &self.cells[i])
    }

    pub fn cells_of<'a>(&'a self, gradee: &str) -> Option<&'a [CellRecord]> {
        let g = self.gradees.iter().position(|x| x == gradee)?;
        let w = self.width();
        Some(&self.cells[g * w..(g + 1) * w])
    }

    /// Replace a cell's content and mark it graded.
    pub fn commit_cell(&mut self, mut record: CellRecord) -> Result<()> {
        let i = self.index_or_err(&record.gradee, &record.section)?;
        record.status = CellStatus::Graded;
        self.cells[i] = record.normalize();
        Ok(())
    }

    /// Replace a cell's content without changing its status.
    pub fn update_cell(&mut self, record: CellRecord) -> Result<()> {
        let i = self.index_or_err(&record.gradee, &record.section)?;
        let status = self.cells[i].status;
        self.cells[i] = CellRecord {
            status,
            ..record.normalize()
        };
        Ok(())
    }

    /// Reset the named cells to ungraded and erase their content.
    pub fn clear_cells(&mut self, gradees: &[String], sections: &[Section]) -> Result<()> {
        let mut targets = Vec::new();
        for g in gradees {
            for s in sections {
                targets.push(self.index_or_err(g, s)?);
            }
        }
        for i in targets {
            let c = &self.cells[i];
            self.cells[i] = CellRecord::ungraded(&c.gradee.clone(), c.section.clone());
        }
        Ok(())
    }

    /// First ungraded cell in gradee-major order.
    pub fn next_pending(&self) -> Option<CellKey> {
        self.cells.iter().find(|c| !c.is_graded()).map(CellRecord::key)
    }

    /// First ungraded cell strictly after `after` (or from the start) that
    /// satisfies `in_scope`.
    pub fn next_pending_where(
        &self,
        after: Option<&CellKey>,
        mut in_scope: impl FnMut(&CellRecord) -> bool,
    ) -> Option<CellKey> {
        let start = match after {
            Some(k) => self.index(&k.gradee, &k.section).map_or(0, |i| i + 1),
            None => 0,
        };
        self.cells[start..]
            .iter()
            .find(|c| !c.is_graded() && in_scope(c))
            .map(CellRecord::key)
    }

    pub fn graded_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_graded()).count()
    }

    /// Add ungraded GENERAL cells, e.g. after the first GENERAL rubric item appears.
    pub fn add_general(&mut self) {
        if self.has_general {
            return;
        }
        let old = std::mem::take(&mut self.cells);
        let w = self.questions.len();
        self.has_general = true;
        for (g, chunk) in self.gradees.iter().zip(old.chunks(w)) {
            self.cells.extend_from_slice(chunk);
            self.cells.push(CellRecord::ungraded(g, Section::General));
        }
    }

    /// Check that the log's axes match the current roster and rubric.
    pub fn check_axes(&self, gradees: &[String], questions: &[String]) -> Result<()> {
        let mut problems = Vec::new();
        for g in gradees.iter().filter(|g| !self.gradees.contains(g)) {
            problems.push(format!("gradee {g:?} is not in the log"));
        }
        for g in self.gradees.iter().filter(|g| !gradees.contains(g)) {
            problems.push(format!("log gradee {g:?} is no longer in the roster"));
        }
        for q in questions.iter().filter(|q| !self.questions.contains(q)) {
            problems.push(format!("question {q:?} is not in the log"));
        }
        for q in self.questions.iter().filter(|q| !questions.contains(q)) {
            problems.push(format!("log question {q:?} is no longer in the rubric"));
        }
        if problems.is_empty() && (self.gradees != gradees || self.questions != questions) {
            problems.push("gradee or question order changed".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::AxesMismatch(problems.join("; ")))
        }
    }

    pub fn to_csv(&self) -> String {
        write_table(
            &LOG_COLUMNS,
            self.cells.iter().map(|c| {
                [
                    c.gradee.clone(),
                    c.section.name().to_string(),
                    c.applied_codes.join(";"),
                    c.personalized_message.clone().unwrap_or_default(),
                    c.issue_title.clone().unwrap_or_default(),
                    c.issue_body.clone().unwrap_or_default(),
                    c.status.as_str().to_string(),
                ]
            }),
        )
    }

    pub fn from_csv(text: &str, meta: LogMeta) -> Result<ProgressLog> {
        let malformed = |m: String| Error::MalformedLog(m);
        let table = read_table(text).map_err(|e| malformed(e.to_string()))?;
        if table.header != LOG_COLUMNS {
            return Err(malformed(format!(
                "unexpected header {:?}",
                table.header.join(",")
            )));
        }
        let mut gradees: Vec<String> = Vec::new();
        let mut questions: Vec<String> = Vec::new();
        let mut has_general = false;
        let mut records: HashMap<CellKey, CellRecord> = HashMap::new();
        for (line, rec) in &table.records {
            let section = Section::parse(&rec[1]);
            match &section {
                Section::General => has_general = true,
                Section::Question(q) if q.is_empty() => {
                    return Err(malformed(format!("row {line}: empty question")))
                }
                Section::Question(q) => {
                    if !questions.contains(q) {
                        questions.push(q.clone());
                    }
                }
            }
            if rec[0].is_empty() {
                return Err(malformed(format!("row {line}: empty gradee identifier")));
            }
            if !gradees.contains(&rec[0]) {
                gradees.push(rec[0].clone());
            }
            let status = match rec[6].as_str() {
                "GRADED" => CellStatus::Graded,
                "UNGRADED" => CellStatus::Ungraded,
                other => return Err(malformed(format!("row {line}: unknown status {other:?}"))),
            };
            let codes: Vec<String> = if rec[2].is_empty() {
                Vec::new()
            } else {
                rec[2].split(';').map(str::to_string).collect()
            };
            for (i, c) in codes.iter().enumerate() {
                if c.is_empty() || codes[..i].contains(c) {
                    return Err(malformed(format!("row {line}: bad code list {:?}", rec[2])));
                }
            }
            let record = CellRecord {
                gradee: rec[0].clone(),
                section,
                applied_codes: codes,
                personalized_message: Some(rec[3].clone()),
                issue_title: Some(rec[4].clone()),
                issue_body: Some(rec[5].clone()),
                status,
            }
            .normalize();
            if records.insert(record.key(), record).is_some() {
                return Err(malformed(format!("row {line}: duplicate cell")));
            }
        }
        let mut log = ProgressLog::new(&gradees, &questions, has_general, meta)
            .map_err(|e| malformed(e.to_string()))?;
        if records.len() != log.cells.len() {
            return Err(malformed(format!(
                "expected {} cells, found {}",
                log.cells.len(),
                records.len()
            )));
        }
        for cell in log.cells.iter_mut() {
            *cell = records
                .remove(&cell.key())
                .ok_or_else(|| malformed(format!("missing cell {} / {}", cell.gradee, cell.section)))?;
        }
        Ok(log)
    }
}

/// Path of the metadata side-file for a log.
pub fn meta_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("meta.json")
}

pub fn lock_path(log_path: &Path) -> PathBuf {
    let mut name = log_path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    log_path.with_file_name(name)
}

/// Read a consistent snapshot of a log without taking the writer lock.
pub fn read_log(path: &Path) -> Result<ProgressLog> {
    let meta_file = meta_path(path);
    let meta: LogMeta = serde_json::from_str(&read_to_string(&meta_file)?)
        .map_err(|e| Error::MalformedLog(format!("{}: {e}", meta_file.display())))?;
    ProgressLog::from_csv(&read_to_string(path)?, meta)
}

fn write_log(path: &Path, log: &ProgressLog) -> Result<()> {
    atomic_write(path, log.to_csv().as_bytes())
}

/// Exclusive writer lock held beside the log for the lifetime of a session.
#[derive(Debug)]
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(log_path: &Path) -> Result<LockFile> {
        use std::io::Write;
        let path = lock_path(log_path);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::LogLocked(path))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        writeln!(file, "locked at {stamp} by pid {}", std::process::id()).map_err(|e| Error::io(&path, e))?;
        Ok(LockFile { path })
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// A progress log opened for writing. Each mutation is persisted before the
/// in-memory copy changes, so memory and disk always agree.
#[derive(Debug)]
pub struct LogStore {
    path: PathBuf,
    log: ProgressLog,
    _lock: LockFile,
}

impl LogStore {
    /// Create and persist a fresh log.
    pub fn init(
        path: &Path,
        gradees: &[String],
        questions: &[String],
        has_general: bool,
        meta: LogMeta,
    ) -> Result<LogStore> {
        let log = ProgressLog::new(gradees, questions, has_general, meta)?;
        let lock = LockFile::acquire(path)?;
        let meta_json = serde_json::to_string_pretty(log.meta()).expect("meta serializes");
        atomic_write(&meta_path(path), meta_json.as_bytes())?;
        write_log(path, &log)?;
        Ok(LogStore {
            path: path.to_path_buf(),
            log,
            _lock: lock,
        })
    }

    /// Open an existing log, checking it against the current gradees and questions.
    pub fn open(path: &Path, gradees: &[String], questions: &[String]) -> Result<LogStore> {
        let lock = LockFile::acquire(path)?;
        let log = read_log(path)?;
        log.check_axes(gradees, questions)?;
        Ok(LogStore {
            path: path.to_path_buf(),
            log,
            _lock: lock,
        })
    }

    pub fn log(&self) -> &ProgressLog {
        &self.log
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn mutate(&mut self, f: impl FnOnce(&mut ProgressLog) -> Result<()>) -> Result<()> {
        let mut next = self.log.clone();
        f(&mut next)?;
        write_log(&self.path, &next)?;
        self.log = next;
        Ok(())
    }

    pub fn commit_cell(&mut self, record: CellRecord) -> Result<()> {
        self.mutate(|l| l.commit_cell(record))
    }

    pub fn update_cell(&mut self, record: CellRecord) -> Result<()> {
        self.mutate(|l| l.update_cell(record))
    }

    pub fn clear_cells(&mut self, gradees: &[String], sections: &[Section]) -> Result<()> {
        self.mutate(|l| l.clear_cells(gradees, sections))
    }

    pub fn add_general(&mut self) -> Result<()> {
        self.mutate(|l| {
            l.add_general();
            Ok(())
        })
    }
}
