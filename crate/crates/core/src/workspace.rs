//! Everything a grading session or a finalize run reads at startup.

use std::path::PathBuf;

use indexmap::IndexMap;

use crate::error::{Error, Result, ValidationReport};
use crate::fsutil::native_path;
use crate::outputs::{build_grade_sheet, render_feedback, write_outputs, GradeSheet, RowStatus};
use crate::paths::{check_presence, resolve_all, PathTemplate, Presence};
use crate::progress::{read_log, ProgressLog};
use crate::roster::{Gradee, Roster};
use crate::rubric::{GradingMode, Rubric, Section};

/// How a submission is opened or closed when the session moves between gradees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookSetting {
    /// Platform opener for open; a printed notice for close.
    Default,
    Disabled,
    /// Shell command; the path is appended as its last argument.
    Command(String),
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub rubric_path: PathBuf,
    pub roster_path: PathBuf,
    pub example_identifier: String,
    pub example_submission: String,
    pub example_feedback: String,
    pub log_path: PathBuf,
    pub grades_path: PathBuf,
    pub mode: GradingMode,
    pub team_mode: bool,
    pub github_issues: bool,
    pub students: Option<Vec<String>>,
    pub questions: Option<Vec<String>>,
    /// Directory the submission and feedback paths are relative to.
    pub root: PathBuf,
    pub open_hook: HookSetting,
    pub close_hook: HookSetting,
}

impl SessionConfig {
    /// Minimal configuration: grade everything, no issues, default hooks.
    pub fn new(
        rubric_path: impl Into<PathBuf>,
        roster_path: impl Into<PathBuf>,
        example_identifier: impl Into<String>,
        example_submission: impl Into<String>,
        example_feedback: impl Into<String>,
        log_path: impl Into<PathBuf>,
        grades_path: impl Into<PathBuf>,
    ) -> SessionConfig {
        SessionConfig {
            rubric_path: rubric_path.into(),
            roster_path: roster_path.into(),
            example_identifier: example_identifier.into(),
            example_submission: example_submission.into(),
            example_feedback: example_feedback.into(),
            log_path: log_path.into(),
            grades_path: grades_path.into(),
            mode: GradingMode::Negative,
            team_mode: false,
            github_issues: false,
            students: None,
            questions: None,
            root: PathBuf::from("."),
            open_hook: HookSetting::Default,
            close_hook: HookSetting::Default,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedOutputs {
    pub grade_sheet: GradeSheet,
    /// (gradee, feedback file, markdown)
    pub feedback: Vec<(String, PathBuf, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalizeReport {
    pub grade_sheet: PathBuf,
    pub feedback_files: usize,
    pub complete: usize,
    pub partial: usize,
    pub missing: usize,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: SessionConfig,
    pub rubric: Rubric,
    pub roster: Roster,
    pub gradees: Vec<Gradee>,
    pub submissions: IndexMap<String, String>,
    pub feedback_paths: IndexMap<String, String>,
    pub presence: Presence,
}

impl Workspace {
    pub fn load(config: SessionConfig) -> Result<Workspace> {
        let mut report = ValidationReport::default();
        for (name, value) in [
            ("rubric path", config.rubric_path.as_os_str().is_empty()),
            ("roster path", config.roster_path.as_os_str().is_empty()),
            ("log path", config.log_path.as_os_str().is_empty()),
            ("grade sheet path", config.grades_path.as_os_str().is_empty()),
            ("example identifier", config.example_identifier.is_empty()),
            ("example submission path", config.example_submission.is_empty()),
            ("example feedback path", config.example_feedback.is_empty()),
        ] {
            if value {
                report.push(None, format!("{name} is empty"));
            }
        }
        report.into_result()?;

        let rubric = Rubric::load(&config.rubric_path, config.mode)?;
        let roster = Roster::load(&config.roster_path, config.team_mode)?;
        let gradees = roster.gradees();

        let mut report = ValidationReport::default();
        if rubric.questions().is_empty() {
            report.push(None, "rubric has no question-specific items, so there is nothing to grade");
        }
        if let Some(students) = &config.students {
            for s in students {
                if !gradees.iter().any(|g| &g.identifier == s) {
                    report.push(None, format!("{s:?} is not a gradee in the roster"));
                }
            }
        }
        if let Some(questions) = &config.questions {
            for q in questions {
                let known = match Section::parse(q) {
                    Section::General => rubric.has_general(),
                    Section::Question(name) => rubric.has_question(&name),
                };
                if !known {
                    report.push(None, format!("{q:?} is not a question in the rubric"));
                }
            }
        }
        report.into_result()?;

        let sub_template =
            PathTemplate::compile(&config.example_identifier, &config.example_submission)?;
        let fb_template =
            PathTemplate::compile(&config.example_identifier, &config.example_feedback)?;
        let submissions = resolve_all(&sub_template, &gradees)?;
        let feedback_paths = resolve_all(&fb_template, &gradees)?;
        let presence = check_presence(&submissions, &config.root);
        Ok(Workspace {
            config,
            rubric,
            roster,
            gradees,
            submissions,
            feedback_paths,
            presence,
        })
    }

    pub fn gradee_ids(&self) -> Vec<String> {
        self.gradees.iter().map(|g| g.identifier.clone()).collect()
    }

    pub fn question_names(&self) -> Vec<String> {
        self.rubric.questions().into_iter().map(str::to_string).collect()
    }

    pub fn is_missing(&self, gradee: &str) -> bool {
        self.presence.missing.iter().any(|m| m == gradee)
    }

    pub fn submission_path(&self, gradee: &str) -> Option<PathBuf> {
        self.submissions
            .get(gradee)
            .map(|p| native_path(&self.config.root, p))
    }

    pub fn feedback_path(&self, gradee: &str) -> Option<PathBuf> {
        self.feedback_paths
            .get(gradee)
            .map(|p| native_path(&self.config.root, p))
    }

    /// Whether a cell belongs to the configured student and question subsets.
    pub fn in_scope(&self, gradee: &str, section: &Section) -> bool {
        let student_ok = self
            .config
            .students
            .as_ref()
            .is_none_or(|s| s.iter().any(|x| x == gradee));
        let question_ok = self
            .config
            .questions
            .as_ref()
            .is_none_or(|qs| qs.iter().any(|q| &Section::parse(q) == section));
        student_ok && question_ok && !self.is_missing(gradee)
    }

    pub fn render(&self, log: &ProgressLog) -> Result<RenderedOutputs> {
        let grade_sheet =
            build_grade_sheet(&self.roster, log, &self.rubric, &self.presence.missing)?;
        let mut feedback = Vec::new();
        for gradee in log.gradees() {
            if self.is_missing(gradee) {
                continue;
            }
            let path = self
                .feedback_path(gradee)
                .ok_or_else(|| Error::UnknownGradee(gradee.clone()))?;
            feedback.push((gradee.clone(), path, render_feedback(gradee, log, &self.rubric)?));
        }
        Ok(RenderedOutputs {
            grade_sheet,
            feedback,
        })
    }

    /// Read the progress log named in the configuration, checking that it
    /// still matches the roster and rubric.
    pub fn read_log(&self) -> Result<ProgressLog> {
        let mut log = read_log(&self.config.log_path)?;
        log.check_axes(&self.gradee_ids(), &self.question_names())?;
        if self.rubric.has_general() && !log.has_general() {
            log.add_general();
        }
        Ok(log)
    }

    /// Regenerate the grade sheet and every feedback file from `log`.
    pub fn finalize(&self, log: &ProgressLog) -> Result<FinalizeReport> {
        let rendered = self.render(log)?;
        let files: Vec<(PathBuf, String)> = rendered
            .feedback
            .iter()
            .map(|(_, p, t)| (p.clone(), t.clone()))
            .collect();
        write_outputs(&rendered.grade_sheet, &self.config.grades_path, &files)?;
        let count = |s: RowStatus| {
            log.gradees()
                .iter()
                .filter(|g| {
                    rendered
                        .grade_sheet
                        .rows
                        .iter()
                        .any(|r| &r.outcome.gradee == *g && r.outcome.status == s)
                })
                .count()
        };
        Ok(FinalizeReport {
            grade_sheet: self.config.grades_path.clone(),
            feedback_files: files.len(),
            complete: count(RowStatus::Complete),
            partial: count(RowStatus::Partial),
            missing: count(RowStatus::MissingSubmission),
        })
    }
}
