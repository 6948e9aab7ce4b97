//! Python bindings: rubric and roster parsing, path templates, cell grades
//! and a scripted grading session.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use gradekit::engine::{parse_input as parse_line, Action, Command, Effect, Session as CoreSession};
use gradekit::outputs::compute_cell_grade;
use gradekit::points::format_points;
use gradekit::workspace::FinalizeReport;
use gradekit::{GradingMode, HookSetting, SessionConfig};

create_exception!(gradekit, GradekitError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    GradekitError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<GradingMode> {
    name.parse().map_err(err)
}

/// Empty rubric with the header for `mode` ("negative" or "positive").
#[pyfunction]
#[pyo3(signature = (mode = "negative"))]
fn rubric_template(mode: &str) -> PyResult<String> {
    Ok(gradekit::rubric::rubric_template(self::mode(mode)?))
}

#[pyclass(frozen)]
struct Rubric {
    inner: gradekit::Rubric,
}

#[pymethods]
impl Rubric {
    #[staticmethod]
    #[pyo3(signature = (csv_text, mode = "negative"))]
    fn parse(csv_text: &str, mode: &str) -> PyResult<Rubric> {
        let inner = gradekit::Rubric::parse(csv_text, self::mode(mode)?).map_err(err)?;
        Ok(Rubric { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, mode = "negative"))]
    fn load(path: std::path::PathBuf, mode: &str) -> PyResult<Rubric> {
        let inner = gradekit::Rubric::load(&path, self::mode(mode)?).map_err(err)?;
        Ok(Rubric { inner })
    }

    fn questions(&self) -> Vec<String> {
        self.inner.questions().into_iter().map(String::from).collect()
    }

    /// Items as dicts of strings; points are decimal strings.
    fn items(&self) -> Vec<BTreeMap<&'static str, String>> {
        self.inner
            .items()
            .iter()
            .map(|i| {
                BTreeMap::from([
                    ("name", i.applicability.as_name().to_string()),
                    ("total_points", i.total_points.map(format_points).unwrap_or_default()),
                    ("prompt_code", i.prompt_code.clone()),
                    ("prompt_message", i.prompt_message.clone()),
                    ("feedback", i.feedback.clone()),
                    ("points", format_points(i.points)),
                ])
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Grade of `question` with `codes` applied, and any range warnings.
    fn cell_grade(&self, question: &str, codes: Vec<String>) -> PyResult<(String, Vec<String>)> {
        let (grade, warnings) = compute_cell_grade(&self.inner, question, &codes).map_err(err)?;
        Ok((format_points(grade), warnings))
    }

    fn __len__(&self) -> usize {
        self.inner.items().len()
    }
}

#[pyclass(frozen)]
struct PathTemplate {
    inner: gradekit::PathTemplate,
}

#[pymethods]
impl PathTemplate {
    #[new]
    fn new(example_identifier: &str, example_path: &str) -> PyResult<PathTemplate> {
        let inner = gradekit::PathTemplate::compile(example_identifier, example_path).map_err(err)?;
        Ok(PathTemplate { inner })
    }

    fn instantiate(&self, identifier: &str) -> String {
        self.inner.instantiate(identifier)
    }

    /// Like `instantiate`, but rejects paths that leave the course directory.
    fn resolve(&self, identifier: &str) -> PyResult<String> {
        self.inner.resolve(identifier).map_err(err)
    }
}

/// Gradees of a roster as `(identifier, members)` pairs.
#[pyfunction]
#[pyo3(signature = (csv_text, team = false))]
fn gradees(csv_text: &str, team: bool) -> PyResult<Vec<(String, Vec<String>)>> {
    let roster = gradekit::Roster::parse(csv_text, team).map_err(err)?;
    Ok(roster.gradees().into_iter().map(|g| (g.identifier, g.members)).collect())
}

/// Interpret a prompt line. Returns the action as a dict, or `{"type":
/// "message"|"new_rubric_item"|"note_issue"}` when more input is needed.
#[pyfunction]
#[pyo3(signature = (line, visible_codes, github_issues = false))]
fn parse_input(line: &str, visible_codes: Vec<String>, github_issues: bool) -> PyResult<BTreeMap<&'static str, Vec<String>>> {
    let visible: Vec<&str> = visible_codes.iter().map(String::as_str).collect();
    let cmd = parse_line(line, &visible, github_issues).map_err(err)?;
    let kind = |k: &str| ("type", vec![k.to_string()]);
    Ok(match cmd {
        Command::Apply(codes) => BTreeMap::from([kind("apply_codes"), ("codes", codes)]),
        Command::Message => BTreeMap::from([kind("personalized_message")]),
        Command::NewItem => BTreeMap::from([kind("new_rubric_item")]),
        Command::Issue => BTreeMap::from([kind("note_issue")]),
        Command::Skip => BTreeMap::from([kind("skip")]),
        Command::Quit => BTreeMap::from([kind("quit")]),
    })
}

fn report_dict(r: &FinalizeReport) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("grade_sheet", r.grade_sheet.display().to_string()),
        ("feedback_files", r.feedback_files.to_string()),
        ("complete", r.complete.to_string()),
        ("partial", r.partial.to_string()),
        ("missing", r.missing.to_string()),
    ])
}

/// A grading session driven by actions. Submissions are never opened;
/// outputs are regenerated whenever the session asks for it.
#[pyclass(unsendable)]
struct Session {
    inner: CoreSession,
    last_report: Option<FinalizeReport>,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (
        rubric, roster, example_id, example_submission, example_feedback, log, grades,
        *, mode = "negative", root = None, team = false, students = None, questions = None,
        github_issues = false, regrade = false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rubric: std::path::PathBuf,
        roster: std::path::PathBuf,
        example_id: &str,
        example_submission: &str,
        example_feedback: &str,
        log: std::path::PathBuf,
        grades: std::path::PathBuf,
        mode: &str,
        root: Option<std::path::PathBuf>,
        team: bool,
        students: Option<Vec<String>>,
        questions: Option<Vec<String>>,
        github_issues: bool,
        regrade: bool,
    ) -> PyResult<Session> {
        let mut c = SessionConfig::new(rubric, roster, example_id, example_submission, example_feedback, log, grades);
        c.mode = self::mode(mode)?;
        if let Some(root) = root {
            c.root = root;
        }
        c.team_mode = team;
        c.students = students;
        c.questions = questions;
        c.github_issues = github_issues;
        c.open_hook = HookSetting::Disabled;
        c.close_hook = HookSetting::Disabled;
        let (inner, _) = if regrade {
            CoreSession::regrade(c)
        } else {
            CoreSession::start(c)
        }
        .map_err(err)?;
        Ok(Session { inner, last_report: None })
    }

    /// Apply one action given as JSON, e.g. `{"type": "apply_codes",
    /// "codes": ["1a"]}`.
    fn apply(&mut self, action_json: &str) -> PyResult<()> {
        let action: Action = serde_json::from_str(action_json).map_err(err)?;
        let effects = self.inner.apply(action).map_err(err)?;
        if effects.contains(&Effect::Finalize) {
            self.last_report = Some(self.inner.finalize().map_err(err)?);
        }
        Ok(())
    }

    /// Current cell as `(gradee, section)`, or None once finished.
    fn current(&self) -> Option<(String, String)> {
        self.inner
            .current()
            .map(|k| (k.gradee.clone(), k.section.name().to_string()))
    }

    fn visible_codes(&self) -> Vec<String> {
        self.inner.visible_codes().into_iter().map(String::from).collect()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.is_finished()
    }

    /// Full session state as JSON.
    fn snapshot_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.snapshot()).map_err(err)
    }

    /// Regenerate the grade sheet and feedback files now.
    fn finalize(&mut self) -> PyResult<BTreeMap<&'static str, String>> {
        let r = self.inner.finalize().map_err(err)?;
        let d = report_dict(&r);
        self.last_report = Some(r);
        Ok(d)
    }

    /// Report from the most recent finalize, if any.
    fn last_report(&self) -> Option<BTreeMap<&'static str, String>> {
        self.last_report.as_ref().map(report_dict)
    }
}

#[pymodule]
#[pyo3(name = "gradekit")]
fn gradekit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GradekitError", m.py().get_type::<GradekitError>())?;
    m.add_function(wrap_pyfunction!(rubric_template, m)?)?;
    m.add_function(wrap_pyfunction!(gradees, m)?)?;
    m.add_function(wrap_pyfunction!(parse_input, m)?)?;
    m.add_class::<Rubric>()?;
    m.add_class::<PathTemplate>()?;
    m.add_class::<Session>()?;
    Ok(())
}
