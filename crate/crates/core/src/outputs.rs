//! Grade sheets and feedback documents derived from a rubric and a progress log.

use std::fmt::Write as _;
use std::path::Path;

use rust_decimal::Decimal;

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::points::format_points;
use crate::progress::{CellRecord, ProgressLog};
use crate::roster::Roster;
use crate::rubric::{GradingMode, Rubric, Section};
use crate::table::write_table;

/// Grade of one question cell. Negative grading removes from the question
/// total; positive grading adds from zero. Results outside `[0, total]` are
/// kept and reported as warnings.
pub fn compute_cell_grade(
    rubric: &Rubric,
    question: &str,
    codes: &[String],
) -> Result<(Decimal, Vec<String>)> {
    let section = Section::Question(question.to_string());
    let total = rubric
        .total_points(question)
        .ok_or_else(|| Error::UnknownQuestion(question.to_string()))?;
    let mut sum = Decimal::ZERO;
    for code in codes {
        sum += rubric.lookup(&section, code)?.points;
    }
    let grade = match rubric.mode() {
        GradingMode::Negative => total - sum,
        GradingMode::Positive => sum,
    };
    let mut warnings = Vec::new();
    if grade < Decimal::ZERO {
        warnings.push(format!("{question}: grade {} is below zero", format_points(grade)));
    }
    if grade > total {
        warnings.push(format!(
            "{question}: grade {} exceeds total {}",
            format_points(grade),
            format_points(total)
        ));
    }
    Ok((grade, warnings))
}

/// Signed contribution of applied GENERAL items to the assignment total.
pub fn general_adjustment(rubric: &Rubric, codes: &[String]) -> Result<Decimal> {
    let mut sum = Decimal::ZERO;
    for code in codes {
        sum += rubric.lookup(&Section::General, code)?.points;
    }
    Ok(sum * rubric.mode().direction())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Complete,
    Partial,
    MissingSubmission,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Complete => "COMPLETE",
            RowStatus::Partial => "PARTIAL",
            RowStatus::MissingSubmission => "MISSING_SUBMISSION",
        }
    }
}

/// Grades of one gradee; shared by every roster row of a team.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeOutcome {
    pub gradee: String,
    pub question_grades: Vec<Option<Decimal>>,
    pub general: Option<Decimal>,
    pub total: Option<Decimal>,
    pub status: RowStatus,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeRow {
    pub roster_values: Vec<String>,
    pub outcome: GradeOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeSheet {
    pub roster_columns: Vec<String>,
    pub questions: Vec<String>,
    pub has_general: bool,
    pub rows: Vec<GradeRow>,
}

fn check_axes(roster: &Roster, log: &ProgressLog, rubric: &Rubric) -> Result<()> {
    let gradees: Vec<String> = roster.gradees().into_iter().map(|g| g.identifier).collect();
    let questions: Vec<String> = rubric.questions().into_iter().map(str::to_string).collect();
    log.check_axes(&gradees, &questions)
}

fn outcome_for(
    gradee: &str,
    cells: &[CellRecord],
    rubric: &Rubric,
    missing: bool,
) -> Result<GradeOutcome> {
    let mut question_grades = Vec::new();
    let mut general = None;
    let mut warnings = Vec::new();
    let mut all_graded = true;
    for cell in cells {
        match &cell.section {
            Section::Question(q) => {
                if missing || !cell.is_graded() {
                    all_graded &= cell.is_graded();
                    question_grades.push(None);
                    continue;
                }
                let (grade, w) = compute_cell_grade(rubric, q, &cell.applied_codes)?;
                warnings.extend(w);
                question_grades.push(Some(grade));
            }
            Section::General => {
                if !missing && cell.is_graded() {
                    general = Some(general_adjustment(rubric, &cell.applied_codes)?);
                }
            }
        }
    }
    let status = if missing {
        RowStatus::MissingSubmission
    } else if all_graded {
        RowStatus::Complete
    } else {
        RowStatus::Partial
    };
    let total = (status == RowStatus::Complete).then(|| {
        question_grades.iter().flatten().copied().sum::<Decimal>() + general.unwrap_or_default()
    });
    Ok(GradeOutcome {
        gradee: gradee.to_string(),
        question_grades,
        general,
        total,
        status,
        warnings,
    })
}

/// One row per roster row, with the gradee's grades decomposed by question.
pub fn build_grade_sheet(
    roster: &Roster,
    log: &ProgressLog,
    rubric: &Rubric,
    missing: &[String],
) -> Result<GradeSheet> {
    check_axes(roster, log, rubric)?;
    let mut outcomes = Vec::with_capacity(log.gradees().len());
    for gradee in log.gradees() {
        let cells = log.cells_of(gradee).expect("gradee from log");
        outcomes.push(outcome_for(gradee, cells, rubric, missing.contains(gradee))?);
    }
    let rows = roster
        .rows()
        .iter()
        .enumerate()
        .map(|(i, values)| {
            let gradee = roster.gradee_of_row(i);
            let outcome = outcomes
                .iter()
                .find(|o| o.gradee == gradee)
                .expect("axes checked")
                .clone();
            GradeRow {
                roster_values: values.clone(),
                outcome,
            }
        })
        .collect();
    Ok(GradeSheet {
        roster_columns: roster.columns().to_vec(),
        questions: log.questions().to_vec(),
        has_general: log.has_general() || rubric.has_general(),
        rows,
    })
}

fn opt(d: Option<Decimal>) -> String {
    d.map(format_points).unwrap_or_default()
}

impl GradeSheet {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.roster_columns.clone();
        h.extend(self.questions.iter().map(|q| format!("grade_{q}")));
        if self.has_general {
            h.push("grade_general".into());
        }
        h.extend(["assignment_total", "status", "warnings"].map(String::from));
        h
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                let o = &row.outcome;
                let mut r = row.roster_values.clone();
                r.extend(o.question_grades.iter().map(|g| opt(*g)));
                if self.has_general {
                    r.push(opt(o.general));
                }
                r.push(opt(o.total));
                r.push(o.status.as_str().to_string());
                r.push(o.warnings.join("; "));
                r
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        write_table(&self.header(), self.records())
    }
}

fn push_bullets(out: &mut String, lines: &[&str]) {
    for text in lines {
        let mut parts = text.split('\n');
        let first = parts.next().unwrap_or_default();
        let _ = writeln!(out, "- {first}");
        for cont in parts {
            let _ = writeln!(out, "  {cont}");
        }
    }
}

fn push_section_body(out: &mut String, rubric: &Rubric, cell: &CellRecord) -> Result<()> {
    let feedback: Vec<&str> = cell
        .applied_codes
        .iter()
        .map(|c| rubric.lookup(&cell.section, c).map(|i| i.feedback.as_str()))
        .collect::<Result<_>>()?;
    if !feedback.is_empty() {
        out.push('\n');
        push_bullets(out, &feedback);
    }
    if let Some(msg) = &cell.personalized_message {
        let _ = writeln!(out, "\n*{msg}*");
    }
    Ok(())
}

/// Markdown feedback for one gradee: one section per question in log order,
/// then an "Overall" section when GENERAL feedback was given.
pub fn render_feedback(gradee: &str, log: &ProgressLog, rubric: &Rubric) -> Result<String> {
    let cells = log
        .cells_of(gradee)
        .ok_or_else(|| Error::UnknownGradee(gradee.to_string()))?;
    let mut out = format!("# Feedback for {gradee}\n");
    for cell in cells {
        match &cell.section {
            Section::Question(q) => {
                if !cell.is_graded() {
                    let _ = write!(out, "\n## {q} — (not graded)\n");
                    continue;
                }
                let (grade, _) = compute_cell_grade(rubric, q, &cell.applied_codes)?;
                let total = rubric.total_points(q).unwrap_or_default();
                let _ = write!(
                    out,
                    "\n## {q} — {}/{}\n",
                    format_points(grade),
                    format_points(total)
                );
                push_section_body(&mut out, rubric, cell)?;
            }
            Section::General => {
                let has_content =
                    !cell.applied_codes.is_empty() || cell.personalized_message.is_some();
                if cell.is_graded() && has_content {
                    out.push_str("\n## Overall\n");
                    push_section_body(&mut out, rubric, cell)?;
                }
            }
        }
    }
    Ok(out)
}

/// Write the grade sheet and every feedback document, each atomically.
pub fn write_outputs(
    grade_sheet: &GradeSheet,
    grade_sheet_path: &Path,
    feedback: &[(std::path::PathBuf, String)],
) -> Result<()> {
    atomic_write(grade_sheet_path, grade_sheet.to_csv().as_bytes())?;
    for (path, text) in feedback {
        atomic_write(path, text.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progress::LogMeta;

    const HEADER: &str = "name,total_points,prompt_code,prompt_message,feedback,points_to_remove\n";

    fn rubric(rows: &str) -> Rubric {
        Rubric::parse(&format!("{HEADER}{rows}"), GradingMode::Negative).unwrap()
    }

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn codes(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn meta() -> LogMeta {
        LogMeta {
            rubric_path: "r".into(),
            mode: GradingMode::Negative,
        }
    }

    #[test]
    fn negative_grades() {
        let r = rubric("Q1,10,1a,inline code,Use inline code.,0.75\nQ2,1,2a,m,f,0.5\nQ2,1,2b,m,f,0.75\n");
        assert_eq!(compute_cell_grade(&r, "Q1", &[]).unwrap(), (d("10"), vec![]));
        assert_eq!(compute_cell_grade(&r, "Q1", &codes(&["1a"])).unwrap().0, d("9.25"));
        let (g, w) = compute_cell_grade(&r, "Q2", &codes(&["2a", "2b"])).unwrap();
        assert_eq!(g, d("-0.25"));
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("below zero"));
        assert!(matches!(
            compute_cell_grade(&r, "Q1", &codes(&["zz"])),
            Err(Error::UnknownCode { .. })
        ));
        assert!(matches!(
            compute_cell_grade(&r, "Q9", &[]),
            Err(Error::UnknownQuestion(_))
        ));
    }

    #[test]
    fn positive_grades() {
        let text = "name,total_points,prompt_code,prompt_message,feedback,points_to_add\nQ1,2,a,m,f,1.5\nQ1,2,b,m,f,1\n";
        let r = Rubric::parse(text, GradingMode::Positive).unwrap();
        assert_eq!(compute_cell_grade(&r, "Q1", &[]).unwrap(), (d("0"), vec![]));
        let (g, w) = compute_cell_grade(&r, "Q1", &codes(&["a", "b"])).unwrap();
        assert_eq!(g, d("2.5"));
        assert!(w[0].contains("exceeds total 2"));
    }

    fn ids(v: &[&str]) -> Vec<String> {
        codes(v)
    }

    fn grade_all(log: &mut ProgressLog, with: &[&str]) {
        let keys: Vec<_> = log.keys().collect();
        for k in keys {
            let applied = match &k.section {
                Section::Question(_) => codes(with),
                Section::General => vec![],
            };
            log.commit_cell(CellRecord {
                applied_codes: applied,
                ..CellRecord::ungraded(&k.gradee, k.section.clone())
            })
            .unwrap();
        }
    }

    #[test]
    fn full_credit_sheet() {
        let r = rubric("Q1,10,a,m,f,1\nQ2,5,b,m,f,1\n");
        let roster = Roster::parse(
            "student_identifier,email\nBaronPoisson,b@x\nsergent-gamma,s@x\nstudent_T,t@x\n",
            false,
        )
        .unwrap();
        let mut log = ProgressLog::new(
            &ids(&["BaronPoisson", "sergent-gamma", "student_T"]),
            &ids(&["Q1", "Q2"]),
            false,
            meta(),
        )
        .unwrap();
        grade_all(&mut log, &[]);
        let sheet = build_grade_sheet(&roster, &log, &r, &[]).unwrap();
        assert_eq!(
            sheet.header(),
            ["student_identifier", "email", "grade_Q1", "grade_Q2", "assignment_total", "status", "warnings"]
        );
        for rec in sheet.records() {
            assert_eq!(rec[4], "15");
            assert_eq!(rec[5], "COMPLETE");
        }

        let sheet = build_grade_sheet(&roster, &log, &r, &ids(&["student_T"])).unwrap();
        let rec = &sheet.records()[2];
        assert_eq!(&rec[2..6], ["", "", "", "MISSING_SUBMISSION"]);
    }

    #[test]
    fn partial_rows_have_no_total() {
        let r = rubric("Q1,10,a,m,f,1\nQ2,5,b,m,f,1\n");
        let roster = Roster::parse("student_identifier\nx\n", false).unwrap();
        let mut log = ProgressLog::new(&ids(&["x"]), &ids(&["Q1", "Q2"]), false, meta()).unwrap();
        log.commit_cell(CellRecord {
            applied_codes: codes(&["a"]),
            ..CellRecord::ungraded("x", Section::Question("Q1".into()))
        })
        .unwrap();
        let rec = &build_grade_sheet(&roster, &log, &r, &[]).unwrap().records()[0];
        assert_eq!(&rec[1..], ["9", "", "", "PARTIAL", ""]);
    }

    #[test]
    fn teams_share_grades() {
        let r = rubric("Q1,10,a,m,f,1\n");
        let roster = Roster::parse(
            "student_identifier,team_identifier\nA,t1\nB,t1\nC,t2\n",
            true,
        )
        .unwrap();
        let mut log = ProgressLog::new(&ids(&["t1", "t2"]), &ids(&["Q1"]), false, meta()).unwrap();
        grade_all(&mut log, &["a"]);
        let recs = build_grade_sheet(&roster, &log, &r, &[]).unwrap().records();
        assert_eq!(recs[0][2..], recs[1][2..]);
        assert_eq!(recs[0][2], "9");
    }

    #[test]
    fn general_adjusts_total() {
        let r = rubric("Q1,10,a,m,f,1\ngeneral,,g,m,late,2\n");
        let roster = Roster::parse("student_identifier\nx\n", false).unwrap();
        let mut log = ProgressLog::new(&ids(&["x"]), &ids(&["Q1"]), true, meta()).unwrap();
        grade_all(&mut log, &[]);
        log.commit_cell(CellRecord {
            applied_codes: codes(&["g"]),
            ..CellRecord::ungraded("x", Section::General)
        })
        .unwrap();
        let sheet = build_grade_sheet(&roster, &log, &r, &[]).unwrap();
        assert!(sheet.header().contains(&"grade_general".to_string()));
        assert_eq!(&sheet.records()[0][1..4], ["10", "-2", "8"]);
    }

    #[test]
    fn axes_must_match() {
        let r = rubric("Q1,10,a,m,f,1\nQ2,10,b,m,f,1\n");
        let roster = Roster::parse("student_identifier\nx\n", false).unwrap();
        let log = ProgressLog::new(&ids(&["x"]), &ids(&["Q1"]), false, meta()).unwrap();
        assert!(matches!(
            build_grade_sheet(&roster, &log, &r, &[]),
            Err(Error::AxesMismatch(_))
        ));
    }

    #[test]
    fn feedback_document() {
        let r = rubric(
            "Q1,10,1a,inline code,Use inline R code.,0.75\nQ2,5,2a,m,Label axes.,1\nall_questions,,1,tidyverse code style,\"Please adhere to the Tidyverse style guide, as discussed in Lecture 1.\",0.5\ngeneral,,g1,great,Great job on this assignment!,0\n",
        );
        let mut log = ProgressLog::new(&ids(&["Menglin"]), &ids(&["Q1", "Q2"]), true, meta()).unwrap();
        log.commit_cell(CellRecord {
            applied_codes: codes(&["1a"]),
            ..CellRecord::ungraded("Menglin", Section::Question("Q1".into()))
        })
        .unwrap();
        log.commit_cell(CellRecord {
            applied_codes: codes(&["1"]),
            ..CellRecord::ungraded("Menglin", Section::Question("Q2".into()))
        })
        .unwrap();
        log.commit_cell(CellRecord {
            personalized_message: Some(
                "Thank you for your note, Menglin. I am glad you had fun doing the assignment.".into(),
            ),
            ..CellRecord::ungraded("Menglin", Section::General)
        })
        .unwrap();
        let text = render_feedback("Menglin", &log, &r).unwrap();
        assert_eq!(
            text,
            "# Feedback for Menglin\n\
             \n## Q1 — 9.25/10\n\n- Use inline R code.\n\
             \n## Q2 — 4.5/5\n\n- Please adhere to the Tidyverse style guide, as discussed in Lecture 1.\n\
             \n## Overall\n\n*Thank you for your note, Menglin. I am glad you had fun doing the assignment.*\n"
        );
        assert!(!text.contains("Great job"));
        assert!(matches!(
            render_feedback("nobody", &log, &r),
            Err(Error::UnknownGradee(_))
        ));
    }

    #[test]
    fn empty_feedback_has_headers_only() {
        let r = rubric("Q1,10,a,m,f,1\nQ2,5,b,m,f,1\n");
        let mut log = ProgressLog::new(&ids(&["x"]), &ids(&["Q1", "Q2"]), false, meta()).unwrap();
        log.commit_cell(CellRecord::ungraded("x", Section::Question("Q1".into()))).unwrap();
        let text = render_feedback("x", &log, &r).unwrap();
        assert_eq!(text, "# Feedback for x\n\n## Q1 — 10/10\n\n## Q2 — (not graded)\n");
    }
}
