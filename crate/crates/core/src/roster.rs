//! Class roster parsing and gradee grouping.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Result, ValidationReport};
use crate::fsutil;
use crate::table::read_table;

pub const STUDENT_ID_COLUMN: &str = "student_identifier";
pub const TEAM_ID_COLUMN: &str = "team_identifier";

/// The roster as given: every column and row kept verbatim, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    team_mode: bool,
}

/// The unit receiving a grade: one student, or a team sharing grade and feedback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gradee {
    pub identifier: String,
    pub members: Vec<String>,
}

impl Roster {
    pub fn parse(csv_text: &str, team_mode: bool) -> Result<Roster> {
        let table = read_table(csv_text)?;
        let mut report = ValidationReport::default();
        let id_col = table.column(STUDENT_ID_COLUMN);
        if id_col.is_none() {
            report.push(Some(1), format!("missing column {STUDENT_ID_COLUMN:?}"));
        }
        let team_col = table.column(TEAM_ID_COLUMN);
        if team_mode && team_col.is_none() {
            report.push(
                Some(1),
                format!("team grading needs a {TEAM_ID_COLUMN:?} column"),
            );
        }
        for (i, col) in table.header.iter().enumerate() {
            if table.header[..i].contains(col) {
                report.push(Some(1), format!("column {col:?} appears more than once"));
            }
        }
        if let Some(id_col) = id_col {
            let mut seen: HashMap<&str, usize> = HashMap::new();
            for (line, rec) in &table.records {
                let id = rec[id_col].as_str();
                if id.trim().is_empty() {
                    report.push(Some(*line), "empty student_identifier");
                } else if let Some(first) = seen.insert(id, *line) {
                    report.push(
                        Some(*line),
                        format!("duplicate student_identifier {id:?} (also on row {first})"),
                    );
                }
                if team_mode {
                    if let Some(tc) = team_col {
                        if rec[tc].trim().is_empty() {
                            report.push(Some(*line), "empty team_identifier");
                        }
                    }
                }
            }
        }
        report.into_result()?;
        Ok(Roster {
            columns: table.header,
            rows: table.records.into_iter().map(|(_, r)| r).collect(),
            team_mode,
        })
    }

    pub fn load(path: &Path, team_mode: bool) -> Result<Roster> {
        Roster::parse(&fsutil::read_to_string(path)?, team_mode)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn team_mode(&self) -> bool {
        self.team_mode
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn student_ids(&self) -> impl Iterator<Item = &str> {
        let c = self.col(STUDENT_ID_COLUMN).expect("validated at parse");
        self.rows.iter().map(move |r| r[c].as_str())
    }

    /// Identifier of the gradee a roster row belongs to.
    pub fn gradee_of_row(&self, row: usize) -> &str {
        let c = if self.team_mode {
            self.col(TEAM_ID_COLUMN)
        } else {
            self.col(STUDENT_ID_COLUMN)
        }
        .expect("validated at parse");
        &self.rows[row][c]
    }

    /// Gradees in roster order. Teams are ordered by first appearance and
    /// list their members in row order.
    pub fn gradees(&self) -> Vec<Gradee> {
        let students: Vec<&str> = self.student_ids().collect();
        let mut out: Vec<Gradee> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (row, student) in students.iter().enumerate() {
            let key = self.gradee_of_row(row);
            match index.get(key) {
                Some(&i) => out[i].members.push(student.to_string()),
                None => {
                    index.insert(key, out.len());
                    out.push(Gradee {
                        identifier: key.to_string(),
                        members: vec![student.to_string()],
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn report(err: Error) -> ValidationReport {
        match err {
            Error::Validation(r) => r,
            other => panic!("expected report, got {other:?}"),
        }
    }

    #[test]
    fn three_students() {
        let r = Roster::parse(
            "student_identifier,name\nBaronPoisson,Baron\nsergent-gamma,Sergent\nstudent_T,T\n",
            false,
        )
        .unwrap();
        assert_eq!(r.rows().len(), 3);
        let g = r.gradees();
        assert_eq!(g.len(), 3);
        assert!(g.iter().all(|g| g.members == vec![g.identifier.clone()]));
    }

    #[test]
    fn duplicate_identifier() {
        let r = report(
            Roster::parse("student_identifier\nstudent_T\nstudent_T\n", false).unwrap_err(),
        );
        assert!(r.mentions("duplicate student_identifier \"student_T\""));
    }

    #[test]
    fn team_mode_needs_team_column() {
        let r = report(Roster::parse("student_identifier\nA\n", true).unwrap_err());
        assert!(r.mentions("team_identifier"));
    }

    #[test]
    fn missing_id_column_and_empty_ids() {
        let r = report(Roster::parse("name\nx\n", false).unwrap_err());
        assert!(r.mentions("missing column"));
        let r = report(Roster::parse("student_identifier\n\"\"\nB\n", false).unwrap_err());
        assert!(r.mentions("empty student_identifier"));
    }

    #[test]
    fn identifiers_compare_exactly() {
        assert!(Roster::parse("student_identifier\nana\nAna\n", false).is_ok());
    }

    #[test]
    fn team_grouping() {
        let r = Roster::parse(
            "student_identifier,team_identifier\nA,team1\nB,team1\nC,team2\n",
            true,
        )
        .unwrap();
        let g = r.gradees();
        assert_eq!(
            g,
            vec![
                Gradee { identifier: "team1".into(), members: vec!["A".into(), "B".into()] },
                Gradee { identifier: "team2".into(), members: vec!["C".into()] },
            ]
        );
    }

    #[test]
    fn empty_roster_has_no_gradees() {
        let r = Roster::parse("student_identifier\n", false).unwrap();
        assert!(r.gradees().is_empty());
    }
}
