//! The rubric: prompt-coded feedback items scoped to a question, to every
//! question, or to the assignment overall.
//!
//! A rubric file is a CSV with six columns:
//!
//! ```text
//! name,total_points,prompt_code,prompt_message,feedback,points_to_remove
//! ```
//!
//! `name` holds the applicability: `all_questions`, `general`, or a question
//! name. The last column is `points_to_add` when grading positively.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::fsutil;
use crate::points::{format_points, parse_points};
use crate::table::{read_table, write_table};

/// Lowercase single-letter tokens the grading prompt interprets as actions.
pub const RESERVED_TOKENS: &[&str] = &["p", "r", "i", "s", "q", "n"];

const ALL_QUESTIONS: &str = "all_questions";
const GENERAL: &str = "general";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradingMode {
    /// Start from zero and add points.
    Positive,
    /// Start from the question total and remove points.
    Negative,
}

impl GradingMode {
    pub fn points_column(self) -> &'static str {
        match self {
            GradingMode::Positive => "points_to_add",
            GradingMode::Negative => "points_to_remove",
        }
    }

    /// Sign applied to an item's magnitude.
    pub fn direction(self) -> Decimal {
        match self {
            GradingMode::Positive => Decimal::ONE,
            GradingMode::Negative => Decimal::NEGATIVE_ONE,
        }
    }
}

impl fmt::Display for GradingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradingMode::Positive => "positive",
            GradingMode::Negative => "negative",
        })
    }
}

impl FromStr for GradingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(GradingMode::Positive),
            "negative" => Ok(GradingMode::Negative),
            other => Err(format!("unknown grading mode {other:?} (expected positive or negative)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Applicability {
    Question(String),
    AllQuestions,
    General,
}

impl Applicability {
    /// Classify the `name` column of a rubric row.
    pub fn parse(name: &str) -> Applicability {
        let name = name.trim();
        if name.eq_ignore_ascii_case(ALL_QUESTIONS) {
            Applicability::AllQuestions
        } else if name.eq_ignore_ascii_case(GENERAL) {
            Applicability::General
        } else {
            Applicability::Question(name.to_string())
        }
    }

    pub fn as_name(&self) -> &str {
        match self {
            Applicability::Question(q) => q,
            Applicability::AllQuestions => ALL_QUESTIONS,
            Applicability::General => GENERAL,
        }
    }
}

/// A prompt scope: one question, or the overall (GENERAL) step of a gradee.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    Question(String),
    General,
}

impl Section {
    pub fn parse(name: &str) -> Section {
        if name.trim().eq_ignore_ascii_case(GENERAL) {
            Section::General
        } else {
            Section::Question(name.trim().to_string())
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Section::Question(q) => q,
            Section::General => GENERAL,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RubricItem {
    pub applicability: Applicability,
    /// Maximum score of the item's question. Only meaningful for question items.
    pub total_points: Option<Decimal>,
    pub prompt_code: String,
    pub prompt_message: String,
    pub feedback: String,
    /// Magnitude; the grading mode decides whether it is added or removed.
    pub points: Decimal,
}

impl RubricItem {
    /// Points as the grader sees them at the prompt, e.g. `-0.75` or `+0.5`.
    pub fn signed_points(&self, mode: GradingMode) -> String {
        let sign = match mode {
            _ if self.points.is_zero() => "",
            GradingMode::Positive => "+",
            GradingMode::Negative => "-",
        };
        format!("{sign}{}", format_points(self.points))
    }

    /// `[code] message (±points)`
    pub fn prompt_line(&self, mode: GradingMode) -> String {
        format!(
            "[{}] {} ({})",
            self.prompt_code,
            self.prompt_message,
            self.signed_points(mode)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rubric {
    items: Vec<RubricItem>,
    mode: GradingMode,
}

/// Why a prompt code is not acceptable, if it is not.
pub fn code_problem(code: &str) -> Option<String> {
    if code.is_empty() {
        return Some("prompt code is empty".into());
    }
    if code.chars().any(|c| c.is_whitespace() || c == ',' || c == ';') {
        return Some(format!(
            "prompt code {code:?} contains whitespace, a comma or a semicolon"
        ));
    }
    if RESERVED_TOKENS.iter().any(|t| t.eq_ignore_ascii_case(code)) {
        return Some(format!(
            "prompt code {code:?} is reserved for a grading action"
        ));
    }
    None
}

impl Rubric {
    /// Parse and validate rubric CSV text.
    pub fn parse(csv_text: &str, mode: GradingMode) -> Result<Rubric> {
        let table = read_table(csv_text)?;
        let mut report = ValidationReport::default();
        let points_col = mode.points_column();
        let other_points = match mode {
            GradingMode::Positive => GradingMode::Negative.points_column(),
            GradingMode::Negative => GradingMode::Positive.points_column(),
        };
        let required = [
            "name",
            "total_points",
            "prompt_code",
            "prompt_message",
            "feedback",
            points_col,
        ];
        for col in required {
            if table.column(col).is_none() {
                report.push(Some(1), format!("missing column {col:?}"));
            }
        }
        for (i, col) in table.header.iter().enumerate() {
            if col == other_points {
                report.push(
                    Some(1),
                    format!("column {col:?} does not match {mode} grading (expected {points_col:?})"),
                );
            } else if !required.contains(&col.as_str()) {
                report.push(Some(1), format!("unexpected column {col:?}"));
            } else if table.header[..i].contains(col) {
                report.push(Some(1), format!("column {col:?} appears more than once"));
            }
        }
        report.clone().into_result()?;

        let idx = |c: &str| table.column(c).expect("checked above");
        let (c_name, c_total, c_code, c_msg, c_fb, c_pts) = (
            idx("name"),
            idx("total_points"),
            idx("prompt_code"),
            idx("prompt_message"),
            idx("feedback"),
            idx(points_col),
        );

        let mut rows = Vec::with_capacity(table.records.len());
        for (line, rec) in &table.records {
            let line = *line;
            let name = rec[c_name].trim();
            if name.is_empty() {
                report.push(Some(line), "name (applicability) is empty");
                continue;
            }
            let applicability = Applicability::parse(name);
            let code = rec[c_code].trim().to_string();
            let points = match parse_points(&rec[c_pts]) {
                Ok(p) => p,
                Err(msg) => {
                    report.push(Some(line), format!("{points_col}: {msg}"));
                    continue;
                }
            };
            let total_points = match applicability {
                Applicability::Question(_) => match parse_points(&rec[c_total]) {
                    Ok(p) => Some(p),
                    Err(msg) => {
                        report.push(Some(line), format!("total_points: {msg}"));
                        continue;
                    }
                },
                _ => None,
            };
            rows.push((
                line,
                RubricItem {
                    applicability,
                    total_points,
                    prompt_code: code,
                    prompt_message: rec[c_msg].clone(),
                    feedback: rec[c_fb].clone(),
                    points,
                },
            ));
        }
        validate_items(&rows, &mut report);
        report.into_result()?;
        Ok(Rubric {
            items: rows.into_iter().map(|(_, item)| item).collect(),
            mode,
        })
    }

    /// Build a rubric from items, validating every invariant.
    pub fn from_items(items: Vec<RubricItem>, mode: GradingMode) -> Result<Rubric> {
        let rows: Vec<_> = items
            .into_iter()
            .enumerate()
            .map(|(i, item)| (i + 2, item))
            .collect();
        let mut report = ValidationReport::default();
        validate_items(&rows, &mut report);
        report.into_result()?;
        Ok(Rubric {
            items: rows.into_iter().map(|(_, item)| item).collect(),
            mode,
        })
    }

    pub fn load(path: &Path, mode: GradingMode) -> Result<Rubric> {
        let text = fsutil::read_to_string(path)?;
        Rubric::parse(&text, mode)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::atomic_write(path, self.to_csv().as_bytes())
    }

    pub fn items(&self) -> &[RubricItem] {
        &self.items
    }

    pub fn mode(&self) -> GradingMode {
        self.mode
    }

    /// Question names in first-appearance order.
    pub fn questions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for item in &self.items {
            if let Applicability::Question(q) = &item.applicability {
                if !out.contains(&q.as_str()) {
                    out.push(q);
                }
            }
        }
        out
    }

    pub fn has_question(&self, question: &str) -> bool {
        self.items
            .iter()
            .any(|i| matches!(&i.applicability, Applicability::Question(q) if q == question))
    }

    pub fn has_general(&self) -> bool {
        self.items
            .iter()
            .any(|i| i.applicability == Applicability::General)
    }

    pub fn total_points(&self, question: &str) -> Option<Decimal> {
        self.items.iter().find_map(|i| match &i.applicability {
            Applicability::Question(q) if q == question => i.total_points,
            _ => None,
        })
    }

    /// Items offered at the prompt for `section`: the question's own items
    /// followed by the all-question items, or only the GENERAL items.
    pub fn items_for(&self, section: &Section) -> Result<Vec<&RubricItem>> {
        match section {
            Section::Question(q) => {
                if !self.has_question(q) {
                    return Err(Error::UnknownQuestion(q.clone()));
                }
                let own = self
                    .items
                    .iter()
                    .filter(|i| matches!(&i.applicability, Applicability::Question(n) if n == q));
                let shared = self
                    .items
                    .iter()
                    .filter(|i| i.applicability == Applicability::AllQuestions);
                Ok(own.chain(shared).collect())
            }
            Section::General => Ok(self
                .items
                .iter()
                .filter(|i| i.applicability == Applicability::General)
                .collect()),
        }
    }

    /// The item a prompt code selects within `section`.
    pub fn lookup(&self, section: &Section, code: &str) -> Result<&RubricItem> {
        self.items_for(section)?
            .into_iter()
            .find(|i| i.prompt_code == code)
            .ok_or_else(|| Error::UnknownCode {
                code: code.to_string(),
                section: section.to_string(),
            })
    }

    /// A new rubric with `item` appended. `self` is left untouched.
    pub fn with_item(&self, item: RubricItem) -> Result<Rubric> {
        let mut items = self.items.clone();
        items.push(item);
        Rubric::from_items(items, self.mode)
    }

    /// Append `item` and rewrite the rubric file at `path`.
    pub fn add_item(&self, item: RubricItem, path: &Path) -> Result<Rubric> {
        let next = self.with_item(item)?;
        next.save(path)?;
        Ok(next)
    }

    pub fn to_csv(&self) -> String {
        write_table(
            &header(self.mode),
            self.items.iter().map(|i| {
                [
                    i.applicability.as_name().to_string(),
                    i.total_points.map(format_decimal_exact).unwrap_or_default(),
                    i.prompt_code.clone(),
                    i.prompt_message.clone(),
                    i.feedback.clone(),
                    format_decimal_exact(i.points),
                ]
            }),
        )
    }
}

fn format_decimal_exact(d: Decimal) -> String {
    d.normalize().to_string()
}

fn header(mode: GradingMode) -> [&'static str; 6] {
    [
        "name",
        "total_points",
        "prompt_code",
        "prompt_message",
        "feedback",
        mode.points_column(),
    ]
}

/// CSV text holding only the rubric header row.
pub fn rubric_template(mode: GradingMode) -> String {
    write_table(&header(mode), std::iter::empty::<[&str; 6]>())
}

fn validate_items(rows: &[(usize, RubricItem)], report: &mut ValidationReport) {
    let mut totals: BTreeMap<&str, (usize, Decimal)> = BTreeMap::new();
    if rows.is_empty() {
        report.push(None, "rubric has no items");
    }
    for (line, item) in rows {
        if let Some(msg) = code_problem(&item.prompt_code) {
            report.push(Some(*line), msg);
        }
        if item.points.is_sign_negative() && !item.points.is_zero() {
            report.push(Some(*line), "points must not be negative");
        }
        if let Applicability::Question(q) = &item.applicability {
            if q.is_empty() || q.trim() != q {
                report.push(
                    Some(*line),
                    format!("question name {q:?} is empty or has surrounding whitespace"),
                );
            }
            match item.total_points {
                None => report.push(Some(*line), format!("total_points missing for {q:?}")),
                Some(t) => match totals.get(q.as_str()) {
                    Some((first_line, first)) if *first != t => report.push(
                        Some(*line),
                        format!(
                            "inconsistent total_points for {q:?}: {} here, {} on row {first_line}",
                            format_points(t),
                            format_points(*first)
                        ),
                    ),
                    Some(_) => {}
                    None => {
                        totals.insert(q, (*line, t));
                    }
                },
            }
        }
    }

    // Codes must be unique among everything shown at one prompt.
    let mut shared: HashMap<&str, usize> = HashMap::new();
    let mut general: HashMap<&str, usize> = HashMap::new();
    let mut per_question: HashMap<(&str, &str), usize> = HashMap::new();
    for (line, item) in rows {
        let code = item.prompt_code.as_str();
        let clash = match &item.applicability {
            Applicability::AllQuestions => shared.insert(code, *line),
            Applicability::General => general.insert(code, *line),
            Applicability::Question(q) => per_question.insert((q, code), *line),
        };
        if let Some(first) = clash {
            report.push(
                Some(*line),
                format!("duplicate prompt code {code:?} (also on row {first})"),
            );
        }
    }
    let mut cross: Vec<(usize, String)> = per_question
        .iter()
        .filter_map(|((q, code), line)| {
            shared.get(code).map(|first| {
                (
                    *line,
                    format!(
                        "duplicate prompt code {code:?} in question {q:?} (all_questions item on row {first})"
                    ),
                )
            })
        })
        .collect();
    cross.sort();
    for (line, msg) in cross {
        report.push(Some(line), msg);
    }
}
