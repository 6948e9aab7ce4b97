#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gradekit::engine::{Action, Effect, ItemDraft, Session};
use gradekit::{GradingMode, HookSetting, SessionConfig};
use rand::seq::SliceRandom;
use rand::Rng;

pub const NEGATIVE_HEADER: &str =
    "name,total_points,prompt_code,prompt_message,feedback,points_to_remove\n";

pub const SAMPLE_ROSTER: &str = "student_identifier,name\n\
BaronPoisson,Baron Poisson\n\
sergent-gamma,Sergent Gamma\n\
student_T,Student T\n";

pub const SAMPLE_IDS: [&str; 3] = ["BaronPoisson", "sergent-gamma", "student_T"];

pub const TIDYVERSE: &str =
    "Please adhere to the Tidyverse style guide, as discussed in Lecture 1.";

pub fn sample_rubric() -> String {
    format!(
        "{NEGATIVE_HEADER}\
Q1,10,1a,mean of wrong column,The mean was computed over the wrong column.,0.75\n\
Q1,10,1b,no units,State the units of the estimate.,0.5\n\
Q2,5,2a,missing plot,A residual plot is missing.,2\n\
all_questions,,1,tidyverse code style,\"{TIDYVERSE}\",0.5\n\
all_questions,,2,uncommented code,Comment the non-obvious steps.,0.25\n"
    )
}

/// A course directory: roster, rubric and submissions on disk.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub example_id: String,
    pub team_mode: bool,
}

impl Fixture {
    /// Writes `hws/hw01-<id>.Rmd` for each of `submissions`.
    pub fn new(roster: &str, rubric: &str, example_id: &str, submissions: &[&str]) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("roster.csv"), roster).unwrap();
        std::fs::write(dir.path().join("rubric.csv"), rubric).unwrap();
        std::fs::create_dir_all(dir.path().join("hws")).unwrap();
        for id in submissions {
            std::fs::write(
                dir.path().join(format!("hws/hw01-{id}.Rmd")),
                format!("---\ntitle: hw01 {id}\n---\n\n1 + 1\n"),
            )
            .unwrap();
        }
        Fixture {
            dir,
            example_id: example_id.to_string(),
            team_mode: false,
        }
    }

    /// Three students, two questions, every submission present.
    pub fn sample() -> Fixture {
        Fixture::new(SAMPLE_ROSTER, &sample_rubric(), "BaronPoisson", &SAMPLE_IDS)
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path(rel)).unwrap()
    }

    pub fn write(&self, rel: &str, text: &str) {
        std::fs::write(self.path(rel), text).unwrap();
    }

    pub fn config(&self) -> SessionConfig {
        let id = &self.example_id;
        let mut c = SessionConfig::new(
            self.path("rubric.csv"),
            self.path("roster.csv"),
            id.as_str(),
            format!("hws/hw01-{id}.Rmd"),
            format!("fb/hw01-{id}-feedback.md"),
            self.path("log.csv"),
            self.path("grades.csv"),
        );
        c.root = self.root().to_path_buf();
        c.team_mode = self.team_mode;
        c.open_hook = HookSetting::Disabled;
        c.close_hook = HookSetting::Disabled;
        c
    }

    pub fn config_with(&self, f: impl FnOnce(&mut SessionConfig)) -> SessionConfig {
        let mut c = self.config();
        f(&mut c);
        c
    }

    /// Every output of a session: log, side file, rubric, grade sheet and
    /// feedback files, keyed by path relative to the course directory.
    pub fn outputs(&self) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        for rel in ["log.csv", "rubric.csv", "grades.csv"] {
            if let Ok(bytes) = std::fs::read(self.path(rel)) {
                out.insert(rel.to_string(), bytes);
            }
        }
        // the side file names the rubric by the path it was given, which
        // here includes the temporary directory
        if let Ok(text) = std::fs::read_to_string(self.path("log.meta.json")) {
            let root = serde_json::to_string(&self.root().display().to_string()).unwrap();
            let root = root.trim_matches('"');
            out.insert("log.meta.json".into(), text.replace(root, "<root>").into_bytes());
        }
        if let Ok(rd) = std::fs::read_dir(self.path("fb")) {
            for e in rd {
                let e = e.unwrap();
                out.insert(
                    format!("fb/{}", e.file_name().to_string_lossy()),
                    std::fs::read(e.path()).unwrap(),
                );
            }
        }
        out
    }
}

/// Apply actions in order, finalizing whenever the session asks for it.
pub fn drive(session: &mut Session, actions: &[Action]) {
    for a in actions {
        let effects = session.apply(a.clone()).unwrap_or_else(|e| panic!("{a:?}: {e}"));
        if effects.contains(&Effect::Finalize) {
            session.finalize().unwrap();
        }
    }
}

pub fn apply(codes: &[&str]) -> Action {
    Action::ApplyCodes {
        codes: codes.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn run_to_end(config: SessionConfig, actions: &[Action]) {
    let (mut s, _) = Session::start(config).unwrap();
    drive(&mut s, actions);
    if !s.is_finished() {
        drive(&mut s, &[Action::Quit]);
    }
}

/// Render a decimal in hundredths, e.g. 925 -> "9.25", 50 -> "0.5".
pub fn cents_str(c: i64) -> String {
    let sign = if c < 0 { "-" } else { "" };
    let a = c.abs();
    let (whole, frac) = (a / 100, a % 100);
    match frac {
        0 => format!("{sign}{whole}"),
        f if f % 10 == 0 => format!("{sign}{whole}.{}", f / 10),
        f => format!("{sign}{whole}.{f:02}"),
    }
}

/// Parse a decimal with at most two fractional digits into hundredths.
pub fn parse_cents(s: &str) -> i64 {
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    assert!(frac.len() <= 2, "too many fractional digits in {s:?}");
    let frac = format!("{frac:0<2}");
    let v = whole.parse::<i64>().unwrap() * 100 + frac.parse::<i64>().unwrap();
    if neg {
        -v
    } else {
        v
    }
}

/// Randomized course: 2 to 5 students, 1 to 3 questions, optional general
/// items, possibly one missing submission.
pub struct RandomCourse {
    pub roster: String,
    pub rubric: String,
    pub ids: Vec<String>,
    pub present: Vec<String>,
    pub mode: GradingMode,
}

pub fn random_course<R: Rng>(rng: &mut R) -> RandomCourse {
    let n = rng.gen_range(2..=5);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i}-{}", rng.gen_range(100..999))).collect();
    let mut roster = String::from("student_identifier,section\n");
    for id in &ids {
        roster.push_str(&format!("{id},{}\n", rng.gen_range(1..4)));
    }
    let mode = if rng.gen_bool(0.5) {
        GradingMode::Negative
    } else {
        GradingMode::Positive
    };
    let mut rubric = format!(
        "name,total_points,prompt_code,prompt_message,feedback,{}\n",
        mode.points_column()
    );
    let questions = rng.gen_range(1..=3);
    for q in 1..=questions {
        let total = rng.gen_range(2..=10);
        for k in 0..rng.gen_range(1..=3) {
            rubric.push_str(&format!(
                "Q{q},{total},q{q}{k},item {q}.{k},Feedback {q}.{k}.,{}\n",
                cents_str(rng.gen_range(0..=300))
            ));
        }
    }
    if rng.gen_bool(0.5) {
        rubric.push_str(&format!(
            "all_questions,,a1,style,Mind the style guide.,{}\n",
            cents_str(rng.gen_range(0..=100))
        ));
    }
    if rng.gen_bool(0.5) {
        rubric.push_str(&format!(
            "general,,g1,overall,\"Overall, well done.\",{}\n",
            cents_str(rng.gen_range(0..=200))
        ));
    }
    let mut present = ids.clone();
    if n > 2 && rng.gen_bool(0.3) {
        let drop = rng.gen_range(1..n);
        present.remove(drop);
    }
    RandomCourse {
        roster,
        rubric,
        ids,
        present,
        mode,
    }
}

impl RandomCourse {
    pub fn fixture(&self) -> Fixture {
        let present: Vec<&str> = self.present.iter().map(String::as_str).collect();
        Fixture::new(&self.roster, &self.rubric, &self.ids[0], &present)
    }

    pub fn config(&self, fx: &Fixture) -> SessionConfig {
        fx.config_with(|c| {
            c.mode = self.mode;
            c.github_issues = true;
        })
    }
}

/// Play a random grading session on `config`, choosing each action from what
/// the session currently offers, and return the actions taken.
///
/// Skips are not generated, and general items are only added when the rubric
/// already has a general section.
pub fn random_script<R: Rng>(rng: &mut R, config: SessionConfig, max_len: usize) -> Vec<Action> {
    let (mut s, _) = Session::start(config).unwrap();
    let mut script = Vec::new();
    let mut new_codes = 0;
    while !s.is_finished() && script.len() < max_len {
        let roll = rng.gen_range(0..100);
        let action = if roll < 65 {
            let mut codes: Vec<String> = s.visible_codes().iter().map(|c| c.to_string()).collect();
            codes.shuffle(rng);
            let k = rng.gen_range(0..=codes.len());
            codes.truncate(k);
            Action::ApplyCodes { codes }
        } else if roll < 77 {
            Action::PersonalizedMessage {
                text: format!("note {}, with a comma", rng.gen_range(0..1000)),
            }
        } else if roll < 87 {
            Action::NoteIssue {
                title: format!("Issue {}", rng.gen_range(0..1000)),
                body: "Line one\nline two".to_string(),
            }
        } else {
            new_codes += 1;
            let applicability = match rng.gen_range(0..3) {
                0 => None,
                1 => Some("all_questions".to_string()),
                _ if s.rubric().has_general() => Some("general".to_string()),
                _ => None,
            };
            Action::NewRubricItem {
                item: ItemDraft {
                    applicability,
                    prompt_code: format!("n{new_codes}"),
                    prompt_message: format!("added {new_codes}"),
                    feedback: format!("Added feedback {new_codes}."),
                    points: cents_str(rng.gen_range(0..=150)),
                },
            }
        };
        let effects = s.apply(action.clone()).unwrap_or_else(|e| panic!("{action:?}: {e}"));
        if effects.contains(&Effect::Finalize) {
            s.finalize().unwrap();
        }
        script.push(action);
    }
    script
}
