//! Line-oriented grading over standard input and output.
//!
//! One action per input line. Entering `p`, `r` or `i` asks for the extra
//! lines those actions need. End of input behaves like `q`.

use std::io::{BufRead, Write};
use std::path::Path;
use std::process::{Command as Process, Stdio};

use crate::engine::{parse_input, Action, Command, Effect, ItemDraft, Session};
use crate::error::{Error, Result};
use crate::rubric::Section;
use crate::workspace::{FinalizeReport, HookSetting};

/// Runs the open and close hooks for submissions.
#[derive(Debug, Clone)]
pub struct HookRunner {
    pub open: HookSetting,
    pub close: HookSetting,
}

fn platform_opener() -> &'static str {
    if cfg!(target_os = "macos") {
        "open"
    } else if cfg!(windows) {
        "start \"\""
    } else {
        "xdg-open"
    }
}

fn shell_command(command: &str, path: &Path) -> Process {
    if cfg!(windows) {
        let mut p = Process::new("cmd");
        p.arg("/C").arg(format!("{command} \"{}\"", path.display()));
        p
    } else {
        let mut p = Process::new("sh");
        p.arg("-c")
            .arg(format!("{command} \"$1\""))
            .arg("sh")
            .arg(path);
        p
    }
}

impl HookRunner {
    pub fn disabled() -> HookRunner {
        HookRunner {
            open: HookSetting::Disabled,
            close: HookSetting::Disabled,
        }
    }

    /// Perform an open or close effect. Failures are reported on `notices`
    /// and never stop the session.
    pub fn run(&self, effect: &Effect, notices: &mut dyn Write) {
        match effect {
            Effect::Open(path) => {
                let cmd = match &self.open {
                    HookSetting::Disabled => return,
                    HookSetting::Default => platform_opener().to_string(),
                    HookSetting::Command(c) => c.clone(),
                };
                let spawned = shell_command(&cmd, path)
                    .stdin(Stdio::null())
                    .stdout(Stdio::null())
                    .stderr(Stdio::null())
                    .spawn();
                match spawned {
                    Ok(mut child) => {
                        std::thread::spawn(move || child.wait());
                    }
                    Err(e) => {
                        let _ = writeln!(notices, "warning: could not open {}: {e}", path.display());
                    }
                }
            }
            Effect::Close(path) => match &self.close {
                HookSetting::Disabled => {}
                HookSetting::Default => {
                    let _ = writeln!(notices, "Done with {}; you can close it.", path.display());
                }
                HookSetting::Command(c) => {
                    let status = shell_command(c, path)
                        .stdin(Stdio::null())
                        .stdout(Stdio::null())
                        .status();
                    match status {
                        Ok(s) if s.success() => {}
                        Ok(s) => {
                            let _ = writeln!(notices, "warning: close hook for {} exited with {s}", path.display());
                        }
                        Err(e) => {
                            let _ = writeln!(notices, "warning: could not close {}: {e}", path.display());
                        }
                    }
                }
            },
            Effect::Finalize => {}
        }
    }
}

/// How a terminal session ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEnd {
    pub completed: bool,
    pub report: FinalizeReport,
}

fn read_line<R: BufRead>(input: &mut R) -> Result<Option<String>> {
    let mut line = String::new();
    let n = input
        .read_line(&mut line)
        .map_err(|e| Error::io("<stdin>", e))?;
    if n == 0 {
        return Ok(None);
    }
    while line.ends_with('\n') || line.ends_with('\r') {
        line.pop();
    }
    Ok(Some(line))
}

fn ask<R: BufRead, W: Write>(input: &mut R, out: &mut W, prompt: &str) -> Result<Option<String>> {
    write!(out, "{prompt} ").map_err(|e| Error::io("<stdout>", e))?;
    out.flush().map_err(|e| Error::io("<stdout>", e))?;
    read_line(input)
}

fn print_prompt<W: Write>(session: &Session, out: &mut W) -> std::io::Result<()> {
    let snap = session.snapshot();
    let Some(cur) = &snap.current else {
        return Ok(());
    };
    writeln!(out)?;
    writeln!(
        out,
        "== {} | {} ({} of {} cells graded) ==",
        cur.gradee, cur.question, snap.progress.graded, snap.progress.total
    )?;
    if let Some(k) = session.current() {
        if let Some(cell) = session.log().cell(&k.gradee, &k.section) {
            if let Some(m) = &cell.personalized_message {
                writeln!(out, "  message: {m}")?;
            }
            if let Some(t) = &cell.issue_title {
                writeln!(out, "  issue: {t}")?;
            }
        }
    }
    for item in &snap.visible_items {
        writeln!(out, "  {}", item.display)?;
    }
    let mut options = String::from(
        "codes (comma or space separated), n = no items, p = personal message, r = new rubric item",
    );
    if snap.github_issues {
        options.push_str(", i = note issue");
    }
    options.push_str(", s = skip, q = quit");
    writeln!(out, "{options}")
}

/// Read the follow-up lines of a command. `None` means input ended.
fn complete_action<R: BufRead, W: Write>(
    session: &Session,
    command: Command,
    input: &mut R,
    out: &mut W,
) -> Result<Option<Action>> {
    Ok(Some(match command {
        Command::Apply(codes) => Action::ApplyCodes { codes },
        Command::Skip => Action::Skip,
        Command::Quit => Action::Quit,
        Command::Message => {
            let Some(text) = ask(input, out, "Personalized message:")? else {
                return Ok(None);
            };
            Action::PersonalizedMessage { text }
        }
        Command::Issue => {
            let Some(title) = ask(input, out, "Issue title:")? else {
                return Ok(None);
            };
            let Some(body) = ask(input, out, "Issue body:")? else {
                return Ok(None);
            };
            Action::NoteIssue { title, body }
        }
        Command::NewItem => {
            let here = session
                .current()
                .map(|k| k.section.clone())
                .unwrap_or(Section::General);
            let points_label = match session.rubric().mode() {
                crate::rubric::GradingMode::Negative => "Points to remove:",
                crate::rubric::GradingMode::Positive => "Points to add:",
            };
            let prompts = [
                format!("Applies to (question name, all_questions or general) [{here}]:"),
                "Prompt code:".to_string(),
                "Prompt message:".to_string(),
                "Feedback:".to_string(),
                points_label.to_string(),
            ];
            let mut answers = Vec::with_capacity(prompts.len());
            for p in &prompts {
                match ask(input, out, p)? {
                    Some(a) => answers.push(a),
                    None => return Ok(None),
                }
            }
            let mut a = answers.into_iter();
            let applicability = a.next().filter(|s| !s.trim().is_empty());
            Action::NewRubricItem {
                item: ItemDraft {
                    applicability,
                    prompt_code: a.next().unwrap_or_default(),
                    prompt_message: a.next().unwrap_or_default(),
                    feedback: a.next().unwrap_or_default(),
                    points: a.next().unwrap_or_default(),
                },
            }
        }
    }))
}

/// Errors the grader can fix by typing something else.
fn is_recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::Input(_) | Error::Validation(_) | Error::UnknownQuestion(_) | Error::UnknownCode { .. }
    )
}

/// Drive `session` from `input` until the grader quits, input ends, or no
/// cell is left; then regenerate outputs.
pub fn run_terminal<R: BufRead, W: Write>(
    session: &mut Session,
    initial: Vec<Effect>,
    mut input: R,
    mut out: W,
    hooks: &HookRunner,
) -> Result<SessionEnd> {
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    let mut pending = initial;
    loop {
        let mut finalize = false;
        for effect in pending.drain(..) {
            if effect == Effect::Finalize {
                finalize = true;
            } else {
                hooks.run(&effect, &mut out);
            }
        }
        if finalize {
            let report = session.finalize()?;
            let completed = session.snapshot().progress.remaining_in_scope == 0;
            writeln!(
                out,
                "\nWrote {} and {} feedback file(s): {} complete, {} partial, {} missing.",
                report.grade_sheet.display(),
                report.feedback_files,
                report.complete,
                report.partial,
                report.missing
            )
            .map_err(io)?;
            return Ok(SessionEnd { completed, report });
        }

        print_prompt(session, &mut out).map_err(io)?;
        let Some(line) = ask(&mut input, &mut out, ">")? else {
            pending = session.apply(Action::Quit)?;
            continue;
        };
        let visible = session.visible_codes();
        let command = match parse_input(&line, &visible, session.github_issues()) {
            Ok(c) => c,
            Err(e) => {
                writeln!(out, "  ! {e}").map_err(io)?;
                continue;
            }
        };
        let action = match complete_action(session, command, &mut input, &mut out)? {
            Some(a) => a,
            None => Action::Quit,
        };
        match session.apply(action) {
            Ok(effects) => pending = effects,
            Err(e) if is_recoverable(&e) => {
                writeln!(out, "  ! {e}").map_err(io)?;
            }
            Err(e) => return Err(e),
        }
    }
}
