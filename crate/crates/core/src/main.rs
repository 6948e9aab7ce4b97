use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use gradekit::engine::Session;
use gradekit::push::{execute, plan_push, LiveTransport, PushPlan};
use gradekit::rubric::rubric_template;
use gradekit::server::{serve, AppState};
use gradekit::terminal::{run_terminal, HookRunner};
use gradekit::workspace::FinalizeReport;
use gradekit::{Error, GradingMode, HookSetting, PathTemplate, SessionConfig, Workspace};

#[derive(Parser)]
#[command(name = "gradekit", version, about = "Rubric-driven grading from the terminal")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grade every gradee and question.
    Grade(GradeArgs),
    /// Grade a subset of students or questions, optionally noting issues.
    GradeAdvanced(AdvancedArgs),
    /// Grade teams: one grade per team, copied to each member.
    GradeTeam(TeamArgs),
    /// Clear previously graded cells and grade them again.
    Regrade(AdvancedArgs),
    /// Write an empty rubric with the required header.
    Template(TemplateArgs),
    /// Regenerate the grade sheet and feedback files from the progress log.
    Finalize(FinalizeArgs),
    /// Push feedback files and open noted issues in gradee repositories.
    Push(PushArgs),
    /// Serve the grading session over a local HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Inputs {
    /// Rubric CSV.
    #[arg(long)]
    rubric: PathBuf,
    /// Roster CSV with a student_identifier column (and team_identifier in team mode).
    #[arg(long)]
    roster: PathBuf,
    /// An identifier from the roster that appears in the example paths.
    #[arg(long = "example-id")]
    example_id: String,
    /// Submission path of the example gradee.
    #[arg(long = "example-sub")]
    example_sub: String,
    /// Feedback path of the example gradee.
    #[arg(long = "example-feedback")]
    example_feedback: String,
    /// Progress log CSV; created if missing.
    #[arg(long)]
    log: PathBuf,
    /// Grade sheet CSV to write.
    #[arg(long)]
    grades: PathBuf,
    #[arg(long, default_value = "negative")]
    mode: GradingMode,
    /// Directory submission and feedback paths are relative to.
    #[arg(long, default_value = ".")]
    root: PathBuf,
}

#[derive(Args)]
struct Hooks {
    /// Command that opens a submission; the path is passed as its argument.
    #[arg(long = "open-cmd")]
    open_cmd: Option<String>,
    /// Command run when grading moves past a submission.
    #[arg(long = "close-cmd")]
    close_cmd: Option<String>,
    /// Do not open or close submissions.
    #[arg(long = "no-open")]
    no_open: bool,
}

impl Hooks {
    fn settings(&self) -> (HookSetting, HookSetting) {
        if self.no_open {
            return (HookSetting::Disabled, HookSetting::Disabled);
        }
        let pick = |c: &Option<String>| match c {
            Some(c) if c.trim().is_empty() => HookSetting::Disabled,
            Some(c) => HookSetting::Command(c.clone()),
            None => HookSetting::Default,
        };
        (pick(&self.open_cmd), pick(&self.close_cmd))
    }
}

#[derive(Args)]
struct GradeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    hooks: Hooks,
}

#[derive(Args)]
struct Subsets {
    /// Comma-separated gradee identifiers (team identifiers in team mode).
    #[arg(long, value_delimiter = ',')]
    students: Option<Vec<String>>,
    /// Comma-separated question names; "general" selects the general section.
    #[arg(long, value_delimiter = ',')]
    questions: Option<Vec<String>>,
    /// Allow noting issues for later creation in gradee repositories.
    #[arg(long = "github-issues")]
    github_issues: bool,
}

#[derive(Args)]
struct AdvancedArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    subsets: Subsets,
    /// Grade by team_identifier instead of student.
    #[arg(long)]
    team: bool,
    #[command(flatten)]
    hooks: Hooks,
}

#[derive(Args)]
struct TeamArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    subsets: Subsets,
    #[command(flatten)]
    hooks: Hooks,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "negative")]
    mode: GradingMode,
    /// Replace an existing file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct FinalizeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    team: bool,
}

#[derive(Args)]
struct PushArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    team: bool,
    /// Repository of the example gradee, e.g. stats101/hw01-BaronPoisson.
    #[arg(long = "repo-template")]
    repo_template: String,
    #[arg(long = "commit-message", default_value = "Add grading feedback")]
    commit_message: String,
    /// Print the plan and stop.
    #[arg(long = "plan-only")]
    plan_only: bool,
    /// Environment variable holding the access token.
    #[arg(long = "token-env", env = "GRADEKIT_TOKEN_ENV", default_value = "GITHUB_TOKEN")]
    token_env: String,
    #[arg(long = "api-url", default_value = "https://api.github.com")]
    api_url: String,
    /// Base URL repositories are cloned from.
    #[arg(long = "git-url", default_value = "https://github.com")]
    git_url: String,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    subsets: Subsets,
    #[arg(long)]
    team: bool,
    #[command(flatten)]
    hooks: Hooks,
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: SocketAddr,
    /// Directory of web console assets served at /.
    #[arg(long = "static-dir")]
    static_dir: Option<PathBuf>,
    /// Permit binding to a non-loopback address.
    #[arg(long = "allow-remote")]
    allow_remote: bool,
}

fn config(inputs: &Inputs, team: bool, subsets: Option<&Subsets>, hooks: Option<&Hooks>) -> SessionConfig {
    let mut c = SessionConfig::new(
        &inputs.rubric,
        &inputs.roster,
        &inputs.example_id,
        &inputs.example_sub,
        &inputs.example_feedback,
        &inputs.log,
        &inputs.grades,
    );
    c.mode = inputs.mode;
    c.root = inputs.root.clone();
    c.team_mode = team;
    if let Some(s) = subsets {
        c.students = s.students.clone();
        c.questions = s.questions.clone();
        c.github_issues = s.github_issues;
    }
    let (open, close) = hooks.map(Hooks::settings).unwrap_or((HookSetting::Disabled, HookSetting::Disabled));
    c.open_hook = open;
    c.close_hook = close;
    c
}

fn print_report(report: &FinalizeReport) {
    println!(
        "Wrote {} and {} feedback file(s): {} complete, {} partial, {} missing.",
        report.grade_sheet.display(),
        report.feedback_files,
        report.complete,
        report.partial,
        report.missing
    );
}

fn finalize_only(config: SessionConfig) -> anyhow::Result<()> {
    let ws = Workspace::load(config)?;
    let log = ws.read_log()?;
    print_report(&ws.finalize(&log)?);
    Ok(())
}

fn grade(config: SessionConfig, regrade: bool) -> anyhow::Result<()> {
    let hooks = HookRunner {
        open: config.open_hook.clone(),
        close: config.close_hook.clone(),
    };
    let started = if regrade {
        Session::regrade(config.clone())
    } else {
        Session::start(config.clone())
    };
    let (mut session, effects) = match started {
        Ok(s) => s,
        Err(Error::AllGraded) => {
            println!("Nothing left to grade.");
            return finalize_only(config);
        }
        Err(e) => return Err(e.into()),
    };
    let stdin = io::stdin();
    let input: Box<dyn BufRead> = Box::new(stdin.lock());
    let out = io::stdout();
    run_terminal(&mut session, effects, input, out.lock(), &hooks)?;
    Ok(())
}

fn push(args: PushArgs) -> anyhow::Result<bool> {
    let ws = Workspace::load(config(&args.inputs, args.team, None, None))?;
    let log = ws.read_log()?;
    let repos = PathTemplate::compile(&args.inputs.example_id, &args.repo_template)
        .context("--repo-template must contain the example identifier")?;
    let plan: PushPlan = plan_push(
        &log,
        &ws.feedback_paths,
        &ws.config.root,
        &repos,
        &args.commit_message,
    )?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    if args.plan_only {
        for op in &plan.operations {
            println!("{op}");
        }
        println!(
            "{} file push(es), {} issue(s).",
            plan.count_pushes(),
            plan.count_issues()
        );
        return Ok(true);
    }
    let token = std::env::var(&args.token_env).ok().filter(|t| !t.is_empty());
    if token.is_none() {
        eprintln!("warning: ${} is not set; pushing without a token", args.token_env);
    }
    let mut transport = LiveTransport::new(&args.api_url, &args.git_url, token)?;
    let report = execute(&plan, &mut transport);
    for entry in &report.entries {
        match (&entry.outcome, &entry.error) {
            (_, Some(e)) => println!("FAILED {}: {e}", entry.operation),
            (Some(o), None) => println!("{:?} {}", o, entry.operation),
            (None, None) => {}
        }
    }
    println!("{} operation(s), {} failed.", report.entries.len(), report.failures());
    Ok(report.failures() == 0)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Cmd::Grade(a) => grade(config(&a.inputs, false, None, Some(&a.hooks)), false)?,
        Cmd::GradeAdvanced(a) => grade(config(&a.inputs, a.team, Some(&a.subsets), Some(&a.hooks)), false)?,
        Cmd::GradeTeam(a) => grade(config(&a.inputs, true, Some(&a.subsets), Some(&a.hooks)), false)?,
        Cmd::Regrade(a) => grade(config(&a.inputs, a.team, Some(&a.subsets), Some(&a.hooks)), true)?,
        Cmd::Template(a) => {
            if a.out.exists() && !a.force {
                bail!("{} already exists; pass --force to replace it", a.out.display());
            }
            gradekit::fsutil::atomic_write(&a.out, rubric_template(a.mode).as_bytes())?;
            println!("Wrote {}", a.out.display());
        }
        Cmd::Finalize(a) => finalize_only(config(&a.inputs, a.team, None, None))?,
        Cmd::Push(a) => return push(a),
        Cmd::Serve(a) => {
            let config = config(&a.inputs, a.team, Some(&a.subsets), Some(&a.hooks));
            let hooks = HookRunner {
                open: config.open_hook.clone(),
                close: config.close_hook.clone(),
            };
            let (session, effects) = match Session::start(config.clone()) {
                Ok(s) => s,
                Err(Error::AllGraded) => {
                    println!("Nothing left to grade.");
                    finalize_only(config)?;
                    return Ok(true);
                }
                Err(e) => return Err(e.into()),
            };
            let state = AppState::new(session, effects, hooks)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state.clone(), a.bind, a.allow_remote, a.static_dir))?;
            if let Some(report) = state.report() {
                print_report(&report);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
