//! Distribute feedback files and noted issues to per-gradee repositories.
//!
//! Distribution always starts from a [`PushPlan`], which can be printed and
//! inspected before anything leaves the machine. A [`Transport`] then carries
//! out the plan: [`DryRun`] only records it, [`LiveTransport`] pushes with the
//! `git` client and creates issues over the hosting service's REST API.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::native_path;
use crate::paths::PathTemplate;
use crate::progress::ProgressLog;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PushOp {
    PushFile {
        repo: String,
        local_path: PathBuf,
        destination: String,
        message: String,
    },
    CreateIssue {
        repo: String,
        title: String,
        body: String,
    },
}

impl PushOp {
    pub fn repo(&self) -> &str {
        match self {
            PushOp::PushFile { repo, .. } | PushOp::CreateIssue { repo, .. } => repo,
        }
    }
}

impl fmt::Display for PushOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PushOp::PushFile {
                repo,
                local_path,
                destination,
                ..
            } => write!(f, "PUSH_FILE {repo}: {} -> {destination}", local_path.display()),
            PushOp::CreateIssue { repo, title, .. } => write!(f, "CREATE_ISSUE {repo}: {title}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PushPlan {
    pub operations: Vec<PushOp>,
    pub warnings: Vec<String>,
}

impl PushPlan {
    pub fn count_pushes(&self) -> usize {
        self.operations
            .iter()
            .filter(|o| matches!(o, PushOp::PushFile { .. }))
            .count()
    }

    pub fn count_issues(&self) -> usize {
        self.operations.len() - self.count_pushes()
    }
}

/// Build the plan: for each gradee in log order, push its feedback file, then
/// open each issue noted on its cells.
pub fn plan_push(
    log: &ProgressLog,
    feedback_paths: &IndexMap<String, String>,
    root: &Path,
    repo_template: &PathTemplate,
    commit_message: &str,
) -> Result<PushPlan> {
    let mut plan = PushPlan::default();
    for gradee in log.gradees() {
        let repo = repo_template.instantiate(gradee);
        if let Some(rel) = feedback_paths.get(gradee) {
            let local = native_path(root, rel);
            if !local.is_file() {
                return Err(Error::MissingFeedbackFile {
                    gradee: gradee.clone(),
                    path: rel.clone(),
                });
            }
            let destination = local
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| rel.clone());
            plan.operations.push(PushOp::PushFile {
                repo: repo.clone(),
                local_path: local,
                destination,
                message: commit_message.to_string(),
            });
        }
        for cell in log.cells_of(gradee).unwrap_or(&[]) {
            if !cell.has_issue() {
                continue;
            }
            match cell.issue_title.as_deref().map(str::trim) {
                Some(title) if !title.is_empty() => plan.operations.push(PushOp::CreateIssue {
                    repo: repo.clone(),
                    title: title.to_string(),
                    body: cell.issue_body.clone().unwrap_or_default(),
                }),
                _ => plan.warnings.push(format!(
                    "issue noted for {gradee} / {} has no title and was left out",
                    cell.section
                )),
            }
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Recorded by a dry run; nothing happened.
    Planned,
    Committed,
    /// Destination already had identical content; no commit made.
    Unchanged,
    Created,
    /// An issue with the same title already exists.
    AlreadyExists,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// The two verbs distribution needs from a hosting service.
pub trait Transport {
    fn push_file(
        &mut self,
        repo: &str,
        local_path: &Path,
        destination: &str,
        message: &str,
    ) -> std::result::Result<Outcome, TransportError>;

    fn create_issue(
        &mut self,
        repo: &str,
        title: &str,
        body: &str,
    ) -> std::result::Result<Outcome, TransportError>;
}

#[derive(Debug, Clone, Serialize)]
pub struct OpReport {
    pub operation: PushOp,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExecutionReport {
    pub entries: Vec<OpReport>,
}

impl ExecutionReport {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.entries
            .iter()
            .filter(|e| e.outcome == Some(outcome))
            .count()
    }
}

/// Run every operation in order. A failure is recorded and execution moves on.
pub fn execute(plan: &PushPlan, transport: &mut dyn Transport) -> ExecutionReport {
    let entries = plan
        .operations
        .iter()
        .map(|op| {
            let result = match op {
                PushOp::PushFile {
                    repo,
                    local_path,
                    destination,
                    message,
                } => transport.push_file(repo, local_path, destination, message),
                PushOp::CreateIssue { repo, title, body } => {
                    transport.create_issue(repo, title, body)
                }
            };
            let (outcome, error) = match result {
                Ok(o) => (Some(o), None),
                Err(e) => (None, Some(e.0)),
            };
            OpReport {
                operation: op.clone(),
                outcome,
                error,
            }
        })
        .collect();
    ExecutionReport { entries }
}

/// Records operations without touching the filesystem or the network.
#[derive(Debug, Default)]
pub struct DryRun {
    pub recorded: Vec<PushOp>,
}

impl Transport for DryRun {
    fn push_file(
        &mut self,
        repo: &str,
        local_path: &Path,
        destination: &str,
        message: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        self.recorded.push(PushOp::PushFile {
            repo: repo.to_string(),
            local_path: local_path.to_path_buf(),
            destination: destination.to_string(),
            message: message.to_string(),
        });
        Ok(Outcome::Planned)
    }

    fn create_issue(
        &mut self,
        repo: &str,
        title: &str,
        body: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        self.recorded.push(PushOp::CreateIssue {
            repo: repo.to_string(),
            title: title.to_string(),
            body: body.to_string(),
        });
        Ok(Outcome::Planned)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryRepo {
    pub files: BTreeMap<String, Vec<u8>>,
    pub commits: Vec<String>,
    pub issues: Vec<(String, String)>,
}

/// In-process stand-in for a hosting service. Only repositories created with
/// [`MemoryTransport::with_repo`] exist.
#[derive(Debug, Default)]
pub struct MemoryTransport {
    pub repos: BTreeMap<String, MemoryRepo>,
}

impl MemoryTransport {
    pub fn with_repo(mut self, repo: &str) -> Self {
        self.repos.insert(repo.to_string(), MemoryRepo::default());
        self
    }

    pub fn total_commits(&self) -> usize {
        self.repos.values().map(|r| r.commits.len()).sum()
    }

    fn repo(&mut self, repo: &str) -> std::result::Result<&mut MemoryRepo, TransportError> {
        self.repos
            .get_mut(repo)
            .ok_or_else(|| TransportError(format!("repository {repo} not found")))
    }
}

impl Transport for MemoryTransport {
    fn push_file(
        &mut self,
        repo: &str,
        local_path: &Path,
        destination: &str,
        message: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        let bytes = std::fs::read(local_path)
            .map_err(|e| TransportError(format!("{}: {e}", local_path.display())))?;
        let r = self.repo(repo)?;
        if r.files.get(destination) == Some(&bytes) {
            return Ok(Outcome::Unchanged);
        }
        r.files.insert(destination.to_string(), bytes);
        r.commits.push(message.to_string());
        Ok(Outcome::Committed)
    }

    fn create_issue(
        &mut self,
        repo: &str,
        title: &str,
        body: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        let r = self.repo(repo)?;
        if r.issues.iter().any(|(t, _)| t == title) {
            return Ok(Outcome::AlreadyExists);
        }
        r.issues.push((title.to_string(), body.to_string()));
        Ok(Outcome::Created)
    }
}

/// Pushes with the `git` command-line client and creates issues through a
/// GitHub-style REST API.
pub struct LiveTransport {
    /// e.g. `https://api.github.com`
    pub api_base: String,
    /// e.g. `https://github.com`; repositories are cloned from `{git_base}/{repo}.git`.
    pub git_base: String,
    pub token: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct IssueSummary {
    title: String,
}

impl LiveTransport {
    pub fn new(api_base: &str, git_base: &str, token: Option<String>) -> Result<LiveTransport, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("gradekit/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(LiveTransport {
            api_base: api_base.trim_end_matches('/').to_string(),
            git_base: git_base.trim_end_matches('/').to_string(),
            token,
            client,
        })
    }

    fn remote_url(&self, repo: &str) -> String {
        let url = format!("{}/{repo}.git", self.git_base);
        match (&self.token, url.strip_prefix("https://")) {
            (Some(token), Some(rest)) => format!("https://x-access-token:{token}@{rest}"),
            _ => url,
        }
    }

    fn request(&self, method: reqwest::Method, url: &str) -> reqwest::blocking::RequestBuilder {
        let req = self
            .client
            .request(method, url)
            .header("Accept", "application/vnd.github+json");
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }
}

fn git(dir: &Path, args: &[&str]) -> std::result::Result<std::process::Output, TransportError> {
    Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .output()
        .map_err(|e| TransportError(format!("cannot run git: {e}")))
}

fn git_ok(dir: &Path, args: &[&str]) -> std::result::Result<std::process::Output, TransportError> {
    let out = git(dir, args)?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(TransportError(format!(
            "git {} failed: {}",
            args.first().copied().unwrap_or_default(),
            String::from_utf8_lossy(&out.stderr).trim()
        )))
    }
}

impl Transport for LiveTransport {
    fn push_file(
        &mut self,
        repo: &str,
        local_path: &Path,
        destination: &str,
        message: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        let work = tempfile::tempdir().map_err(|e| TransportError(e.to_string()))?;
        let checkout = work.path().join("repo");
        let url = self.remote_url(repo);
        let checkout_str = checkout.to_string_lossy().into_owned();
        git_ok(work.path(), &["clone", "--quiet", "--depth", "1", &url, &checkout_str])
            .map_err(|e| TransportError(e.0.replace(&url, &format!("{}/{repo}.git", self.git_base))))?;
        let target = checkout.join(destination);
        std::fs::copy(local_path, &target)
            .map_err(|e| TransportError(format!("{}: {e}", local_path.display())))?;
        git_ok(&checkout, &["add", "--", destination])?;
        if git(&checkout, &["diff", "--cached", "--quiet"])?.status.success() {
            return Ok(Outcome::Unchanged);
        }
        let has_identity = git(&checkout, &["config", "user.email"])?.status.success();
        let mut commit = vec![];
        if !has_identity {
            commit.extend(["-c", "user.name=gradekit", "-c", "user.email=gradekit@localhost"]);
        }
        commit.extend(["commit", "--quiet", "-m", message]);
        git_ok(&checkout, &commit)?;
        git_ok(&checkout, &["push", "--quiet", "origin", "HEAD"])?;
        Ok(Outcome::Committed)
    }

    fn create_issue(
        &mut self,
        repo: &str,
        title: &str,
        body: &str,
    ) -> std::result::Result<Outcome, TransportError> {
        let url = format!("{}/repos/{repo}/issues", self.api_base);
        let existing = self
            .request(reqwest::Method::GET, &format!("{url}?state=all&per_page=100"))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| TransportError(format!("listing issues of {repo}: {e}")))?
            .json::<Vec<IssueSummary>>()
            .map_err(|e| TransportError(format!("listing issues of {repo}: {e}")))?;
        if existing.iter().any(|i| i.title == title) {
            return Ok(Outcome::AlreadyExists);
        }
        self.request(reqwest::Method::POST, &url)
            .json(&serde_json::json!({ "title": title, "body": body }))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| TransportError(format!("creating issue in {repo}: {e}")))?;
        Ok(Outcome::Created)
    }
}
