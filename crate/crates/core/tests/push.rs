mod common;

use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::get;
use axum::{Json, Router};
use common::*;
use gradekit::engine::Action;
use gradekit::push::{execute, plan_push, LiveTransport, Outcome, PushPlan};
use gradekit::{PathTemplate, Workspace};
use serde_json::{json, Value};

#[derive(Default)]
struct MockHost {
    repos: Vec<String>,
    issues: Vec<(String, String, String)>,
    auth: Vec<String>,
}

type Shared = Arc<Mutex<MockHost>>;

async fn list_issues(
    State(host): State<Shared>,
    UrlPath((owner, name)): UrlPath<(String, String)>,
    headers: HeaderMap,
) -> Result<Json<Value>, StatusCode> {
    let mut h = host.lock().unwrap();
    let repo = format!("{owner}/{name}");
    h.auth.push(headers.get("authorization").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default());
    if !h.repos.contains(&repo) {
        return Err(StatusCode::NOT_FOUND);
    }
    let list: Vec<Value> = h
        .issues
        .iter()
        .filter(|(r, ..)| *r == repo)
        .map(|(_, t, b)| json!({ "title": t, "body": b, "number": 1 }))
        .collect();
    Ok(Json(Value::Array(list)))
}

async fn create_issue(
    State(host): State<Shared>,
    UrlPath((owner, name)): UrlPath<(String, String)>,
    Json(body): Json<Value>,
) -> Result<(StatusCode, Json<Value>), StatusCode> {
    let mut h = host.lock().unwrap();
    let repo = format!("{owner}/{name}");
    if !h.repos.contains(&repo) {
        return Err(StatusCode::NOT_FOUND);
    }
    h.issues.push((
        repo,
        body["title"].as_str().unwrap().to_string(),
        body["body"].as_str().unwrap_or_default().to_string(),
    ));
    Ok((StatusCode::CREATED, Json(json!({ "number": h.issues.len() }))))
}

/// Serve the mock API on a background thread; returns its base URL.
fn start_mock(host: Shared) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/repos/{owner}/{name}/issues", get(list_issues).post(create_issue))
                .with_state(host);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git").arg("-C").arg(dir).args(args).output().unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn bare_repo(remotes: &Path, repo: &str, seed: bool) {
    let bare = remotes.join(format!("{repo}.git"));
    std::fs::create_dir_all(&bare).unwrap();
    git(&bare, &["init", "--quiet", "--bare"]);
    if seed {
        let work = tempfile::tempdir().unwrap();
        git(work.path(), &["init", "--quiet"]);
        std::fs::write(work.path().join("README.md"), "homework\n").unwrap();
        git(work.path(), &["add", "README.md"]);
        git(work.path(), &["-c", "user.name=t", "-c", "user.email=t@t", "commit", "--quiet", "-m", "init"]);
        git(work.path(), &["push", "--quiet", &bare.display().to_string(), "HEAD:refs/heads/main"]);
        git(&bare, &["symbolic-ref", "HEAD", "refs/heads/main"]);
    }
}

fn graded_fixture() -> (Fixture, PushPlan) {
    let fx = Fixture::sample();
    let issue = |t: &str| Action::NoteIssue { title: t.into(), body: format!("{t}\n\nDetails.") };
    run_to_end(
        fx.config_with(|c| c.github_issues = true),
        &[
            issue("Label the axes"),
            apply(&["1a"]),
            apply(&[]),
            apply(&["1b"]),
            apply(&[]),
            issue("Missing data file"),
            apply(&[]),
            apply(&[]),
        ],
    );
    let ws = Workspace::load(fx.config()).unwrap();
    let log = ws.read_log().unwrap();
    let repos = PathTemplate::compile("BaronPoisson", "course/hw01-BaronPoisson").unwrap();
    let plan = plan_push(&log, &ws.feedback_paths, fx.root(), &repos, "Add hw01 feedback").unwrap();
    (fx, plan)
}

#[test]
fn live_transport_pushes_and_opens_issues() {
    let (fx, plan) = graded_fixture();
    assert_eq!((plan.count_pushes(), plan.count_issues()), (3, 2));

    let remotes = tempfile::tempdir().unwrap();
    bare_repo(remotes.path(), "course/hw01-BaronPoisson", true);
    bare_repo(remotes.path(), "course/hw01-sergent-gamma", false);
    // student_T has no repository
    let host: Shared = Arc::new(Mutex::new(MockHost {
        repos: vec!["course/hw01-BaronPoisson".into(), "course/hw01-sergent-gamma".into()],
        ..Default::default()
    }));
    let api = start_mock(host.clone());
    let git_base = format!("file://{}", remotes.path().display());
    let mut live = LiveTransport::new(&api, &git_base, Some("s3cret".into())).unwrap();

    let report = execute(&plan, &mut live);
    assert_eq!(report.count(Outcome::Committed), 2, "{report:#?}");
    assert_eq!(report.count(Outcome::Created), 1, "{report:#?}");
    // push and issue for the missing repository
    assert_eq!(report.failures(), 2, "{report:#?}");
    assert!(report.entries.iter().filter(|e| e.error.is_some()).all(|e| e.operation.repo() == "course/hw01-student_T"));

    let bp = remotes.path().join("course/hw01-BaronPoisson.git");
    assert_eq!(
        git(&bp, &["show", "HEAD:hw01-BaronPoisson-feedback.md"]),
        fx.read("fb/hw01-BaronPoisson-feedback.md")
    );
    assert_eq!(git(&bp, &["log", "-1", "--format=%s"]).trim(), "Add hw01 feedback");
    assert_eq!(git(&bp, &["rev-list", "--count", "HEAD"]).trim(), "2");
    assert_eq!(git(&bp, &["show", "HEAD:README.md"]), "homework\n");
    let sg = remotes.path().join("course/hw01-sergent-gamma.git");
    assert_eq!(git(&sg, &["rev-list", "--count", "HEAD"]).trim(), "1");

    {
        let h = host.lock().unwrap();
        assert_eq!(
            h.issues,
            [("course/hw01-BaronPoisson".to_string(), "Label the axes".to_string(), "Label the axes\n\nDetails.".to_string())]
        );
        assert!(h.auth.iter().all(|a| a == "Bearer s3cret"), "{:?}", h.auth);
    }

    // running the same plan again changes nothing
    let again = execute(&plan, &mut live);
    assert_eq!(again.count(Outcome::Committed), 0);
    assert_eq!(again.count(Outcome::Unchanged), 2);
    assert_eq!(again.count(Outcome::AlreadyExists), 1);
    assert_eq!(git(&bp, &["rev-list", "--count", "HEAD"]).trim(), "2");
    assert_eq!(host.lock().unwrap().issues.len(), 1);

    // an edited feedback file is committed on top
    fx.write("fb/hw01-BaronPoisson-feedback.md", "# Feedback for BaronPoisson\n\nrevised\n");
    let third = execute(&plan, &mut live);
    assert_eq!(third.count(Outcome::Committed), 1);
    assert_eq!(git(&bp, &["rev-list", "--count", "HEAD"]).trim(), "3");
}

#[test]
fn unreachable_api_is_reported_per_operation() {
    let (_fx, plan) = graded_fixture();
    let remotes = tempfile::tempdir().unwrap();
    let mut live = LiveTransport::new("http://127.0.0.1:9", &format!("file://{}", remotes.path().display()), None).unwrap();
    let report = execute(&plan, &mut live);
    assert_eq!(report.failures(), plan.operations.len());
    assert!(report.entries.iter().all(|e| e.outcome.is_none()));
}
