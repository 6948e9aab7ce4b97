//! Submission and feedback paths inferred from one example.
//!
//! Every occurrence of the example identifier in the example path becomes a
//! placeholder; other identifiers are substituted into those positions.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{CollisionReport, Error, Result};
use crate::fsutil::native_path;
use crate::roster::Gradee;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathTemplate {
    example_identifier: String,
    example_path: String,
    segments: Vec<Segment>,
}

impl PathTemplate {
    /// Mark every non-overlapping occurrence of `example_identifier` in
    /// `example_path`, scanning left to right.
    pub fn compile(example_identifier: &str, example_path: &str) -> Result<PathTemplate> {
        let not_found = || Error::IdentifierNotInPath {
            identifier: example_identifier.to_string(),
            path: example_path.to_string(),
        };
        if example_identifier.is_empty() || example_path.is_empty() {
            return Err(not_found());
        }
        let mut segments = Vec::new();
        let mut rest = example_path;
        while let Some(at) = rest.find(example_identifier) {
            if at > 0 {
                segments.push(Segment::Literal(rest[..at].to_string()));
            }
            segments.push(Segment::Placeholder);
            rest = &rest[at + example_identifier.len()..];
        }
        if !segments.contains(&Segment::Placeholder) {
            return Err(not_found());
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(PathTemplate {
            example_identifier: example_identifier.to_string(),
            example_path: example_path.to_string(),
            segments,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn example_identifier(&self) -> &str {
        &self.example_identifier
    }

    pub fn example_path(&self) -> &str {
        &self.example_path
    }

    /// Substitute `identifier` at every placeholder.
    pub fn instantiate(&self, identifier: &str) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Literal(l) => l.as_str(),
                Segment::Placeholder => identifier,
            })
            .collect()
    }

    /// Like [`instantiate`](Self::instantiate), but refuses results that climb
    /// further out of the course directory than the example path does.
    pub fn resolve(&self, identifier: &str) -> Result<String> {
        let path = self.instantiate(identifier);
        let example_floor = depth_floor(&self.example_path);
        let absolute_now = is_absolute(&path) && !is_absolute(&self.example_path);
        if absolute_now || depth_floor(&path) < example_floor {
            return Err(Error::PathEscapesRoot {
                identifier: identifier.to_string(),
                path,
            });
        }
        Ok(path)
    }
}

fn is_absolute(path: &str) -> bool {
    path.starts_with('/') || path.starts_with('\\') || path.get(1..3) == Some(":\\") || path.get(1..3) == Some(":/")
}

/// Lowest directory depth reached while walking the path's components.
fn depth_floor(path: &str) -> i64 {
    let mut depth = 0i64;
    let mut floor = 0i64;
    for part in path.split(['/', '\\']) {
        match part {
            "" | "." => {}
            ".." => {
                depth -= 1;
                floor = floor.min(depth);
            }
            _ => depth += 1,
        }
    }
    floor
}

/// One path per gradee, in gradee order. Fails if two gradees share a path.
pub fn resolve_all(template: &PathTemplate, gradees: &[Gradee]) -> Result<IndexMap<String, String>> {
    let mut out: IndexMap<String, String> = IndexMap::with_capacity(gradees.len());
    for g in gradees {
        let path = template.resolve(&g.identifier)?;
        if let Some((other, _)) = out.iter().find(|(_, p)| **p == path) {
            return Err(Error::PathCollision(CollisionReport {
                first: other.clone(),
                second: g.identifier.clone(),
                path,
            }));
        }
        out.insert(g.identifier.clone(), path);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Presence {
    pub present: Vec<String>,
    pub missing: Vec<String>,
}

/// Split gradees by whether their submission exists under `root`.
/// A directory counts as a (multi-file) submission.
pub fn check_presence(paths: &IndexMap<String, String>, root: &Path) -> Presence {
    let mut out = Presence::default();
    for (gradee, path) in paths {
        if native_path(root, path).exists() {
            out.present.push(gradee.clone());
        } else {
            out.missing.push(gradee.clone());
        }
    }
    out
}
