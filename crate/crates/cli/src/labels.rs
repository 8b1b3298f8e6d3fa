use std::fmt::Write as _;
use std::path::Path;

use crate::{Failure, EXIT_IO};

/// Per-point class written by `ground`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Ground,
    Nonground,
    Outlier,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ground => "ground",
            Label::Nonground => "nonground",
            Label::Outlier => "outlier",
        }
    }

    fn parse(s: &str) -> Option<Label> {
        match s {
            "ground" => Some(Label::Ground),
            "nonground" => Some(Label::Nonground),
            "outlier" => Some(Label::Outlier),
            _ => None,
        }
    }
}

/// One `index label` line per point, in cloud order.
pub fn write_labels(path: &Path, labels: &[Label]) -> Result<(), Failure> {
    let mut text = String::with_capacity(labels.len() * 12);
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(text, "{i} {}", l.as_str());
    }
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

/// Reads a labels file and checks it covers exactly `n_points` points.
pub fn read_labels(path: &Path, n_points: usize) -> Result<Vec<Label>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let bad = |line: usize, what: String| Failure::new(EXIT_IO, format!("{}:{line}: {what}", path.display()));
    let mut labels = Vec::with_capacity(n_points);
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(idx), Some(name), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad(n + 1, format!("expected `index label`, got {line:?}")));
        };
        if idx.parse::<usize>().ok() != Some(labels.len()) {
            return Err(bad(n + 1, format!("expected index {}, got {idx:?}", labels.len())));
        }
        labels.push(Label::parse(name).ok_or_else(|| bad(n + 1, format!("unknown label {name:?}")))?);
    }
    if labels.len() != n_points {
        return Err(Failure::new(
            EXIT_IO,
            format!("{}: {} labels for a cloud of {n_points} points", path.display(), labels.len()),
        ));
    }
    Ok(labels)
}
