use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point, PointCloud};
use crate::{Error, Result};

/// Supported on-disk point formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CloudFormat {
    /// `x y z intensity` per line, `#` comments.
    #[default]
    AsciiXyzi,
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CloudFormat::AsciiXyzi => parse_xyzi(BufReader::new(file), path.display().to_string()),
    }
}

/// Parses ASCII XYZI from any reader. Line numbers in errors are 1-based.
pub fn parse_xyzi(reader: impl Read, source_id: impl Into<String>) -> Result<PointCloud> {
    let source_id = source_id.into();
    let mut points = Vec::new();
    let reader = BufReader::new(reader);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(&source_id, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        points.push(parse_line(trimmed, line_no)?);
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!("no points in {source_id}")));
    }
    Ok(PointCloud::new(points, source_id))
}

fn parse_line(line: &str, line_no: usize) -> Result<Point> {
    let mut vals = [0.0f64; 4];
    let mut fields = line.split_whitespace();
    for (k, slot) in vals.iter_mut().enumerate() {
        let field = fields.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected 4 fields, found {k}"),
        })?;
        *slot = field.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid number {field:?}"),
        })?;
    }
    if fields.next().is_some() {
        return Err(Error::Parse {
            line: line_no,
            message: "expected 4 fields, found more".into(),
        });
    }
    let p = Point::new(vals[0], vals[1], vals[2], vals[3]);
    if !p.is_valid() {
        return Err(Error::Parse {
            line: line_no,
            message: "non-finite coordinate or intensity outside [0, 65535]".into(),
        });
    }
    Ok(p)
}

/// Renders a cloud in the canonical text form written by [`save_cloud`].
pub fn format_xyzi(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 40);
    for p in cloud {
        // `{}` on f64 is the shortest representation that parses back exactly.
        let _ = writeln!(out, "{:.6} {:.6} {:.6} {}", p.x, p.y, p.z, p.intensity);
    }
    out
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if cloud.is_empty() {
        return Err(Error::EmptyInput("refusing to write an empty cloud".into()));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format_xyzi(cloud).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
