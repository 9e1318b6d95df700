//! Plain-text file formats: numeric matrices, cohort manifests, and
//! node-signal tables.
//!
//! Every format is line-oriented. Fields split on commas when a line
//! contains one, otherwise on whitespace; blank lines and lines starting
//! with `#` are skipped. Matrices are written in scientific notation with
//! 17 significant digits, which round-trips every f64 exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::analysis::NodeSignal;
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Split one line into fields: on commas if present, else on whitespace.
fn fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Content lines of a file with their 1-based line numbers; blank and
/// `#`-comment lines are dropped.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim().to_string()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .collect())
}

/// Read a dense numeric matrix, one row per line.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let lines = content_lines(path)?;
    if lines.is_empty() {
        return Err(parse_error(path, 1, "matrix file has no rows"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
    let mut width = 0usize;
    for (line_no, line) in &lines {
        let mut row = Vec::with_capacity(width.max(4));
        for field in fields(line) {
            let value: f64 = field.parse().map_err(|_| {
                parse_error(path, *line_no, format!("not a number: '{field}'"))
            })?;
            row.push(value);
        }
        if width == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(parse_error(
                path,
                *line_no,
                format!("row has {} values, expected {width}", row.len()),
            ));
        }
        rows.push(row);
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(lines.len(), width, &flat))
}

/// Write a matrix in the same row-per-line layout `read_matrix` accepts.
pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut text = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                text.push(' ');
            }
            let _ = write!(text, "{:.16e}", matrix[(i, j)]);
        }
        text.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_error(path, e))
}

/// One cohort member: subject id, resolved adjacency-file path, group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject: String,
    pub path: PathBuf,
    pub group: String,
}

/// Read a cohort manifest of `subject, path, group` lines. Relative
/// paths are resolved against the manifest's own directory. Subject ids
/// must be unique.
pub fn read_cohort_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (line_no, line) in content_lines(path)? {
        let parts = fields(&line);
        if parts.len() != 3 {
            return Err(parse_error(
                path,
                line_no,
                format!(
                    "expected 'subject, path, group' (3 fields), got {}",
                    parts.len()
                ),
            ));
        }
        let subject = parts[0].to_string();
        if subject.is_empty() {
            return Err(parse_error(path, line_no, "empty subject id"));
        }
        if !seen.insert(subject.clone()) {
            return Err(Error::DuplicateSubject(subject));
        }
        let file = Path::new(parts[1]);
        let resolved = if file.is_absolute() {
            file.to_path_buf()
        } else {
            base.join(file)
        };
        entries.push(ManifestEntry {
            subject,
            path: resolved,
            group: parts[2].to_string(),
        });
    }
    Ok(entries)
}

/// A manifest's networks loaded and validated, in manifest order.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub subjects: Vec<String>,
    pub groups: Vec<String>,
    pub networks: Vec<AdjacencyMatrix>,
}

impl LoadedCohort {
    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }
}

/// Load every network a manifest references. All members must share one
/// node count; failures are tagged with the offending subject id.
pub fn load_cohort(entries: &[ManifestEntry]) -> Result<LoadedCohort> {
    let mut subjects = Vec::with_capacity(entries.len());
    let mut groups = Vec::with_capacity(entries.len());
    let mut networks: Vec<AdjacencyMatrix> = Vec::with_capacity(entries.len());
    for entry in entries {
        let load = || -> Result<AdjacencyMatrix> {
            let matrix = read_matrix(&entry.path)?;
            let network = AdjacencyMatrix::new(matrix)?;
            if let Some(first) = networks.first() {
                if network.n() != first.n() {
                    return Err(Error::DimensionMismatch {
                        context: "cohort node count".into(),
                        expected: format!("{0}x{0}", first.n()),
                        found: format!("{0}x{0}", network.n()),
                    });
                }
            }
            Ok(network)
        };
        let network = load().map_err(|e| e.for_subject(&entry.subject))?;
        subjects.push(entry.subject.clone());
        groups.push(entry.group.clone());
        networks.push(network);
    }
    Ok(LoadedCohort {
        subjects,
        groups,
        networks,
    })
}

/// Read a node-signal table of `subject, group, v1, ..., vn` lines.
/// All rows must carry the same number of values; subject ids must be
/// unique within the table.
pub fn read_signal_table(path: &Path) -> Result<Vec<NodeSignal>> {
    let mut seen = BTreeSet::new();
    let mut signals = Vec::new();
    let mut width = 0usize;
    for (line_no, line) in content_lines(path)? {
        let parts = fields(&line);
        if parts.len() < 3 {
            return Err(parse_error(
                path,
                line_no,
                "expected 'subject, group, v1, ...' with at least one value",
            ));
        }
        let subject = parts[0].to_string();
        if !seen.insert(subject.clone()) {
            return Err(Error::DuplicateSubject(subject));
        }
        let values: Vec<f64> = parts[2..]
            .iter()
            .map(|field| {
                field.parse().map_err(|_| {
                    parse_error(path, line_no, format!("not a number: '{field}'"))
                })
            })
            .collect::<Result<_>>()?;
        if width == 0 {
            width = values.len();
        } else if values.len() != width {
            return Err(parse_error(
                path,
                line_no,
                format!("row has {} values, expected {width}", values.len()),
            ));
        }
        let signal = NodeSignal::new(subject, parts[1], DVector::from_vec(values))?;
        signals.push(signal);
    }
    Ok(signals)
}
