//! Corpus loading and row-sample previews.
//!
//! A corpus is a UTF-8 JSON-lines file: one table per line, with the fields
//! of [`RawDatasetRecord`]. Only pre-sampled rows travel through the system.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Maximum number of sampled values kept per column.
pub const MAX_SAMPLED_VALUES: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample {
    pub name: String,
    #[serde(default, deserialize_with = "textual_cells")]
    pub sampled_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDatasetRecord {
    pub id: String,
    pub title: String,
    pub filename: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub size_bytes: u64,
    pub num_rows: u64,
    pub num_cols: u64,
    #[serde(default)]
    pub usability_score: Option<f64>,
    #[serde(default)]
    pub downloads: Option<u64>,
    #[serde(default)]
    pub columns: Vec<ColumnSample>,
}

/// Accepts strings, numbers and booleans as cell text; nulls are dropped.
/// Binary encodings carry plain strings.
fn textual_cells<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<String>, D::Error> {
    if !de.is_human_readable() {
        return Vec::<String>::deserialize(de);
    }
    let raw: Vec<serde_json::Value> = Vec::deserialize(de)?;
    Ok(raw
        .into_iter()
        .filter_map(|v| match v {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(s),
            other => Some(other.to_string()),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub records: Vec<RawDatasetRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl RawDatasetRecord {
    /// Checks the record-level invariants. `columns_present` is false when the
    /// source omitted the `columns` field entirely.
    pub fn validate(&self, columns_present: bool) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.id.chars().any(char::is_control) {
            return Err(format!("id {:?} contains control characters", self.id));
        }
        if columns_present && self.columns.len() as u64 != self.num_cols {
            return Err(format!(
                "num_cols is {} but {} columns were sampled",
                self.num_cols,
                self.columns.len()
            ));
        }
        if let Some(score) = self.usability_score {
            if !(0.0..=1.0).contains(&score) {
                return Err(format!("usability_score {score} outside [0, 1]"));
            }
        }
        for col in &self.columns {
            if col.name.trim().is_empty() {
                return Err("column with empty name".into());
            }
            if col.sampled_values.len() > MAX_SAMPLED_VALUES {
                return Err(format!(
                    "column {:?} holds {} sampled values (max {MAX_SAMPLED_VALUES})",
                    col.name,
                    col.sampled_values.len()
                ));
            }
        }
        Ok(())
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// Parses corpus text. Malformed or invalid lines and duplicate ids are
/// skipped, each with a diagnostic naming the 1-based line number.
pub fn parse_corpus(text: &str) -> LoadedCorpus {
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                out.diagnostics.push(Diagnostic { line: line_no, message: format!("malformed JSON: {e}") });
                continue;
            }
        };
        let columns_present = value.get("columns").is_some();
        let record: RawDatasetRecord = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                out.diagnostics.push(Diagnostic { line: line_no, message: format!("invalid record: {e}") });
                continue;
            }
        };
        if let Err(msg) = record.validate(columns_present) {
            out.diagnostics.push(Diagnostic { line: line_no, message: format!("record {:?}: {msg}", record.id) });
            continue;
        }
        if !seen.insert(record.id.clone()) {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("duplicate id {:?}", record.id),
            });
            continue;
        }
        out.records.push(record);
    }
    out
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_corpus(&text))
}

/// Serializes records back to JSON-lines.
pub fn write_corpus(records: &[RawDatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviewTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub rendered: String,
}

fn clean_cell(s: &str) -> String {
    s.replace(['\r', '\n'], " ")
}

/// Builds a rectangular preview from a record's column samples. Short
/// columns are padded with empty cells.
pub fn make_preview(record: &RawDatasetRecord, max_rows: usize) -> PreviewTable {
    let header: Vec<String> = record.columns.iter().map(|c| clean_cell(&c.name)).collect();
    if header.is_empty() {
        return PreviewTable { header, rows: Vec::new(), rendered: String::new() };
    }
    let available = record.columns.iter().map(|c| c.sampled_values.len()).max().unwrap_or(0);
    let rows: Vec<Vec<String>> = (0..available.min(max_rows))
        .map(|i| {
            record
                .columns
                .iter()
                .map(|c| c.sampled_values.get(i).map(|v| clean_cell(v)).unwrap_or_default())
                .collect()
        })
        .collect();
    let rendered = render_markdown(&header, &rows);
    PreviewTable { header, rows, rendered }
}

fn escape_cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

fn render_row(cells: &[String]) -> String {
    let mut line = String::from("|");
    for c in cells {
        line.push(' ');
        line.push_str(&escape_cell(c));
        line.push_str(" |");
    }
    line
}

pub fn render_markdown(header: &[String], rows: &[Vec<String>]) -> String {
    if header.is_empty() {
        return String::new();
    }
    let mut lines = vec![render_row(header)];
    lines.push(format!("|{}", " --- |".repeat(header.len())));
    lines.extend(rows.iter().map(|r| render_row(r)));
    lines.join("\n")
}

fn split_row(line: &str) -> Vec<String> {
    let inner = line.strip_prefix('|').unwrap_or(line);
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => {
                if let Some(next) = chars.next() {
                    cur.push(next);
                }
            }
            '|' => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    cells
        .into_iter()
        .map(|c| {
            let c = c.strip_prefix(' ').unwrap_or(&c);
            c.strip_suffix(' ').unwrap_or(c).to_string()
        })
        .collect()
}

/// Inverse of [`render_markdown`].
pub fn parse_markdown(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let Some(first) = lines.next() else {
        return (Vec::new(), Vec::new());
    };
    let header = split_row(first);
    let rows = lines.skip(1).map(split_row).collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(cols: &[(&str, &[&str])]) -> RawDatasetRecord {
        RawDatasetRecord {
            id: "r1".into(),
            title: "Test".into(),
            filename: "test.csv".into(),
            description: String::new(),
            tags: vec![],
            size_bytes: 10,
            num_rows: 5,
            num_cols: cols.len() as u64,
            usability_score: None,
            downloads: None,
            columns: cols
                .iter()
                .map(|(n, vals)| ColumnSample {
                    name: n.to_string(),
                    sampled_values: vals.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_corpus_is_empty() {
        let loaded = parse_corpus("");
        assert!(loaded.records.is_empty());
        assert!(loaded.diagnostics.is_empty());
    }

    #[test]
    fn column_count_mismatch_is_skipped_with_line_number() {
        let good = serde_json::to_string(&record(&[("a", &["1"])])).unwrap();
        let bad = r#"{"id":"x","title":"t","filename":"f","size_bytes":1,"num_rows":1,"num_cols":3,"columns":[{"name":"a","sampled_values":[]},{"name":"b","sampled_values":[]}]}"#;
        let loaded = parse_corpus(&format!("{good}\n{bad}\n"));
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.diagnostics.len(), 1);
        assert_eq!(loaded.diagnostics[0].line, 2);
    }

    #[test]
    fn malformed_and_duplicate_lines_are_skipped() {
        let good = serde_json::to_string(&record(&[("a", &["1"])])).unwrap();
        let loaded = parse_corpus(&format!("{good}\n{{not json\n{good}\n"));
        assert_eq!(loaded.records.len(), 1);
        let lines: Vec<usize> = loaded.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 3]);
        assert!(loaded.diagnostics[1].message.contains("duplicate"));
    }

    #[test]
    fn too_many_samples_rejected() {
        let vals: Vec<&str> = vec!["v"; 11];
        let r = record(&[("a", &vals)]);
        assert!(r.validate(true).is_err());
    }

    #[test]
    fn non_string_cells_are_stringified_and_nulls_dropped() {
        let line = r#"{"id":"x","title":"t","filename":"f","size_bytes":1,"num_rows":1,"num_cols":1,"columns":[{"name":"a","sampled_values":[1, null, 2.5, true, "s"]}]}"#;
        let loaded = parse_corpus(line);
        assert_eq!(loaded.records[0].columns[0].sampled_values, vec!["1", "2.5", "true", "s"]);
    }

    #[test]
    fn unreadable_path_is_fatal() {
        assert!(load_corpus("/definitely/not/here.jsonl").is_err());
    }

    #[test]
    fn preview_projection() {
        let p = make_preview(&record(&[("a", &["1", "2", "3"]), ("b", &["x", "y", "z"])]), 10);
        assert_eq!(p.header, vec!["a", "b"]);
        assert_eq!(p.rows.len(), 3);
        assert_eq!(p.rows[1], vec!["2", "y"]);
    }

    #[test]
    fn preview_pads_short_columns() {
        let p = make_preview(&record(&[("a", &["1", "2", "3", "4", "5"]), ("b", &["x", "y", "z"])]), 10);
        assert_eq!(p.rows.len(), 5);
        assert_eq!(p.rows[4], vec!["5", ""]);
    }

    #[test]
    fn preview_truncates() {
        let p = make_preview(&record(&[("a", &["1", "2", "3"])]), 1);
        assert_eq!(p.rows.len(), 1);
        let p = make_preview(&record(&[("a", &["1", "2", "3"])]), 0);
        assert!(p.rows.is_empty());
    }

    #[test]
    fn preview_of_zero_columns() {
        let p = make_preview(&record(&[]), 10);
        assert!(p.header.is_empty());
        assert!(p.rows.is_empty());
    }

    #[test]
    fn markdown_round_trips_awkward_cells() {
        let p = make_preview(&record(&[("a|b", &["x\\y", " lead", "pipe|", ""]), ("c", &["multi\nline"])]), 10);
        let (h, rows) = parse_markdown(&p.rendered);
        assert_eq!(h, p.header);
        assert_eq!(rows, p.rows);
    }
}
