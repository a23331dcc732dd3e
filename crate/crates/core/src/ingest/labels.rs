// SPDX-License-Identifier: MIT OR Apache-2.0

//! The labeled-anomaly table: `chan_id,spacecraft,anomaly_sequences,class,num_values`.
//!
//! List-valued fields may be quoted (`"[[1, 2], [5, 9]]"`) or bare
//! (`[[1,2]]`); commas inside brackets never split fields.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::{AnomalyInterval, AnomalyKind};

pub const LABEL_FILE: &str = "labeled_anomalies.csv";
pub const LABEL_HEADER: &str = "chan_id,spacecraft,anomaly_sequences,class,num_values";

/// One row of the label table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub channel: String,
    pub spacecraft: String,
    pub intervals: Vec<AnomalyInterval>,
    pub num_values: usize,
}

/// Parses the label file into channel id → intervals.
pub fn parse_labels(path: &Path) -> Result<BTreeMap<String, Vec<AnomalyInterval>>> {
    Ok(read_label_rows(path)?
        .into_iter()
        .map(|row| (row.channel, row.intervals))
        .collect())
}

pub fn read_label_rows(path: &Path) -> Result<Vec<LabelRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_text(&text).map_err(|(row, message)| Error::LabelParse {
        path: path.to_path_buf(),
        row,
        message,
    })
}

pub(crate) fn parse_label_text(text: &str) -> std::result::Result<Vec<LabelRow>, (usize, String)> {
    let mut rows: Vec<LabelRow> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("chan_id")) {
            continue;
        }
        let row = parse_row(line).map_err(|m| (row_no, m))?;
        if rows.iter().any(|r| r.channel == row.channel) {
            return Err((row_no, format!("duplicate channel {}", row.channel)));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_row(line: &str) -> std::result::Result<LabelRow, String> {
    let fields = split_fields(line)?;
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let channel = fields[0].to_string();
    if channel.is_empty() {
        return Err("empty channel id".into());
    }
    let spans = parse_interval_list(fields[2])?;
    if spans.is_empty() {
        return Err("anomaly sequence list is empty".into());
    }
    let classes = parse_class_list(fields[3])?;
    let num_values: usize = fields[4]
        .parse()
        .map_err(|_| format!("num_values is not a count: {:?}", fields[4]))?;

    // classes pair with sequences positionally; missing entries are unspecified
    let intervals = spans
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| AnomalyInterval {
            start,
            end,
            kind: classes.get(i).copied().unwrap_or(AnomalyKind::Unspecified),
        })
        .collect();
    Ok(LabelRow {
        channel,
        spacecraft: fields[1].to_string(),
        intervals,
        num_values,
    })
}

/// Splits on commas outside brackets and quotes, trimming whitespace and quotes.
fn split_fields(line: &str) -> std::result::Result<Vec<&str>, String> {
    let mut fields = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut start = 0;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => {
                depth -= 1;
                if depth < 0 {
                    return Err("unbalanced ']'".into());
                }
            }
            ',' if !quoted && depth == 0 => {
                fields.push(clean(&line[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if depth != 0 {
        return Err("unbalanced '['".into());
    }
    fields.push(clean(&line[start..]));
    Ok(fields)
}

fn clean(field: &str) -> &str {
    field.trim().trim_matches('"').trim()
}

fn parse_interval_list(text: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("malformed interval list {text:?}"))?
        .trim();
    let mut out = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let open = rest
            .find('[')
            .ok_or_else(|| format!("malformed interval list {text:?}"))?;
        if !rest[..open]
            .trim_matches(|c: char| c == ',' || c.is_whitespace())
            .is_empty()
        {
            return Err(format!("malformed interval list {text:?}"));
        }
        let close = rest[open..]
            .find(']')
            .ok_or_else(|| format!("malformed interval list {text:?}"))?
            + open;
        let pair: Vec<&str> = rest[open + 1..close].split(',').map(str::trim).collect();
        if pair.len() != 2 {
            return Err(format!("interval must have two bounds: [{}]", &rest[open + 1..close]));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| format!("interval bound is not a non-negative integer: {s:?}"))
        };
        let (start, end) = (parse(pair[0])?, parse(pair[1])?);
        if start > end {
            return Err(format!("interval start {start} exceeds end {end}"));
        }
        out.push((start, end));
        rest = rest[close + 1..].trim_start_matches(|c: char| c == ',' || c.is_whitespace());
    }
    Ok(out)
}

fn parse_class_list(text: &str) -> std::result::Result<Vec<AnomalyKind>, String> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("malformed class list {text:?}"))?;
    Ok(inner
        .split(',')
        .map(|s| s.trim().trim_matches(['\'', '"']))
        .filter(|s| !s.is_empty())
        .map(AnomalyKind::from_class)
        .collect())
}

/// Formats one row the way the benchmark table quotes list fields.
pub fn format_label_row(row: &LabelRow) -> String {
    let spans: Vec<String> = row
        .intervals
        .iter()
        .map(|iv| format!("[{}, {}]", iv.start, iv.end))
        .collect();
    let classes: Vec<&str> = row.intervals.iter().map(|iv| iv.kind.as_class()).collect();
    format!(
        "{},{},\"[{}]\",\"[{}]\",{}",
        row.channel,
        row.spacecraft,
        spans.join(", "),
        classes.join(", "),
        row.num_values
    )
}
