use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::frame::{runs_of, AttackInterval, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Column mapping for tag CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    #[serde(default = "default_timestamp")]
    pub timestamp: String,
    /// Normal/Attack column; absent in normal-operation files.
    #[serde(default)]
    pub label: Option<String>,
    /// Tag columns to keep, in order. `None` keeps every other column.
    #[serde(default)]
    pub tags: Option<Vec<String>>,
}

fn default_timestamp() -> String {
    "timestamp".to_string()
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            timestamp: default_timestamp(),
            label: Some("label".into()),
            tags: None,
        }
    }
}

const DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%d/%m/%Y %I:%M:%S %p",
    "%d/%m/%Y %H:%M:%S",
];

fn parse_timestamp(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    DATETIME_FORMATS.iter().find_map(|fmt| {
        NaiveDateTime::parse_from_str(raw, fmt).ok().map(|dt| {
            let utc = dt.and_utc();
            utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
        })
    })
}

fn parse_label(raw: &str) -> Option<bool> {
    // SWaT files spell the attack label both "Attack" and "A ttack".
    let norm: String = raw
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    match norm.as_str() {
        "normal" | "0" | "false" => Some(false),
        "attack" | "1" | "true" => Some(true),
        _ => None,
    }
}

/// Reads a tag CSV. Rows keep file order; a label column becomes per-row flags
/// and its contiguous attack runs become attack intervals.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<TimeSeriesFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let ts_col = find(&schema.timestamp)
        .ok_or_else(|| Error::Schema(format!("missing timestamp column '{}'", schema.timestamp)))?;
    let label_col = match &schema.label {
        Some(name) => find(name),
        None => None,
    };
    let tag_cols: Vec<(usize, String)> = match &schema.tags {
        Some(names) => names
            .iter()
            .map(|n| {
                find(n)
                    .map(|i| (i, n.clone()))
                    .ok_or_else(|| Error::Schema(format!("missing tag column '{n}'")))
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_col && Some(*i) != label_col)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if tag_cols.is_empty() {
        return Err(Error::Schema("no tag columns".into()));
    }

    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let ts = parse_timestamp(cell(ts_col)).ok_or_else(|| Error::Parse {
            row,
            message: format!("bad timestamp '{}'", cell(ts_col)),
        })?;
        timestamps.push(ts);
        for (i, name) in &tag_cols {
            let v: f64 = cell(*i).parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value '{}' in column '{name}'", cell(*i)),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("non-finite value in column '{name}'"),
                });
            }
            data.push(v);
        }
        if let Some(lc) = label_col {
            labels.push(parse_label(cell(lc)).ok_or_else(|| Error::Parse {
                row,
                message: format!("unrecognised label '{}'", cell(lc)),
            })?);
        }
    }
    if timestamps.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} has {} data rows, need at least 2",
            path.display(),
            timestamps.len()
        )));
    }
    let values = Array2::from_shape_vec((timestamps.len(), tag_cols.len()), data)
        .expect("row-major buffer matches shape");
    let (labels, intervals) = if label_col.is_some() {
        let intervals = runs_of(&labels)
            .into_iter()
            .map(|(start, end)| AttackInterval {
                start,
                end,
                targets: Vec::new(),
            })
            .collect();
        (Some(labels), intervals)
    } else {
        (None, Vec::new())
    };
    TimeSeriesFrame::with_labels(
        timestamps,
        values,
        tag_cols.into_iter().map(|(_, n)| n).collect(),
        labels,
        intervals,
    )
}

/// Writes a frame in the format [`load_csv`] reads with the default schema.
/// Integral timestamps are written without a fractional part; values use the
/// shortest representation that round-trips.
pub fn write_csv(frame: &TimeSeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let write = |out: &mut std::io::BufWriter<File>, s: &str| {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    let mut header = String::from("timestamp");
    for name in frame.tag_names() {
        header.push(',');
        header.push_str(name);
    }
    let labels = frame
        .labels()
        .map(<[bool]>::to_vec)
        .or_else(|| (!frame.attack_intervals().is_empty()).then(|| frame.anomaly_flags()));
    if labels.is_some() {
        header.push_str(",label");
    }
    header.push('\n');
    write(&mut out, &header)?;
    let mut line = String::new();
    for (t, row) in frame.values().rows().into_iter().enumerate() {
        line.clear();
        let ts = frame.timestamps()[t];
        if ts.fract() == 0.0 && ts.abs() < 1e15 {
            line.push_str(&format!("{}", ts as i64));
        } else {
            line.push_str(&format!("{ts}"));
        }
        for v in row {
            line.push_str(&format!(",{v}"));
        }
        if let Some(l) = &labels {
            line.push_str(if l[t] { ",Attack" } else { ",Normal" });
        }
        line.push('\n');
        write(&mut out, &line)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
