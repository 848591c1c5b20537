use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use tagwatch::dataset::TimeSeriesFrame;
use tagwatch::detector::subprocess_group;
use tagwatch::ga::GenerationStats;
use tagwatch::pipeline::{Analysis, AttackRow, Calibration};

use crate::CliError;

pub const EVENTS_FILE: &str = "events.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const SVG_FILE: &str = "series.svg";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(CliError::csv)
}

/// One row per event with its top suspects (score in scaled units, residual
/// in the tag's own units).
pub fn write_events(
    path: &Path,
    frame: &TimeSeriesFrame,
    analysis: &Analysis,
    calibration: &Calibration,
    top_k: usize,
) -> Result<(), CliError> {
    let k = top_k.min(frame.n_tags());
    let mut header: Vec<String> = [
        "event",
        "start",
        "end",
        "duration",
        "peak",
        "peak_time",
        "start_time",
        "end_time",
    ]
    .map(String::from)
    .to_vec();
    for r in 1..=k {
        header.extend([
            format!("tag_{r}"),
            format!("group_{r}"),
            format!("score_{r}"),
            format!("residual_{r}"),
        ]);
    }
    let mut w = writer(path)?;
    w.write_record(&header).map_err(CliError::csv)?;
    let ts = frame.timestamps();
    for (i, (ev, diag)) in analysis.events.iter().zip(&analysis.diagnoses).enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            ev.start.to_string(),
            ev.end.to_string(),
            ev.duration().to_string(),
            ev.peak_value.to_string(),
            ev.peak_time.to_string(),
            ts[ev.start].to_string(),
            ts[ev.end].to_string(),
        ];
        for s in diag.suspects.iter().take(k) {
            let name = &frame.tag_names()[s.tag];
            row.extend([
                name.clone(),
                subprocess_group(name).map(String::from).unwrap_or_default(),
                s.score.to_string(),
                (s.residual * calibration.scaler.std[s.tag]).to_string(),
            ]);
        }
        row.resize(header.len(), String::new());
        w.write_record(&row).map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_series(
    path: &Path,
    frame: &TimeSeriesFrame,
    analysis: &Analysis,
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "timestamp", "m", "threshold", "flag"])
        .map_err(CliError::csv)?;
    for (t, (&m, &flag)) in analysis
        .series
        .values
        .iter()
        .zip(&analysis.flags)
        .enumerate()
    {
        w.write_record([
            t.to_string(),
            frame.timestamps()[t].to_string(),
            m.to_string(),
            analysis.threshold.to_string(),
            u8::from(flag).to_string(),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Events as read back from `events.csv`.
pub struct EventRecord {
    pub start: usize,
    pub end: usize,
    pub tags: Vec<String>,
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv)?;
    let headers = r.headers().map_err(CliError::csv)?.clone();
    let tag_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("tag_"))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(CliError::csv)?;
        let num = |i: usize| -> Result<usize, CliError> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
                CliError::Runtime(format!("{}: malformed event row", path.display()))
            })
        };
        out.push(EventRecord {
            start: num(1)?,
            end: num(2)?,
            tags: tag_cols
                .iter()
                .filter_map(|&i| rec.get(i))
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        });
    }
    Ok(out)
}

pub fn read_flags(path: &Path) -> Result<Vec<bool>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(CliError::csv)?;
            match rec.get(4) {
                Some("1") => Ok(true),
                Some("0") => Ok(false),
                _ => Err(CliError::Runtime(format!(
                    "{}: malformed series row",
                    path.display()
                ))),
            }
        })
        .collect()
}

pub fn write_losses(path: &Path, losses: &[f64]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "loss"]).map_err(CliError::csv)?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])
            .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_history(path: &Path, history: &[GenerationStats]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["generation", "best_fitness", "mean_fitness", "best_genome"])
        .map_err(CliError::csv)?;
    for h in history {
        w.write_record([
            h.generation.to_string(),
            h.best_fitness.to_string(),
            h.mean_fitness.to_string(),
            h.best_genome_id.clone(),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_attack_table(path: &Path, rows: &[AttackRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "attack",
        "start",
        "end",
        "targets",
        "detected_tags",
        "delay_s",
        "pointwise_recall",
    ])
    .map_err(CliError::csv)?;
    for r in rows {
        w.write_record([
            r.attack.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            r.targets.join(";"),
            r.detected_tags.join(";"),
            r.delay_seconds.map(|d| d.to_string()).unwrap_or_default(),
            format!("{:.6}", r.pointwise_recall),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Error series and threshold as a line chart (log scale when positive).
pub fn render_svg(values: &[f64], threshold: f64, flags: &[bool]) -> String {
    let (w, h, pad) = (1000.0, 300.0, 30.0);
    let floor = values
        .iter()
        .chain([&threshold])
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let log = floor.is_finite();
    let tf = |v: f64| if log { v.max(floor).log10() } else { v };
    let lo = values.iter().map(|&v| tf(v)).fold(tf(threshold), f64::min);
    let hi = values.iter().map(|&v| tf(v)).fold(tf(threshold), f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) as f64 - 1.0;
    let x = |t: usize| pad + (w - 2.0 * pad) * t as f64 / n;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (tf(v) - lo) / span;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (a, b) in runs(flags) {
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{pad}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#fdd\"/>",
            x(a),
            (x(b) - x(a)).max(1.0),
            h - 2.0 * pad
        );
    }
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(t, &v)| format!("{:.1},{:.1}", x(t), y(v)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#246\" stroke-width=\"1\" points=\"{}\"/>",
        pts.join(" ")
    );
    let ty = y(threshold);
    let _ = writeln!(
        s,
        "<line x1=\"{pad}\" y1=\"{ty:.1}\" x2=\"{:.1}\" y2=\"{ty:.1}\" stroke=\"#c22\" stroke-dasharray=\"4 3\"/>",
        w - pad
    );
    let _ = writeln!(
        s,
        "<text x=\"{pad}\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">M_t{} and threshold {threshold:.4e}</text>",
        if log { " (log10)" } else { "" }
    );
    s.push_str("</svg>\n");
    s
}

fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &f) in flags.iter().chain([&false]).enumerate() {
        match (f, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push((s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed() {
        let s = render_svg(&[0.0, 1.0, 5.0, 0.5], 2.0, &[false, false, true, false]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("polyline"));
        assert_eq!(s.matches("fill=\"#fdd\"").count(), 1);
    }

    #[test]
    fn flag_runs() {
        assert_eq!(runs(&[true, true, false, true]), vec![(0, 1), (3, 3)]);
    }
}
