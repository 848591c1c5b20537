use std::path::Path;

use tagwatch::dataset::{load_csv, resample_uniform, TimeSeriesFrame};
use tagwatch::pipeline::AttackSpan;

use crate::config::{require_file, RunConfig};
use crate::CliError;

fn prepare(cfg: &RunConfig, frame: TimeSeriesFrame) -> Result<TimeSeriesFrame, CliError> {
    Ok(match cfg.dataset.resample_step {
        Some(step) => resample_uniform(&frame, step)?,
        None => frame,
    })
}

pub fn check_train(cfg: &RunConfig) -> Result<(), CliError> {
    require_file("dataset.train", &cfg.train_path())
}

pub fn check_test(cfg: &RunConfig) -> Result<(), CliError> {
    require_file("dataset.test", &cfg.test_path())
}

pub fn load_train(cfg: &RunConfig) -> Result<TimeSeriesFrame, CliError> {
    let frame = load_csv(cfg.train_path(), &cfg.dataset.schema)?;
    let frame = if cfg.dataset.head_trim > 0 {
        frame.trim_head(cfg.dataset.head_trim)?
    } else {
        frame
    };
    prepare(cfg, frame)
}

pub fn load_test(cfg: &RunConfig) -> Result<TimeSeriesFrame, CliError> {
    prepare(cfg, load_csv(cfg.test_path(), &cfg.dataset.schema)?)
}

pub fn write_attacks(frame: &TimeSeriesFrame, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record(["attack", "start", "end", "targets"])
        .map_err(CliError::csv)?;
    for (i, a) in frame.attack_intervals().iter().enumerate() {
        let targets: Vec<&str> = a
            .targets
            .iter()
            .map(|&t| frame.tag_names()[t].as_str())
            .collect();
        w.write_record([
            (i + 1).to_string(),
            a.start.to_string(),
            a.end.to_string(),
            targets.join(";"),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_attacks(path: &Path) -> Result<Vec<AttackSpan>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(CliError::csv)?;
        let num = |i: usize| -> Result<usize, CliError> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
                CliError::Runtime(format!("{}: bad attack row {rec:?}", path.display()))
            })
        };
        let targets = rec.get(3).unwrap_or("");
        out.push(AttackSpan {
            start: num(1)?,
            end: num(2)?,
            targets: targets
                .split(';')
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
        });
    }
    Ok(out)
}
