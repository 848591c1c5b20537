use serde::{Deserialize, Serialize};

use super::events::AnomalyEvent;
use super::residual::ResidualMatrix;
use super::series::pow;
use super::weights::TagWeights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspectTag {
    pub tag: usize,
    /// `max_t w_i · E_ti^p` over the event.
    pub score: f64,
    /// Residual (scaled units) at the timepoint that produced `score`.
    pub residual: f64,
    pub time: usize,
}

/// Ranked suspects for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub suspects: Vec<SuspectTag>,
}

/// Subprocess group of a tag: the first digit in its name (e.g. `LIT301` → `3`).
pub fn subprocess_group(tag_name: &str) -> Option<char> {
    tag_name.chars().find(char::is_ascii_digit)
}

/// Ranks tags per event by their largest weighted p-powered residual inside
/// the event, the same per-tag contribution that drives detection. Ties go to
/// the lower tag index. Returns the top `top_k` per event.
pub fn diagnose(
    e: &ResidualMatrix,
    weights: &TagWeights,
    power: f64,
    events: &[AnomalyEvent],
    top_k: usize,
) -> Result<Vec<Diagnosis>> {
    if top_k == 0 {
        return Err(Error::Parameter("top_k must be at least 1".into()));
    }
    if weights.len() != e.n_tags() {
        return Err(Error::Data(format!(
            "{} weights for {} tags",
            weights.len(),
            e.n_tags()
        )));
    }
    let values = e.values();
    events
        .iter()
        .map(|ev| {
            if ev.end >= e.len() {
                return Err(Error::Parameter(format!(
                    "event [{}, {}] outside {} residual rows",
                    ev.start,
                    ev.end,
                    e.len()
                )));
            }
            let mut suspects: Vec<SuspectTag> = (0..e.n_tags())
                .map(|i| {
                    let mut best = SuspectTag {
                        tag: i,
                        score: f64::NEG_INFINITY,
                        residual: 0.0,
                        time: ev.start,
                    };
                    for t in ev.start..=ev.end {
                        let r = values[[t, i]];
                        let s = weights.w[i] * pow(r, power);
                        if s > best.score {
                            best = SuspectTag {
                                tag: i,
                                score: s,
                                residual: r,
                                time: t,
                            };
                        }
                    }
                    best
                })
                .collect();
            suspects.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.tag.cmp(&b.tag)));
            suspects.truncate(top_k);
            Ok(Diagnosis { suspects })
        })
        .collect()
}
