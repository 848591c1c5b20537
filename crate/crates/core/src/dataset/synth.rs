//! Plant-like synthetic series with recorded attack injections.
//!
//! Generator settings deserialize from the same tree-structured config files the
//! command-line tool reads, e.g.
//!
//! ```toml
//! length = 2000
//! train_length = 3000
//! noise_std = 0.05
//!
//! [[tags]]
//! name = "FIT101"
//! kind = "sine"
//! period = 120.0
//!
//! [[injections]]
//! start = 150
//! end = 250          # exclusive
//! tags = ["FIT101"]
//! effect = "offset"
//! magnitude = 2.0
//! ```

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::frame::{AttackInterval, TimeSeriesFrame};
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Sine {
        period: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Two-level actuator-like signal.
    Square {
        period: f64,
        #[serde(default = "half")]
        duty: f64,
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
    Constant {
        value: f64,
    },
    /// Mean-reverting random walk: `x[t+1] = (1 - reversion)·x[t] + N(0, step_std)`.
    RandomWalk {
        step_std: f64,
        #[serde(default)]
        reversion: f64,
    },
    /// Delayed, scaled copy of an earlier tag's clean signal.
    Lagged {
        source: String,
        lag: usize,
        #[serde(default = "one")]
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSignal {
    pub name: String,
    #[serde(flatten)]
    pub signal: SignalKind,
    /// Overrides the config-wide observation noise.
    #[serde(default)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Perturbation {
    /// Adds a constant.
    Offset { magnitude: f64 },
    /// Holds the value observed just before the interval.
    Freeze,
    /// Adds a triangular pulse peaking mid-interval.
    Spike { magnitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub tags: Vec<String>,
    #[serde(flatten)]
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Points in the (test) frame that carries the injections.
    pub length: usize,
    /// Normal-operation points generated before the test frame by
    /// [`synth_generate_split`].
    #[serde(default)]
    pub train_length: usize,
    #[serde(default = "one")]
    pub step: f64,
    #[serde(default)]
    pub noise_std: f64,
    pub tags: Vec<TagSignal>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

impl SynthConfig {
    /// Eight SWaT-flavoured tags (leading digit = subprocess) with six attacks
    /// in a 5000-point test segment after 20000 normal points.
    pub fn demo() -> Self {
        use Perturbation::*;
        use SignalKind::*;
        let tag = |name: &str, signal| TagSignal {
            name: name.into(),
            signal,
            noise_std: None,
        };
        let inj = |start, end, t: &str, perturbation| Injection {
            start,
            end,
            tags: vec![t.into()],
            perturbation,
        };
        Self {
            length: 5000,
            train_length: 20000,
            step: 1.0,
            noise_std: 0.05,
            tags: vec![
                tag(
                    "FIT101",
                    Sine {
                        period: 120.0,
                        amplitude: 1.0,
                        phase: 0.0,
                        offset: 2.0,
                    },
                ),
                tag(
                    "LIT101",
                    Sine {
                        period: 300.0,
                        amplitude: 2.0,
                        phase: 1.0,
                        offset: 5.0,
                    },
                ),
                tag(
                    "AIT201",
                    Lagged {
                        source: "FIT101".into(),
                        lag: 15,
                        gain: 0.8,
                    },
                ),
                tag(
                    "P201",
                    Sine {
                        period: 200.0,
                        amplitude: 0.5,
                        phase: 2.0,
                        offset: 1.0,
                    },
                ),
                tag(
                    "DPIT301",
                    Sine {
                        period: 75.0,
                        amplitude: 0.5,
                        phase: 0.3,
                        offset: 0.0,
                    },
                ),
                tag(
                    "MV301",
                    Sine {
                        period: 500.0,
                        amplitude: 0.5,
                        phase: 0.7,
                        offset: 1.5,
                    },
                ),
                tag(
                    "PIT401",
                    RandomWalk {
                        step_std: 0.005,
                        reversion: 0.002,
                    },
                ),
                tag(
                    "AIT501",
                    Sine {
                        period: 900.0,
                        amplitude: 0.3,
                        phase: 1.5,
                        offset: 7.0,
                    },
                ),
            ],
            injections: vec![
                inj(400, 520, "FIT101", Offset { magnitude: 2.0 }),
                inj(1150, 1260, "LIT101", Freeze),
                inj(1900, 2000, "DPIT301", Spike { magnitude: 3.0 }),
                inj(2650, 2750, "AIT201", Offset { magnitude: -1.5 }),
                inj(3400, 3550, "P201", Freeze),
                inj(4200, 4310, "AIT501", Offset { magnitude: 1.0 }),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Config("synthetic.length must be at least 2".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("synthetic.step must be positive".into()));
        }
        if self.tags.is_empty() {
            return Err(Error::Config("synthetic.tags is empty".into()));
        }
        if self.noise_std < 0.0
            || self
                .tags
                .iter()
                .any(|t| t.noise_std.is_some_and(|n| n < 0.0))
        {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        for (i, t) in self.tags.iter().enumerate() {
            if self.tags[..i].iter().any(|o| o.name == t.name) {
                return Err(Error::Config(format!("duplicate tag name '{}'", t.name)));
            }
            match &t.signal {
                SignalKind::Sine { period, .. } | SignalKind::Square { period, .. }
                    if !(*period > 0.0) =>
                {
                    return Err(Error::Config(format!(
                        "tag '{}': period must be positive",
                        t.name
                    )));
                }
                SignalKind::Lagged { source, .. }
                    if !self.tags[..i].iter().any(|o| &o.name == source) =>
                {
                    return Err(Error::Config(format!(
                        "tag '{}': lag source '{source}' must be declared earlier",
                        t.name
                    )));
                }
                _ => {}
            }
        }
        let mut sorted: Vec<&Injection> = self.injections.iter().collect();
        sorted.sort_by_key(|inj| inj.start);
        for (n, inj) in sorted.iter().enumerate() {
            if inj.start >= inj.end || inj.end > self.length {
                return Err(Error::Config(format!(
                    "injection [{}, {}) outside [0, {})",
                    inj.start, inj.end, self.length
                )));
            }
            if inj.tags.is_empty() {
                return Err(Error::Config(format!(
                    "injection at {} has no target tags",
                    inj.start
                )));
            }
            if let Some(bad) = inj
                .tags
                .iter()
                .find(|n| !self.tags.iter().any(|t| &t.name == *n))
            {
                return Err(Error::Config(format!(
                    "injection targets unknown tag '{bad}'"
                )));
            }
            if n > 0 && sorted[n - 1].end > inj.start {
                return Err(Error::Config(format!(
                    "injections [{}, {}) and [{}, {}) overlap",
                    sorted[n - 1].start,
                    sorted[n - 1].end,
                    inj.start,
                    inj.end
                )));
            }
        }
        Ok(())
    }

    fn tag_index(&self, name: &str) -> usize {
        self.tags
            .iter()
            .position(|t| t.name == name)
            .expect("validated tag name")
    }
}

fn clean_signals(config: &SynthConfig, total: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = config.tags.len();
    let mut clean = Array2::<f64>::zeros((total, m));
    for (i, tag) in config.tags.iter().enumerate() {
        match &tag.signal {
            SignalKind::Sine {
                period,
                amplitude,
                phase,
                offset,
            } => {
                for t in 0..total {
                    clean[[t, i]] = offset + amplitude * (TAU * t as f64 / period + phase).sin();
                }
            }
            SignalKind::Square {
                period,
                duty,
                low,
                high,
            } => {
                for t in 0..total {
                    let pos = (t as f64 / period).fract();
                    clean[[t, i]] = if pos < *duty { *high } else { *low };
                }
            }
            SignalKind::Constant { value } => clean.column_mut(i).fill(*value),
            SignalKind::RandomWalk {
                step_std,
                reversion,
            } => {
                let step = Normal::new(0.0, *step_std).expect("finite std");
                let mut x = 0.0;
                for t in 0..total {
                    clean[[t, i]] = x;
                    x = (1.0 - reversion) * x + step.sample(rng);
                }
            }
            SignalKind::Lagged { source, lag, gain } => {
                let j = config.tag_index(source);
                for t in 0..total {
                    clean[[t, i]] = gain * clean[[t.saturating_sub(*lag), j]];
                }
            }
        }
    }
    clean
}

fn add_noise(config: &SynthConfig, values: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    for (i, tag) in config.tags.iter().enumerate() {
        let sd = tag.noise_std.unwrap_or(config.noise_std);
        if sd > 0.0 {
            let noise = Normal::new(0.0, sd).expect("finite std");
            values
                .column_mut(i)
                .iter_mut()
                .for_each(|v| *v += noise.sample(rng));
        }
    }
}

fn inject(config: &SynthConfig, values: &mut Array2<f64>, base: usize) -> Vec<AttackInterval> {
    let mut intervals: Vec<AttackInterval> = config
        .injections
        .iter()
        .map(|inj| {
            let targets: Vec<usize> = inj.tags.iter().map(|n| config.tag_index(n)).collect();
            let (start, end) = (base + inj.start, base + inj.end);
            let len = (end - start) as f64;
            for &i in &targets {
                let held = values[[start.saturating_sub(1), i]];
                for t in start..end {
                    let v = &mut values[[t, i]];
                    match inj.perturbation {
                        Perturbation::Offset { magnitude } => *v += magnitude,
                        Perturbation::Freeze => *v = held,
                        Perturbation::Spike { magnitude } => {
                            let u = ((t - start) as f64 + 0.5) / len;
                            *v += magnitude * (1.0 - (2.0 * u - 1.0).abs());
                        }
                    }
                }
            }
            AttackInterval {
                start: inj.start,
                end: inj.end - 1,
                targets,
            }
        })
        .collect();
    intervals.sort_by_key(|iv| iv.start);
    intervals
}

fn build(
    config: &SynthConfig,
    seed: u64,
    train_len: usize,
) -> Result<(Array2<f64>, Vec<AttackInterval>)> {
    config.validate()?;
    let total = train_len + config.length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = clean_signals(config, total, &mut rng);
    add_noise(config, &mut values, &mut rng);
    let intervals = inject(config, &mut values, train_len);
    Ok((values, intervals))
}

fn frame_from(
    config: &SynthConfig,
    values: Array2<f64>,
    t0: usize,
    intervals: Vec<AttackInterval>,
) -> Result<TimeSeriesFrame> {
    let n = values.nrows();
    let timestamps = (0..n).map(|t| (t0 + t) as f64 * config.step).collect();
    let mut labels = vec![false; n];
    for iv in &intervals {
        labels[iv.start..=iv.end].iter_mut().for_each(|l| *l = true);
    }
    TimeSeriesFrame::with_labels(
        timestamps,
        values,
        config.tags.iter().map(|t| t.name.clone()).collect(),
        Some(labels),
        intervals,
    )
}

/// Generates `config.length` points with all injections applied. Deterministic
/// in `seed`.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<TimeSeriesFrame> {
    let (values, intervals) = build(config, seed, 0)?;
    frame_from(config, values, 0, intervals)
}

/// Generates one continuous series and splits it into a clean training frame of
/// `train_length` points followed by the injected test frame.
pub fn synth_generate_split(
    config: &SynthConfig,
    seed: u64,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    if config.train_length < 2 {
        return Err(Error::Config(
            "synthetic.train_length must be at least 2".into(),
        ));
    }
    let (values, intervals) = build(config, seed, config.train_length)?;
    let n = config.train_length;
    let train = values.slice(ndarray::s![..n, ..]).to_owned();
    let test = values.slice(ndarray::s![n.., ..]).to_owned();
    Ok((
        frame_from(config, train, 0, Vec::new())?,
        frame_from(config, test, n, intervals)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(injections: Vec<Injection>) -> SynthConfig {
        SynthConfig {
            length: 400,
            train_length: 100,
            step: 1.0,
            noise_std: 0.1,
            tags: vec![
                TagSignal {
                    name: "A1".into(),
                    signal: SignalKind::Sine {
                        period: 50.0,
                        amplitude: 1.0,
                        phase: 0.0,
                        offset: 0.0,
                    },
                    noise_std: None,
                },
                TagSignal {
                    name: "B2".into(),
                    signal: SignalKind::RandomWalk {
                        step_std: 0.1,
                        reversion: 0.05,
                    },
                    noise_std: Some(0.0),
                },
            ],
            injections,
        }
    }

    #[test]
    fn no_injections_all_normal() {
        let f = synth_generate(&small(vec![]), 1).unwrap();
        assert!(f.labels().unwrap().iter().all(|l| !l));
        assert!(f.attack_intervals().is_empty());
    }

    #[test]
    fn offset_bookkeeping() {
        let inj = Injection {
            start: 100,
            end: 200,
            tags: vec!["A1".into()],
            perturbation: Perturbation::Offset { magnitude: 5.0 },
        };
        let f = synth_generate(&small(vec![inj.clone()]), 3).unwrap();
        assert_eq!(
            f.attack_intervals(),
            &[AttackInterval {
                start: 100,
                end: 199,
                targets: vec![0]
            }]
        );
        let clean = synth_generate(&small(vec![]), 3).unwrap();
        assert!((f.values()[[150, 0]] - clean.values()[[150, 0]] - 5.0).abs() < 1e-12);
        assert_eq!(f.values()[[200, 0]], clean.values()[[200, 0]]);
    }

    #[test]
    fn deterministic() {
        let a = synth_generate(&SynthConfig::demo(), 42).unwrap();
        let b = synth_generate(&SynthConfig::demo(), 42).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthConfig::demo(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overlapping_injections_rejected() {
        let mk = |s, e| Injection {
            start: s,
            end: e,
            tags: vec!["A1".into()],
            perturbation: Perturbation::Freeze,
        };
        let err = synth_generate(&small(vec![mk(10, 50), mk(40, 60)]), 0);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(synth_generate(&small(vec![mk(10, 50), mk(50, 60)]), 0).is_ok());
    }

    #[test]
    fn freeze_holds_value() {
        let inj = Injection {
            start: 20,
            end: 30,
            tags: vec!["A1".into()],
            perturbation: Perturbation::Freeze,
        };
        let f = synth_generate(&small(vec![inj]), 9).unwrap();
        let held = f.values()[[19, 0]];
        assert!((20..30).all(|t| f.values()[[t, 0]] == held));
    }

    #[test]
    fn split_is_continuous() {
        let cfg = SynthConfig::demo();
        let (train, test) = synth_generate_split(&cfg, 5).unwrap();
        assert_eq!(train.len(), 20_000);
        assert_eq!(test.len(), 5000);
        assert_eq!(test.timestamps()[0], 20_000.0);
        assert_eq!(test.attack_intervals().len(), 6);
        assert!(train.labels().unwrap().iter().all(|l| !l));
    }

    #[test]
    fn config_parses_from_toml_shape() {
        let json = r#"{"length": 10, "tags": [{"name": "x", "kind": "constant", "value": 1.0}],
            "injections": [{"start": 1, "end": 3, "tags": ["x"], "effect": "spike", "magnitude": 2.0}]}"#;
        let cfg: SynthConfig = serde_json::from_str(json).unwrap();
        assert_eq!(
            cfg.injections[0].perturbation,
            Perturbation::Spike { magnitude: 2.0 }
        );
        assert_eq!(cfg.step, 1.0);
    }
}
