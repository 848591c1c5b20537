use serde::{Deserialize, Serialize};

/// Maximal run of timepoints with `M_t >= T` (inclusive bounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub start: usize,
    pub end: usize,
    pub peak_value: f64,
    pub peak_time: usize,
}

impl AnomalyEvent {
    pub fn duration(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start <= end && start <= self.end
    }
}

pub fn detect(series: &[f64], threshold: f64) -> Vec<AnomalyEvent> {
    let mut events = Vec::new();
    let mut current: Option<AnomalyEvent> = None;
    for (t, &v) in series.iter().enumerate() {
        if v >= threshold {
            match &mut current {
                Some(ev) => {
                    ev.end = t;
                    if v > ev.peak_value {
                        ev.peak_value = v;
                        ev.peak_time = t;
                    }
                }
                None => {
                    current = Some(AnomalyEvent {
                        start: t,
                        end: t,
                        peak_value: v,
                        peak_time: t,
                    })
                }
            }
        } else if let Some(ev) = current.take() {
            events.push(ev);
        }
    }
    events.extend(current);
    events
}

/// Per-timepoint flags covered by `events`.
pub fn event_flags(events: &[AnomalyEvent], len: usize) -> Vec<bool> {
    let mut flags = vec![false; len];
    for ev in events {
        flags[ev.start..=ev.end.min(len - 1)]
            .iter_mut()
            .for_each(|f| *f = true);
    }
    flags
}
