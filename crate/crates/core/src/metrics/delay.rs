use serde::{Deserialize, Serialize};

use super::truth::{DetectionSet, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowDelay {
    pub window: usize,
    /// `None` when the window was missed.
    pub delay_steps: Option<usize>,
    pub delay_seconds: Option<f64>,
    /// Delay divided by window length.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub windows: Vec<WindowDelay>,
    pub detected: usize,
    pub mean_delay_seconds: Option<f64>,
    pub mean_ratio: Option<f64>,
}

impl DelaySummary {
    pub fn no_detections(&self) -> bool {
        self.detected == 0
    }
}

pub fn detection_delay(truth: &GroundTruth, detections: &DetectionSet) -> DelaySummary {
    let windows: Vec<WindowDelay> = truth
        .windows()
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| {
            let delay = detections.first_in(s, e).map(|t| t - s);
            WindowDelay {
                window: i,
                delay_steps: delay,
                delay_seconds: delay.map(|d| d as f64 * truth.step_seconds()),
                ratio: delay.map(|d| d as f64 / (e - s + 1) as f64),
            }
        })
        .collect();
    let secs: Vec<f64> = windows.iter().filter_map(|w| w.delay_seconds).collect();
    let ratios: Vec<f64> = windows.iter().filter_map(|w| w.ratio).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| crate::stats::mean(v));
    DelaySummary {
        detected: secs.len(),
        mean_delay_seconds: mean(&secs),
        mean_ratio: mean(&ratios),
        windows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_cases() {
        let g = GroundTruth::new(300, vec![(100, 200), (250, 259)], 1.0).unwrap();
        let d = detection_delay(&g, &DetectionSet::new(vec![142, 150, 250], 300).unwrap());
        assert_eq!(d.windows[0].delay_steps, Some(42));
        assert_eq!(d.windows[1].delay_seconds, Some(0.0));
        assert_eq!(d.mean_delay_seconds, Some(21.0));
        assert!((d.windows[0].ratio.unwrap() - 42.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn all_missed() {
        let g = GroundTruth::new(300, vec![(100, 200)], 2.0).unwrap();
        let d = detection_delay(&g, &DetectionSet::new(vec![10], 300).unwrap());
        assert!(d.no_detections());
        assert_eq!(d.mean_ratio, None);
        assert_eq!(d.windows[0].delay_steps, None);
    }

    #[test]
    fn seconds_follow_step() {
        let g = GroundTruth::new(300, vec![(100, 200)], 2.0).unwrap();
        let d = detection_delay(&g, &DetectionSet::new(vec![105], 300).unwrap());
        assert_eq!(d.mean_delay_seconds, Some(10.0));
    }
}
