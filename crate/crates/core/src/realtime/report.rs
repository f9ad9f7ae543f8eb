use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameResult;
use crate::error::{Error, Result};

/// Average latency per label and overall, with the session frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub per_class_avg_ms: BTreeMap<String, f64>,
    pub per_class_frames: BTreeMap<String, usize>,
    pub overall_avg_ms: f64,
    pub frames: usize,
    pub elapsed_s: f64,
    pub fps: f64,
}

impl LatencyReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Groups latencies by label; `fps` is frames per `elapsed_s` seconds.
pub fn summarize_latency(results: &[FrameResult], elapsed_s: f64) -> Result<LatencyReport> {
    if results.is_empty() {
        return Err(Error::Parameter("no frames to summarize".into()));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        let e = sums.entry(r.label.clone()).or_default();
        e.0 += r.latency_ms;
        e.1 += 1;
    }
    let overall_avg_ms = results.iter().map(|r| r.latency_ms).sum::<f64>() / results.len() as f64;
    Ok(LatencyReport {
        per_class_avg_ms: sums.iter().map(|(k, &(s, n))| (k.clone(), s / n as f64)).collect(),
        per_class_frames: sums.into_iter().map(|(k, (_, n))| (k, n)).collect(),
        overall_avg_ms,
        frames: results.len(),
        elapsed_s,
        fps: if elapsed_s > 0.0 { results.len() as f64 / elapsed_s } else { f64::NAN },
    })
}

/// Session log with columns `frame_index, timestamp_ms, label, confidence, latency_ms`.
pub fn write_session_csv(results: &[FrameResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(i: usize, label: &str, latency_ms: f64) -> FrameResult {
        FrameResult { frame_index: i, timestamp_ms: i as f64 * 50.0, label: label.into(), confidence: 0.9, latency_ms }
    }

    #[test]
    fn three_samples_of_one_gesture() {
        let r = summarize_latency(&[frame(0, "ok", 0.106), frame(1, "ok", 0.098), frame(2, "ok", 0.091)], 5.0).unwrap();
        let avg = r.per_class_avg_ms["ok"];
        assert!((avg - 0.098_333_333).abs() < 1e-8);
        assert_eq!(format!("{avg:.3}"), "0.098");
        assert!(((avg * 1000.0).round() / 1000.0 - 0.098).abs() < 1e-12);
    }

    #[test]
    fn single_frame_report() {
        let r = summarize_latency(&[frame(0, "palm", 12.5)], 1.0).unwrap();
        assert_eq!(r.overall_avg_ms, 12.5);
        assert_eq!(r.per_class_avg_ms["palm"], 12.5);
    }

    #[test]
    fn fps_definition() {
        let frames: Vec<_> = (0..100).map(|i| frame(i, "fist", 1.0)).collect();
        assert_eq!(summarize_latency(&frames, 5.0).unwrap().fps, 20.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize_latency(&[], 1.0).is_err());
    }

    #[test]
    fn session_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_session_csv(&[frame(0, "ok", 1.5)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "frame_index,timestamp_ms,label,confidence,latency_ms");
    }

    proptest! {
        #[test]
        fn grouping_agrees_with_independent_pass(
            rows in proptest::collection::vec((0usize..4, 0.01f64..100.0), 1..200)
        ) {
            let labels = ["a", "b", "c", NO_HAND_LABEL];
            let results: Vec<_> = rows.iter().enumerate().map(|(i, &(l, ms))| frame(i, labels[l], ms)).collect();
            let r = summarize_latency(&results, 2.0).unwrap();
            for name in labels {
                let xs: Vec<f64> = results.iter().filter(|f| f.label == name).map(|f| f.latency_ms).collect();
                match r.per_class_avg_ms.get(name) {
                    Some(avg) => prop_assert!((avg - xs.iter().sum::<f64>() / xs.len() as f64).abs() < 1e-9),
                    None => prop_assert!(xs.is_empty()),
                }
            }
            let all = results.iter().map(|f| f.latency_ms).sum::<f64>() / results.len() as f64;
            prop_assert!((r.overall_avg_ms - all).abs() < 1e-9);
        }
    }

    const NO_HAND_LABEL: &str = super::super::NO_HAND;
}
