//! Live recognition over a frame stream: motion-based hand separation, the offline
//! preprocessing chain, ensemble prediction and per-frame latency accounting.

mod report;
mod source;

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use report::{summarize_latency, write_session_csv, LatencyReport};
pub use source::{DirectorySource, FrameSource, MemorySource, SourceSpec};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::imgproc::{preprocess_gray, BackgroundModel, BBox, GrayImage, PreprocessConfig, RgbImage};

/// Label emitted for frames without a detectable hand.
pub const NO_HAND: &str = "NO_HAND";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub preprocess: PreprocessConfig,
    pub background_learning_rate: f64,
    pub background_threshold: f64,
    /// Consecutive hand-free frames after which background updates resume.
    pub resume_after: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        let bg = BackgroundModel::default();
        Self {
            preprocess: PreprocessConfig::default(),
            background_learning_rate: bg.learning_rate(),
            background_threshold: bg.diff_threshold(),
            resume_after: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_index: usize,
    /// Capture time relative to the start of the session.
    pub timestamp_ms: f64,
    pub label: String,
    pub confidence: f64,
    /// Classification-complete time minus capture time.
    pub latency_ms: f64,
}

/// A frame's result plus the intermediate data a display needs.
#[derive(Debug, Clone)]
pub struct ProcessedFrame {
    pub result: FrameResult,
    /// The exact image handed to the model, if a hand was found.
    pub model_input: Option<GrayImage>,
    pub bbox: Option<BBox>,
    /// Why the frame produced no prediction.
    pub diagnostic: Option<String>,
}

/// Zeroes every pixel the background model does not flag as moving.
pub fn separate_foreground(frame: &GrayImage, background: &BackgroundModel) -> Result<GrayImage> {
    let mask = background.subtract(frame)?;
    GrayImage::from_fn(frame.width(), frame.height(), |x, y| if mask.get(x, y) { frame.get(x, y) } else { 0 })
}

/// Per-stream state: background estimate, freeze logic and frame counter.
pub struct LivePipeline<'a, C: Classifier + ?Sized> {
    model: &'a C,
    classes: Vec<String>,
    cfg: LiveConfig,
    background: BackgroundModel,
    frozen: bool,
    hand_free_streak: usize,
    next_index: usize,
    start: Instant,
}

impl<'a, C: Classifier + ?Sized> LivePipeline<'a, C> {
    pub fn new(model: &'a C, classes: Vec<String>, cfg: LiveConfig) -> Result<Self> {
        cfg.preprocess.validate()?;
        if classes.len() != model.num_classes() {
            return Err(Error::Shape(format!(
                "{} class names for a {}-class model",
                classes.len(),
                model.num_classes()
            )));
        }
        let target = (cfg.preprocess.target_width, cfg.preprocess.target_height);
        if target != model.input_size() {
            return Err(Error::Shape(format!(
                "preprocessing produces {}x{} but the model expects {}x{}",
                target.0,
                target.1,
                model.input_size().0,
                model.input_size().1
            )));
        }
        let background = BackgroundModel::new(cfg.background_learning_rate, cfg.background_threshold)?;
        Ok(Self { model, classes, cfg, background, frozen: false, hand_free_streak: 0, next_index: 0, start: Instant::now() })
    }

    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Runs one frame through the pipeline. Failures become `NO_HAND` with a diagnostic.
    pub fn process(&mut self, frame: &GrayImage, captured: Instant) -> ProcessedFrame {
        let frame_index = self.next_index;
        self.next_index += 1;
        let timestamp_ms = captured.saturating_duration_since(self.start).as_secs_f64() * 1e3;
        let outcome = self.classify(frame);
        let latency_ms = captured.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok((class, confidence, input, bbox)) => ProcessedFrame {
                result: FrameResult { frame_index, timestamp_ms, label: self.classes[class].clone(), confidence, latency_ms },
                model_input: Some(input),
                bbox: Some(bbox),
                diagnostic: None,
            },
            Err(e) => ProcessedFrame {
                result: FrameResult { frame_index, timestamp_ms, label: NO_HAND.into(), confidence: 0.0, latency_ms },
                model_input: None,
                bbox: None,
                diagnostic: Some(e.to_string()),
            },
        }
    }

    fn classify(&mut self, frame: &GrayImage) -> Result<(usize, f64, GrayImage, BBox)> {
        if !self.background.is_initialized() {
            self.background.update(frame)?;
            return Err(Error::NoHand("background initialised from this frame".into()));
        }
        let separated = separate_foreground(frame, &self.background)?;
        let region = match preprocess_gray(&separated, &self.cfg.preprocess) {
            Ok(r) => r,
            Err(e) => {
                self.hand_free_streak += 1;
                if self.frozen && self.hand_free_streak >= self.cfg.resume_after {
                    self.frozen = false;
                }
                if !self.frozen {
                    self.background.update(frame)?;
                }
                return Err(e);
            }
        };
        self.frozen = true;
        self.hand_free_streak = 0;
        let (class, confidence) = self.model.predict_labels(std::slice::from_ref(&region.input))?[0];
        Ok((class, confidence, region.input, region.bbox))
    }
}

/// Results and latency summary of a live session.
#[derive(Debug, Clone)]
pub struct LiveSession {
    pub results: Vec<FrameResult>,
    pub report: Option<LatencyReport>,
}

/// Processes frames until the source is exhausted or `stop` is set.
///
/// `on_frame` sees each processed frame with its source image, in capture order.
pub fn run_live<C, S, F>(
    source: &mut S,
    model: &C,
    classes: Vec<String>,
    cfg: LiveConfig,
    stop: &AtomicBool,
    mut on_frame: F,
) -> Result<LiveSession>
where
    C: Classifier + ?Sized,
    S: FrameSource + ?Sized,
    F: FnMut(&ProcessedFrame, &GrayImage) -> Result<()>,
{
    let mut pipeline = LivePipeline::new(model, classes, cfg)?;
    let session_start = Instant::now();
    let mut results = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let Some(frame) = source.next_frame()? else { break };
        let captured = Instant::now();
        let processed = pipeline.process(&frame, captured);
        if let Some(d) = &processed.diagnostic {
            log::debug!("frame {}: {d}", processed.result.frame_index);
        }
        on_frame(&processed, &frame)?;
        results.push(processed.result);
    }
    let elapsed = session_start.elapsed().as_secs_f64();
    let report = if results.is_empty() { None } else { Some(summarize_latency(&results, elapsed)?) };
    Ok(LiveSession { results, report })
}

/// Grayscale frame as RGB with the hand box outlined in green.
pub fn annotate(frame: &GrayImage, bbox: Option<&BBox>) -> RgbImage {
    let mut out = RgbImage::from_gray(frame);
    if let Some(b) = bbox {
        for x in b.x_min..=b.x_max {
            out.set(x, b.y_min, [0, 255, 0]);
            out.set(x, b.y_max, [0, 255, 0]);
        }
        for y in b.y_min..=b.y_max {
            out.set(b.x_min, y, [0, 255, 0]);
            out.set(b.x_max, y, [0, 255, 0]);
        }
    }
    out
}
