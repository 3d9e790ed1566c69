//! Domain types shared by every stage of the pipeline.
//!
//! Coordinates of fixations are stored normalized to the unit square, so a
//! trace recorded on one screen size applies unchanged to any rendering of
//! the same video. Pixel positions are derived on demand as
//! `(x * width, y * height)` and pixel `(col, row)` is sampled at its center
//! `(col + 0.5, row + 0.5)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mouse,
    Eye,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Mouse => "mouse",
            Source::Eye => "eye",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mouse" => Ok(Source::Mouse),
            "eye" => Ok(Source::Eye),
            other => Err(Error::param(format!("unknown source `{other}` (expected mouse or eye)"))),
        }
    }
}

/// A point in normalized frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn clamped(&self) -> Point {
        Point { x: self.x.clamp(0.0, 1.0), y: self.y.clamp(0.0, 1.0) }
    }
}

/// One timestamped gaze or cursor position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSample {
    pub observer_id: String,
    pub video_id: String,
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
    pub source: Source,
}

impl FixationSample {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A single timestamped position inside a [`FixationTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
}

impl TimedPoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// One observer's viewing of one video.
///
/// The shared identifiers live on the trace, so every sample of a trace
/// agrees on observer, video and source by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationTrace {
    pub observer_id: String,
    pub video_id: String,
    pub source: Source,
    samples: Vec<TimedPoint>,
}

impl FixationTrace {
    /// Builds a trace, rejecting out-of-range coordinates and timestamps that
    /// go backwards.
    pub fn new(
        observer_id: impl Into<String>,
        video_id: impl Into<String>,
        source: Source,
        samples: Vec<TimedPoint>,
    ) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !s.point().in_unit_square() {
                return Err(Error::param(format!(
                    "sample {i} at ({}, {}) lies outside the unit square",
                    s.x, s.y
                )));
            }
            if i > 0 && samples[i - 1].t_ms > s.t_ms {
                return Err(Error::param(format!("sample {i} goes back in time")));
            }
        }
        Ok(FixationTrace {
            observer_id: observer_id.into(),
            video_id: video_id.into(),
            source,
            samples,
        })
    }

    pub fn samples(&self) -> &[TimedPoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fixation_samples(&self) -> impl Iterator<Item = FixationSample> + '_ {
        self.samples.iter().map(move |s| FixationSample {
            observer_id: self.observer_id.clone(),
            video_id: self.video_id.clone(),
            t_ms: s.t_ms,
            x: s.x,
            y: s.y,
            source: self.source,
        })
    }

    /// Most recent sample at or before `t_ms` (zero-order hold).
    pub fn position_at(&self, t_ms: f64) -> Option<Point> {
        let idx = self.samples.partition_point(|s| (s.t_ms as f64) <= t_ms);
        idx.checked_sub(1).map(|i| self.samples[i].point())
    }
}

/// An image with `channels` interleaved planes of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("frame dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "{}x{}x{} frame needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("frame value {v} outside [0, 1]")));
        }
        Ok(Frame { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Skips the range check; callers guarantee values stay in `[0, 1]`.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Frame { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Non-negative attention map of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SaliencyFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("saliency frame dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} saliency frame needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!("saliency value {v} is negative or not finite")));
        }
        Ok(SaliencyFrame { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        SaliencyFrame::new(width, height, vec![0.0; width * height])
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        SaliencyFrame { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn same_shape(&self, other: &SaliencyFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixelwise sum; both frames must share dimensions.
    pub fn add(&self, other: &SaliencyFrame) -> Result<SaliencyFrame> {
        if !self.same_shape(other) {
            return Err(Error::shape(format!(
                "cannot add {}x{} and {}x{} maps",
                self.width, self.height, other.width, other.height
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(SaliencyFrame::from_raw(self.width, self.height, data))
    }

    pub fn scaled(&self, factor: f64) -> Result<SaliencyFrame> {
        SaliencyFrame::new(self.width, self.height, self.data.iter().map(|v| v * factor).collect())
    }
}

/// Per-frame saliency of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVideo {
    pub video_id: String,
    fps: f64,
    frames: Vec<SaliencyFrame>,
}

impl SaliencyVideo {
    pub fn new(video_id: impl Into<String>, fps: f64, frames: Vec<SaliencyFrame>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::param(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            if let Some((i, _)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
                return Err(Error::shape(format!("frame {i} differs in size from frame 0")));
            }
        }
        Ok(SaliencyVideo { video_id: video_id.into(), fps, frames })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[SaliencyFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<SaliencyFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames, if there are any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width(), f.height()))
    }
}

/// Geometry and timing of a video, without its pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub n_frames: usize,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("video dimensions must be positive"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::param(format!("fps must be positive, got {}", self.fps)));
        }
        if self.n_frames == 0 {
            return Err(Error::param("video must have at least one frame"));
        }
        Ok(())
    }

    /// Presentation time of frame `index` in milliseconds.
    pub fn frame_time_ms(&self, index: usize) -> f64 {
        index as f64 * 1000.0 / self.fps
    }

    /// Frame a timestamp falls into: `floor(t_ms * fps / 1000)`, clamped to
    /// the last frame.
    pub fn frame_index(&self, t_ms: u64) -> usize {
        let idx = (t_ms as f64 * self.fps / 1000.0).floor() as usize;
        idx.min(self.n_frames - 1)
    }
}

/// Constants of the mouse-contingent display model, as fractions of the
/// video width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoveationParams {
    /// Blur of the peripheral layer.
    pub sigma1_frac: f64,
    /// Spread of the sharp region around the cursor.
    pub sigmaw_frac: f64,
}

impl Default for FoveationParams {
    fn default() -> Self {
        FoveationParams { sigma1_frac: 0.02, sigmaw_frac: 0.2 }
    }
}

impl FoveationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1_frac > 0.0 && self.sigmaw_frac > 0.0) {
            return Err(Error::param("foveation sigmas must be positive"));
        }
        Ok(())
    }

    pub fn sigma1_px(&self, width: usize) -> f64 {
        self.sigma1_frac * width as f64
    }

    pub fn sigmaw_px(&self, width: usize) -> f64 {
        self.sigmaw_frac * width as f64
    }
}

/// Fixation-to-map conversion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterParams {
    /// Gaussian sigma as a fraction of the video width.
    pub sigma_frac: f64,
    /// Kernel support radius in multiples of sigma.
    pub truncation_radius_sigmas: f64,
}

impl Default for RasterParams {
    fn default() -> Self {
        RasterParams { sigma_frac: 0.0625, truncation_radius_sigmas: 9.0 }
    }
}

impl RasterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_frac > 0.0) {
            return Err(Error::param("raster sigma must be positive"));
        }
        if !(self.truncation_radius_sigmas >= 3.0) {
            return Err(Error::param("truncation radius must be at least 3 sigma"));
        }
        Ok(())
    }

    pub fn sigma_px(&self, width: usize) -> f64 {
        self.sigma_frac * width as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_rejects_out_of_range_and_backwards_samples() {
        let bad = vec![TimedPoint { t_ms: 0, x: 1.2, y: 0.5 }];
        assert!(FixationTrace::new("o", "v", Source::Mouse, bad).is_err());
        let back = vec![TimedPoint { t_ms: 10, x: 0.1, y: 0.1 }, TimedPoint { t_ms: 5, x: 0.1, y: 0.1 }];
        assert!(FixationTrace::new("o", "v", Source::Mouse, back).is_err());
    }

    #[test]
    fn hold_last_sample() {
        let t = FixationTrace::new(
            "o",
            "v",
            Source::Eye,
            vec![TimedPoint { t_ms: 10, x: 0.1, y: 0.2 }, TimedPoint { t_ms: 50, x: 0.3, y: 0.4 }],
        )
        .unwrap();
        assert_eq!(t.position_at(5.0), None);
        assert_eq!(t.position_at(10.0), Some(Point::new(0.1, 0.2)));
        assert_eq!(t.position_at(49.9), Some(Point::new(0.1, 0.2)));
        assert_eq!(t.position_at(1e6), Some(Point::new(0.3, 0.4)));
    }

    #[test]
    fn frame_binning_clamps_to_last_frame() {
        let meta = VideoMeta { width: 8, height: 8, fps: 25.0, n_frames: 10 };
        assert_eq!(meta.frame_index(0), 0);
        assert_eq!(meta.frame_index(39), 0);
        assert_eq!(meta.frame_index(40), 1);
        // 10 frames at 25 fps end at 400 ms, which would be frame 10.
        assert_eq!(meta.frame_index(400), 9);
        assert_eq!(meta.frame_index(10_000), 9);
    }

    #[test]
    fn frame_rejects_bad_shapes() {
        assert!(matches!(Frame::new(2, 2, 1, vec![0.0; 3]), Err(Error::Shape(_))));
        assert!(Frame::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Frame::new(1, 1, 1, vec![1.5]).is_err());
        assert!(SaliencyFrame::new(1, 1, vec![-1.0]).is_err());
        assert!(SaliencyFrame::new(1, 1, vec![f64::NAN]).is_err());
    }
}
