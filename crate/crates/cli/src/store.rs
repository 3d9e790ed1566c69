//! Frame stores: a directory of numbered PNG files plus `manifest.json`.
//!
//! ```text
//! store/
//!   manifest.json
//!   000000.png
//!   000001.png
//!   ...
//! ```
//!
//! Image stores hold 8- or 16-bit gray or RGB frames with intensities
//! mapped to `[0, 1]`. Saliency stores hold 16-bit gray frames scaled so
//! the largest value of the video maps to 65535; `max_value` records that
//! value so maps can be restored.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use mousesal_core::{Frame, SaliencyFrame, SaliencyVideo, VideoMeta};
use serde::{Deserialize, Serialize};

use crate::InputError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    #[default]
    Image,
    Saliency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub n_frames: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u8,
    #[serde(default)]
    pub kind: StoreKind,
    /// Saliency stores only: the value stored as 65535.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_value: Option<f64>,
}

fn default_channels() -> usize {
    1
}

fn default_bit_depth() -> u8 {
    8
}

impl StoreManifest {
    pub fn meta(&self) -> VideoMeta {
        VideoMeta { width: self.width, height: self.height, fps: self.fps, n_frames: self.n_frames }
    }

    pub fn validate(&self) -> Result<()> {
        self.meta().validate()?;
        ensure!(self.channels == 1 || self.channels == 3, "channels must be 1 or 3, got {}", self.channels);
        ensure!(self.bit_depth == 8 || self.bit_depth == 16, "bit_depth must be 8 or 16, got {}", self.bit_depth);
        if self.kind == StoreKind::Saliency {
            ensure!(self.channels == 1 && self.bit_depth == 16, "saliency stores are 16-bit single-channel");
            match self.max_value {
                Some(m) if m >= 0.0 && m.is_finite() => {}
                _ => bail!("saliency stores need a finite non-negative max_value"),
            }
        }
        Ok(())
    }
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:06}.png"))
}

/// Reads a manifest from a JSON file or from the `manifest.json` of a store
/// directory.
pub fn read_manifest(path: &Path) -> Result<StoreManifest> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("cannot read {}", file.display()))?;
    let manifest: StoreManifest = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("{}: {e}", file.display())))?;
    manifest.validate().map_err(|e| InputError(format!("{}: {e}", file.display())))?;
    Ok(manifest)
}

fn write_manifest(dir: &Path, manifest: &StoreManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    fs::write(dir.join(MANIFEST_FILE), text).with_context(|| format!("cannot write manifest in {}", dir.display()))
}

/// Creates `dir` and removes numbered frames left from an earlier run.
fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if is_frame_file(&path) {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn is_frame_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "png")
        && path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
}

fn check_files(dir: &Path, manifest: &StoreManifest) -> Result<()> {
    let count = fs::read_dir(dir)?.filter_map(|e| e.ok()).filter(|e| is_frame_file(&e.path())).count();
    ensure!(
        count == manifest.n_frames,
        "{}: manifest lists {} frames but {count} numbered PNG files exist",
        dir.display(),
        manifest.n_frames
    );
    Ok(())
}

fn load_png(path: &Path, manifest: &StoreManifest) -> Result<Vec<f64>> {
    let img = image::open(path).with_context(|| format!("cannot decode {}", path.display()))?;
    ensure!(
        img.width() as usize == manifest.width && img.height() as usize == manifest.height,
        "{} is {}x{}, manifest says {}x{}",
        path.display(),
        img.width(),
        img.height(),
        manifest.width,
        manifest.height
    );
    Ok(match (manifest.channels, manifest.bit_depth) {
        (1, 8) => img.into_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        (3, 8) => img.into_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        (1, _) => img.into_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        _ => img.into_rgb16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    })
}

fn quantize(v: f64, levels: f64) -> f64 {
    (v.clamp(0.0, 1.0) * levels).round()
}

fn save_png(path: &Path, width: usize, height: usize, channels: usize, bit_depth: u8, data: &[f64]) -> Result<()> {
    let (w, h) = (width as u32, height as u32);
    let img = match (channels, bit_depth) {
        (1, 8) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data.iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .context("frame buffer size")?,
        ),
        (3, 8) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data.iter().map(|&v| quantize(v, 255.0) as u8).collect())
                .context("frame buffer size")?,
        ),
        (1, _) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, data.iter().map(|&v| quantize(v, 65535.0) as u16).collect())
                .context("frame buffer size")?,
        ),
        _ => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, data.iter().map(|&v| quantize(v, 65535.0) as u16).collect())
                .context("frame buffer size")?,
        ),
    };
    img.save(path).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads an image store.
pub fn read_frames(dir: &Path) -> Result<(StoreManifest, Vec<Frame>)> {
    let manifest = read_manifest(dir)?;
    ensure!(manifest.kind == StoreKind::Image, "{} is not an image store", dir.display());
    check_files(dir, &manifest)?;
    let frames = (0..manifest.n_frames)
        .map(|i| {
            let data = load_png(&frame_path(dir, i), &manifest)?;
            Ok(Frame::new(manifest.width, manifest.height, manifest.channels, data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, frames))
}

/// Writes an image store; values are rounded to `bit_depth` levels.
pub fn write_frames(
    dir: &Path,
    frames: &[Frame],
    fps: f64,
    bit_depth: u8,
    video_id: Option<String>,
) -> Result<StoreManifest> {
    let first = frames.first().context("no frames to write")?;
    let manifest = StoreManifest {
        video_id,
        width: first.width(),
        height: first.height(),
        fps,
        n_frames: frames.len(),
        channels: first.channels(),
        bit_depth,
        kind: StoreKind::Image,
        max_value: None,
    };
    manifest.validate()?;
    prepare_dir(dir)?;
    for (i, f) in frames.iter().enumerate() {
        ensure!(f.same_shape(first), "frame {i} differs in shape from frame 0");
        save_png(&frame_path(dir, i), f.width(), f.height(), f.channels(), bit_depth, f.data())?;
    }
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Reads a saliency store, undoing the per-video scaling.
pub fn read_saliency(dir: &Path) -> Result<SaliencyVideo> {
    let manifest = read_manifest(dir)?;
    ensure!(manifest.kind == StoreKind::Saliency, "{} is not a saliency store", dir.display());
    check_files(dir, &manifest)?;
    let max = manifest.max_value.unwrap_or(0.0);
    let frames = (0..manifest.n_frames)
        .map(|i| {
            let data = load_png(&frame_path(dir, i), &manifest)?.into_iter().map(|v| v * max).collect();
            Ok(SaliencyFrame::new(manifest.width, manifest.height, data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let id = manifest.video_id.clone().unwrap_or_default();
    Ok(SaliencyVideo::new(id, manifest.fps, frames)?)
}

/// Writes a saliency store scaled by the largest value of the video.
pub fn write_saliency(dir: &Path, video: &SaliencyVideo) -> Result<StoreManifest> {
    let (width, height) = video.dims().context("no frames to write")?;
    let max = video.frames().iter().map(SaliencyFrame::max).fold(0.0, f64::max);
    let manifest = StoreManifest {
        video_id: (!video.video_id.is_empty()).then(|| video.video_id.clone()),
        width,
        height,
        fps: video.fps(),
        n_frames: video.len(),
        channels: 1,
        bit_depth: 16,
        kind: StoreKind::Saliency,
        max_value: Some(max),
    };
    manifest.validate()?;
    prepare_dir(dir)?;
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    for (i, f) in video.frames().iter().enumerate() {
        let data: Vec<f64> = f.data().iter().map(|v| v * scale).collect();
        save_png(&frame_path(dir, i), width, height, 1, 16, &data)?;
    }
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// What [`write_saliency`] followed by [`read_saliency`] returns.
pub fn quantized(video: &SaliencyVideo) -> Result<SaliencyVideo> {
    let max = video.frames().iter().map(SaliencyFrame::max).fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let frames = video
        .frames()
        .iter()
        .map(|f| {
            let data = f.data().iter().map(|v| quantize(v * scale, 65535.0) / 65535.0 * max).collect();
            Ok(SaliencyFrame::new(f.width(), f.height(), data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SaliencyVideo::new(video.video_id.clone(), video.fps(), frames)?)
}

/// What [`write_frames`] followed by [`read_frames`] returns.
pub fn quantized_frames(frames: &[Frame], bit_depth: u8) -> Result<Vec<Frame>> {
    let levels = if bit_depth == 8 { 255.0 } else { 65535.0 };
    frames
        .iter()
        .map(|f| {
            let data = f.data().iter().map(|&v| quantize(v, levels) / levels).collect();
            Ok(Frame::new(f.width(), f.height(), f.channels(), data)?)
        })
        .collect()
}
