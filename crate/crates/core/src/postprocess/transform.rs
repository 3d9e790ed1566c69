//! Brightness correction and center-prior blending.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SaliencyFrame, SaliencyVideo};

/// Coefficients of the semiautomatic transform.
///
/// Each frame becomes `alpha * (s / max s)^gamma + beta * prior` where the
/// prior is a centered Gaussian of peak 1. `window_k` and `decay` control
/// fixation propagation before rasterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessParams {
    pub window_k: usize,
    pub decay: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub center_sigma_frac: f64,
}

impl Default for PostprocessParams {
    /// Identity transform with the default propagation window.
    fn default() -> Self {
        PostprocessParams { window_k: 2, decay: 0.8, gamma: 1.0, alpha: 1.0, beta: 0.0, center_sigma_frac: 0.25 }
    }
}

impl PostprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::param(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::param("alpha and beta must lie in [0, 1]"));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::param("alpha + beta must be positive"));
        }
        if !(self.center_sigma_frac > 0.0 && self.center_sigma_frac.is_finite()) {
            return Err(Error::param("center prior sigma must be positive"));
        }
        Ok(())
    }
}

/// Centered Gaussian with peak 1 and sigma `sigma_frac * width`, sampled at
/// pixel centers.
pub fn center_prior(width: usize, height: usize, sigma_frac: f64) -> Vec<f64> {
    let sigma = sigma_frac * width as f64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let mut out = Vec::with_capacity(width * height);
    for row in 0..height {
        let dy = row as f64 + 0.5 - cy;
        for col in 0..width {
            let dx = col as f64 + 0.5 - cx;
            out.push((-(dx * dx + dy * dy) * inv).exp());
        }
    }
    out
}

/// Peak-normalized frame raised to `gamma`; all-zero frames stay zero.
pub(crate) fn brightness(frame: &SaliencyFrame, gamma: f64) -> Vec<f64> {
    let peak = frame.max();
    if peak <= 0.0 {
        return vec![0.0; frame.data().len()];
    }
    frame.data().iter().map(|v| (v / peak).powf(gamma)).collect()
}

pub(crate) fn combine(corrected: &[f64], prior: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    corrected.iter().zip(prior).map(|(s, c)| alpha * s + beta * c).collect()
}

/// Applies the transform to every frame of `video`.
pub fn apply_postprocess(video: &SaliencyVideo, params: &PostprocessParams) -> Result<SaliencyVideo> {
    params.validate()?;
    let Some((w, h)) = video.dims() else {
        return SaliencyVideo::new(video.video_id.clone(), video.fps(), Vec::new());
    };
    let prior = center_prior(w, h, params.center_sigma_frac);
    let frames = video
        .frames()
        .iter()
        .map(|f| {
            let corrected = brightness(f, params.gamma);
            SaliencyFrame::from_raw(w, h, combine(&corrected, &prior, params.alpha, params.beta))
        })
        .collect();
    SaliencyVideo::new(video.video_id.clone(), video.fps(), frames)
}
