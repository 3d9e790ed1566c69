//! Grid-search fitting of the postprocessing coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::similarity_score;
use crate::types::SaliencyVideo;

use super::transform::{brightness, center_prior, combine, PostprocessParams};

/// Values searched for each coefficient. Propagation settings are carried
/// through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub center_sigma_fracs: Vec<f64>,
    pub window_k: usize,
    pub decay: f64,
}

impl Default for ParamGrid {
    fn default() -> Self {
        let weights = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        ParamGrid {
            gammas: vec![0.5, 0.75, 1.0, 1.5, 2.0],
            alphas: weights.clone(),
            betas: weights,
            center_sigma_fracs: vec![0.15, 0.25, 0.35],
            window_k: 2,
            decay: 0.8,
        }
    }
}

impl ParamGrid {
    /// Grid points in search order: gamma, alpha, beta, then center sigma,
    /// each ascending as listed. Points with `alpha + beta = 0` are skipped.
    pub fn points(&self) -> Vec<PostprocessParams> {
        let mut out = Vec::new();
        for &gamma in &self.gammas {
            for &alpha in &self.alphas {
                for &beta in &self.betas {
                    if alpha + beta <= 0.0 {
                        continue;
                    }
                    for &center_sigma_frac in &self.center_sigma_fracs {
                        out.push(PostprocessParams {
                            window_k: self.window_k,
                            decay: self.decay,
                            gamma,
                            alpha,
                            beta,
                            center_sigma_frac,
                        });
                    }
                }
            }
        }
        out
    }

    /// First grid point that leaves maps unchanged up to scale.
    pub fn identity(&self) -> Option<PostprocessParams> {
        self.points().into_iter().find(|p| p.gamma == 1.0 && p.beta == 0.0 && p.alpha > 0.0)
    }

    fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        for (name, v) in [
            ("gamma", &self.gammas),
            ("alpha", &self.alphas),
            ("beta", &self.betas),
            ("center sigma", &self.center_sigma_fracs),
        ] {
            if v.is_empty() || !sorted(v) {
                return Err(Error::param(format!("{name} grid must be non-empty and strictly ascending")));
            }
        }
        if self.identity().is_none() {
            return Err(Error::param("grid must contain the identity transform (gamma 1, beta 0, alpha > 0)"));
        }
        for p in self.points() {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: PostprocessParams,
    /// Mean training similarity reached by `params`.
    pub sim: f64,
    /// Mean training similarity of the identity transform, if scorable.
    pub identity_sim: Option<f64>,
    pub evaluated: usize,
}

/// Exhaustive search for the grid point maximizing the mean
/// video similarity between transformed inputs and truths.
///
/// A grid point is scored only if every training pair has at least one
/// scorable frame. Ties keep the earliest point in grid order.
pub fn fit_postprocess(inputs: &[SaliencyVideo], truths: &[SaliencyVideo], grid: &ParamGrid) -> Result<FitResult> {
    if inputs.is_empty() {
        return Err(Error::param("empty training set"));
    }
    if inputs.len() != truths.len() {
        return Err(Error::shape(format!("{} inputs vs {} truths", inputs.len(), truths.len())));
    }
    for (i, (a, b)) in inputs.iter().zip(truths).enumerate() {
        if a.len() != b.len() || a.dims() != b.dims() {
            return Err(Error::shape(format!("training pair {i} (`{}`) is misaligned", a.video_id)));
        }
    }
    grid.validate()?;

    // corrected[gamma][pair][frame]
    let corrected: Vec<Vec<Vec<Vec<f64>>>> = grid
        .gammas
        .iter()
        .map(|&g| inputs.iter().map(|v| v.frames().iter().map(|f| brightness(f, g)).collect()).collect())
        .collect();
    // priors[sigma][pair]
    let priors: Vec<Vec<Vec<f64>>> = grid
        .center_sigma_fracs
        .iter()
        .map(|&s| {
            inputs
                .iter()
                .map(|v| v.dims().map(|(w, h)| center_prior(w, h, s)).unwrap_or_default())
                .collect()
        })
        .collect();

    let points = grid.points();
    let scores: Vec<Option<f64>> = points
        .par_iter()
        .map(|p| {
            let gi = grid.gammas.iter().position(|g| *g == p.gamma).unwrap();
            let si = grid.center_sigma_fracs.iter().position(|s| *s == p.center_sigma_frac).unwrap();
            score_point(&corrected[gi], &priors[si], truths, p.alpha, p.beta)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let (idx, sim) = best.ok_or_else(|| Error::UndefinedMetric("no grid point could be scored".into()))?;
    let identity = grid.identity().unwrap();
    let identity_sim = points.iter().position(|p| *p == identity).and_then(|i| scores[i]);
    Ok(FitResult { params: points[idx], sim, identity_sim, evaluated: points.len() })
}

/// Mean over pairs of the per-video mean frame similarity, matching
/// `video_similarity` applied to `apply_postprocess` output.
fn score_point(
    corrected: &[Vec<Vec<f64>>],
    priors: &[Vec<f64>],
    truths: &[SaliencyVideo],
    alpha: f64,
    beta: f64,
) -> Option<f64> {
    let mut total = 0.0;
    for ((frames, prior), truth) in corrected.iter().zip(priors).zip(truths) {
        let (w, h) = truth.dims()?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for (c, t) in frames.iter().zip(truth.frames()) {
            let out = crate::types::SaliencyFrame::from_raw(w, h, combine(c, prior, alpha, beta));
            if let Ok(s) = similarity_score(&out, t) {
                sum += s;
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        total += sum / count as f64;
    }
    Some(total / truths.len() as f64)
}
