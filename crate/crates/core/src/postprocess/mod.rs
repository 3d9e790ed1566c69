//! Semiautomatic postprocessing of fixation-derived saliency.
//!
//! The chain takes measured fixations rather than predicting from pixels:
//! fixations are propagated to neighbouring frames along block motion, the
//! pooled maps are brightness-corrected with a gamma curve and a Gaussian
//! center prior is blended in. The free coefficients are fitted by grid
//! search against ground-truth maps.

mod fit;
mod motion;
mod propagate;
mod transform;

pub use fit::{fit_postprocess, FitResult, ParamGrid};
pub use motion::{decode_motion_field, encode_motion_field, estimate_motion, MotionField, MotionVector};
pub use propagate::propagate_fixations;
pub use transform::{apply_postprocess, center_prior, PostprocessParams};

use crate::error::Result;
use crate::raster::{bin_fixations, rasterize_weighted};
use crate::types::{FixationTrace, RasterParams, SaliencyVideo, VideoMeta};

/// Rasterizes `traces` after propagating each frame's fixations over
/// `window_k` neighbouring frames along `motion`.
pub fn propagated_saliency(
    video_id: &str,
    traces: &[&FixationTrace],
    meta: &VideoMeta,
    motion: &MotionField,
    window_k: usize,
    decay: f64,
    raster: &RasterParams,
) -> Result<SaliencyVideo> {
    if let Some(t) = traces.iter().find(|t| t.video_id != video_id) {
        return Err(crate::Error::Consistency(format!(
            "trace of observer `{}` belongs to video `{}`, expected `{video_id}`",
            t.observer_id, t.video_id
        )));
    }
    let bins = bin_fixations(traces, meta)?;
    let weighted = propagate_fixations(&bins, motion, window_k, decay)?;
    let frames = weighted
        .iter()
        .map(|pts| rasterize_weighted(pts, meta.width, meta.height, raster))
        .collect::<Result<Vec<_>>>()?;
    SaliencyVideo::new(video_id, meta.fps, frames)
}
