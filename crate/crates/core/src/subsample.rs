//! Observer-subsampling evaluation.
//!
//! For each requested observer count `N` the protocol draws `N` candidate
//! observers without replacement, pools their fixations into per-frame maps
//! and scores them against a ground-truth pool. When candidates and ground
//! truth come from the same observer set, the ground truth is the remaining
//! `M - N` observers.
//!
//! Maps are built one frame at a time and every selection is scored against
//! it before moving on, so memory stays proportional to one frame per
//! observer regardless of video length.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::similarity_score;
use crate::raster::rasterize_fixations;
use crate::types::{FixationTrace, Point, RasterParams, SaliencyFrame, VideoMeta};

/// Traces keyed by observer id; each observer may cover several videos.
pub type ObserverTraces = BTreeMap<String, Vec<FixationTrace>>;

/// Where the reference maps come from.
#[derive(Debug, Clone, Copy)]
pub enum GroundTruth<'a> {
    /// A disjoint observer set, pooled in full (e.g. eye tracking as truth
    /// for mouse tracking).
    Separate(&'a ObserverTraces),
    /// The candidates that were not drawn.
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Resamples that produced at least one scorable video.
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub raster: RasterParams,
}

/// Mean Similarity Score of `N`-observer pools for every `N` in `n_values`.
///
/// Each resample is scored as the mean over videos of the per-video mean
/// frame similarity; `mean` and `std` (population) are taken over
/// resamples.
pub fn subsample_curve(
    candidates: &ObserverTraces,
    truth: GroundTruth<'_>,
    videos: &BTreeMap<String, VideoMeta>,
    n_values: &[usize],
    config: &CurveConfig,
) -> Result<Vec<CurvePoint>> {
    config.raster.validate()?;
    if config.n_resamples == 0 {
        return Err(Error::param("at least one resample is required"));
    }
    let observers: Vec<&String> = candidates.keys().collect();
    let m = observers.len();
    let limit = match truth {
        GroundTruth::Separate(_) => m,
        GroundTruth::Holdout => m.saturating_sub(1),
    };
    for &n in n_values {
        if n == 0 || n > limit {
            return Err(Error::param(match truth {
                GroundTruth::Separate(_) => {
                    format!("N = {n} is infeasible: {m} candidate observers available (1..={limit})")
                }
                GroundTruth::Holdout => format!(
                    "N = {n} is infeasible: {m} observers leave an empty holdout beyond N = {limit}"
                ),
            }));
        }
    }
    for meta in videos.values() {
        meta.validate()?;
    }

    // Draw every subset up front so results depend only on the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let selections: Vec<Vec<usize>> = n_values
        .iter()
        .flat_map(|&n| (0..config.n_resamples).map(move |_| n))
        .map(|n| {
            let mut picked = index::sample(&mut rng, m, n).into_vec();
            picked.sort_unstable();
            picked
        })
        .collect();

    // scores[selection] collects one mean per scorable video.
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); selections.len()];
    for (video_id, meta) in videos {
        let candidate_bins: Vec<Vec<Vec<Point>>> = observers
            .iter()
            .map(|o| observer_bins(&candidates[*o], video_id, meta))
            .collect::<Result<_>>()?;
        let truth_bins: Option<Vec<Vec<Vec<Point>>>> = match truth {
            GroundTruth::Separate(set) => Some(
                set.values().map(|t| observer_bins(t, video_id, meta)).collect::<Result<_>>()?,
            ),
            GroundTruth::Holdout => None,
        };

        let mut sums = vec![(0.0f64, 0usize); selections.len()];
        for frame in 0..meta.n_frames {
            let rasters: Vec<Option<SaliencyFrame>> = candidate_bins
                .iter()
                .map(|bins| frame_raster(&bins[frame], meta, &config.raster))
                .collect::<Result<_>>()?;
            let separate_truth = match &truth_bins {
                Some(tb) => {
                    let maps: Vec<Option<SaliencyFrame>> = tb
                        .iter()
                        .map(|bins| frame_raster(&bins[frame], meta, &config.raster))
                        .collect::<Result<_>>()?;
                    Some(pool(maps.iter().flatten(), meta))
                }
                None => None,
            };

            let frame_scores: Vec<Option<f64>> = selections
                .par_iter()
                .map(|sel| {
                    let pred = pool(sel.iter().filter_map(|&i| rasters[i].as_ref()), meta);
                    let score = match &separate_truth {
                        Some(t) => similarity_score(&pred, t),
                        None => {
                            let rest = (0..m).filter(|i| sel.binary_search(i).is_err());
                            let t = pool(rest.filter_map(|i| rasters[i].as_ref()), meta);
                            similarity_score(&pred, &t)
                        }
                    };
                    score.ok()
                })
                .collect();
            for (acc, s) in sums.iter_mut().zip(frame_scores) {
                if let Some(s) = s {
                    acc.0 += s;
                    acc.1 += 1;
                }
            }
        }
        for (per_sel, (sum, count)) in scores.iter_mut().zip(sums) {
            if count > 0 {
                per_sel.push(sum / count as f64);
            }
        }
    }

    let mut curve = Vec::with_capacity(n_values.len());
    for (chunk, &n) in scores.chunks(config.n_resamples).zip(n_values) {
        let resample_scores: Vec<f64> = chunk
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        if resample_scores.is_empty() {
            return Err(Error::UndefinedMetric(format!("no scorable frame for N = {n}")));
        }
        let k = resample_scores.len() as f64;
        let mean = resample_scores.iter().sum::<f64>() / k;
        let var = resample_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k;
        curve.push(CurvePoint { n, mean, std: var.sqrt(), resamples: resample_scores.len() });
    }
    Ok(curve)
}

fn observer_bins(traces: &[FixationTrace], video_id: &str, meta: &VideoMeta) -> Result<Vec<Vec<Point>>> {
    let mine: Vec<&FixationTrace> = traces.iter().filter(|t| t.video_id == video_id).collect();
    crate::raster::bin_fixations(&mine, meta)
}

fn frame_raster(points: &[Point], meta: &VideoMeta, params: &RasterParams) -> Result<Option<SaliencyFrame>> {
    if points.is_empty() {
        return Ok(None);
    }
    rasterize_fixations(points, meta.width, meta.height, params).map(Some)
}

fn pool<'a>(maps: impl Iterator<Item = &'a SaliencyFrame>, meta: &VideoMeta) -> SaliencyFrame {
    let mut data = vec![0.0; meta.width * meta.height];
    for m in maps {
        data.iter_mut().zip(m.data()).for_each(|(d, v)| *d += v);
    }
    SaliencyFrame::from_raw(meta.width, meta.height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Source, TimedPoint};

    fn observers(n: usize, source: Source) -> ObserverTraces {
        (0..n)
            .map(|i| {
                let x = 0.1 + 0.8 * (i as f64) / n as f64;
                let samples = vec![TimedPoint { t_ms: 0, x, y: 0.5 }, TimedPoint { t_ms: 40, x, y: 0.4 }];
                let id = format!("{source}{i:02}");
                (id.clone(), vec![FixationTrace::new(id, "v", source, samples).unwrap()])
            })
            .collect()
    }

    fn videos() -> BTreeMap<String, VideoMeta> {
        [("v".to_string(), VideoMeta { width: 32, height: 18, fps: 25.0, n_frames: 2 })].into()
    }

    fn config(n_resamples: usize) -> CurveConfig {
        CurveConfig { n_resamples, seed: 7, raster: RasterParams::default() }
    }

    #[test]
    fn full_holdout_is_rejected() {
        let obs = observers(4, Source::Eye);
        let err = subsample_curve(&obs, GroundTruth::Holdout, &videos(), &[4], &config(3)).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
        assert!(subsample_curve(&obs, GroundTruth::Holdout, &videos(), &[3], &config(3)).is_ok());
        let truth = observers(2, Source::Eye);
        assert!(subsample_curve(&obs, GroundTruth::Separate(&truth), &videos(), &[5], &config(1)).is_err());
        assert!(subsample_curve(&obs, GroundTruth::Separate(&truth), &videos(), &[0], &config(1)).is_err());
    }

    #[test]
    fn whole_pool_has_no_variance() {
        let mouse = observers(3, Source::Mouse);
        let eye = observers(5, Source::Eye);
        let c = subsample_curve(&mouse, GroundTruth::Separate(&eye), &videos(), &[3], &config(5)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].resamples, 5);
        assert_eq!(c[0].std, 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let eye = observers(6, Source::Eye);
        let a = subsample_curve(&eye, GroundTruth::Holdout, &videos(), &[1, 2, 3], &config(4)).unwrap();
        let b = subsample_curve(&eye, GroundTruth::Holdout, &videos(), &[1, 2, 3], &config(4)).unwrap();
        assert_eq!(a, b);
    }
}
