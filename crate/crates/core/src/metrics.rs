//! Similarity Score (histogram intersection of sum-normalized maps).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SaliencyFrame, SaliencyVideo};

/// `sum_p min(a_p / sum(a), b_p / sum(b))`.
///
/// An all-zero map has no distribution to compare and is reported as an
/// error rather than scored.
pub fn similarity_score(a: &SaliencyFrame, b: &SaliencyFrame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape(format!(
            "cannot compare {}x{} with {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (sa, sb) = (a.sum(), b.sum());
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::UndefinedMetric("similarity of an all-zero map".into()));
    }
    let sim: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&pa, &pb)| (pa / sa).min(pb / sb))
        .sum();
    Ok(sim.clamp(0.0, 1.0))
}

/// Per-frame and mean similarity of two videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSimilarity {
    pub mean: f64,
    /// `None` where either frame is all zero.
    pub per_frame: Vec<Option<f64>>,
    pub skipped: usize,
}

impl VideoSimilarity {
    pub fn valid_frames(&self) -> usize {
        self.per_frame.len() - self.skipped
    }
}

/// Mean of [`similarity_score`] over frames where both maps are non-zero.
pub fn video_similarity(a: &SaliencyVideo, b: &SaliencyVideo) -> Result<VideoSimilarity> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{} frames vs {} frames", a.len(), b.len())));
    }
    let mut per_frame = Vec::with_capacity(a.len());
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        match similarity_score(fa, fb) {
            Ok(s) => per_frame.push(Some(s)),
            Err(Error::UndefinedMetric(_)) => per_frame.push(None),
            Err(e) => return Err(e),
        }
    }
    let valid: Vec<f64> = per_frame.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "no frame of `{}` has non-zero maps on both sides",
            a.video_id
        )));
    }
    Ok(VideoSimilarity {
        mean: valid.iter().sum::<f64>() / valid.len() as f64,
        skipped: per_frame.len() - valid.len(),
        per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, data: &[f64]) -> SaliencyFrame {
        SaliencyFrame::new(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = similarity_score(&map(2, 1, &[1.0, 3.0]), &map(2, 1, &[1.0, 1.0])).unwrap();
        assert!((s - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identical_and_disjoint() {
        let a = map(2, 2, &[0.1, 0.0, 0.7, 2.0]);
        assert!((similarity_score(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let left = map(2, 1, &[1.0, 0.0]);
        let right = map(2, 1, &[0.0, 4.0]);
        assert_eq!(similarity_score(&left, &right).unwrap(), 0.0);
    }

    #[test]
    fn zero_map_is_an_error() {
        let z = map(2, 1, &[0.0, 0.0]);
        let a = map(2, 1, &[1.0, 0.0]);
        assert!(matches!(similarity_score(&z, &a), Err(Error::UndefinedMetric(_))));
        assert!(matches!(similarity_score(&a, &map(1, 2, &[1.0, 0.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn video_mean_and_skips() {
        let one = map(2, 1, &[1.0, 1.0]);
        let half_a = map(2, 1, &[1.0, 0.0]);
        let half_b = map(2, 1, &[1.0, 1.0]);
        let va = SaliencyVideo::new("v", 25.0, vec![one.clone(), half_a]).unwrap();
        let vb = SaliencyVideo::new("v", 25.0, vec![one.clone(), half_b]).unwrap();
        let r = video_similarity(&va, &vb).unwrap();
        assert!((r.mean - 0.75).abs() < 1e-15);
        assert_eq!(r.skipped, 0);

        let zero = map(2, 1, &[0.0, 0.0]);
        let vz = SaliencyVideo::new("v", 25.0, vec![one.clone(), zero.clone()]).unwrap();
        let r = video_similarity(&vz, &vz).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.per_frame, vec![Some(1.0), None]);

        let all_zero = SaliencyVideo::new("v", 25.0, vec![zero]).unwrap();
        assert!(matches!(video_similarity(&all_zero, &all_zero), Err(Error::UndefinedMetric(_))));
    }
}
