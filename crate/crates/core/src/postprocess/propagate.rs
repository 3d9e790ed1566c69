//! Temporal propagation of fixations along block motion.

use crate::error::{Error, Result};
use crate::raster::WeightedPoint;
use crate::types::Point;

use super::motion::MotionField;

/// Adds to every frame the fixations of the `window_k` frames on either
/// side, moved along the motion field and weighted by `decay^distance`.
///
/// Original fixations keep weight 1 and come first in each output list,
/// followed by propagated ones ordered by source frame. Windows running past
/// either end of the video are clipped. Positions are clamped to the unit
/// square after every step.
pub fn propagate_fixations(
    fixations_per_frame: &[Vec<Point>],
    motion: &MotionField,
    window_k: usize,
    decay: f64,
) -> Result<Vec<Vec<WeightedPoint>>> {
    let n = fixations_per_frame.len();
    if motion.n_frames() != n {
        return Err(Error::shape(format!(
            "motion field covers {} frames, fixations cover {n}",
            motion.n_frames()
        )));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::param(format!("decay must lie in (0, 1], got {decay}")));
    }
    let (w, h) = (motion.frame_width() as f64, motion.frame_height() as f64);

    let mut out: Vec<Vec<WeightedPoint>> = fixations_per_frame
        .iter()
        .map(|pts| pts.iter().map(|p| WeightedPoint::new(*p, 1.0)).collect())
        .collect();

    for (source, points) in fixations_per_frame.iter().enumerate() {
        for p in points {
            // Backward: frame u -> u - 1 undoes the motion of frame u.
            let mut q = *p;
            let mut weight = 1.0;
            for target in (source.saturating_sub(window_k)..source).rev() {
                let v = motion.at_pixel(target + 1, q.x * w, q.y * h);
                q = Point::new(q.x - v.dx / w, q.y - v.dy / h).clamped();
                weight *= decay;
                out[target].push(WeightedPoint::new(q, weight));
            }
            // Forward: frame u - 1 -> u applies the motion of frame u.
            let mut q = *p;
            let mut weight = 1.0;
            for target in source + 1..(source + window_k + 1).min(n) {
                let v = motion.at_pixel(target, q.x * w, q.y * h);
                q = Point::new(q.x + v.dx / w, q.y + v.dy / h).clamped();
                weight *= decay;
                out[target].push(WeightedPoint::new(q, weight));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::motion::MotionVector;
    use super::*;

    fn still(n: usize) -> MotionField {
        MotionField::zero(40, 20, 8, n).unwrap()
    }

    fn total_weight(frame: &[WeightedPoint]) -> f64 {
        frame.iter().map(|p| p.weight).sum()
    }

    #[test]
    fn zero_window_is_identity() {
        let fx = vec![vec![Point::new(0.1, 0.2)], vec![], vec![Point::new(0.5, 0.5), Point::new(0.9, 0.1)]];
        let out = propagate_fixations(&fx, &still(3), 0, 0.5).unwrap();
        for (o, i) in out.iter().zip(&fx) {
            let pts: Vec<Point> = o.iter().map(|p| p.point()).collect();
            assert_eq!(&pts, i);
            assert!(o.iter().all(|p| p.weight == 1.0));
        }
    }

    #[test]
    fn single_fixation_spreads_with_decay() {
        let fx = vec![vec![], vec![Point::new(0.3, 0.6)], vec![]];
        let out = propagate_fixations(&fx, &still(3), 1, 0.5).unwrap();
        for t in [0, 2] {
            assert_eq!(out[t], vec![WeightedPoint { x: 0.3, y: 0.6, weight: 0.5 }]);
        }
        assert_eq!(out[1], vec![WeightedPoint { x: 0.3, y: 0.6, weight: 1.0 }]);
    }

    #[test]
    fn unit_decay_counts_window() {
        let n = 7;
        let fx: Vec<Vec<Point>> = (0..n).map(|i| vec![Point::new(0.5, 0.5); i % 3 + 1]).collect();
        let k = 2;
        let out = propagate_fixations(&fx, &still(n), k, 1.0).unwrap();
        for t in 0..n {
            let lo = t.saturating_sub(k);
            let hi = (t + k).min(n - 1);
            let count: usize = (lo..=hi).map(|s| fx[s].len()).sum();
            assert_eq!(total_weight(&out[t]), count as f64);
        }
    }

    #[test]
    fn follows_motion_and_clamps() {
        // Everything moves 4 px right per frame on a 40 px wide frame.
        let cells = 5 * 3;
        let frames = vec![vec![MotionVector::new(4.0, 0.0); cells]; 4];
        let field = MotionField::new(40, 20, 8, frames).unwrap();
        let fx = vec![vec![], vec![Point::new(0.5, 0.5)], vec![], vec![]];
        let out = propagate_fixations(&fx, &field, 2, 0.8).unwrap();
        assert!((out[0][0].x - 0.4).abs() < 1e-12);
        assert!((out[2][0].x - 0.6).abs() < 1e-12);
        assert!((out[3][0].x - 0.7).abs() < 1e-12);
        assert!((out[3][0].weight - 0.64).abs() < 1e-12);

        let edge = vec![vec![Point::new(0.95, 0.5)], vec![], vec![], vec![]];
        let out = propagate_fixations(&edge, &field, 3, 1.0).unwrap();
        assert_eq!(out[3][0].x, 1.0);
    }

    #[test]
    fn frame_count_must_match() {
        assert!(propagate_fixations(&[vec![]], &still(2), 1, 0.5).is_err());
        assert!(propagate_fixations(&[vec![]], &still(1), 1, 0.0).is_err());
    }
}
