//! Fixation rasterization.
//!
//! Each fixation contributes an isotropic 2-D Gaussian density (unit integral
//! over the plane) evaluated at pixel centers. A map is the plain sum of its
//! fixations' kernels, so rasterizing the union of two fixation sets equals
//! the sum of their maps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FixationTrace, Point, RasterParams, SaliencyFrame, SaliencyVideo, VideoMeta};

/// A fixation whose kernel is scaled by `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

impl WeightedPoint {
    pub fn new(point: Point, weight: f64) -> Self {
        WeightedPoint { x: point.x, y: point.y, weight }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

impl From<Point> for WeightedPoint {
    fn from(p: Point) -> Self {
        WeightedPoint::new(p, 1.0)
    }
}

/// Rasterizes unit-weight fixations given in normalized coordinates.
pub fn rasterize_fixations(
    fixations: &[Point],
    width: usize,
    height: usize,
    params: &RasterParams,
) -> Result<SaliencyFrame> {
    let weighted: Vec<WeightedPoint> = fixations.iter().copied().map(WeightedPoint::from).collect();
    rasterize_weighted(&weighted, width, height, params)
}

/// Rasterizes weighted fixations. Fixations are accumulated in input order,
/// so the result is bitwise reproducible.
pub fn rasterize_weighted(
    fixations: &[WeightedPoint],
    width: usize,
    height: usize,
    params: &RasterParams,
) -> Result<SaliencyFrame> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("cannot rasterize into a {width}x{height} frame")));
    }
    params.validate()?;
    if let Some(f) = fixations.iter().find(|f| !f.point().in_unit_square()) {
        return Err(Error::param(format!("fixation ({}, {}) outside the unit square", f.x, f.y)));
    }
    if let Some(f) = fixations.iter().find(|f| !(f.weight >= 0.0 && f.weight.is_finite())) {
        return Err(Error::param(format!("fixation weight {} is invalid", f.weight)));
    }

    let sigma = params.sigma_px(width);
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let radius = params.truncation_radius_sigmas * sigma;
    let radius_sq = radius * radius;

    let mut data = vec![0.0; width * height];
    let mut gx = Vec::with_capacity(width);
    for f in fixations {
        if f.weight == 0.0 {
            continue;
        }
        let cx = f.x * width as f64;
        let cy = f.y * height as f64;
        let (c0, c1) = pixel_span(cx, radius, width);
        let (r0, r1) = pixel_span(cy, radius, height);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        gx.clear();
        gx.extend((c0..=c1).map(|col| {
            let dx = col as f64 + 0.5 - cx;
            (dx * dx, (-dx * dx * inv_two_var).exp())
        }));
        let scale = f.weight * norm;
        for row in r0..=r1 {
            let dy = row as f64 + 0.5 - cy;
            let dy_sq = dy * dy;
            if dy_sq > radius_sq {
                continue;
            }
            let ky = scale * (-dy_sq * inv_two_var).exp();
            let line = &mut data[row * width..(row + 1) * width];
            for (col, &(dx_sq, kx)) in (c0..=c1).zip(gx.iter()) {
                if dx_sq + dy_sq <= radius_sq {
                    line[col] += ky * kx;
                }
            }
        }
    }
    Ok(SaliencyFrame::from_raw(width, height, data))
}

/// Inclusive range of pixel indices whose centers lie within `radius` of
/// `center` along one axis.
fn pixel_span(center: f64, radius: f64, len: usize) -> (usize, usize) {
    let lo = (center - radius - 0.5).ceil().max(0.0);
    let hi = (center + radius - 0.5).floor().min(len as f64 - 1.0);
    if hi < lo {
        return (1, 0);
    }
    (lo as usize, hi as usize)
}

/// Groups the samples of `traces` by frame using
/// `floor(t_ms * fps / 1000)`, clamped to the last frame. Samples keep trace
/// order, then time order.
pub fn bin_fixations(traces: &[&FixationTrace], meta: &VideoMeta) -> Result<Vec<Vec<Point>>> {
    meta.validate()?;
    let mut bins = vec![Vec::new(); meta.n_frames];
    for trace in traces {
        for s in trace.samples() {
            bins[meta.frame_index(s.t_ms)].push(s.point());
        }
    }
    Ok(bins)
}

/// Rasterizes the pooled samples of `traces` frame by frame. Samples are used
/// as fixations directly, without clustering or outlier removal.
pub fn rasterize_video(
    video_id: &str,
    traces: &[&FixationTrace],
    meta: &VideoMeta,
    params: &RasterParams,
) -> Result<SaliencyVideo> {
    if let Some(t) = traces.iter().find(|t| t.video_id != video_id) {
        return Err(Error::Consistency(format!(
            "trace of observer `{}` belongs to video `{}`, expected `{video_id}`",
            t.observer_id, t.video_id
        )));
    }
    let bins = bin_fixations(traces, meta)?;
    let frames = bins
        .iter()
        .map(|points| rasterize_fixations(points, meta.width, meta.height, params))
        .collect::<Result<Vec<_>>>()?;
    SaliencyVideo::new(video_id, meta.fps, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Source, TimedPoint};

    /// Untruncated per-pixel sum of Gaussian densities.
    fn dense_oracle(points: &[Point], w: usize, h: usize, sigma_frac: f64) -> Vec<f64> {
        let sigma = sigma_frac * w as f64;
        let mut out = vec![0.0; w * h];
        for row in 0..h {
            for col in 0..w {
                let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
                out[row * w + col] = points
                    .iter()
                    .map(|p| {
                        let d2 = (px - p.x * w as f64).powi(2) + (py - p.y * h as f64).powi(2);
                        (-d2 / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
                    })
                    .sum();
            }
        }
        out
    }

    #[test]
    fn empty_input_gives_zero_map() {
        let m = rasterize_fixations(&[], 10, 6, &RasterParams::default()).unwrap();
        assert!(m.is_zero());
        assert_eq!((m.width(), m.height()), (10, 6));
    }

    #[test]
    fn centered_fixation_is_symmetric() {
        let (w, h) = (31, 17);
        let m = rasterize_fixations(&[Point::new(0.5, 0.5)], w, h, &RasterParams::default()).unwrap();
        let argmax = m
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, (h / 2) * w + w / 2);
        for row in 0..h {
            for col in 0..w {
                let v = m.get(col, row);
                assert!((v - m.get(w - 1 - col, row)).abs() < 1e-12);
                assert!((v - m.get(col, h - 1 - row)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_fixations_match_dense_oracle() {
        let pts = [Point::new(0.2, 0.3), Point::new(0.75, 0.6)];
        let params = RasterParams::default();
        let m = rasterize_fixations(&pts, 64, 36, &params).unwrap();
        let oracle = dense_oracle(&pts, 64, 36, params.sigma_frac);
        for (a, b) in m.data().iter().zip(&oracle) {
            if *b > 1e-9 {
                assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn truncation_at_four_sigma_drops_tails() {
        // The 4-sigma support leaves pixels inside the frame whose dense value
        // exceeds the 1e-9 floor at zero.
        let params = RasterParams { truncation_radius_sigmas: 4.0, ..RasterParams::default() };
        let pts = [Point::new(0.05, 0.5)];
        let m = rasterize_fixations(&pts, 64, 36, &params).unwrap();
        let oracle = dense_oracle(&pts, 64, 36, params.sigma_frac);
        let violations = m
            .data()
            .iter()
            .zip(&oracle)
            .filter(|(a, b)| **b > 1e-9 && (*a - *b).abs() > 1e-6 * **b)
            .count();
        assert!(violations > 0);
    }

    #[test]
    fn weights_scale_kernels() {
        let p = RasterParams::default();
        let one = rasterize_weighted(&[WeightedPoint { x: 0.4, y: 0.4, weight: 1.0 }], 20, 10, &p).unwrap();
        let half = rasterize_weighted(&[WeightedPoint { x: 0.4, y: 0.4, weight: 0.5 }], 20, 10, &p).unwrap();
        for (a, b) in one.data().iter().zip(half.data()) {
            assert!((a * 0.5 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_inputs() {
        let p = RasterParams::default();
        assert!(matches!(rasterize_fixations(&[], 0, 5, &p), Err(Error::Parameter(_))));
        assert!(rasterize_fixations(&[Point::new(1.1, 0.0)], 5, 5, &p).is_err());
        let bad = RasterParams { truncation_radius_sigmas: 2.0, ..p };
        assert!(rasterize_fixations(&[], 5, 5, &bad).is_err());
    }

    fn trace(obs: &str, video: &str, pts: &[(u64, f64, f64)]) -> FixationTrace {
        let samples = pts.iter().map(|&(t_ms, x, y)| TimedPoint { t_ms, x, y }).collect();
        FixationTrace::new(obs, video, Source::Mouse, samples).unwrap()
    }

    #[test]
    fn video_binning_and_consistency() {
        let meta = VideoMeta { width: 16, height: 9, fps: 25.0, n_frames: 3 };
        let p = RasterParams::default();
        let empty = rasterize_video("v", &[], &meta, &p).unwrap();
        assert_eq!(empty.len(), 3);
        assert!(empty.frames().iter().all(|f| f.is_zero()));

        // 120 ms is the end of a 3-frame clip at 25 fps and lands in frame 2.
        let t = trace("a", "v", &[(0, 0.5, 0.5), (40, 0.2, 0.2), (120, 0.8, 0.8)]);
        let v = rasterize_video("v", &[&t], &meta, &p).unwrap();
        for (k, pt) in [(0, Point::new(0.5, 0.5)), (1, Point::new(0.2, 0.2)), (2, Point::new(0.8, 0.8))] {
            let single = rasterize_fixations(&[pt], 16, 9, &p).unwrap();
            assert_eq!(v.frames()[k], single);
        }

        let other = trace("b", "w", &[(0, 0.5, 0.5)]);
        assert!(matches!(rasterize_video("v", &[&t, &other], &meta, &p), Err(Error::Consistency(_))));
    }
}
