//! Mouse-contingent display model.
//!
//! A frame is shown as a blend of two pyramid layers, the original frame and
//! a Gaussian-blurred copy. The sharp layer dominates near the cursor and the
//! blend weight decays as a Gaussian of the pixel distance to it.

use crate::blur::gaussian_blur;
use crate::error::{Error, Result};
use crate::types::{FixationTrace, FoveationParams, Frame, Point};

/// Weight of the sharp layer at squared pixel distance `dist_sq` from the
/// cursor.
#[inline]
pub fn blend_weight(dist_sq: f64, sigma_w: f64) -> f64 {
    (-dist_sq / (2.0 * sigma_w * sigma_w)).exp()
}

/// Cursor position in pixel units: `(x * width, y * height)`.
pub fn cursor_pixel(cursor: Point, width: usize, height: usize) -> (f64, f64) {
    (cursor.x * width as f64, cursor.y * height as f64)
}

/// Blends `sharp` and `blurred` around `cursor`.
pub fn foveated_blend(
    sharp: &Frame,
    blurred: &Frame,
    cursor: Point,
    params: &FoveationParams,
) -> Result<Frame> {
    params.validate()?;
    if !sharp.same_shape(blurred) {
        return Err(Error::shape(format!(
            "sharp layer is {}x{}x{}, blurred layer is {}x{}x{}",
            sharp.width(),
            sharp.height(),
            sharp.channels(),
            blurred.width(),
            blurred.height(),
            blurred.channels()
        )));
    }
    if !cursor.in_unit_square() {
        return Err(Error::param(format!("cursor ({}, {}) outside the unit square", cursor.x, cursor.y)));
    }
    let (w, h, c) = (sharp.width(), sharp.height(), sharp.channels());
    let sigma_w = params.sigmaw_px(w);
    let (gx, gy) = cursor_pixel(cursor, w, h);

    let mut out = Vec::with_capacity(sharp.data().len());
    for row in 0..h {
        let dy = row as f64 + 0.5 - gy;
        for col in 0..w {
            let dx = col as f64 + 0.5 - gx;
            let weight = blend_weight(dx * dx + dy * dy, sigma_w);
            let base = (row * w + col) * c;
            for ch in 0..c {
                let s = sharp.data()[base + ch];
                let b = blurred.data()[base + ch];
                out.push(weight * s + (1.0 - weight) * b);
            }
        }
    }
    Ok(Frame::from_raw(w, h, c, out))
}

/// Cursor used for each frame: the latest sample at or before the frame's
/// presentation time, or the frame center before the first sample.
pub fn cursor_track(trace: &FixationTrace, n_frames: usize, fps: f64) -> Result<Vec<Point>> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::param(format!("fps must be positive, got {fps}")));
    }
    Ok((0..n_frames)
        .map(|k| {
            let t = k as f64 * 1000.0 / fps;
            trace.position_at(t).unwrap_or(Point::new(0.5, 0.5))
        })
        .collect())
}

/// Offline reference rendering of what a participant saw while producing
/// `trace`.
pub fn render_foveated_video(
    frames: &[Frame],
    fps: f64,
    trace: &FixationTrace,
    params: &FoveationParams,
) -> Result<Vec<Frame>> {
    if frames.is_empty() {
        return Err(Error::param("no frames to render"));
    }
    params.validate()?;
    let cursors = cursor_track(trace, frames.len(), fps)?;
    frames
        .iter()
        .zip(cursors)
        .map(|(frame, cursor)| {
            let blurred = gaussian_blur(frame, params.sigma1_px(frame.width()))?;
            foveated_blend(frame, &blurred, cursor, params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Source, TimedPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Frame {
        Frame::new(w, h, c, (0..w * h * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    fn trace(points: &[(u64, f64, f64)]) -> FixationTrace {
        let samples = points.iter().map(|&(t_ms, x, y)| TimedPoint { t_ms, x, y }).collect();
        FixationTrace::new("o", "v", Source::Mouse, samples).unwrap()
    }

    #[test]
    fn cursor_pixel_is_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sharp = random_frame(&mut rng, 33, 21, 3);
        let blurred = random_frame(&mut rng, 33, 21, 3);
        let out = foveated_blend(&sharp, &blurred, Point::new(0.5, 0.5), &FoveationParams::default()).unwrap();
        for ch in 0..3 {
            assert_eq!(out.get(16, 10, ch), sharp.get(16, 10, ch));
        }
    }

    #[test]
    fn weight_one_sigma_away() {
        let sigma_w = FoveationParams::default().sigmaw_px(320);
        assert_eq!(sigma_w, 64.0);
        let w = blend_weight(sigma_w * sigma_w, sigma_w);
        assert!((w - (-0.5f64).exp()).abs() < 1e-9);
        assert!((w - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn matches_per_pixel_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = FoveationParams::default();
        let sharp = random_frame(&mut rng, 32, 32, 1);
        let blurred = random_frame(&mut rng, 32, 32, 1);
        let out = foveated_blend(&sharp, &blurred, Point::new(0.3, 0.7), &params).unwrap();
        let (gx, gy) = (0.3 * 32.0, 0.7 * 32.0);
        let sw = 0.2 * 32.0;
        for row in 0..32 {
            for col in 0..32 {
                let d2 = (col as f64 + 0.5 - gx).powi(2) + (row as f64 + 0.5 - gy).powi(2);
                let wp = (-d2 / (2.0 * sw * sw)).exp();
                let expect = wp * sharp.get(col, row, 0) + (1.0 - wp) * blurred.get(col, row, 0);
                assert!((out.get(col, row, 0) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_and_cursor_errors() {
        let a = Frame::filled(4, 4, 1, 0.0).unwrap();
        let b = Frame::filled(4, 5, 1, 0.0).unwrap();
        let p = FoveationParams::default();
        assert!(matches!(foveated_blend(&a, &b, Point::new(0.5, 0.5), &p), Err(Error::Shape(_))));
        assert!(foveated_blend(&a, &a, Point::new(1.5, 0.5), &p).is_err());
    }

    #[test]
    fn frames_follow_hold_last_sample() {
        let t = trace(&[(0, 0.1, 0.1), (40, 0.5, 0.5), (80, 0.9, 0.9)]);
        let track = cursor_track(&t, 3, 25.0).unwrap();
        assert_eq!(track, vec![Point::new(0.1, 0.1), Point::new(0.5, 0.5), Point::new(0.9, 0.9)]);

        let single = trace(&[(0, 0.2, 0.6)]);
        let track = cursor_track(&single, 5, 30.0).unwrap();
        assert!(track.iter().all(|p| *p == Point::new(0.2, 0.6)));

        let late = trace(&[(100, 0.2, 0.6)]);
        let track = cursor_track(&late, 4, 25.0).unwrap();
        assert_eq!(track[0], Point::new(0.5, 0.5));
        assert_eq!(track[3], Point::new(0.2, 0.6));
    }

    #[test]
    fn render_is_sharp_at_center_cursor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<Frame> = (0..2).map(|_| random_frame(&mut rng, 25, 15, 1)).collect();
        let t = trace(&[(0, 0.5, 0.5)]);
        let out = render_foveated_video(&frames, 25.0, &t, &FoveationParams::default()).unwrap();
        for (o, f) in out.iter().zip(&frames) {
            assert_eq!(o.get(12, 7, 0), f.get(12, 7, 0));
        }
        assert!(render_foveated_video(&[], 25.0, &t, &FoveationParams::default()).is_err());
    }
}
