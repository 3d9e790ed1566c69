//! Separable Gaussian blur producing the peripheral layer of the display.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::Frame;

/// Kernel support in multiples of sigma.
const KERNEL_RADIUS_SIGMAS: f64 = 4.0;

/// Sampled, sum-normalized 1-D Gaussian of half-width `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("blur sigma must be positive, got {sigma}")));
    }
    let radius = (KERNEL_RADIUS_SIGMAS * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> =
        (-radius..=radius).map(|k| (-((k * k) as f64) / denom).exp()).collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= sum);
    Ok(kernel)
}

/// Blurs every channel of `frame` with an isotropic Gaussian of `sigma`
/// pixels. Samples beyond the border replicate the nearest edge pixel.
pub fn gaussian_blur(frame: &Frame, sigma: f64) -> Result<Frame> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as isize;
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let src = frame.data();

    let mut horizontal = vec![0.0; src.len()];
    horizontal.par_chunks_mut(w * c).enumerate().for_each(|(row, out)| {
        let line = &src[row * w * c..(row + 1) * w * c];
        for col in 0..w as isize {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let x = (col + k as isize - radius).clamp(0, w as isize - 1) as usize;
                    acc += weight * line[x * c + ch];
                }
                out[col as usize * c + ch] = acc;
            }
        }
    });

    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(w * c).enumerate().for_each(|(row, line)| {
        for (k, weight) in kernel.iter().enumerate() {
            let y = (row as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
            let srcline = &horizontal[y * w * c..(y + 1) * w * c];
            for (o, s) in line.iter_mut().zip(srcline) {
                *o += weight * s;
            }
        }
        line.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    });

    Ok(Frame::from_raw(w, h, c, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense 2-D convolution with the unnormalized continuous Gaussian,
    /// normalized over the full support actually touched.
    fn dense_blur_oracle(frame: &Frame, sigma: f64) -> Vec<f64> {
        let (w, h) = (frame.width() as isize, frame.height() as isize);
        let r = (KERNEL_RADIUS_SIGMAS * sigma).ceil() as isize;
        let mut weights = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                weights.push((dx, dy, (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
            }
        }
        let total: f64 = weights.iter().map(|w| w.2).sum();
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for &(dx, dy, wt) in &weights {
                    let sx = (x + dx).clamp(0, w - 1);
                    let sy = (y + dy).clamp(0, h - 1);
                    acc += wt * frame.get(sx as usize, sy as usize, 0);
                }
                out[(y * w + x) as usize] = acc / total;
            }
        }
        out
    }

    #[test]
    fn constant_frame_is_unchanged() {
        let f = Frame::filled(17, 9, 3, 0.5).unwrap();
        let b = gaussian_blur(&f, 3.0).unwrap();
        assert!(b.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn impulse_matches_dense_oracle_and_density_peak() {
        let mut data = vec![0.0; 65 * 65];
        data[32 * 65 + 32] = 1.0;
        let f = Frame::new(65, 65, 1, data).unwrap();
        let sigma = 2.0;
        let blurred = gaussian_blur(&f, sigma).unwrap();
        let oracle = dense_blur_oracle(&f, sigma);
        for (a, b) in blurred.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let center = blurred.get(32, 32, 0);
        let expected = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
        assert!(((center - expected) / expected).abs() < 1e-4, "{center} vs {expected}");
        assert!(((oracle[32 * 65 + 32] - expected) / expected).abs() < 1e-4);
    }

    #[test]
    fn edge_clamp_keeps_values_in_range() {
        let data: Vec<f64> = (0..40).map(|i| if i % 7 == 0 { 1.0 } else { 0.0 }).collect();
        let f = Frame::new(8, 5, 1, data).unwrap();
        let b = gaussian_blur(&f, 1.5).unwrap();
        assert!(b.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!((b.width(), b.height(), b.channels()), (8, 5, 1));
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let f = Frame::filled(4, 4, 1, 0.0).unwrap();
        assert!(matches!(gaussian_blur(&f, 0.0), Err(Error::Parameter(_))));
        assert!(gaussian_blur(&f, -1.0).is_err());
    }
}
