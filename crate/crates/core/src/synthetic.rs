//! Synthetic attention data for tests and benchmarks.
//!
//! A scene is a per-frame mixture of drifting Gaussian blobs. Observers draw
//! one fixation per frame from the mixture, optionally jittered, so pooling
//! more observers converges to the mixture itself.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::types::{FixationTrace, Point, Source, TimedPoint, VideoMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub center: Point,
    /// Spread as a fraction of the frame width.
    pub sigma_frac: f64,
    pub weight: f64,
}

/// Ground-truth attention mixture, one blob list per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frames: Vec<Vec<Blob>>,
}

impl Scene {
    /// `n_blobs` blobs biased toward the frame center, drifting by up to
    /// `drift` (normalized units) per frame.
    pub fn random<R: Rng>(rng: &mut R, n_frames: usize, n_blobs: usize, drift: f64) -> Scene {
        let mut blobs: Vec<Blob> = (0..n_blobs)
            .map(|_| Blob {
                center: Point::new(rng.gen_range(0.2..0.8), rng.gen_range(0.25..0.75)),
                sigma_frac: rng.gen_range(0.03..0.08),
                weight: rng.gen_range(0.5..1.5),
            })
            .collect();
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            frames.push(blobs.clone());
            for b in &mut blobs {
                let c = Point::new(
                    b.center.x + rng.gen_range(-drift..=drift),
                    b.center.y + rng.gen_range(-drift..=drift),
                );
                b.center = Point::new(c.x.clamp(0.1, 0.9), c.y.clamp(0.1, 0.9));
            }
        }
        Scene { frames }
    }

    /// One point drawn from frame `k`'s mixture, clamped to the frame, with
    /// extra isotropic `jitter` (normalized units).
    pub fn sample<R: Rng>(&self, rng: &mut R, k: usize, aspect: f64, jitter: f64) -> Point {
        let blobs = &self.frames[k];
        let total: f64 = blobs.iter().map(|b| b.weight).sum();
        let mut pick = rng.gen_range(0.0..total);
        let blob = blobs
            .iter()
            .find(|b| {
                pick -= b.weight;
                pick < 0.0
            })
            .unwrap_or(&blobs[blobs.len() - 1]);
        // Spread is isotropic in pixels, so y scales by the aspect ratio.
        let sx = (blob.sigma_frac.powi(2) + jitter * jitter).sqrt();
        let nx = Normal::new(0.0, sx).unwrap();
        let ny = Normal::new(0.0, sx * aspect).unwrap();
        Point::new(blob.center.x + nx.sample(rng), blob.center.y + ny.sample(rng)).clamped()
    }
}

/// One trace with a sample at the presentation time of every frame.
pub fn observer_trace<R: Rng>(
    rng: &mut R,
    scene: &Scene,
    meta: &VideoMeta,
    observer_id: &str,
    video_id: &str,
    source: Source,
    jitter: f64,
) -> FixationTrace {
    let aspect = meta.width as f64 / meta.height as f64;
    let samples = (0..meta.n_frames.min(scene.frames.len()))
        .map(|k| {
            let p = scene.sample(rng, k, aspect, jitter);
            TimedPoint { t_ms: meta.frame_time_ms(k).ceil() as u64, x: p.x, y: p.y }
        })
        .collect();
    FixationTrace::new(observer_id, video_id, source, samples).expect("synthetic samples are valid")
}
