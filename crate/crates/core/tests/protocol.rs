use std::collections::BTreeMap;

use mousesal_core::metrics::video_similarity;
use mousesal_core::postprocess::{apply_postprocess, estimate_motion, fit_postprocess, ParamGrid};
use mousesal_core::raster::rasterize_video;
use mousesal_core::subsample::{subsample_curve, CurveConfig, GroundTruth, ObserverTraces};
use mousesal_core::synthetic::{observer_trace, Scene};
use mousesal_core::{FixationTrace, Frame, RasterParams, Source, VideoMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const META: VideoMeta = VideoMeta { width: 64, height: 36, fps: 25.0, n_frames: 10 };

fn population(scene: &Scene, video: &str, prefix: &str, n: usize, source: Source, jitter: f64, seed: u64) -> ObserverTraces {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("{prefix}{i:02}");
            let t = observer_trace(&mut rng, scene, &META, &id, video, source, jitter);
            (id, vec![t])
        })
        .collect()
}

#[test]
fn curve_grows_with_observers() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let scene = Scene::random(&mut rng, META.n_frames, 3, 0.01);
    let mouse = population(&scene, "v", "m", 16, Source::Mouse, 0.02, 1);
    let eye = population(&scene, "v", "e", 16, Source::Eye, 0.0, 2);
    let videos: BTreeMap<String, VideoMeta> = [("v".to_string(), META)].into();
    let cfg = CurveConfig { n_resamples: 20, seed: 3, raster: RasterParams::default() };

    let mouse_curve = subsample_curve(&mouse, GroundTruth::Separate(&eye), &videos, &[1, 2, 4, 8], &cfg).unwrap();
    let eye_curve = subsample_curve(&eye, GroundTruth::Holdout, &videos, &[1, 2, 4, 8], &cfg).unwrap();
    for curve in [&mouse_curve, &eye_curve] {
        for w in curve.windows(2) {
            assert!(w[1].mean >= w[0].mean, "{curve:?}");
        }
    }
    // Jittered cursor observers trail eye observers at equal N.
    assert!(mouse_curve[0].mean < eye_curve[0].mean);
}

#[test]
fn fitted_postprocess_helps_single_observers() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut train = (Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new());
    for v in 0..8 {
        let id = format!("clip{v}");
        let scene = Scene::random(&mut rng, META.n_frames, 2, 0.01);
        let eye = population(&scene, &id, "e", 16, Source::Eye, 0.0, rng.gen());
        let mouse = population(&scene, &id, "m", 1, Source::Mouse, 0.03, rng.gen());
        let eye_refs: Vec<&FixationTrace> = eye.values().flatten().collect();
        let mouse_refs: Vec<&FixationTrace> = mouse.values().flatten().collect();
        let truth = rasterize_video(&id, &eye_refs, &META, &RasterParams::default()).unwrap();
        let input = rasterize_video(&id, &mouse_refs, &META, &RasterParams::default()).unwrap();
        let bucket = if v < 5 { &mut train } else { &mut test };
        bucket.0.push(input);
        bucket.1.push(truth);
    }
    let fit = fit_postprocess(&train.0, &train.1, &ParamGrid::default()).unwrap();
    assert!(fit.sim >= fit.identity_sim.unwrap());

    let mean = |inputs: &[mousesal_core::SaliencyVideo], truths: &[mousesal_core::SaliencyVideo]| {
        inputs.iter().zip(truths).map(|(i, t)| video_similarity(i, t).unwrap().mean).sum::<f64>() / inputs.len() as f64
    };
    let improved: Vec<_> = test.0.iter().map(|v| apply_postprocess(v, &fit.params).unwrap()).collect();
    let before = mean(&test.0, &test.1);
    let after = mean(&improved, &test.1);
    assert!(after > before, "held-out SIM {before} -> {after}");
}

#[test]
fn translation_within_radius_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (w, h) = (80, 48);
    let pad = 10;
    let tex_w = w + 2 * pad;
    let tex_h = h + 2 * pad;
    let texture: Vec<f64> = (0..tex_w * tex_h).map(|_| rng.gen()).collect();
    let crop = |left: usize, top: usize| {
        let data = (0..h).flat_map(|r| texture[(r + top) * tex_w + left..(r + top) * tex_w + left + w].to_vec()).collect();
        Frame::new(w, h, 1, data).unwrap()
    };
    for (dx, dy) in [(2isize, -3isize), (-4, 0), (0, 5)] {
        let prev = crop(pad, pad);
        let cur = crop((pad as isize - dx) as usize, (pad as isize - dy) as usize);
        let field = estimate_motion(&[prev, cur], 16, 8).unwrap();
        for by in 1..field.grid_height() - 1 {
            for bx in 1..field.grid_width() - 1 {
                let v = field.block(1, bx, by);
                assert_eq!((v.dx, v.dy), (dx as f64, dy as f64));
            }
        }
    }
}
