//! Subcommands. Each one reads its inputs, calls the library and writes
//! the result; `run` is what the `mousesal` binary executes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use mousesal_core::metrics::video_similarity;
use mousesal_core::postprocess::{
    apply_postprocess, decode_motion_field, encode_motion_field, estimate_motion, fit_postprocess,
    propagated_saliency, ParamGrid, PostprocessParams,
};
use mousesal_core::raster::rasterize_video;
use mousesal_core::subsample::{subsample_curve, CurveConfig, GroundTruth, ObserverTraces};
use mousesal_core::synthetic::{observer_trace, Scene};
use mousesal_core::trace_format::{parse_traces, write_traces};
use mousesal_core::{FixationTrace, FoveationParams, RasterParams, Source, VideoMeta};
use mousesal_service::http::{prepare, serve};
use mousesal_service::ServiceConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::store::{self, StoreManifest};
use crate::InputError;

#[derive(Debug, Parser)]
#[command(name = "mousesal", version, about = "Cursor-based video saliency toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a trace file into a saliency store.
    Rasterize(RasterizeArgs),
    /// Per-frame Similarity Score between two saliency stores.
    Evaluate(EvaluateArgs),
    /// Mean similarity versus number of observers, for mouse and eye traces.
    Curve(CurveArgs),
    /// Block-matching motion field of an image store.
    EstimateMotion(EstimateMotionArgs),
    /// Grid-search postprocessing parameters on training pairs.
    FitPostprocess(FitArgs),
    /// Apply postprocessing parameters to a saliency store.
    ApplyPostprocess(ApplyArgs),
    /// Render what a participant saw while producing a trace.
    RenderFoveated(RenderArgs),
    /// Generate synthetic mouse and eye traces from a shared scene.
    Synthesize(SynthesizeArgs),
    /// Run the collection service until SIGINT or SIGTERM.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RasterFlags {
    /// Fixation Gaussian sigma as a fraction of the frame width.
    #[arg(long, default_value_t = RasterParams::default().sigma_frac)]
    pub sigma_frac: f64,
    /// Kernel support radius in multiples of sigma.
    #[arg(long, default_value_t = RasterParams::default().truncation_radius_sigmas)]
    pub truncation: f64,
}

impl RasterFlags {
    pub fn params(&self) -> RasterParams {
        RasterParams { sigma_frac: self.sigma_frac, truncation_radius_sigmas: self.truncation }
    }
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    /// Trace file (`video_id observer_id source t_ms x y` per line).
    #[arg(long)]
    pub traces: PathBuf,
    /// Manifest JSON, or a store directory whose manifest gives the video geometry.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output saliency store.
    #[arg(long)]
    pub out: PathBuf,
    /// Video to rasterize; defaults to the manifest's video_id or the only video in the traces.
    #[arg(long)]
    pub video: Option<String>,
    #[command(flatten)]
    pub raster: RasterFlags,
    /// Motion field file; enables fixation propagation.
    #[arg(long)]
    pub motion: Option<PathBuf>,
    /// Propagation window in frames on each side.
    #[arg(long, default_value_t = 2, requires = "motion")]
    pub window_k: usize,
    /// Weight factor per propagated frame.
    #[arg(long, default_value_t = 0.8, requires = "motion")]
    pub decay: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted saliency store.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference saliency store.
    #[arg(long)]
    pub truth: PathBuf,
    /// Print a JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Mouse trace file; its curve uses all eye observers as truth.
    #[arg(long)]
    pub mouse: Option<PathBuf>,
    /// Eye trace file; its curve compares N observers with the rest.
    #[arg(long)]
    pub eye: PathBuf,
    /// JSON array of manifests with `video_id`, one per video.
    #[arg(long)]
    pub videos: PathBuf,
    /// Observer counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub raster: RasterFlags,
}

#[derive(Debug, Args)]
pub struct EstimateMotionArgs {
    /// Image store.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output motion field file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub block: usize,
    #[arg(long, default_value_t = 8)]
    pub radius: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input saliency store; repeat, paired in order with --truth.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Reference saliency store; repeat.
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    /// Output parameter file.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file overriding the search grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Parameter file written by fit-postprocess; identity when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub center_sigma_frac: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Image store with the sharp frames.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Observer whose trace drives the cursor.
    #[arg(long)]
    pub observer: Option<String>,
    /// Video id of the trace; defaults to the store's video_id.
    #[arg(long)]
    pub video: Option<String>,
    /// Peripheral blur sigma as a fraction of the frame width.
    #[arg(long, default_value_t = FoveationParams::default().sigma1_frac)]
    pub sigma1_frac: f64,
    /// Sharp-region spread as a fraction of the frame width.
    #[arg(long, default_value_t = FoveationParams::default().sigmaw_frac)]
    pub sigmaw_frac: f64,
    /// Also write per-frame cursor coordinates to this file.
    #[arg(long)]
    pub cursor_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Output directory for mouse.txt, eye.txt and videos.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Observers per source.
    #[arg(long, default_value_t = 16)]
    pub observers: usize,
    #[arg(long, default_value_t = 2)]
    pub videos: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 36)]
    pub height: usize,
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Attention blobs per scene.
    #[arg(long, default_value_t = 3)]
    pub blobs: usize,
    /// Per-frame blob drift as a fraction of the frame.
    #[arg(long, default_value_t = 0.02)]
    pub drift: f64,
    /// Extra positional noise of mouse observers.
    #[arg(long, default_value_t = 0.03)]
    pub mouse_jitter: f64,
    /// Extra positional noise of eye observers.
    #[arg(long, default_value_t = 0.01)]
    pub eye_jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML configuration; MOUSESAL_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Listen address, overriding the configuration.
    #[arg(long)]
    pub listen: Option<String>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Rasterize(a) => rasterize(&a, out),
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Curve(a) => curve(&a, out),
        Command::EstimateMotion(a) => motion(&a, out),
        Command::FitPostprocess(a) => fit(&a, out),
        Command::ApplyPostprocess(a) => apply(&a, out),
        Command::RenderFoveated(a) => render(&a, out),
        Command::Synthesize(a) => synthesize(&a, out),
        Command::Serve(a) => serve_cmd(&a, out),
    }
}

pub fn load_traces(path: &Path) -> Result<Vec<FixationTrace>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_traces(&text).with_context(|| format!("{}", path.display()))
}

fn group_by_observer(traces: Vec<FixationTrace>) -> ObserverTraces {
    let mut grouped = ObserverTraces::new();
    for t in traces {
        grouped.entry(t.observer_id.clone()).or_default().push(t);
    }
    grouped
}

fn pick_video(explicit: Option<&str>, manifest: &StoreManifest, traces: &[FixationTrace]) -> Result<String> {
    if let Some(id) = explicit.or(manifest.video_id.as_deref()) {
        return Ok(id.to_string());
    }
    let ids: std::collections::BTreeSet<&str> = traces.iter().map(|t| t.video_id.as_str()).collect();
    match ids.len() {
        0 => Ok("video".into()),
        1 => Ok(ids.into_iter().next().unwrap().to_string()),
        _ => Err(InputError(format!(
            "traces cover several videos ({}); choose one with --video",
            ids.into_iter().collect::<Vec<_>>().join(", ")
        ))
        .into()),
    }
}

fn rasterize(a: &RasterizeArgs, out: &mut dyn Write) -> Result<()> {
    let traces = load_traces(&a.traces)?;
    let manifest = store::read_manifest(&a.manifest)?;
    let meta = manifest.meta();
    let video_id = pick_video(a.video.as_deref(), &manifest, &traces)?;
    let selected: Vec<&FixationTrace> = traces.iter().filter(|t| t.video_id == video_id).collect();
    if selected.is_empty() {
        tracing::warn!(video = %video_id, file = %a.traces.display(), "no samples for this video; writing all-zero maps");
    }
    let raster = a.raster.params();
    let video = match &a.motion {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            let field = decode_motion_field(&bytes).with_context(|| format!("{}", path.display()))?;
            propagated_saliency(&video_id, &selected, &meta, &field, a.window_k, a.decay, &raster)?
        }
        None => rasterize_video(&video_id, &selected, &meta, &raster)?,
    };
    store::write_saliency(&a.out, &video)?;
    let samples: usize = selected.iter().map(|t| t.len()).sum();
    writeln!(out, "video_id observers samples frames")?;
    writeln!(out, "{video_id} {} {samples} {}", selected.len(), video.len())?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    video_id: &'a str,
    mean: f64,
    valid_frames: usize,
    skipped: usize,
    per_frame: &'a [Option<f64>],
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let pred = store::read_saliency(&a.pred)?;
    let truth = store::read_saliency(&a.truth)?;
    ensure!(
        pred.dims() == truth.dims(),
        "stores differ in frame size: {:?} vs {:?}",
        pred.dims(),
        truth.dims()
    );
    let sim = video_similarity(&pred, &truth)?;
    if a.json {
        let report = EvaluationReport {
            video_id: &pred.video_id,
            mean: sim.mean,
            valid_frames: sim.valid_frames(),
            skipped: sim.skipped,
            per_frame: &sim.per_frame,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(());
    }
    writeln!(out, "frame sim")?;
    for (i, s) in sim.per_frame.iter().enumerate() {
        match s {
            Some(v) => writeln!(out, "{i} {v}")?,
            None => writeln!(out, "{i} skipped")?,
        }
    }
    writeln!(out, "# mean {}", sim.mean)?;
    writeln!(out, "# valid_frames {}", sim.valid_frames())?;
    writeln!(out, "# skipped {}", sim.skipped)?;
    Ok(())
}

pub fn read_video_list(path: &Path) -> Result<BTreeMap<String, VideoMeta>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let list: Vec<StoreManifest> =
        serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let mut videos = BTreeMap::new();
    for m in list {
        let id = m.video_id.clone().ok_or_else(|| InputError(format!("{}: entry without video_id", path.display())))?;
        m.validate().map_err(|e| InputError(format!("{}: `{id}`: {e}", path.display())))?;
        if videos.insert(id.clone(), m.meta()).is_some() {
            return Err(InputError(format!("{}: duplicate video `{id}`", path.display())).into());
        }
    }
    Ok(videos)
}

fn curve(a: &CurveArgs, out: &mut dyn Write) -> Result<()> {
    let videos = read_video_list(&a.videos)?;
    let eye = group_by_observer(load_traces(&a.eye)?);
    let config = CurveConfig { n_resamples: a.resamples, seed: a.seed, raster: a.raster.params() };
    let mut rows = Vec::new();
    if let Some(path) = &a.mouse {
        let mouse = group_by_observer(load_traces(path)?);
        let points = subsample_curve(&mouse, GroundTruth::Separate(&eye), &videos, &a.n, &config)
            .context("mouse curve")?;
        rows.extend(points.into_iter().map(|p| (Source::Mouse, p)));
    }
    let points = subsample_curve(&eye, GroundTruth::Holdout, &videos, &a.n, &config).context("eye curve")?;
    rows.extend(points.into_iter().map(|p| (Source::Eye, p)));
    writeln!(out, "source n mean std resamples")?;
    for (source, p) in rows {
        writeln!(out, "{source} {} {} {} {}", p.n, p.mean, p.std, p.resamples)?;
    }
    Ok(())
}

fn motion(a: &EstimateMotionArgs, out: &mut dyn Write) -> Result<()> {
    let (_, frames) = store::read_frames(&a.frames)?;
    let field = estimate_motion(&frames, a.block, a.radius)?;
    fs::write(&a.out, encode_motion_field(&field)).with_context(|| format!("cannot write {}", a.out.display()))?;
    writeln!(out, "frames grid_width grid_height block")?;
    writeln!(out, "{} {} {} {}", field.n_frames(), field.grid_width(), field.grid_height(), field.block_size())?;
    Ok(())
}

/// Renders `params` as a commented TOML document.
pub fn params_file(params: &PostprocessParams, sim: f64, identity_sim: Option<f64>, pairs: usize) -> Result<String> {
    let mut text = String::from("# Saliency postprocessing parameters\n");
    text += &format!("# training pairs: {pairs}\n");
    text += &format!("# mean training similarity: {sim}\n");
    if let Some(id) = identity_sim {
        text += &format!("# identity similarity: {id}\n");
    }
    text += &toml::to_string(params)?;
    Ok(text)
}

pub fn read_params(path: &Path) -> Result<PostprocessParams> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let params: PostprocessParams =
        toml::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    params.validate()?;
    Ok(params)
}

fn fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    if a.input.len() != a.truth.len() {
        return Err(InputError(format!(
            "{} --input stores but {} --truth stores",
            a.input.len(),
            a.truth.len()
        ))
        .into());
    }
    let grid = match &a.grid {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str::<ParamGrid>(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?
        }
        None => ParamGrid::default(),
    };
    let inputs = a.input.iter().map(|p| store::read_saliency(p)).collect::<Result<Vec<_>>>()?;
    let truths = a.truth.iter().map(|p| store::read_saliency(p)).collect::<Result<Vec<_>>>()?;
    let result = fit_postprocess(&inputs, &truths, &grid)?;
    let text = params_file(&result.params, result.sim, result.identity_sim, inputs.len())?;
    fs::write(&a.out, text).with_context(|| format!("cannot write {}", a.out.display()))?;
    writeln!(out, "sim identity_sim evaluated")?;
    let identity = result.identity_sim.map_or("-".to_string(), |v| v.to_string());
    writeln!(out, "{} {identity} {}", result.sim, result.evaluated)?;
    Ok(())
}

fn apply(a: &ApplyArgs, out: &mut dyn Write) -> Result<()> {
    let mut params = match &a.params {
        Some(path) => read_params(path)?,
        None => PostprocessParams::default(),
    };
    params.gamma = a.gamma.unwrap_or(params.gamma);
    params.alpha = a.alpha.unwrap_or(params.alpha);
    params.beta = a.beta.unwrap_or(params.beta);
    params.center_sigma_frac = a.center_sigma_frac.unwrap_or(params.center_sigma_frac);
    let input = store::read_saliency(&a.input)?;
    let result = apply_postprocess(&input, &params)?;
    store::write_saliency(&a.out, &result)?;
    writeln!(out, "frames gamma alpha beta center_sigma_frac")?;
    writeln!(out, "{} {} {} {} {}", result.len(), params.gamma, params.alpha, params.beta, params.center_sigma_frac)?;
    Ok(())
}

fn render(a: &RenderArgs, out: &mut dyn Write) -> Result<()> {
    let (manifest, frames) = store::read_frames(&a.frames)?;
    let traces = load_traces(&a.traces)?;
    let video = a.video.as_deref().or(manifest.video_id.as_deref());
    let matching: Vec<&FixationTrace> = traces
        .iter()
        .filter(|t| video.is_none_or(|v| t.video_id == v))
        .filter(|t| a.observer.as_deref().is_none_or(|o| t.observer_id == o))
        .collect();
    let trace = match matching.as_slice() {
        [one] => *one,
        [] => bail!(
            "no trace for video {} and observer {} in {}",
            video.unwrap_or("(any)"),
            a.observer.as_deref().unwrap_or("(any)"),
            a.traces.display()
        ),
        many => {
            return Err(InputError(format!(
                "{} traces match; narrow the choice with --observer or --video",
                many.len()
            ))
            .into())
        }
    };
    let params = FoveationParams { sigma1_frac: a.sigma1_frac, sigmaw_frac: a.sigmaw_frac };
    let rendered = mousesal_core::foveation::render_foveated_video(&frames, manifest.fps, trace, &params)?;
    store::write_frames(&a.out, &rendered, manifest.fps, manifest.bit_depth, manifest.video_id.clone())?;
    if let Some(path) = &a.cursor_log {
        let track = mousesal_core::foveation::cursor_track(trace, frames.len(), manifest.fps)?;
        let mut log = String::from("frame x y px py\n");
        for (k, p) in track.iter().enumerate() {
            let (px, py) = mousesal_core::foveation::cursor_pixel(*p, manifest.width, manifest.height);
            log += &format!("{k} {} {} {px} {py}\n", p.x, p.y);
        }
        fs::write(path, log).with_context(|| format!("cannot write {}", path.display()))?;
    }
    writeln!(out, "video_id observer frames")?;
    writeln!(out, "{} {} {}", trace.video_id, trace.observer_id, rendered.len())?;
    Ok(())
}

fn synthesize(a: &SynthesizeArgs, out: &mut dyn Write) -> Result<()> {
    if a.observers == 0 || a.videos == 0 {
        return Err(InputError("--observers and --videos must be positive".into()).into());
    }
    let meta = VideoMeta { width: a.width, height: a.height, fps: a.fps, n_frames: a.frames };
    meta.validate().map_err(|e| InputError(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (mut mouse, mut eye, mut list) = (Vec::new(), Vec::new(), Vec::new());
    for v in 0..a.videos {
        let video_id = format!("video{v:02}");
        let scene = Scene::random(&mut rng, a.frames, a.blobs.max(1), a.drift);
        for o in 0..a.observers {
            mouse.push(observer_trace(&mut rng, &scene, &meta, &format!("m{o:02}"), &video_id, Source::Mouse, a.mouse_jitter));
            eye.push(observer_trace(&mut rng, &scene, &meta, &format!("e{o:02}"), &video_id, Source::Eye, a.eye_jitter));
        }
        list.push(StoreManifest {
            video_id: Some(video_id),
            width: a.width,
            height: a.height,
            fps: a.fps,
            n_frames: a.frames,
            channels: 1,
            bit_depth: 8,
            kind: store::StoreKind::Image,
            max_value: None,
        });
    }
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    fs::write(a.out.join("mouse.txt"), write_traces(&mouse))?;
    fs::write(a.out.join("eye.txt"), write_traces(&eye))?;
    fs::write(a.out.join("videos.json"), serde_json::to_string_pretty(&list)? + "\n")?;
    writeln!(out, "videos observers frames")?;
    writeln!(out, "{} {} {}", a.videos, a.observers, a.frames)?;
    Ok(())
}

fn serve_cmd(a: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = ServiceConfig::load(a.config.as_deref())?;
    if let Some(listen) = &a.listen {
        config.listen = listen.clone();
    }
    let state = prepare(&config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let shutdown = shutdown_signal()?;
        serve(state, &config.listen, shutdown, |addr| {
            let _ = writeln!(out, "listening on http://{addr}");
            let _ = out.flush();
            tracing::info!(%addr, "collection service started");
        })
        .await?;
        tracing::info!("collection service stopped");
        Ok(())
    })
}

/// Resolves on SIGINT or SIGTERM. Handlers are installed before the
/// future is returned.
fn shutdown_signal() -> Result<impl std::future::Future<Output = ()> + Send + 'static> {
    #[cfg(unix)]
    let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())?;
    Ok(async move {
        #[cfg(unix)]
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
        #[cfg(not(unix))]
        let _ = tokio::signal::ctrl_c().await;
    })
}
