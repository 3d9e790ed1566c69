//! Core numerics for cursor-based video saliency.
//!
//! The crate covers the display model of the mouse-contingent player
//! (two-layer Gaussian pyramid blended around the cursor), the conversion of
//! fixation traces into saliency maps, the Similarity Score metric and the
//! observer-subsampling evaluation protocol. The [`postprocess`] module holds
//! the semiautomatic improvement chain: block-matching motion, fixation
//! propagation, brightness correction and center-prior blending.

pub mod blur;
pub mod error;
pub mod foveation;
pub mod metrics;
pub mod postprocess;
pub mod raster;
pub mod subsample;
pub mod synthetic;
pub mod trace_format;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    FixationSample, FixationTrace, FoveationParams, Frame, RasterParams, SaliencyFrame,
    SaliencyVideo, Source, VideoMeta,
};
