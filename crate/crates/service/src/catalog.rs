use std::collections::HashSet;
use std::path::{Path, PathBuf};

use mousesal_core::trace_format::valid_id;
use mousesal_core::VideoMeta;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// A video participants can be assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCatalogEntry {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub duration_ms: u64,
    pub n_frames: usize,
    /// Relative to the asset directory.
    pub asset_path: PathBuf,
    #[serde(default)]
    pub view_count: u64,
}

impl VideoCatalogEntry {
    pub fn meta(&self) -> VideoMeta {
        VideoMeta { width: self.width, height: self.height, fps: self.fps, n_frames: self.n_frames }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| ServiceError::Config(format!("catalog entry `{}`: {m}", self.video_id));
        if !valid_id(&self.video_id) {
            return Err(bad("video id must be non-empty without whitespace".into()));
        }
        self.meta().validate().map_err(|e| bad(e.to_string()))?;
        let period = 1000.0 / self.fps;
        let expected = self.n_frames as f64 * period;
        if (self.duration_ms as f64 - expected).abs() > period {
            return Err(bad(format!(
                "duration {} ms disagrees with {} frames at {} fps",
                self.duration_ms, self.n_frames, self.fps
            )));
        }
        Ok(())
    }
}

/// Reads a JSON array of entries and checks ids are unique.
pub fn load_catalog(path: &Path) -> Result<Vec<VideoCatalogEntry>, ServiceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Config(format!("cannot read catalog {}: {e}", path.display())))?;
    let entries: Vec<VideoCatalogEntry> = serde_json::from_str(&text)
        .map_err(|e| ServiceError::Config(format!("catalog {}: {e}", path.display())))?;
    check_catalog(&entries)?;
    Ok(entries)
}

pub fn check_catalog(entries: &[VideoCatalogEntry]) -> Result<(), ServiceError> {
    let mut seen = HashSet::new();
    for e in entries {
        e.validate()?;
        if !seen.insert(e.video_id.as_str()) {
            return Err(ServiceError::Config(format!("duplicate video id `{}`", e.video_id)));
        }
    }
    Ok(())
}
