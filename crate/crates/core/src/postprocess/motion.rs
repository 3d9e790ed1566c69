//! Exhaustive block-matching motion estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Frame;

/// Displacement of a block's content between the previous frame and the
/// current one: the block at `p` in frame `t` came from `p - v` in frame
/// `t - 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionVector {
    pub dx: f64,
    pub dy: f64,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        MotionVector { dx, dy }
    }
}

/// Per-frame grids of block motion. Frame 0 has no predecessor and carries
/// zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    frame_width: usize,
    frame_height: usize,
    block_size: usize,
    grid_width: usize,
    grid_height: usize,
    frames: Vec<Vec<MotionVector>>,
}

impl MotionField {
    pub fn new(
        frame_width: usize,
        frame_height: usize,
        block_size: usize,
        frames: Vec<Vec<MotionVector>>,
    ) -> Result<Self> {
        if frame_width == 0 || frame_height == 0 || block_size == 0 {
            return Err(Error::param("motion field dimensions must be positive"));
        }
        let grid_width = frame_width.div_ceil(block_size);
        let grid_height = frame_height.div_ceil(block_size);
        for (t, grid) in frames.iter().enumerate() {
            if grid.len() != grid_width * grid_height {
                return Err(Error::shape(format!(
                    "frame {t} has {} vectors, expected {grid_width}x{grid_height}",
                    grid.len()
                )));
            }
            if grid.iter().any(|v| !(v.dx.is_finite() && v.dy.is_finite())) {
                return Err(Error::param(format!("frame {t} has a non-finite vector")));
            }
        }
        Ok(MotionField { frame_width, frame_height, block_size, grid_width, grid_height, frames })
    }

    /// A field with no motion.
    pub fn zero(frame_width: usize, frame_height: usize, block_size: usize, n_frames: usize) -> Result<Self> {
        let cells = frame_width.div_ceil(block_size.max(1)) * frame_height.div_ceil(block_size.max(1));
        MotionField::new(frame_width, frame_height, block_size, vec![vec![MotionVector::ZERO; cells]; n_frames])
    }

    pub fn frame_width(&self) -> usize {
        self.frame_width
    }

    pub fn frame_height(&self) -> usize {
        self.frame_height
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &[MotionVector] {
        &self.frames[t]
    }

    pub fn block(&self, t: usize, bx: usize, by: usize) -> MotionVector {
        self.frames[t][by * self.grid_width + bx]
    }

    /// Vector of the block of frame `t` containing pixel position `(px, py)`.
    pub fn at_pixel(&self, t: usize, px: f64, py: f64) -> MotionVector {
        let bx = ((px / self.block_size as f64).floor().max(0.0) as usize).min(self.grid_width - 1);
        let by = ((py / self.block_size as f64).floor().max(0.0) as usize).min(self.grid_height - 1);
        self.block(t, bx, by)
    }
}

fn luma(frame: &Frame) -> Vec<f64> {
    let c = frame.channels();
    frame.data().chunks(c).map(|px| px.iter().sum::<f64>() / c as f64).collect()
}

/// Full-search block matching by sum of absolute differences.
///
/// Candidates that would read outside the previous frame are not
/// considered. Among equal costs the zero vector wins, then the
/// lexicographically smallest `(dy, dx)`.
pub fn estimate_motion(frames: &[Frame], block_size: usize, search_radius: usize) -> Result<MotionField> {
    if frames.len() < 2 {
        return Err(Error::param("motion estimation needs at least two frames"));
    }
    if block_size < 4 {
        return Err(Error::param(format!("block size must be at least 4, got {block_size}")));
    }
    let first = &frames[0];
    if let Some(i) = frames.iter().position(|f| f.width() != first.width() || f.height() != first.height()) {
        return Err(Error::shape(format!("frame {i} differs in size from frame 0")));
    }
    let (w, h) = (first.width(), first.height());
    let grid_w = w.div_ceil(block_size);
    let grid_h = h.div_ceil(block_size);
    let lumas: Vec<Vec<f64>> = frames.iter().map(luma).collect();
    let r = search_radius as isize;

    let mut out = vec![vec![MotionVector::ZERO; grid_w * grid_h]];
    for t in 1..frames.len() {
        let (prev, cur) = (&lumas[t - 1], &lumas[t]);
        let grid: Vec<MotionVector> = (0..grid_w * grid_h)
            .into_par_iter()
            .map(|cell| {
                let x0 = (cell % grid_w) * block_size;
                let y0 = (cell / grid_w) * block_size;
                let bw = block_size.min(w - x0);
                let bh = block_size.min(h - y0);
                let sad = |dx: isize, dy: isize| -> f64 {
                    let mut acc = 0.0;
                    for row in 0..bh {
                        let cy = y0 + row;
                        let py = (cy as isize - dy) as usize;
                        for col in 0..bw {
                            let cx = x0 + col;
                            let px = (cx as isize - dx) as usize;
                            acc += (cur[cy * w + cx] - prev[py * w + px]).abs();
                        }
                    }
                    acc
                };
                let mut best = (sad(0, 0), 0isize, 0isize);
                for dy in -r..=r {
                    let top = y0 as isize - dy;
                    if top < 0 || top + bh as isize > h as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let left = x0 as isize - dx;
                        if left < 0 || left + bw as isize > w as isize || (dx == 0 && dy == 0) {
                            continue;
                        }
                        let cost = sad(dx, dy);
                        if cost < best.0 {
                            best = (cost, dy, dx);
                        }
                    }
                }
                MotionVector::new(best.2 as f64, best.1 as f64)
            })
            .collect();
        out.push(grid);
    }
    MotionField::new(w, h, block_size, out)
}

const MAGIC: &[u8; 4] = b"MSMF";
const VERSION: u32 = 1;

/// Binary layout, little-endian: magic `MSMF`, `u32` version (1), `u32`
/// frame width, frame height, block size, grid width, grid height, frame
/// count, then per frame the row-major grid of `(dx, dy)` as `f64` pairs.
pub fn encode_motion_field(field: &MotionField) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + field.frames.len() * field.grid_width * field.grid_height * 16);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        field.frame_width as u32,
        field.frame_height as u32,
        field.block_size as u32,
        field.grid_width as u32,
        field.grid_height as u32,
        field.frames.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for grid in &field.frames {
        for v in grid {
            out.extend_from_slice(&v.dx.to_le_bytes());
            out.extend_from_slice(&v.dy.to_le_bytes());
        }
    }
    out
}

pub fn decode_motion_field(bytes: &[u8]) -> Result<MotionField> {
    let bad = |m: &str| Error::Format(format!("motion field: {m}"));
    if bytes.len() < 32 || &bytes[..4] != MAGIC {
        return Err(bad("missing MSMF header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    if word(0) as u32 != VERSION {
        return Err(bad(&format!("unsupported version {}", word(0))));
    }
    let (fw, fh, block, gw, gh, n) = (word(1), word(2), word(3), word(4), word(5), word(6));
    if block == 0 || gw != fw.div_ceil(block) || gh != fh.div_ceil(block) {
        return Err(bad("grid does not match frame and block size"));
    }
    let cells = gw * gh;
    let expected = cells.checked_mul(n).and_then(|c| c.checked_mul(16)).map(|b| b + 32);
    if expected != Some(bytes.len()) {
        return Err(bad(&format!("expected {:?} bytes, found {}", expected, bytes.len())));
    }
    let float = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let frames = (0..n)
        .map(|t| {
            (0..cells)
                .map(|c| {
                    let off = 32 + (t * cells + c) * 16;
                    MotionVector::new(float(off), float(off + 8))
                })
                .collect()
        })
        .collect();
    MotionField::new(fw, fh, block, frames)
}
