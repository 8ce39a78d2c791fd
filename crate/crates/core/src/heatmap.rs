//! Keypoint heatmaps for the keypoint stream.
//!
//! Each keypoint with positive confidence contributes an isotropic Gaussian
//! with peak equal to its confidence; overlapping splats are combined with a
//! per-pixel maximum by default or a sum clipped at 1, so every value lies in
//! `[0, 1]`. Pixel `(x, y)` samples
//! the Gaussian at integer coordinates `(x, y)`, and splats are cut off five
//! standard deviations from their centre.

use ndarray::{s, Array2, Array3, Array4, ArrayViewMut2, Axis};
use rayon::prelude::*;

use crate::config::{ChannelPolicy, Composite, PipelineConfig};
use crate::error::{Error, Result};
use crate::ingest::{KeypointFrame, BODY_KEYPOINTS, KEYPOINT_COUNT, RIGHT_HAND_START};

const MAGIC: &[u8; 4] = b"SHMP";
/// Single-channel 224x224 dumps.
pub const HEATMAP_VERSION: u16 = 1;
/// Dumps carrying an explicit channel count and map size.
pub const HEATMAP_VERSION_EXTENDED: u16 = 2;
const DUMP_SIZE: usize = 224;
const CUTOFF_SIGMAS: f64 = 5.0;

/// Rendered maps for a clip, indexed `[frame, channel, y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapClip {
    pub maps: Array4<f32>,
    pub sigma: f64,
    pub policy: ChannelPolicy,
}

impl HeatmapClip {
    pub fn frames(&self) -> usize {
        self.maps.len_of(Axis(0))
    }

    pub fn channels(&self) -> usize {
        self.maps.len_of(Axis(1))
    }

    pub fn size(&self) -> usize {
        self.maps.len_of(Axis(2))
    }

    /// `SHMP` dump: magic, version u16, frame count u16, then for version 2
    /// channel count u16 and map size u16, then every value as a
    /// little-endian u16 `round(v * 65535)`, row-major. Version 1 is used for
    /// single-channel 224x224 clips, version 2 otherwise.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let frames = u16::try_from(self.frames())
            .map_err(|_| Error::ShapeMismatch(format!("{} frames exceed the dump header", self.frames())))?;
        let mut out = Vec::with_capacity(14 + 2 * self.maps.len());
        out.extend_from_slice(MAGIC);
        if self.channels() == 1 && self.size() == DUMP_SIZE {
            out.extend_from_slice(&HEATMAP_VERSION.to_le_bytes());
            out.extend_from_slice(&frames.to_le_bytes());
        } else {
            out.extend_from_slice(&HEATMAP_VERSION_EXTENDED.to_le_bytes());
            out.extend_from_slice(&frames.to_le_bytes());
            out.extend_from_slice(&(self.channels() as u16).to_le_bytes());
            out.extend_from_slice(&(self.size() as u16).to_le_bytes());
        }
        for &v in self.maps.iter() {
            out.extend_from_slice(&quantize(v).to_le_bytes());
        }
        Ok(out)
    }

    /// Decodes a dump into fixed-point-rounded maps. Sigma and policy are not
    /// stored; the policy is inferred from the channel count.
    pub fn from_bytes(bytes: &[u8], sigma: f64) -> Result<HeatmapClip> {
        let bad = |detail: &str| Error::format("heatmap", detail.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing SHMP magic"));
        }
        let u16_at = |at: usize| -> Result<usize> {
            bytes
                .get(at..at + 2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
                .ok_or_else(|| bad("truncated header"))
        };
        let version = u16_at(4)? as u16;
        let frames = u16_at(6)?;
        let (channels, size, body) = match version {
            HEATMAP_VERSION => (1, DUMP_SIZE, 8),
            HEATMAP_VERSION_EXTENDED => (u16_at(8)?, u16_at(10)?, 12),
            v => return Err(bad(&format!("unsupported version {v}"))),
        };
        let policy = match channels {
            1 => ChannelPolicy::Single,
            3 => ChannelPolicy::PerGroup,
            c => return Err(bad(&format!("unsupported channel count {c}"))),
        };
        let count = frames * channels * size * size;
        if bytes.len() != body + 2 * count {
            return Err(bad("payload length does not match header"));
        }
        let values: Vec<f32> = bytes[body..]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]) as f32 / 65535.0)
            .collect();
        let maps = Array4::from_shape_vec((frames, channels, size, size), values).map_err(|e| bad(&e.to_string()))?;
        Ok(HeatmapClip { maps, sigma, policy })
    }
}

fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16
}

/// Composites one Gaussian splat into `map`.
fn splat(map: &mut ArrayViewMut2<f32>, x: f64, y: f64, amplitude: f64, sigma: f64, composite: Composite) {
    let (h, w) = map.dim();
    let reach = CUTOFF_SIGMAS * sigma;
    let lo = |c: f64| (c - reach).ceil().max(0.0);
    let hi = |c: f64, n: usize| (c + reach).floor().min(n as f64 - 1.0);
    let (x0, x1, y0, y1) = (lo(x), hi(x, w), lo(y), hi(y, h));
    if !(x0 <= x1 && y0 <= y1) {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    for py in y0 as usize..=y1 as usize {
        let dy = py as f64 - y;
        for px in x0 as usize..=x1 as usize {
            let dx = px as f64 - x;
            let v = (amplitude * (-(dx * dx + dy * dy) * inv).exp()) as f32;
            let cell = &mut map[[py, px]];
            *cell = match composite {
                Composite::Max => cell.max(v),
                Composite::Sum => (*cell + v).min(1.0),
            };
        }
    }
}

fn group_of(keypoint: usize) -> usize {
    if keypoint < BODY_KEYPOINTS {
        0
    } else if keypoint < RIGHT_HAND_START {
        1
    } else {
        2
    }
}

fn render_into(frame: &KeypointFrame, mut out: ndarray::ArrayViewMut3<f32>, cfg: &PipelineConfig) {
    let channels = out.len_of(Axis(0));
    for k in 0..KEYPOINT_COUNT {
        let p = frame.points[k];
        if p.confidence > 0.0 {
            let ch = if channels == 1 { 0 } else { group_of(k) };
            let mut map = out.index_axis_mut(Axis(0), ch);
            splat(
                &mut map,
                p.x,
                p.y,
                p.confidence,
                cfg.heatmap_sigma,
                cfg.heatmap_composite,
            );
        }
    }
}

/// Single-channel heatmap of one frame at `cfg.output_size`.
pub fn render_heatmap(frame: &KeypointFrame, cfg: &PipelineConfig) -> Array2<f32> {
    let n = cfg.output_size;
    let mut map = Array3::zeros((1, n, n));
    render_into(frame, map.view_mut(), cfg);
    map.index_axis_move(Axis(0), 0)
}

/// Body, left-hand and right-hand maps of one frame.
pub fn render_heatmap_grouped(frame: &KeypointFrame, cfg: &PipelineConfig) -> Array3<f32> {
    let n = cfg.output_size;
    let mut maps = Array3::zeros((3, n, n));
    render_into(frame, maps.view_mut(), cfg);
    maps
}

/// Renders every frame under `cfg.heatmap_channels`, frames in parallel.
pub fn render_clip(frames: &[KeypointFrame], cfg: &PipelineConfig) -> Result<HeatmapClip> {
    if frames.is_empty() {
        return Err(Error::EmptyClip);
    }
    let n = cfg.output_size;
    let channels = cfg.heatmap_channels.channels();
    let rendered: Vec<Array3<f32>> = frames
        .par_iter()
        .map(|frame| {
            let mut out = Array3::zeros((channels, n, n));
            render_into(frame, out.view_mut(), cfg);
            out
        })
        .collect();
    let mut maps = Array4::zeros((frames.len(), channels, n, n));
    for (mut slot, frame) in maps.axis_iter_mut(Axis(0)).zip(&rendered) {
        slot.assign(frame);
    }
    Ok(HeatmapClip {
        maps,
        sigma: cfg.heatmap_sigma,
        policy: cfg.heatmap_channels,
    })
}

/// Row-major copy of one channel of one frame, for callers without ndarray.
pub fn frame_values(clip: &HeatmapClip, frame: usize, channel: usize) -> Vec<f32> {
    clip.maps.slice(s![frame, channel, .., ..]).iter().copied().collect()
}
