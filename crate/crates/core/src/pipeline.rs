//! Source clip to tokenizable clip: square signer crop, resample to the
//! output size, trim resting frames at both ends, keep an even frame count.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{classify_handedness, trim_bounds, Handedness};
use crate::ingest::{crop_to_signer, BBox, ClipBundle, ClipMeta};

/// What preprocessing did to one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimReport {
    pub clip_id: String,
    pub frames_in: usize,
    pub frames_out: usize,
    pub front_trim: usize,
    pub back_trim: usize,
    /// One extra trailing frame dropped to make the count even.
    pub parity_trim: usize,
    pub handedness: Handedness,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub bundle: ClipBundle,
    pub report: TrimReport,
}

/// Crops, trims and classifies a source clip. Without boxes the whole
/// frame is the signer box. Output frames keep their source indices.
pub fn preprocess(source: &ClipBundle, boxes: Option<&[Option<BBox>]>, cfg: &PipelineConfig) -> Result<Preprocessed> {
    let meta = &source.meta;
    let frames_in = source.keypoints.len();
    if frames_in == 0 {
        return Err(Error::EmptyClip);
    }
    let full = [Some(BBox::new(0.0, 0.0, meta.width as f64, meta.height as f64))];
    let boxes = boxes.unwrap_or(&full);
    let crop = crop_to_signer(boxes, meta.width, meta.height, cfg.output_size)?;
    let keypoints: Vec<_> = source.keypoints.iter().map(|k| crop.remap_keypoints(k)).collect();

    let (front, back) = trim_bounds(&keypoints, cfg);
    let kept = frames_in.saturating_sub(front + back);
    let parity = kept % 2;
    let kept = kept - parity;
    if kept < 2 {
        return Err(Error::ClipTooShort { frames: kept });
    }
    let range = front..front + kept;
    let keypoints = keypoints[range.clone()].to_vec();
    let segments = source.segments[range].iter().map(|s| crop.remap_segments(s)).collect();
    let diagonal = cfg.output_size as f64 * std::f64::consts::SQRT_2;
    let handedness = classify_handedness(&keypoints, diagonal, cfg);
    let bundle = ClipBundle {
        meta: ClipMeta::new(meta.clip_id.clone(), kept, cfg.output_size, cfg.output_size),
        keypoints,
        segments,
    };
    Ok(Preprocessed {
        bundle,
        report: TrimReport {
            clip_id: meta.clip_id.clone(),
            frames_in,
            frames_out: kept,
            front_trim: front,
            back_trim: back,
            parity_trim: parity,
            handedness,
        },
    })
}
