//! Detector outputs in, validated clips out.
//!
//! Three external documents describe a clip: a line-delimited keypoint
//! document, a binary `SGMT` segmentation document and a JSON metadata
//! record. Optional per-frame signer boxes drive the square crop.

use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::LabelMap;
use crate::error::{Error, Result};

pub const KEYPOINT_COUNT: usize = 55;
pub const BODY_KEYPOINTS: usize = 13;
pub const HAND_KEYPOINTS: usize = 21;

pub const NOSE: usize = 0;
pub const LEFT_SHOULDER: usize = 1;
pub const RIGHT_SHOULDER: usize = 2;
pub const LEFT_ELBOW: usize = 3;
pub const RIGHT_ELBOW: usize = 4;
pub const LEFT_WRIST: usize = 5;
pub const RIGHT_WRIST: usize = 6;
pub const LEFT_HAND_START: usize = BODY_KEYPOINTS;
pub const RIGHT_HAND_START: usize = BODY_KEYPOINTS + HAND_KEYPOINTS;

const SEGMENT_MAGIC: &[u8; 4] = b"SGMT";
pub const SEGMENT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn shoulder(self) -> usize {
        match self {
            Side::Left => LEFT_SHOULDER,
            Side::Right => RIGHT_SHOULDER,
        }
    }

    pub fn elbow(self) -> usize {
        match self {
            Side::Left => LEFT_ELBOW,
            Side::Right => RIGHT_ELBOW,
        }
    }

    pub fn wrist(self) -> usize {
        match self {
            Side::Left => LEFT_WRIST,
            Side::Right => RIGHT_WRIST,
        }
    }

    /// Index range of this side's 21 hand keypoints; the first is the hand root.
    pub fn hand(self) -> std::ops::Range<usize> {
        let start = match self {
            Side::Left => LEFT_HAND_START,
            Side::Right => RIGHT_HAND_START,
        };
        start..start + HAND_KEYPOINTS
    }
}

/// Body-part class codes carried by segmentation grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum PartLabel {
    #[default]
    Background = 0,
    LeftHand = 1,
    RightHand = 2,
    LeftArm = 3,
    RightArm = 4,
    OtherBody = 5,
}

impl PartLabel {
    pub fn from_code(code: u8) -> Option<PartLabel> {
        Some(match code {
            0 => PartLabel::Background,
            1 => PartLabel::LeftHand,
            2 => PartLabel::RightHand,
            3 => PartLabel::LeftArm,
            4 => PartLabel::RightArm,
            5 => PartLabel::OtherBody,
            _ => return None,
        })
    }

    /// The same part on the other side of the body.
    pub fn mirrored(self) -> PartLabel {
        match self {
            PartLabel::LeftHand => PartLabel::RightHand,
            PartLabel::RightHand => PartLabel::LeftHand,
            PartLabel::LeftArm => PartLabel::RightArm,
            PartLabel::RightArm => PartLabel::LeftArm,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Keypoint { x, y, confidence }
    }

    pub fn is_present(&self, threshold: f64) -> bool {
        self.confidence >= threshold
    }

    pub fn distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// 13 body keypoints, then 21 left-hand and 21 right-hand keypoints.
///
/// Body order: nose, left/right shoulder, left/right elbow, left/right wrist,
/// left/right hip, left/right knee, left/right ankle.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub frame_index: usize,
    pub points: [Keypoint; KEYPOINT_COUNT],
}

impl KeypointFrame {
    pub fn new(frame_index: usize, points: [Keypoint; KEYPOINT_COUNT]) -> Self {
        KeypointFrame { frame_index, points }
    }

    pub fn hand(&self, side: Side) -> &[Keypoint] {
        &self.points[side.hand()]
    }

    /// True when any of the side's hand keypoints clears the threshold.
    pub fn hand_present(&self, side: Side, threshold: f64) -> bool {
        self.hand(side).iter().any(|k| k.is_present(threshold))
    }

    /// Horizontal flip of a `width`-pixel frame with left/right parts swapped.
    pub fn mirrored(&self, width: usize) -> KeypointFrame {
        let flip = |k: &Keypoint| Keypoint::new(width as f64 - 1.0 - k.x, k.y, k.confidence);
        let mut points = self.points;
        for (i, p) in points.iter_mut().enumerate() {
            *p = flip(&self.points[mirror_index(i)]);
        }
        KeypointFrame::new(self.frame_index, points)
    }
}

fn mirror_index(i: usize) -> usize {
    match i {
        NOSE => NOSE,
        i if i < BODY_KEYPOINTS => {
            // Paired body joints alternate left, right starting at index 1.
            if i % 2 == 1 {
                i + 1
            } else {
                i - 1
            }
        }
        i if i < RIGHT_HAND_START => i + HAND_KEYPOINTS,
        i => i - HAND_KEYPOINTS,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFrame {
    pub frame_index: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major, `height * width` entries.
    pub labels: Vec<PartLabel>,
}

impl SegmentFrame {
    pub fn background(frame_index: usize, height: usize, width: usize) -> Self {
        SegmentFrame {
            frame_index,
            height,
            width,
            labels: vec![PartLabel::Background; height * width],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> PartLabel {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: PartLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, label: PartLabel) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, label);
            }
        }
    }

    pub fn mirrored(&self) -> SegmentFrame {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y).mirrored());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub clip_id: String,
    pub frame_count: usize,
    pub height: usize,
    pub width: usize,
    /// Half-open `[start, end)` range of frames that remain after trimming.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_range: Option<(usize, usize)>,
}

impl ClipMeta {
    pub fn new(clip_id: impl Into<String>, frame_count: usize, height: usize, width: usize) -> Self {
        ClipMeta {
            clip_id: clip_id.into(),
            frame_count,
            height,
            width,
            trim_range: None,
        }
    }

    pub fn active_range(&self) -> std::ops::Range<usize> {
        match self.trim_range {
            Some((start, end)) => start..end,
            None => 0..self.frame_count,
        }
    }

    pub fn active_frames(&self) -> usize {
        self.active_range().len()
    }

    /// Checks what any clip straight from a detector must satisfy.
    pub fn validate_source(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::InvalidMeta("frame_count is zero".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidMeta("zero frame dimension".into()));
        }
        if let Some((start, end)) = self.trim_range {
            if start >= end || end > self.frame_count {
                return Err(Error::InvalidMeta(format!(
                    "trim range [{start}, {end}) outside [0, {})",
                    self.frame_count
                )));
            }
        }
        Ok(())
    }

    /// Full invariants of a tokenizable clip: an even number (at least two)
    /// of active frames and dimensions divisible by the 16-pixel patch.
    pub fn validate(&self) -> Result<()> {
        self.validate_source()?;
        let active = self.active_frames();
        if active < 2 || !active.is_multiple_of(2) {
            return Err(Error::InvalidMeta(format!(
                "{active} active frames; need an even count of at least 2"
            )));
        }
        if !self.height.is_multiple_of(16) || !self.width.is_multiple_of(16) {
            return Err(Error::InvalidMeta(format!(
                "{}x{} is not divisible by 16",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("meta", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("meta serializes")
    }
}

/// A validated clip: metadata plus one keypoint and one segment frame per
/// active frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipBundle {
    pub meta: ClipMeta,
    pub keypoints: Vec<KeypointFrame>,
    pub segments: Vec<SegmentFrame>,
}

impl ClipBundle {
    /// Horizontal flip with left/right parts swapped.
    pub fn mirrored(&self) -> ClipBundle {
        ClipBundle {
            meta: self.meta.clone(),
            keypoints: self.keypoints.iter().map(|k| k.mirrored(self.meta.width)).collect(),
            segments: self.segments.iter().map(SegmentFrame::mirrored).collect(),
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct KeypointRecord {
    frame: usize,
    points: Vec<Vec<f64>>,
}

/// Parses a keypoint document holding exactly `frame_count` frames numbered
/// contiguously from zero.
pub fn parse_keypoints(text: &str, frame_count: usize) -> Result<Vec<KeypointFrame>> {
    let mut frames = Vec::with_capacity(frame_count);
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: KeypointRecord =
            serde_json::from_str(line).map_err(|e| Error::format("keypoint", format!("line {}: {e}", lineno + 1)))?;
        let expected = frames.len();
        if record.frame > expected {
            return Err(Error::MissingFrame { frame: expected });
        }
        if record.frame < expected {
            return Err(Error::schema(
                Some(record.frame),
                "duplicate or out-of-order frame index",
            ));
        }
        if record.frame >= frame_count {
            return Err(Error::schema(
                Some(record.frame),
                format!("clip declares only {frame_count} frames"),
            ));
        }
        frames.push(keypoint_frame_from_record(record)?);
    }
    if frames.len() < frame_count {
        return Err(Error::MissingFrame { frame: frames.len() });
    }
    Ok(frames)
}

fn keypoint_frame_from_record(record: KeypointRecord) -> Result<KeypointFrame> {
    let frame = record.frame;
    if record.points.len() != KEYPOINT_COUNT {
        return Err(Error::schema(
            Some(frame),
            format!("expected {KEYPOINT_COUNT} keypoints, found {}", record.points.len()),
        ));
    }
    let mut points = [Keypoint::default(); KEYPOINT_COUNT];
    for (i, (slot, p)) in points.iter_mut().zip(&record.points).enumerate() {
        let &[x, y, c] = p.as_slice() else {
            return Err(Error::schema(
                Some(frame),
                format!("keypoint {i} has {} components, expected 3", p.len()),
            ));
        };
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::schema(Some(frame), format!("keypoint {i} is not finite")));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::schema(
                Some(frame),
                format!("keypoint {i} confidence {c} outside [0, 1]"),
            ));
        }
        *slot = Keypoint::new(x, y, c);
    }
    Ok(KeypointFrame::new(frame, points))
}

pub fn serialize_keypoints(frames: &[KeypointFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        let record = KeypointRecord {
            frame: f.frame_index,
            points: f.points.iter().map(|k| vec![k.x, k.y, k.confidence]).collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("keypoints serialize"));
        out.push('\n');
    }
    out
}

/// Parses an `SGMT` document of `frame_count` frames of `height x width`
/// class codes. Codes pass through `label_map` when one is given.
pub fn parse_segments(
    bytes: &[u8],
    frame_count: usize,
    height: usize,
    width: usize,
    label_map: Option<&LabelMap>,
) -> Result<Vec<SegmentFrame>> {
    if bytes.len() < 6 || &bytes[..4] != SEGMENT_MAGIC {
        return Err(Error::format("segment", "missing SGMT magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SEGMENT_VERSION {
        return Err(Error::format("segment", format!("unsupported version {version}")));
    }
    let payload = &bytes[6..];
    let plane = height * width;
    if plane == 0 || !payload.len().is_multiple_of(plane) {
        return Err(Error::DimensionMismatch {
            expected: format!("{frame_count} frames of {height}x{width}"),
            found: format!("{} bytes of class codes", payload.len()),
        });
    }
    let found = payload.len() / plane;
    if found < frame_count {
        return Err(Error::MissingFrame { frame: found });
    }
    if found > frame_count {
        return Err(Error::schema(
            Some(frame_count),
            format!("{found} segment frames for a {frame_count}-frame clip"),
        ));
    }
    payload
        .chunks_exact(plane)
        .enumerate()
        .map(|(frame, codes)| {
            let labels = codes
                .iter()
                .map(|&code| {
                    let label = match label_map {
                        Some(map) => map.get(code),
                        None => PartLabel::from_code(code),
                    };
                    label.ok_or_else(|| Error::schema(Some(frame), format!("unknown label code {code}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SegmentFrame {
                frame_index: frame,
                height,
                width,
                labels,
            })
        })
        .collect()
}

pub fn serialize_segments(frames: &[SegmentFrame]) -> Vec<u8> {
    let plane: usize = frames.first().map_or(0, |f| f.labels.len());
    let mut out = Vec::with_capacity(6 + plane * frames.len());
    out.extend_from_slice(SEGMENT_MAGIC);
    out.extend_from_slice(&SEGMENT_VERSION.to_le_bytes());
    for f in frames {
        out.extend(f.labels.iter().map(|&l| l as u8));
    }
    out
}

fn check_segment_dims(segments: &[SegmentFrame], meta: &ClipMeta) -> Result<()> {
    for s in segments {
        if s.height != meta.height || s.width != meta.width {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", meta.height, meta.width),
                found: format!("{}x{}", s.height, s.width),
            });
        }
    }
    Ok(())
}

fn parse_frames(
    keypoint_doc: &str,
    segment_doc: &[u8],
    meta: &ClipMeta,
    label_map: Option<&LabelMap>,
) -> Result<ClipBundle> {
    let mut keypoints = parse_keypoints(keypoint_doc, meta.frame_count)?;
    let mut segments = parse_segments(segment_doc, meta.frame_count, meta.height, meta.width, label_map)?;
    check_segment_dims(&segments, meta)?;
    let range = meta.active_range();
    keypoints.truncate(range.end);
    keypoints.drain(..range.start);
    segments.truncate(range.end);
    segments.drain(..range.start);
    Ok(ClipBundle {
        meta: meta.clone(),
        keypoints,
        segments,
    })
}

/// Parses a tokenizable clip bundle. Only frames inside the trim range are
/// kept; they retain their original frame indices.
pub fn parse_clip(
    keypoint_doc: &str,
    segment_doc: &[u8],
    meta: &ClipMeta,
    label_map: Option<&LabelMap>,
) -> Result<ClipBundle> {
    meta.validate()?;
    parse_frames(keypoint_doc, segment_doc, meta, label_map)
}

/// Like [`parse_clip`] but for raw detector output of any frame size.
pub fn parse_source_clip(
    keypoint_doc: &str,
    segment_doc: &[u8],
    meta: &ClipMeta,
    label_map: Option<&LabelMap>,
) -> Result<ClipBundle> {
    meta.validate_source()?;
    parse_frames(keypoint_doc, segment_doc, meta, label_map)
}

/// Writes the three documents of a bundle. Frames are renumbered from zero
/// and the trim range is dropped, so the output parses back to the same
/// active frames.
pub fn write_bundle(
    bundle: &ClipBundle,
    keypoints: &mut impl std::io::Write,
    segments: &mut impl std::io::Write,
) -> std::io::Result<ClipMeta> {
    let renumbered: Vec<KeypointFrame> = bundle
        .keypoints
        .iter()
        .enumerate()
        .map(|(i, k)| KeypointFrame::new(i, k.points))
        .collect();
    keypoints.write_all(serialize_keypoints(&renumbered).as_bytes())?;
    segments.write_all(&serialize_segments(&bundle.segments))?;
    let mut meta = bundle.meta.clone();
    meta.frame_count = bundle.keypoints.len();
    meta.trim_range = None;
    Ok(meta)
}

/// Axis-aligned signer box in original-frame pixels, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    fn clamped(&self, width: usize, height: usize) -> BBox {
        BBox {
            x0: self.x0.clamp(0.0, width as f64),
            y0: self.y0.clamp(0.0, height as f64),
            x1: self.x1.clamp(0.0, width as f64),
            y1: self.y1.clamp(0.0, height as f64),
        }
    }

    fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRecord {
    frame: usize,
    #[serde(rename = "box")]
    bbox: Option<[f64; 4]>,
}

/// Parses a line-delimited box document, `{"frame": i, "box": [x0,y0,x1,y1]}`
/// or `"box": null`. Frames without a line have no detection.
pub fn parse_boxes(text: &str, frame_count: usize) -> Result<Vec<Option<BBox>>> {
    let mut boxes = vec![None; frame_count];
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: BoxRecord =
            serde_json::from_str(line).map_err(|e| Error::format("box", format!("line {}: {e}", lineno + 1)))?;
        let slot = boxes
            .get_mut(record.frame)
            .ok_or_else(|| Error::schema(Some(record.frame), "box frame outside clip"))?;
        *slot = record.bbox.map(|[x0, y0, x1, y1]| BBox::new(x0, y0, x1, y1));
    }
    Ok(boxes)
}

/// Maps original-frame pixels onto a square `output_size` crop:
/// `p' = (p - origin) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub scale: f64,
    pub output_size: usize,
}

impl CropTransform {
    pub fn identity(size: usize) -> Self {
        CropTransform {
            origin_x: 0.0,
            origin_y: 0.0,
            scale: 1.0,
            output_size: size,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin_x) * self.scale, (y - self.origin_y) * self.scale)
    }

    pub fn remap_keypoints(&self, frame: &KeypointFrame) -> KeypointFrame {
        let mut out = frame.clone();
        for k in out.points.iter_mut() {
            let (x, y) = self.apply(k.x, k.y);
            k.x = x;
            k.y = y;
        }
        out
    }

    /// Nearest-neighbour resample of a segment grid into the crop. Crop
    /// pixels that fall outside the source frame are background.
    pub fn remap_segments(&self, frame: &SegmentFrame) -> SegmentFrame {
        let size = self.output_size;
        let source_index = |u: usize, origin: f64, limit: usize| -> Option<usize> {
            let s = (origin + (u as f64 + 0.5) / self.scale).floor();
            (s >= 0.0 && s < limit as f64).then_some(s as usize)
        };
        let cols: Vec<Option<usize>> = (0..size).map(|u| source_index(u, self.origin_x, frame.width)).collect();
        let mut out = SegmentFrame::background(frame.frame_index, size, size);
        for v in 0..size {
            let Some(sy) = source_index(v, self.origin_y, frame.height) else {
                continue;
            };
            let row = &frame.labels[sy * frame.width..(sy + 1) * frame.width];
            let dst = &mut out.labels[v * size..(v + 1) * size];
            for (d, sx) in dst.iter_mut().zip(&cols) {
                if let Some(sx) = sx {
                    *d = row[*sx];
                }
            }
        }
        out
    }
}

/// One shared square crop for the whole clip: the union of all per-frame
/// boxes, padded to a square about its centre and scaled to `output_size`.
pub fn crop_to_signer(
    boxes: &[Option<BBox>],
    width: usize,
    height: usize,
    output_size: usize,
) -> Result<CropTransform> {
    let mut union: Option<BBox> = None;
    for (frame, b) in boxes.iter().enumerate() {
        let Some(b) = b else { continue };
        let b = b.clamped(width, height);
        if b.area().is_nan() || b.area() <= 0.0 {
            return Err(Error::EmptyBox { frame });
        }
        union = Some(union.map_or(b, |u| u.union(&b)));
    }
    let u = union.ok_or(Error::NoBoxes)?;
    let side = (u.x1 - u.x0).max(u.y1 - u.y0);
    let cx = (u.x0 + u.x1) / 2.0;
    let cy = (u.y0 + u.y1) / 2.0;
    Ok(CropTransform {
        origin_x: cx - side / 2.0,
        origin_y: cy - side / 2.0,
        scale: output_size as f64 / side,
        output_size,
    })
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(std::path::Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
