//! Synthetic signer clips for tests, benchmarks and demos.
//!
//! A clip is drawn from a simple stick figure: shoulders, elbows and wrists
//! as keypoints, hands as square blobs and arms as thick polylines in the
//! segmentation. Moving hands trace circles in front of the chest; resting
//! arms hang straight down.

use std::path::{Path, PathBuf};

use crate::cli::manifest::{render_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::ingest::{
    write_atomic, write_bundle, ClipBundle, ClipMeta, Keypoint, KeypointFrame, PartLabel, SegmentFrame, Side,
    KEYPOINT_COUNT,
};
use crate::rng::MaskRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    TwoHanded,
    /// Only this hand moves; the other arm hangs at rest.
    OneHanded(Side),
    /// Hands undetected and unlabelled.
    NoHands,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub clip_id: String,
    pub frames: usize,
    pub size: usize,
    pub motion: Motion,
    /// Moving hands circle close to the body centre line so their regions
    /// overlap.
    pub overlapping: bool,
    /// Leading frames with both arms hanging.
    pub lead_in: usize,
    /// Trailing frames with both arms hanging.
    pub lead_out: usize,
    /// Varies phase, radius and blob sizes.
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(clip_id: impl Into<String>, motion: Motion) -> Self {
        SynthSpec {
            clip_id: clip_id.into(),
            frames: 32,
            size: 224,
            motion,
            overlapping: false,
            lead_in: 0,
            lead_out: 0,
            seed: 0,
        }
    }
}

struct Figure {
    shoulder: [(f64, f64); 2],
    elbow: [(f64, f64); 2],
    wrist: [(f64, f64); 2],
    hand_visible: [bool; 2],
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn pose(spec: &SynthSpec, frame: usize, phase: f64, radius: f64) -> Figure {
    let s = spec.size as f64;
    let shoulder = [(0.35 * s, 0.3 * s), (0.65 * s, 0.3 * s)];
    let hang_elbow = |i: usize| (shoulder[i].0, shoulder[i].1 + 0.2 * s);
    let hang_wrist = |i: usize| (shoulder[i].0, shoulder[i].1 + 0.4 * s);
    let resting = frame < spec.lead_in || frame >= spec.frames - spec.lead_out;
    let moving = |side: Side| {
        !resting
            && match spec.motion {
                Motion::TwoHanded => true,
                Motion::OneHanded(m) => m == side,
                Motion::NoHands => false,
            }
    };
    let mut fig = Figure {
        shoulder,
        elbow: [hang_elbow(0), hang_elbow(1)],
        wrist: [hang_wrist(0), hang_wrist(1)],
        hand_visible: [spec.motion != Motion::NoHands; 2],
    };
    let angle = phase + frame as f64 * std::f64::consts::TAU / 12.0;
    let spread = if spec.overlapping { 0.01 } else { 0.12 };
    for side in [Side::Left, Side::Right] {
        if !moving(side) {
            continue;
        }
        let i = side_slot(side);
        let sign = if side == Side::Left { -1.0 } else { 1.0 };
        let centre = (0.5 * s + sign * spread * s, 0.5 * s);
        // Overlapping hands share one circle; separated hands mirror each other.
        let swing = if spec.overlapping { 1.0 } else { sign };
        let wrist = (centre.0 + swing * radius * angle.cos(), centre.1 + radius * angle.sin());
        fig.wrist[i] = wrist;
        fig.elbow[i] = (
            (shoulder[i].0 + wrist.0) / 2.0 + sign * 0.08 * s,
            (shoulder[i].1 + wrist.1) / 2.0 + 0.08 * s,
        );
    }
    fig
}

fn keypoints(fig: &Figure, index: usize) -> KeypointFrame {
    let mut points = [Keypoint::new(0.0, 0.0, 0.9); KEYPOINT_COUNT];
    let centre = ((fig.shoulder[0].0 + fig.shoulder[1].0) / 2.0, fig.shoulder[0].1);
    points[0] = Keypoint::new(centre.0, centre.1 - 40.0, 0.95);
    for side in [Side::Left, Side::Right] {
        let i = side_slot(side);
        let at = |p: (f64, f64)| Keypoint::new(p.0, p.1, 0.95);
        points[side.shoulder()] = at(fig.shoulder[i]);
        points[side.elbow()] = at(fig.elbow[i]);
        points[side.wrist()] = at(fig.wrist[i]);
        // Hip, knee and ankle below the shoulder.
        for (k, drop) in [(7, 0.45), (9, 0.7), (11, 0.95)] {
            let idx = k + i;
            points[idx] = Keypoint::new(fig.shoulder[i].0, fig.shoulder[i].1 + drop * 224.0, 0.8);
        }
        let conf = if fig.hand_visible[i] { 0.9 } else { 0.0 };
        for (j, idx) in side.hand().enumerate() {
            let a = j as f64 * 0.3;
            points[idx] = Keypoint::new(
                fig.wrist[i].0 + 6.0 * a.cos() * (j > 0) as u8 as f64,
                fig.wrist[i].1 + 6.0 * a.sin() * (j > 0) as u8 as f64,
                conf,
            );
        }
    }
    KeypointFrame::new(index, points)
}

fn paint_segment(seg: &mut SegmentFrame, a: (f64, f64), b: (f64, f64), half_width: f64, label: PartLabel) {
    let (w, h) = (seg.width as f64, seg.height as f64);
    let x0 = (a.0.min(b.0) - half_width).floor().clamp(0.0, w) as usize;
    let x1 = (a.0.max(b.0) + half_width).ceil().clamp(0.0, w) as usize;
    let y0 = (a.1.min(b.1) - half_width).floor().clamp(0.0, h) as usize;
    let y1 = (a.1.max(b.1) + half_width).ceil().clamp(0.0, h) as usize;
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = (dx * dx + dy * dy).max(1e-12);
    for y in y0..y1 {
        for x in x0..x1 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
            if (px - qx).hypot(py - qy) <= half_width {
                seg.set(x, y, label);
            }
        }
    }
}

fn segments(fig: &Figure, index: usize, size: usize, hand_half: f64) -> SegmentFrame {
    let mut seg = SegmentFrame::background(index, size, size);
    let s = size as f64;
    // Torso block between the shoulders.
    let torso = (
        (fig.shoulder[0].0) as usize,
        (fig.shoulder[0].1) as usize,
        (fig.shoulder[1].0) as usize,
        (0.8 * s) as usize,
    );
    seg.fill_rect(torso.0, torso.1, torso.2, torso.3, PartLabel::OtherBody);
    for side in [Side::Left, Side::Right] {
        let i = side_slot(side);
        let arm = match side {
            Side::Left => PartLabel::LeftArm,
            Side::Right => PartLabel::RightArm,
        };
        paint_segment(&mut seg, fig.shoulder[i], fig.elbow[i], 0.025 * s, arm);
        paint_segment(&mut seg, fig.elbow[i], fig.wrist[i], 0.02 * s, arm);
    }
    for side in [Side::Left, Side::Right] {
        let i = side_slot(side);
        if !fig.hand_visible[i] {
            continue;
        }
        let hand = match side {
            Side::Left => PartLabel::LeftHand,
            Side::Right => PartLabel::RightHand,
        };
        let (cx, cy) = fig.wrist[i];
        let clamp = |v: f64| v.clamp(0.0, s) as usize;
        seg.fill_rect(
            clamp(cx - hand_half),
            clamp(cy - hand_half),
            clamp(cx + hand_half),
            clamp(cy + hand_half),
            hand,
        );
    }
    seg
}

/// Builds a validated-shape clip bundle from a spec.
pub fn clip(spec: &SynthSpec) -> ClipBundle {
    let mut rng = MaskRng::new(spec.seed);
    let phase = rng.below(360) as f64 * std::f64::consts::PI / 180.0;
    let radius = spec.size as f64 * (0.06 + rng.below(40) as f64 / 1000.0);
    let hand_half = spec.size as f64 * (0.03 + rng.below(20) as f64 / 1000.0);
    let hand_half = if spec.overlapping { 2.0 * hand_half } else { hand_half };
    let mut kps = Vec::with_capacity(spec.frames);
    let mut segs = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let fig = pose(spec, f, phase, radius);
        kps.push(keypoints(&fig, f));
        segs.push(segments(&fig, f, spec.size, hand_half));
    }
    ClipBundle {
        meta: ClipMeta::new(spec.clip_id.clone(), spec.frames, spec.size, spec.size),
        keypoints: kps,
        segments: segs,
    }
}

/// Writes each clip as a bundle directory under `dir` plus a
/// `manifest.jsonl` listing them, and returns the manifest path.
pub fn write_corpus(dir: &Path, specs: &[SynthSpec]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(specs.len());
    for spec in specs {
        let bundle = clip(spec);
        let clip_dir = dir.join(&spec.clip_id);
        std::fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;
        let entry = ManifestEntry::bundle(&spec.clip_id, &clip_dir);
        let mut keypoints = Vec::new();
        let mut segments = Vec::new();
        let meta = write_bundle(&bundle, &mut keypoints, &mut segments).map_err(|e| Error::io(&clip_dir, e))?;
        write_atomic(&entry.keypoints, &keypoints)?;
        write_atomic(&entry.segments, &segments)?;
        write_atomic(&entry.meta, meta.to_json().as_bytes())?;
        entries.push(entry);
    }
    let manifest = dir.join("manifest.jsonl");
    write_atomic(&manifest, render_manifest(&entries, dir).as_bytes())?;
    Ok(manifest)
}

/// A mixed corpus: mostly two-handed clips with a share of overlapping,
/// one-handed and hand-free ones, some with resting frames at either end.
pub fn corpus_specs(count: usize, prefix: &str) -> Vec<SynthSpec> {
    (0..count)
        .map(|i| {
            let motion = match i % 7 {
                0..=2 => Motion::TwoHanded,
                3 => Motion::OneHanded(Side::Left),
                4 => Motion::OneHanded(Side::Right),
                5 => Motion::TwoHanded,
                _ => Motion::NoHands,
            };
            SynthSpec {
                overlapping: i % 7 == 5,
                seed: i as u64,
                ..SynthSpec::new(format!("{prefix}{i:04}"), motion)
            }
        })
        .collect()
}
