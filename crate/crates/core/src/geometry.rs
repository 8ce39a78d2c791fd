//! Keypoint-space predicates: arm hang, frame trimming, handedness and
//! region overlap.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::{Keypoint, KeypointFrame, Side};
use crate::tokenset::TokenSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPoseFeatures {
    /// Angle at the same-side shoulder between the opposite shoulder and the
    /// elbow, degrees.
    pub a1: f64,
    /// Angle at the elbow between shoulder and wrist, degrees.
    pub a2: f64,
    /// Shoulder to elbow, pixels.
    pub d1: f64,
    /// Elbow to wrist, pixels.
    pub d2: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Handedness {
    TwoHanded,
    OneHandedLeft,
    OneHandedRight,
    NoHands,
}

impl Handedness {
    pub fn moving_side(self) -> Option<Side> {
        match self {
            Handedness::OneHandedLeft => Some(Side::Left),
            Handedness::OneHandedRight => Some(Side::Right),
            _ => None,
        }
    }

    pub fn mirrored(self) -> Handedness {
        match self {
            Handedness::OneHandedLeft => Handedness::OneHandedRight,
            Handedness::OneHandedRight => Handedness::OneHandedLeft,
            other => other,
        }
    }
}

/// Angle at `vertex` between the rays to `a` and `b`, in degrees.
pub fn joint_angle(vertex: &Keypoint, a: &Keypoint, b: &Keypoint) -> f64 {
    let (ux, uy) = (a.x - vertex.x, a.y - vertex.y);
    let (vx, vy) = (b.x - vertex.x, b.y - vertex.y);
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    cross.abs().atan2(dot).to_degrees()
}

pub fn arm_pose_features(frame: &KeypointFrame, side: Side, presence_threshold: f64) -> Result<ArmPoseFeatures> {
    let joint = |index: usize, name: &'static str| -> Result<Keypoint> {
        let k = frame.points[index];
        if k.is_present(presence_threshold) {
            Ok(k)
        } else {
            Err(Error::MissingJoint(name))
        }
    };
    let (shoulder_name, other_name, elbow_name, wrist_name) = match side {
        Side::Left => ("left shoulder", "right shoulder", "left elbow", "left wrist"),
        Side::Right => ("right shoulder", "left shoulder", "right elbow", "right wrist"),
    };
    let shoulder = joint(side.shoulder(), shoulder_name)?;
    let other = joint(side.opposite().shoulder(), other_name)?;
    let elbow = joint(side.elbow(), elbow_name)?;
    let wrist = joint(side.wrist(), wrist_name)?;
    Ok(ArmPoseFeatures {
        a1: joint_angle(&shoulder, &other, &elbow),
        a2: joint_angle(&elbow, &shoulder, &wrist),
        d1: shoulder.distance(&elbow),
        d2: elbow.distance(&wrist),
        side,
    })
}

pub fn is_arm_hanging(f: &ArmPoseFeatures, cfg: &PipelineConfig) -> bool {
    let length_gap = (f.d1 - f.d2).abs() / f.d1.max(f.d2).max(1.0);
    (f.a1 - 90.0).abs() <= cfg.arm_angle1_tolerance
        && (f.a2 - 180.0).abs() <= cfg.arm_angle2_tolerance
        && length_gap <= cfg.arm_length_tolerance
}

/// Both arms hang naturally, or neither hand is detected.
pub fn frame_is_removable(frame: &KeypointFrame, cfg: &PipelineConfig) -> bool {
    let hanging = |side| {
        arm_pose_features(frame, side, cfg.presence_threshold)
            .map(|f| is_arm_hanging(&f, cfg))
            .unwrap_or(false)
    };
    let absent = |side| !frame.hand_present(side, cfg.presence_threshold);
    (hanging(Side::Left) && hanging(Side::Right)) || (absent(Side::Left) && absent(Side::Right))
}

/// Lengths of the maximal removable prefix and suffix. Interior frames are
/// never counted. When every frame is removable the whole clip is prefix.
pub fn trim_bounds(frames: &[KeypointFrame], cfg: &PipelineConfig) -> (usize, usize) {
    let removable: Vec<bool> = frames.iter().map(|f| frame_is_removable(f, cfg)).collect();
    let front = removable.iter().take_while(|&&r| r).count();
    if front == frames.len() {
        return (front, 0);
    }
    let back = removable.iter().rev().take_while(|&&r| r).count();
    (front, back)
}

/// Total distance travelled by the hand root across frames where it is
/// present, and the fraction of frames in which the hand is present.
fn hand_motion(frames: &[KeypointFrame], side: Side, threshold: f64) -> (f64, f64) {
    let root = side.hand().start;
    let mut path = 0.0;
    let mut last: Option<Keypoint> = None;
    let mut present = 0usize;
    for f in frames {
        if f.hand_present(side, threshold) {
            present += 1;
        }
        let k = f.points[root];
        if k.is_present(threshold) {
            if let Some(prev) = last {
                path += prev.distance(&k);
            }
            last = Some(k);
        }
    }
    let fraction = if frames.is_empty() {
        0.0
    } else {
        present as f64 / frames.len() as f64
    };
    (path, fraction)
}

/// Classifies a trimmed clip whose keypoints live in a crop with the given
/// diagonal.
pub fn classify_handedness(frames: &[KeypointFrame], crop_diagonal: f64, cfg: &PipelineConfig) -> Handedness {
    let moving = |side| {
        let (path, presence) = hand_motion(frames, side, cfg.presence_threshold);
        path > cfg.movement_threshold * crop_diagonal && presence > 0.5
    };
    match (moving(Side::Left), moving(Side::Right)) {
        (true, true) => Handedness::TwoHanded,
        (true, false) => Handedness::OneHandedLeft,
        (false, true) => Handedness::OneHandedRight,
        (false, false) => Handedness::NoHands,
    }
}

/// `|left ∩ right| / max(1, min(|left|, |right|))`.
pub fn overlap_ratio(left: &TokenSet, right: &TokenSet) -> f64 {
    let shared = left.intersection_len(right);
    shared as f64 / left.len().min(right.len()).max(1) as f64
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::{
        KEYPOINT_COUNT, LEFT_ELBOW, LEFT_SHOULDER, LEFT_WRIST, RIGHT_ELBOW, RIGHT_SHOULDER, RIGHT_WRIST,
    };

    fn kp(x: f64, y: f64) -> Keypoint {
        Keypoint::new(x, y, 1.0)
    }

    /// Both arms hanging straight down from shoulders at (60,40) and (160,40),
    /// hands visible.
    pub(crate) fn hanging_frame(index: usize) -> KeypointFrame {
        let mut points = [kp(110.0, 120.0); KEYPOINT_COUNT];
        points[LEFT_SHOULDER] = kp(60.0, 40.0);
        points[RIGHT_SHOULDER] = kp(160.0, 40.0);
        points[LEFT_ELBOW] = kp(60.0, 120.0);
        points[RIGHT_ELBOW] = kp(160.0, 120.0);
        points[LEFT_WRIST] = kp(60.0, 200.0);
        points[RIGHT_WRIST] = kp(160.0, 200.0);
        KeypointFrame::new(index, points)
    }

    /// Right forearm raised so the elbow angle is 90 degrees.
    pub(crate) fn raised_frame(index: usize) -> KeypointFrame {
        let mut f = hanging_frame(index);
        f.points[RIGHT_WRIST] = kp(80.0, 120.0);
        f
    }

    fn right_arm_frame(elbow: (f64, f64), wrist: (f64, f64)) -> KeypointFrame {
        let mut points = [kp(0.0, 0.0); KEYPOINT_COUNT];
        points[LEFT_SHOULDER] = kp(0.0, 0.0);
        points[RIGHT_SHOULDER] = kp(100.0, 0.0);
        points[RIGHT_ELBOW] = kp(elbow.0, elbow.1);
        points[RIGHT_WRIST] = kp(wrist.0, wrist.1);
        KeypointFrame::new(0, points)
    }

    /// Law-of-cosines angle, independent of the atan2 route.
    fn angle_oracle(vertex: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
        let (va, vb, ab) = (d(vertex, a), d(vertex, b), d(a, b));
        ((va * va + vb * vb - ab * ab) / (2.0 * va * vb)).acos().to_degrees()
    }

    #[test]
    fn right_angle_construction() {
        let f = right_arm_frame((100.0, 80.0), (100.0, 160.0));
        let feat = arm_pose_features(&f, Side::Right, 0.3).unwrap();
        assert!((feat.a1 - 90.0).abs() < 1e-12);
        assert!((feat.a2 - 180.0).abs() < 1e-12);
        assert_eq!((feat.d1, feat.d2), (80.0, 80.0));
    }

    #[test]
    fn displaced_elbow_angle_matches_oracle() {
        let f = right_arm_frame((150.0, 80.0), (100.0, 160.0));
        let feat = arm_pose_features(&f, Side::Right, 0.3).unwrap();
        let oracle = angle_oracle((100.0, 0.0), (0.0, 0.0), (150.0, 80.0));
        assert!((feat.a1 - oracle).abs() < 1e-9);
        assert!((oracle - (90.0 + (50.0f64 / 80.0).atan().to_degrees())).abs() < 1e-9);
        assert!((feat.a1 - 122.0).abs() < 0.05, "{}", feat.a1);
    }

    #[test]
    fn faint_wrist_is_missing_joint() {
        let mut f = right_arm_frame((100.0, 80.0), (100.0, 160.0));
        f.points[RIGHT_WRIST].confidence = 0.1;
        assert!(matches!(
            arm_pose_features(&f, Side::Right, 0.3),
            Err(Error::MissingJoint("right wrist"))
        ));
    }

    fn feat(a1: f64, a2: f64, d1: f64, d2: f64) -> ArmPoseFeatures {
        ArmPoseFeatures {
            a1,
            a2,
            d1,
            d2,
            side: Side::Left,
        }
    }

    #[test]
    fn hanging_predicate_examples() {
        let cfg = PipelineConfig::default();
        assert!(is_arm_hanging(&feat(90.0, 180.0, 80.0, 80.0), &cfg));
        assert!(!is_arm_hanging(&feat(90.0, 120.0, 80.0, 80.0), &cfg));
        // |10| <= 15, |5| <= 20, 10/80 = 0.125 <= 0.25
        assert!(is_arm_hanging(&feat(100.0, 175.0, 80.0, 70.0), &cfg));
    }

    #[test]
    fn removable_frames() {
        let cfg = PipelineConfig::default();
        assert!(frame_is_removable(&hanging_frame(0), &cfg));
        assert!(!frame_is_removable(&raised_frame(0), &cfg));
        let mut handless = raised_frame(0);
        for i in Side::Left.hand().chain(Side::Right.hand()) {
            handless.points[i].confidence = 0.0;
        }
        assert!(frame_is_removable(&handless, &cfg));
    }

    #[test]
    fn trimming_only_touches_prefix_and_suffix() {
        let cfg = PipelineConfig::default();
        let mut frames: Vec<_> = (0..3).map(hanging_frame).collect();
        frames.extend((3..6).map(raised_frame));
        frames.push(hanging_frame(6));
        frames.extend((7..9).map(raised_frame));
        frames.push(hanging_frame(9));
        assert_eq!(trim_bounds(&frames, &cfg), (3, 1));
        let all: Vec<_> = (0..4).map(hanging_frame).collect();
        assert_eq!(trim_bounds(&all, &cfg), (4, 0));
    }

    fn hand_at(frame: &mut KeypointFrame, side: Side, x: f64, y: f64, c: f64) {
        for i in side.hand() {
            frame.points[i] = Keypoint::new(x, y, c);
        }
    }

    #[test]
    fn handedness_examples() {
        let cfg = PipelineConfig::default();
        let diag = (2.0f64).sqrt() * 224.0;
        // Both hand roots sweep 100 px per step over 5 frames: 400 px paths.
        let frames: Vec<_> = (0..5)
            .map(|i| {
                let mut f = raised_frame(i);
                let x = if i % 2 == 0 { 10.0 } else { 110.0 };
                hand_at(&mut f, Side::Left, x, 50.0, 1.0);
                hand_at(&mut f, Side::Right, x + 100.0, 50.0, 1.0);
                f
            })
            .collect();
        assert!(400.0 > 0.2 * diag);
        assert_eq!(classify_handedness(&frames, diag, &cfg), Handedness::TwoHanded);

        let one: Vec<_> = frames
            .iter()
            .map(|f| {
                let mut f = f.clone();
                hand_at(&mut f, Side::Right, 5.0, 5.0, 1.0);
                f
            })
            .collect();
        assert_eq!(classify_handedness(&one, diag, &cfg), Handedness::OneHandedLeft);

        let none: Vec<_> = frames
            .iter()
            .map(|f| {
                let mut f = f.clone();
                hand_at(&mut f, Side::Left, 0.0, 0.0, 0.0);
                hand_at(&mut f, Side::Right, 0.0, 0.0, 0.0);
                f
            })
            .collect();
        assert_eq!(classify_handedness(&none, diag, &cfg), Handedness::NoHands);
    }

    #[test]
    fn rarely_present_hand_is_not_moving() {
        let cfg = PipelineConfig::default();
        let frames: Vec<_> = (0..4)
            .map(|i| {
                let mut f = raised_frame(i);
                hand_at(&mut f, Side::Right, 0.0, 0.0, 0.0);
                let c = if i < 2 { 1.0 } else { 0.0 };
                hand_at(&mut f, Side::Left, 200.0 * i as f64, 0.0, c);
                f
            })
            .collect();
        // Present in exactly half the frames: not more than 50%.
        assert_eq!(classify_handedness(&frames, 316.8, &cfg), Handedness::NoHands);
    }

    #[test]
    fn overlap_examples() {
        let a = TokenSet::from_indices(100, 0..10);
        assert_eq!(overlap_ratio(&a, &a), 1.0);
        assert_eq!(overlap_ratio(&a, &TokenSet::from_indices(100, 50..60)), 0.0);
        let left = TokenSet::from_indices(100, 0..40);
        let right = TokenSet::from_indices(100, 35..55);
        assert_eq!(overlap_ratio(&left, &right), 0.25);
        assert_eq!(overlap_ratio(&TokenSet::empty(5), &TokenSet::empty(5)), 0.0);
    }
}
