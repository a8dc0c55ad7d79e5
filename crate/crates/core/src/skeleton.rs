//! Skeleton data model: frames of 25 Kinect v2 joints, view metadata,
//! validation, missing-joint repair, frame sampling, clipping and
//! normalization.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Joints per frame (Kinect v2 body model).
pub const JOINT_COUNT: usize = 25;
/// Number of action categories (ids `0..ACTION_COUNT`).
pub const ACTION_COUNT: usize = 40;
/// Number of fixed capture viewpoints.
pub const VIEWPOINT_COUNT: usize = 8;

/// A 3D joint position in meters.
pub type Joint = [f64; 3];

/// Kinect v2 joint indices; rows of the encoded image follow this order.
pub mod joint {
    pub const SPINE_BASE: usize = 0;
    pub const SPINE_MID: usize = 1;
    pub const NECK: usize = 2;
    pub const HEAD: usize = 3;
    pub const SHOULDER_LEFT: usize = 4;
    pub const ELBOW_LEFT: usize = 5;
    pub const WRIST_LEFT: usize = 6;
    pub const HAND_LEFT: usize = 7;
    pub const SHOULDER_RIGHT: usize = 8;
    pub const ELBOW_RIGHT: usize = 9;
    pub const WRIST_RIGHT: usize = 10;
    pub const HAND_RIGHT: usize = 11;
    pub const HIP_LEFT: usize = 12;
    pub const KNEE_LEFT: usize = 13;
    pub const ANKLE_LEFT: usize = 14;
    pub const FOOT_LEFT: usize = 15;
    pub const HIP_RIGHT: usize = 16;
    pub const KNEE_RIGHT: usize = 17;
    pub const ANKLE_RIGHT: usize = 18;
    pub const FOOT_RIGHT: usize = 19;
    pub const SPINE_SHOULDER: usize = 20;
    pub const HAND_TIP_LEFT: usize = 21;
    pub const THUMB_LEFT: usize = 22;
    pub const HAND_TIP_RIGHT: usize = 23;
    pub const THUMB_RIGHT: usize = 24;
}

/// One captured body pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub joints: Vec<Joint>,
    /// `false` marks a joint the sensor lost in this frame.
    pub valid: Vec<bool>,
}

impl SkeletonFrame {
    /// A frame with every joint marked valid.
    pub fn new(joints: Vec<Joint>) -> Self {
        let valid = alloc::vec![true; joints.len()];
        Self { joints, valid }
    }

    pub fn zeros() -> Self {
        Self::new(alloc::vec![[0.0; 3]; JOINT_COUNT])
    }

    pub fn missing_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// One of the eight fixed viewpoints: 0 is the front view (FV), `k` is Vk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Viewpoint(u8);

impl Viewpoint {
    pub const FRONT: Viewpoint = Viewpoint(0);

    pub fn new(index: usize) -> Result<Self> {
        if index < VIEWPOINT_COUNT {
            Ok(Viewpoint(index as u8))
        } else {
            Err(invalid(alloc::format!("viewpoint index {index} not in 0..8")))
        }
    }

    pub fn all() -> impl Iterator<Item = Viewpoint> {
        (0..VIEWPOINT_COUNT as u8).map(Viewpoint)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Counterclockwise angle from the front view, 45° per step.
    pub fn angle_deg(self) -> f64 {
        45.0 * self.0 as f64
    }
}

impl fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            f.write_str("FV")
        } else {
            write!(f, "V{}", self.0)
        }
    }
}

/// Where the sensor was during a capture.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewDescriptor {
    Fixed(Viewpoint),
    /// Per-frame sensor angle in degrees, one entry per frame.
    Varying(Vec<f64>),
}

impl ViewDescriptor {
    /// Single angle used to route a sample to view groups. Varying views use
    /// the circular mean of their per-frame angles.
    pub fn routing_angle(&self) -> f64 {
        match self {
            ViewDescriptor::Fixed(v) => v.angle_deg(),
            ViewDescriptor::Varying(angles) => circular_mean_deg(angles),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ViewDescriptor::Fixed(_))
    }

    pub fn fixed(&self) -> Option<Viewpoint> {
        match self {
            ViewDescriptor::Fixed(v) => Some(*v),
            ViewDescriptor::Varying(_) => None,
        }
    }

    fn select(&self, indices: impl Iterator<Item = usize>) -> ViewDescriptor {
        match self {
            ViewDescriptor::Fixed(v) => ViewDescriptor::Fixed(*v),
            ViewDescriptor::Varying(angles) => {
                ViewDescriptor::Varying(indices.map(|i| angles[i]).collect())
            }
        }
    }
}

/// Capture setting tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    A,
    B,
    C,
    Synthetic,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::A => "A",
            Setting::B => "B",
            Setting::C => "C",
            Setting::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Setting::A),
            "B" | "b" => Ok(Setting::B),
            "C" | "c" => Ok(Setting::C),
            "synthetic" => Ok(Setting::Synthetic),
            other => Err(invalid(alloc::format!("unknown capture setting {other:?}"))),
        }
    }
}

/// A labelled skeleton capture.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<SkeletonFrame>,
    pub subject_id: u32,
    pub action_id: usize,
    pub view: ViewDescriptor,
    pub setting: Setting,
}

impl SkeletonSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Copy of the metadata with the frames (and view angles) at `indices`.
    pub fn select(&self, indices: &[usize]) -> SkeletonSequence {
        SkeletonSequence {
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            subject_id: self.subject_id,
            action_id: self.action_id,
            view: self.view.select(indices.iter().copied()),
            setting: self.setting,
        }
    }
}

/// A single structural problem found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySequence,
    JointCount { frame: usize, found: usize },
    ValidityCount { frame: usize, found: usize },
    NonFiniteJoint { frame: usize, joint: usize },
    ActionOutOfRange(usize),
    ZeroSubject,
    AngleCount { expected: usize, found: usize },
    AngleOutOfRange { frame: usize, angle: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub frame_count: usize,
    pub missing_joint_count: usize,
    /// Frames carrying a joint-count or non-finite violation.
    pub distorted_frame_indices: Vec<usize>,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn describe(&self) -> String {
        alloc::format!("{:?}", self.violations)
    }
}

/// Checks every structural invariant of a sequence; never fails.
pub fn validate_sequence(seq: &SkeletonSequence) -> ValidationReport {
    let mut violations = Vec::new();
    let mut distorted = Vec::new();
    let mut missing = 0;

    if seq.frames.is_empty() {
        violations.push(Violation::EmptySequence);
    }
    if seq.action_id >= ACTION_COUNT {
        violations.push(Violation::ActionOutOfRange(seq.action_id));
    }
    if seq.subject_id == 0 {
        violations.push(Violation::ZeroSubject);
    }
    for (t, frame) in seq.frames.iter().enumerate() {
        let mut bad = false;
        if frame.joints.len() != JOINT_COUNT {
            violations.push(Violation::JointCount { frame: t, found: frame.joints.len() });
            bad = true;
        }
        if frame.valid.len() != frame.joints.len() {
            violations.push(Violation::ValidityCount { frame: t, found: frame.valid.len() });
            bad = true;
        }
        for (j, (p, &ok)) in frame.joints.iter().zip(&frame.valid).enumerate() {
            if !ok {
                missing += 1;
            } else if !p.iter().all(|c| c.is_finite()) {
                violations.push(Violation::NonFiniteJoint { frame: t, joint: j });
                bad = true;
            }
        }
        if bad {
            distorted.push(t);
        }
    }
    if let ViewDescriptor::Varying(angles) = &seq.view {
        if angles.len() != seq.frames.len() {
            violations.push(Violation::AngleCount {
                expected: seq.frames.len(),
                found: angles.len(),
            });
        }
        for (t, &a) in angles.iter().enumerate() {
            if !(0.0..360.0).contains(&a) {
                violations.push(Violation::AngleOutOfRange { frame: t, angle: a });
            }
        }
    }

    ValidationReport {
        frame_count: seq.frames.len(),
        missing_joint_count: missing,
        distorted_frame_indices: distorted,
        pass: violations.is_empty(),
        violations,
    }
}

/// Fills lost joints by per-joint linear interpolation in time.
///
/// Gaps at the start or end take the nearest valid value; a joint that is
/// never valid becomes the zero coordinate. Valid joints are left untouched.
pub fn interpolate_missing(seq: &SkeletonSequence) -> SkeletonSequence {
    let mut out = seq.clone();
    let n = out.frames.len();
    let joints = out.frames.iter().map(|f| f.joints.len()).min().unwrap_or(0);
    for j in 0..joints {
        let known: Vec<usize> = (0..n).filter(|&t| seq.frames[t].valid[j]).collect();
        if known.is_empty() {
            for f in &mut out.frames {
                f.joints[j] = [0.0; 3];
                f.valid[j] = true;
            }
            continue;
        }
        let mut next = 0;
        for t in 0..n {
            if seq.frames[t].valid[j] {
                continue;
            }
            while next < known.len() && known[next] < t {
                next += 1;
            }
            let value = match (next.checked_sub(1).map(|k| known[k]), known.get(next)) {
                (Some(a), Some(&b)) => {
                    let w = (t - a) as f64 / (b - a) as f64;
                    let pa = seq.frames[a].joints[j];
                    let pb = seq.frames[b].joints[j];
                    core::array::from_fn(|c| pa[c] + w * (pb[c] - pa[c]))
                }
                (Some(a), None) => seq.frames[a].joints[j],
                (None, Some(&b)) => seq.frames[b].joints[j],
                (None, None) => unreachable!(),
            };
            out.frames[t].joints[j] = value;
            out.frames[t].valid[j] = true;
        }
    }
    out
}

/// Frame indices `floor(i * len / n)` for `i in 0..n`.
pub fn sample_indices(len: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * len / n).collect()
}

/// Evenly picks `n` frames; shorter inputs repeat frames in order.
pub fn sample_frames(seq: &SkeletonSequence, n: usize) -> Result<SkeletonSequence> {
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if seq.is_empty() {
        return Err(invalid("cannot sample an empty sequence"));
    }
    Ok(seq.select(&sample_indices(seq.len(), n)))
}

/// Splits a sequence into `k` contiguous clips. The first `len % k` clips
/// receive one extra frame.
pub fn clip_sequence(seq: &SkeletonSequence, k: usize) -> Result<Vec<SkeletonSequence>> {
    let len = seq.len();
    if k == 0 {
        return Err(invalid("clip count must be positive"));
    }
    if len < k {
        return Err(invalid(alloc::format!("{len} frames cannot form {k} clips")));
    }
    let (base, extra) = (len / k, len % k);
    let mut start = 0;
    let mut clips = Vec::with_capacity(k);
    for c in 0..k {
        let size = base + usize::from(c < extra);
        let idx: Vec<usize> = (start..start + size).collect();
        clips.push(seq.select(&idx));
        start += size;
    }
    Ok(clips)
}

/// Per-axis min-max scaling to `[0, 1]` over every joint of every frame.
/// A constant axis maps to 0.5.
pub fn normalize_sequence(seq: &SkeletonSequence) -> SkeletonSequence {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in seq.frames.iter().flat_map(|f| &f.joints) {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let mut out = seq.clone();
    for p in out.frames.iter_mut().flat_map(|f| f.joints.iter_mut()) {
        for c in 0..3 {
            let span = hi[c] - lo[c];
            p[c] = if span > 0.0 { ((p[c] - lo[c]) / span).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
    out
}

/// Wraps an angle into `[0, 360)`.
pub fn wrap_deg(angle: f64) -> f64 {
    let a = angle % 360.0;
    let a = if a < 0.0 { a + 360.0 } else { a };
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Circular mean of angles in degrees, in `[0, 360)`.
pub fn circular_mean_deg(angles: &[f64]) -> f64 {
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| {
        let r = a.to_radians();
        (s + libm::sin(r), c + libm::cos(r))
    });
    wrap_deg(libm::atan2(s, c).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq_from(frames: Vec<SkeletonFrame>) -> SkeletonSequence {
        SkeletonSequence {
            frames,
            subject_id: 1,
            action_id: 0,
            view: ViewDescriptor::Fixed(Viewpoint::FRONT),
            setting: Setting::Synthetic,
        }
    }

    fn ramp(len: usize) -> SkeletonSequence {
        seq_from(
            (0..len)
                .map(|t| SkeletonFrame::new(vec![[t as f64, 0.0, 0.0]; JOINT_COUNT]))
                .collect(),
        )
    }

    #[test]
    fn clean_sequence_passes() {
        let r = validate_sequence(&ramp(200));
        assert!(r.pass);
        assert_eq!(r.missing_joint_count, 0);
        assert_eq!(r.frame_count, 200);
    }

    #[test]
    fn short_frame_fails() {
        let mut s = ramp(5);
        s.frames[2] = SkeletonFrame::new(vec![[0.0; 3]; 24]);
        let r = validate_sequence(&s);
        assert!(!r.pass);
        assert_eq!(r.distorted_frame_indices, vec![2]);
        assert!(matches!(r.violations[0], Violation::JointCount { frame: 2, found: 24 }));
    }

    #[test]
    fn missing_joints_are_counted_not_fatal() {
        let mut s = ramp(10);
        s.frames[1].valid[3] = false;
        s.frames[4].valid[0] = false;
        s.frames[9].valid[24] = false;
        let r = validate_sequence(&s);
        assert!(r.pass);
        assert_eq!(r.missing_joint_count, 3);
    }

    #[test]
    fn varying_angle_count_checked() {
        let mut s = ramp(4);
        s.view = ViewDescriptor::Varying(vec![0.0, 90.0, 180.0]);
        assert!(!validate_sequence(&s).pass);
        s.view = ViewDescriptor::Varying(vec![0.0, 90.0, 180.0, 360.0]);
        assert!(!validate_sequence(&s).pass);
    }

    #[test]
    fn interpolation_midpoint() {
        let mut s = ramp(3);
        s.frames[0].joints[7] = [0.0, 0.0, 0.0];
        s.frames[2].joints[7] = [2.0, 0.0, 0.0];
        s.frames[1].joints[7] = [99.0, 99.0, 99.0];
        s.frames[1].valid[7] = false;
        let out = interpolate_missing(&s);
        assert_eq!(out.frames[1].joints[7], [1.0, 0.0, 0.0]);
        assert!(out.frames[1].valid[7]);
    }

    #[test]
    fn interpolation_edges_and_degenerate() {
        let mut s = ramp(6);
        for t in 0..3 {
            s.frames[t].valid[2] = false;
        }
        s.frames[5].valid[2] = false;
        for f in &mut s.frames {
            f.valid[9] = false;
        }
        let out = interpolate_missing(&s);
        for t in 0..3 {
            assert_eq!(out.frames[t].joints[2], s.frames[3].joints[2]);
        }
        assert_eq!(out.frames[5].joints[2], s.frames[4].joints[2]);
        assert!(out.frames.iter().all(|f| f.joints[9] == [0.0; 3] && f.valid[9]));
        assert_eq!(validate_sequence(&out).missing_joint_count, 0);
    }

    #[test]
    fn sampling_index_formula() {
        let idx = sample_indices(200, 40);
        assert_eq!(idx, (0..40).map(|i| 5 * i).collect::<Vec<_>>());
        assert_eq!(sample_indices(40, 40), (0..40).collect::<Vec<_>>());
        let short = sample_indices(20, 40);
        assert_eq!(short, (0..40).map(|i| i / 2).collect::<Vec<_>>());
        assert!(sample_frames(&ramp(3), 0).is_err());
    }

    #[test]
    fn sampling_subsamples_view_trajectory() {
        let mut s = ramp(10);
        s.view = ViewDescriptor::Varying((0..10).map(|t| t as f64 * 36.0).collect());
        let out = sample_frames(&s, 5).unwrap();
        assert_eq!(out.view, ViewDescriptor::Varying(vec![0.0, 72.0, 144.0, 216.0, 288.0]));
        assert_eq!(out.frames[1].joints[0][0], 2.0);
    }

    #[test]
    fn clip_sizes() {
        let sizes = |l, k| -> Vec<usize> {
            clip_sequence(&ramp(l), k).unwrap().iter().map(|c| c.len()).collect()
        };
        assert_eq!(sizes(2000, 10), vec![200; 10]);
        assert_eq!(sizes(10, 10), vec![1; 10]);
        assert_eq!(sizes(1735, 10), [vec![174; 5], vec![173; 5]].concat());
        assert!(clip_sequence(&ramp(9), 10).is_err());
    }

    #[test]
    fn normalization_examples() {
        let mut s = ramp(3);
        for (t, x) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
            for p in &mut s.frames[t].joints {
                p[0] = x;
            }
        }
        s.frames[0].joints[0][1] = 0.2;
        s.frames[1].joints[0][1] = 0.45;
        s.frames[2].joints[0][1] = 0.7;
        for f in &mut s.frames[..] {
            for p in &mut f.joints[1..] {
                p[1] = 0.45;
            }
        }
        let n = normalize_sequence(&s);
        assert_eq!(n.frames[0].joints[3][0], 0.0);
        assert_eq!(n.frames[1].joints[3][0], 0.5);
        assert_eq!(n.frames[2].joints[3][0], 1.0);
        assert!((n.frames[1].joints[0][1] - 0.5).abs() < 1e-12);
        // z is constant zero everywhere
        assert!(n.frames.iter().flat_map(|f| &f.joints).all(|p| p[2] == 0.5));
    }

    #[test]
    fn circular_mean_wraps() {
        assert!((circular_mean_deg(&[350.0, 10.0]) - 0.0).abs() < 1e-9
            || (circular_mean_deg(&[350.0, 10.0]) - 360.0).abs() < 1e-9);
        assert!((circular_mean_deg(&[180.0, 220.0]) - 200.0).abs() < 1e-9);
        assert_eq!(wrap_deg(-90.0), 270.0);
        assert_eq!(wrap_deg(720.0), 0.0);
    }

    #[test]
    fn viewpoint_labels() {
        assert_eq!(alloc::format!("{}", Viewpoint::new(0).unwrap()), "FV");
        assert_eq!(alloc::format!("{}", Viewpoint::new(7).unwrap()), "V7");
        assert_eq!(Viewpoint::new(7).unwrap().angle_deg(), 315.0);
        assert!(Viewpoint::new(8).is_err());
    }
}
