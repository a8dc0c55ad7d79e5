//! Synthetic multi-view skeleton generator.
//!
//! An articulated 25-joint figure performs class-specific periodic motions.
//! Captures are rendered from the eight fixed viewpoints on a circle around
//! the subject or from a full 360° orbit, then corrupted with Gaussian joint
//! noise and angle-dependent joint dropout.
//!
//! World frame: `y` up, the subject stands at the origin facing `-z` (towards
//! the front camera); the subject's left side is `-x`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::skeleton::{
    joint as J, wrap_deg, Joint, Setting, SkeletonFrame, SkeletonSequence, ViewDescriptor, Viewpoint, ACTION_COUNT,
    JOINT_COUNT,
};

pub const DEFAULT_RADIUS: f64 = 2.5;
pub const DEFAULT_HEIGHT: f64 = 1.2;

/// Sensor placement on the capture circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub angle_deg: f64,
    pub radius: f64,
    pub height: f64,
}

impl CameraPose {
    pub fn at_angle(angle_deg: f64) -> Self {
        Self { angle_deg: wrap_deg(angle_deg), radius: DEFAULT_RADIUS, height: DEFAULT_HEIGHT }
    }
}

/// Pose of fixed viewpoint `index` (0 = front view).
pub fn camera_pose(index: usize) -> Result<CameraPose> {
    Ok(CameraPose::at_angle(Viewpoint::new(index)?.angle_deg()))
}

/// Sensor placement for a whole capture.
#[derive(Debug, Clone, PartialEq)]
pub enum CameraPath {
    Fixed(CameraPose),
    /// One angle per frame.
    Orbit { angles: Vec<f64>, radius: f64, height: f64 },
}

/// Rotation about the vertical axis: `x' = x cos a + z sin a`,
/// `z' = -x sin a + z cos a`.
pub fn rotate_vertical(p: Joint, angle_deg: f64) -> Joint {
    let (s, c) = libm::sincos(angle_deg.to_radians());
    [p[0] * c + p[2] * s, p[1], -p[0] * s + p[2] * c]
}

fn to_camera(p: Joint, angle_deg: f64, radius: f64, height: f64) -> Joint {
    let r = rotate_vertical(p, angle_deg);
    [r[0], r[1] - height, r[2] + radius]
}

/// Maps a world-frame sequence into sensor coordinates: camera at the origin,
/// subject `radius` meters along `+z`, sensor height subtracted from `y`.
pub fn world_to_camera(seq: &SkeletonSequence, path: &CameraPath) -> Result<SkeletonSequence> {
    let mut out = seq.clone();
    match path {
        CameraPath::Fixed(pose) => {
            for f in &mut out.frames {
                for p in &mut f.joints {
                    *p = to_camera(*p, pose.angle_deg, pose.radius, pose.height);
                }
            }
            let a = wrap_deg(pose.angle_deg);
            out.view = if a % 45.0 == 0.0 {
                ViewDescriptor::Fixed(Viewpoint::new((a / 45.0) as usize)?)
            } else {
                ViewDescriptor::Varying(alloc::vec![a; seq.len()])
            };
        }
        CameraPath::Orbit { angles, radius, height } => {
            if angles.len() != seq.len() {
                return Err(invalid(format!("{} angles for {} frames", angles.len(), seq.len())));
            }
            for (f, &a) in out.frames.iter_mut().zip(angles) {
                for p in &mut f.joints {
                    *p = to_camera(*p, a, *radius, *height);
                }
            }
            out.view = ViewDescriptor::Varying(angles.iter().map(|&a| wrap_deg(a)).collect());
        }
    }
    Ok(out)
}

/// Linear 360° sweep: `angle(t) = 360 · t / n`.
pub fn orbit_trajectory(n_frames: usize) -> Vec<f64> {
    (0..n_frames).map(|t| 360.0 * t as f64 / n_frames as f64).collect()
}

/// Motion degrees of freedom of the figure (radians unless noted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Driver {
    LeftShoulderPitch,
    LeftShoulderAbduction,
    LeftElbow,
    RightShoulderPitch,
    RightShoulderAbduction,
    RightElbow,
    LeftHipPitch,
    LeftHipAbduction,
    LeftKnee,
    RightHipPitch,
    RightHipAbduction,
    RightKnee,
    TorsoPitch,
    TorsoBend,
    TorsoTwist,
    /// meters
    PelvisRise,
    /// meters, positive to the subject's right
    PelvisShift,
}

const DRIVER_COUNT: usize = 17;

impl Driver {
    const ALL: [Driver; DRIVER_COUNT] = [
        Driver::LeftShoulderPitch,
        Driver::LeftShoulderAbduction,
        Driver::LeftElbow,
        Driver::RightShoulderPitch,
        Driver::RightShoulderAbduction,
        Driver::RightElbow,
        Driver::LeftHipPitch,
        Driver::LeftHipAbduction,
        Driver::LeftKnee,
        Driver::RightHipPitch,
        Driver::RightHipAbduction,
        Driver::RightKnee,
        Driver::TorsoPitch,
        Driver::TorsoBend,
        Driver::TorsoTwist,
        Driver::PelvisRise,
        Driver::PelvisShift,
    ];
}

/// One periodic component: `amplitude · (1 − cos(2π t / period + phase)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub driver: Driver,
    pub amplitude: f64,
    /// frames per cycle
    pub period: f64,
    pub phase: f64,
}

const fn c(driver: Driver, amplitude: f64, period: f64, phase: f64) -> Component {
    Component { driver, amplitude, period, phase }
}

use Driver::*;

/// Hand-written motion patterns loosely following fitness actions.
const ARCHETYPES: [&[Component]; 10] = [
    // punching and knee lifting
    &[
        c(RightShoulderPitch, 1.5, 60.0, 0.0),
        c(RightElbow, 1.3, 60.0, PI),
        c(LeftHipPitch, 1.2, 60.0, PI),
        c(LeftKnee, 1.5, 60.0, PI),
    ],
    // marking time and knee lifting
    &[
        c(LeftHipPitch, 1.0, 40.0, 0.0),
        c(LeftKnee, 1.4, 40.0, 0.0),
        c(RightHipPitch, 1.0, 40.0, PI),
        c(RightKnee, 1.4, 40.0, PI),
        c(LeftShoulderPitch, 0.5, 40.0, PI),
        c(RightShoulderPitch, 0.5, 40.0, 0.0),
    ],
    // jumping jack
    &[
        c(LeftShoulderAbduction, 2.6, 50.0, 0.0),
        c(RightShoulderAbduction, 2.6, 50.0, 0.0),
        c(LeftHipAbduction, 0.4, 50.0, 0.0),
        c(RightHipAbduction, 0.4, 50.0, 0.0),
        c(PelvisRise, 0.08, 25.0, 0.0),
    ],
    // squatting
    &[
        c(PelvisRise, -0.4, 80.0, 0.0),
        c(LeftKnee, 1.8, 80.0, 0.0),
        c(RightKnee, 1.8, 80.0, 0.0),
        c(LeftHipPitch, 1.4, 80.0, 0.0),
        c(RightHipPitch, 1.4, 80.0, 0.0),
        c(TorsoPitch, 0.5, 80.0, 0.0),
        c(LeftShoulderPitch, 1.4, 80.0, 0.0),
        c(RightShoulderPitch, 1.4, 80.0, 0.0),
    ],
    // forward lunging
    &[
        c(LeftHipPitch, 1.0, 100.0, 0.0),
        c(LeftKnee, 1.2, 100.0, 0.0),
        c(RightKnee, 0.8, 100.0, 0.0),
        c(PelvisRise, -0.2, 100.0, 0.0),
        c(TorsoPitch, 0.2, 100.0, 0.0),
    ],
    // left lunging
    &[
        c(LeftHipAbduction, 0.7, 100.0, 0.0),
        c(PelvisShift, -0.3, 100.0, 0.0),
        c(LeftKnee, 0.9, 100.0, 0.0),
        c(PelvisRise, -0.15, 100.0, 0.0),
    ],
    // left stretching
    &[
        c(LeftShoulderAbduction, 2.8, 90.0, 0.0),
        c(TorsoBend, 0.5, 90.0, 0.0),
        c(RightShoulderAbduction, 0.3, 90.0, 0.0),
    ],
    // raising hands and jumping
    &[
        c(LeftShoulderPitch, 2.9, 45.0, 0.0),
        c(RightShoulderPitch, 2.9, 45.0, 0.0),
        c(PelvisRise, 0.1, 45.0, 0.0),
    ],
    // left kicking
    &[c(LeftHipPitch, 1.5, 55.0, 0.0), c(LeftKnee, 1.0, 55.0, PI / 2.0)],
    // rotation clapping
    &[
        c(TorsoTwist, 0.8, 70.0, 0.0),
        c(LeftShoulderPitch, 1.5, 1.0e9, PI),
        c(RightShoulderPitch, 1.5, 1.0e9, PI),
        c(LeftShoulderAbduction, 0.6, 35.0, 0.0),
        c(RightShoulderAbduction, 0.6, 35.0, 0.0),
    ],
];

const PERIODS: [f64; 5] = [36.0, 48.0, 64.0, 84.0, 110.0];

/// Motion components of an action class. Classes beyond the hand-written
/// archetypes combine two drivers with periods drawn from a fixed table.
pub fn class_components(class_id: usize) -> Result<Vec<Component>> {
    if class_id >= ACTION_COUNT {
        return Err(invalid(format!("class {class_id} outside 0..{ACTION_COUNT}")));
    }
    if let Some(a) = ARCHETYPES.get(class_id) {
        return Ok(a.to_vec());
    }
    let k = class_id - ARCHETYPES.len();
    let first = Driver::ALL[k % 15];
    let second = Driver::ALL[(k * 7 + 3) % 15];
    let amp = |d: Driver| if matches!(d, TorsoPitch | TorsoBend | TorsoTwist) { 0.5 } else { 1.2 };
    Ok(alloc::vec![
        c(first, amp(first), PERIODS[k % 5], 0.0),
        c(second, 0.6 * amp(second), PERIODS[(k / 5 + 2) % 5], PI / 2.0),
    ])
}

/// Per-subject body size and motion style.
#[derive(Debug, Clone, PartialEq)]
pub struct Performer {
    pub scale: f64,
    pub amplitude_jitter: [f64; DRIVER_COUNT],
    pub phase_jitter: [f64; DRIVER_COUNT],
    pub tempo: f64,
}

impl Performer {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            scale: rng.random_range(0.9..1.1),
            amplitude_jitter: core::array::from_fn(|_| rng.random_range(0.85..1.15)),
            phase_jitter: core::array::from_fn(|_| rng.random_range(-0.3..0.3)),
            tempo: rng.random_range(0.9..1.1),
        }
    }
}

type Mat3 = [[f64; 3]; 3];

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    core::array::from_fn(|i| core::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

fn apply(m: &Mat3, v: Joint) -> Joint {
    core::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Rotation about `x`; positive angles swing a downward limb forward (`-z`).
fn rot_x(t: f64) -> Mat3 {
    let (s, c) = libm::sincos(t);
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

/// Rotation about `z`; positive angles swing a downward limb to `+x`.
fn rot_z(t: f64) -> Mat3 {
    let (s, c) = libm::sincos(t);
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(t: f64) -> Mat3 {
    let (s, c) = libm::sincos(t);
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn add(a: Joint, b: Joint) -> Joint {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scaled(v: Joint, k: f64) -> Joint {
    [v[0] * k, v[1] * k, v[2] * k]
}

const DOWN: Joint = [0.0, -1.0, 0.0];

/// Forward kinematics of one pose.
fn pose(d: &[f64; DRIVER_COUNT], scale: f64) -> Vec<Joint> {
    let s = scale;
    let mut j = alloc::vec![[0.0; 3]; JOINT_COUNT];
    let base = [d[PelvisShift as usize], 0.95 * s + d[PelvisRise as usize], 0.0];
    let torso = mul(&rot_y(d[TorsoTwist as usize]), &mul(&rot_z(d[TorsoBend as usize]), &rot_x(-d[TorsoPitch as usize])));
    let up = |h: f64| add(base, apply(&torso, [0.0, h * s, 0.0]));
    j[J::SPINE_BASE] = base;
    j[J::SPINE_MID] = up(0.25);
    j[J::SPINE_SHOULDER] = up(0.48);
    j[J::NECK] = up(0.55);
    j[J::HEAD] = up(0.70);

    // arms: side = -1 for left (-x), +1 for right
    for (side, sh, el, wr, ha, tip, th, pitch, abd, elbow) in [
        (-1.0, J::SHOULDER_LEFT, J::ELBOW_LEFT, J::WRIST_LEFT, J::HAND_LEFT, J::HAND_TIP_LEFT, J::THUMB_LEFT,
            LeftShoulderPitch, LeftShoulderAbduction, LeftElbow),
        (1.0, J::SHOULDER_RIGHT, J::ELBOW_RIGHT, J::WRIST_RIGHT, J::HAND_RIGHT, J::HAND_TIP_RIGHT, J::THUMB_RIGHT,
            RightShoulderPitch, RightShoulderAbduction, RightElbow),
    ] {
        let shoulder = add(j[J::SPINE_SHOULDER], apply(&torso, [side * 0.18 * s, 0.0, 0.0]));
        let arm = mul(&torso, &mul(&rot_z(side * d[abd as usize]), &rot_x(d[pitch as usize])));
        let fore = mul(&arm, &rot_x(d[elbow as usize]));
        let upper_dir = apply(&arm, DOWN);
        let fore_dir = apply(&fore, DOWN);
        let elbow_p = add(shoulder, scaled(upper_dir, 0.28 * s));
        let wrist = add(elbow_p, scaled(fore_dir, 0.25 * s));
        let hand = add(wrist, scaled(fore_dir, 0.07 * s));
        j[sh] = shoulder;
        j[el] = elbow_p;
        j[wr] = wrist;
        j[ha] = hand;
        j[tip] = add(hand, scaled(fore_dir, 0.07 * s));
        j[th] = add(hand, apply(&fore, [-side * 0.03 * s, -0.02 * s, -0.02 * s]));
    }

    let hips = rot_y(0.3 * d[TorsoTwist as usize]);
    for (side, hp, kn, an, ft, pitch, abd, knee) in [
        (-1.0, J::HIP_LEFT, J::KNEE_LEFT, J::ANKLE_LEFT, J::FOOT_LEFT, LeftHipPitch, LeftHipAbduction, LeftKnee),
        (1.0, J::HIP_RIGHT, J::KNEE_RIGHT, J::ANKLE_RIGHT, J::FOOT_RIGHT, RightHipPitch, RightHipAbduction, RightKnee),
    ] {
        let hip = add(base, apply(&hips, [side * 0.1 * s, -0.05 * s, 0.0]));
        let thigh = mul(&hips, &mul(&rot_z(side * d[abd as usize]), &rot_x(d[pitch as usize])));
        let shin = mul(&thigh, &rot_x(-d[knee as usize]));
        let knee_p = add(hip, scaled(apply(&thigh, DOWN), 0.42 * s));
        let ankle = add(knee_p, scaled(apply(&shin, DOWN), 0.40 * s));
        j[hp] = hip;
        j[kn] = knee_p;
        j[an] = ankle;
        j[ft] = add(ankle, apply(&shin, [0.0, -0.05 * s, -0.12 * s]));
    }
    j
}

/// World-frame capture of `class_id` performed by the subject `subject_seed`,
/// starting `start_frame` frames into the motion.
pub fn generate_take(class_id: usize, subject_seed: u64, start_frame: f64, n_frames: usize) -> Result<SkeletonSequence> {
    let components = class_components(class_id)?;
    let who = Performer::from_seed(subject_seed);
    let frames = (0..n_frames)
        .map(|t| {
            let time = (start_frame + t as f64) * who.tempo;
            let mut d = [0.0; DRIVER_COUNT];
            for comp in &components {
                let k = comp.driver as usize;
                let w = 2.0 * PI * time / comp.period + comp.phase + who.phase_jitter[k];
                d[k] += comp.amplitude * who.amplitude_jitter[k] * (1.0 - libm::cos(w)) / 2.0;
            }
            SkeletonFrame::new(pose(&d, who.scale))
        })
        .collect();
    Ok(SkeletonSequence {
        frames,
        subject_id: 1,
        action_id: class_id,
        view: ViewDescriptor::Fixed(Viewpoint::FRONT),
        setting: Setting::Synthetic,
    })
}

/// Deterministic world-frame action sample.
pub fn generate_action(class_id: usize, subject_seed: u64, n_frames: usize) -> Result<SkeletonSequence> {
    generate_take(class_id, subject_seed, 0.0, n_frames)
}

/// Dataset generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub subjects_per_class: usize,
    pub frames_fixed: usize,
    pub frames_orbit: usize,
    /// Gaussian joint noise, meters.
    pub noise_std: f64,
    /// Peak joint dropout probability (reached at 90° and 270°).
    pub occlusion_rate: f64,
    /// Mean length in frames of a dropout burst; long bursts hide whole
    /// motion cycles of a limb.
    pub occlusion_burst: f64,
    pub seed: u64,
    /// Also emit the simultaneous front-view capture of every non-front take.
    pub synchronous_front: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 5,
            subjects_per_class: 8,
            frames_fixed: 200,
            frames_orbit: 2000,
            noise_std: 0.01,
            occlusion_rate: 0.3,
            occlusion_burst: 100.0,
            seed: 0,
            synchronous_front: false,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.n_classes > ACTION_COUNT {
            return Err(invalid(format!("class count {} not in 1..=40", self.n_classes)));
        }
        if self.subjects_per_class == 0 || self.frames_fixed == 0 || self.frames_orbit < 2 {
            return Err(invalid("subject and frame counts must be positive (orbit ≥ 2 frames)"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_rate) {
            return Err(invalid("occlusion rate must be a probability"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid("noise std must be non-negative"));
        }
        if !(self.occlusion_burst >= 1.0) {
            return Err(invalid("occlusion burst length must be at least one frame"));
        }
        Ok(())
    }

    pub fn sequences_per_pair(&self) -> usize {
        9
    }
}

/// Angle-dependent dropout profile: `max(0, -cos 2a)`, a cosine bump of
/// half-width 45° centred on 90° and 270°.
pub fn occlusion_profile(angle_deg: f64) -> f64 {
    (-libm::cos(2.0 * angle_deg.to_radians())).max(0.0)
}

/// Body segment of each joint: torso/head, left arm, right arm, left leg,
/// right leg. A segment is occluded as a unit.
const SEGMENT: [usize; JOINT_COUNT] = {
    let mut s = [0; JOINT_COUNT];
    let (mut i, arms_l, arms_r) = (0, [4, 5, 6, 7, 21, 22], [8, 9, 10, 11, 23, 24]);
    while i < 6 {
        s[arms_l[i]] = 1;
        s[arms_r[i]] = 2;
        i += 1;
    }
    let mut k = 0;
    while k < 4 {
        s[J::HIP_LEFT + k] = 3;
        s[J::HIP_RIGHT + k] = 4;
        k += 1;
    }
    s
};

const SEGMENT_COUNT: usize = 5;

/// Adds Gaussian noise and bursty dropout to a camera-frame capture. The
/// per-frame dropout probability of every joint is
/// `rate · occlusion_profile(angle)`; each body segment follows a two-state
/// chain with mean burst length `burst` and drops all of its joints together.
pub fn corrupt<R: Rng + ?Sized>(seq: &mut SkeletonSequence, noise_std: f64, rate: f64, burst: f64, rng: &mut R) {
    let angles: Vec<f64> = match &seq.view {
        ViewDescriptor::Fixed(v) => alloc::vec![v.angle_deg(); seq.len()],
        ViewDescriptor::Varying(a) => a.clone(),
    };
    let normal = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).unwrap());
    let mut hidden = [false; SEGMENT_COUNT];
    for (t, frame) in seq.frames.iter_mut().enumerate() {
        let p = (rate * occlusion_profile(angles[t])).min(0.999);
        for gone in hidden.iter_mut() {
            *gone = if p == 0.0 {
                false
            } else if t == 0 {
                rng.random_bool(p)
            } else if *gone {
                !rng.random_bool(1.0 / burst)
            } else {
                rng.random_bool((p / (burst * (1.0 - p))).min(1.0))
            };
        }
        for (j, joint) in frame.joints.iter_mut().enumerate() {
            if hidden[SEGMENT[j]] {
                *joint = [0.0; 3];
                frame.valid[j] = false;
            } else if let Some(n) = &normal {
                for v in joint.iter_mut() {
                    *v += n.sample(rng);
                }
            }
        }
    }
}

/// One generated capture and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub sequence: SkeletonSequence,
    /// Simultaneous front-view copy of a side capture.
    pub front_copy: bool,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `subject`-th performer under a dataset seed.
pub fn subject_seed(seed: u64, subject: u32) -> u64 {
    stream_rng(seed, (1 << 63) | subject as u64).next_u64()
}

/// Generates every `(class, subject)` item: eight fixed-view captures and one
/// full orbit, in camera coordinates with noise and occlusion applied.
/// Each item draws from its own random stream, so generation order does not
/// affect the output.
pub fn generate_item(spec: &SynthSpec, class_id: usize, subject: u32) -> Result<Vec<SynthItem>> {
    let mut rng = stream_rng(spec.seed, ((class_id as u64) << 32) | subject as u64);
    let who = subject_seed(spec.seed, subject);
    let mut out = Vec::with_capacity(spec.sequences_per_pair());
    let mut emit = |world: &SkeletonSequence, path: CameraPath, front_copy: bool, rng: &mut ChaCha8Rng| -> Result<()> {
        let mut cam = world_to_camera(world, &path)?;
        cam.subject_id = subject;
        corrupt(&mut cam, spec.noise_std, spec.occlusion_rate, spec.occlusion_burst, rng);
        out.push(SynthItem { sequence: cam, front_copy });
        Ok(())
    };
    for v in Viewpoint::all() {
        let start = rng.random_range(0.0..1000.0);
        let world = generate_take(class_id, who, start, spec.frames_fixed)?;
        emit(&world, CameraPath::Fixed(camera_pose(v.index())?), false, &mut rng)?;
        if spec.synchronous_front && v != Viewpoint::FRONT {
            emit(&world, CameraPath::Fixed(camera_pose(0)?), true, &mut rng)?;
        }
    }
    let start = rng.random_range(0.0..1000.0);
    let world = generate_take(class_id, who, start, spec.frames_orbit)?;
    let orbit = CameraPath::Orbit {
        angles: orbit_trajectory(spec.frames_orbit),
        radius: DEFAULT_RADIUS,
        height: DEFAULT_HEIGHT,
    };
    emit(&world, orbit.clone(), false, &mut rng)?;
    if spec.synchronous_front {
        emit(&world, CameraPath::Fixed(camera_pose(0)?), true, &mut rng)?;
    }
    Ok(out)
}

/// All items, ordered by class then subject (ids `1..=subjects_per_class`).
pub fn generate_dataset(spec: &SynthSpec) -> Result<Vec<SynthItem>> {
    spec.validate()?;
    let mut out = Vec::new();
    for class_id in 0..spec.n_classes {
        for subject in 1..=spec.subjects_per_class as u32 {
            out.extend(generate_item(spec, class_id, subject)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::validate_sequence;

    #[test]
    fn fixed_poses() {
        assert_eq!(camera_pose(0).unwrap().angle_deg, 0.0);
        assert_eq!(camera_pose(2).unwrap().angle_deg, 90.0);
        let p = camera_pose(7).unwrap();
        assert_eq!((p.angle_deg, p.radius, p.height), (315.0, 2.5, 1.2));
        assert!(camera_pose(8).is_err());
    }

    #[test]
    fn rotation_examples() {
        let r = rotate_vertical([1.0, 0.0, 0.0], 90.0);
        assert!(r[0].abs() < 1e-15 && (r[2] + 1.0).abs() < 1e-15);
        let seq = generate_action(2, 7, 3).unwrap();
        let front = world_to_camera(&seq, &CameraPath::Fixed(camera_pose(0).unwrap())).unwrap();
        let back = world_to_camera(&seq, &CameraPath::Fixed(camera_pose(4).unwrap())).unwrap();
        for (f, (a, b)) in seq.frames.iter().zip(front.frames.iter().zip(&back.frames)) {
            for (w, (p, q)) in f.joints.iter().zip(a.joints.iter().zip(&b.joints)) {
                assert_eq!(*p, [w[0], w[1] - 1.2, w[2] + 2.5]);
                assert!((q[0] + w[0]).abs() < 1e-12 && (q[2] - 2.5 + w[2]).abs() < 1e-12);
            }
        }
        assert_eq!(back.view, ViewDescriptor::Fixed(Viewpoint::new(4).unwrap()));
    }

    #[test]
    fn orbit_steps() {
        assert_eq!(orbit_trajectory(4), alloc::vec![0.0, 90.0, 180.0, 270.0]);
        let ten = orbit_trajectory(10);
        assert!(ten.windows(2).all(|w| (w[1] - w[0] - 36.0).abs() < 1e-12));
        let long = orbit_trajectory(2000);
        assert!((long[1] - 0.18).abs() < 1e-12);
        let seq = generate_action(0, 1, 3).unwrap();
        let bad = CameraPath::Orbit { angles: alloc::vec![0.0; 2], radius: 2.5, height: 1.2 };
        assert!(world_to_camera(&seq, &bad).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = generate_action(3, 11, 50).unwrap();
        assert_eq!(a, generate_action(3, 11, 50).unwrap());
        assert!(validate_sequence(&a).pass);
        let one = generate_action(0, 11, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(validate_sequence(&one).pass);
        assert!(generate_action(40, 0, 5).is_err());
    }

    #[test]
    fn class_tables_are_distinct() {
        let dominant = |cls: usize| -> Vec<(usize, u64)> {
            let mut v: Vec<_> =
                class_components(cls).unwrap().iter().map(|c| (c.driver as usize, c.period.to_bits())).collect();
            v.sort();
            v
        };
        for a in 0..ACTION_COUNT {
            for b in a + 1..ACTION_COUNT {
                assert_ne!(dominant(a), dominant(b), "classes {a} and {b}");
            }
        }
    }

    #[test]
    fn occlusion_profile_shape() {
        assert_eq!(occlusion_profile(0.0), 0.0);
        assert!((occlusion_profile(90.0) - 1.0).abs() < 1e-12);
        assert!((occlusion_profile(270.0) - 1.0).abs() < 1e-12);
        assert!(occlusion_profile(45.0).abs() < 1e-12);
        assert!(occlusion_profile(135.0).abs() < 1e-12);
    }

    #[test]
    fn clean_dataset_has_no_dropout() {
        let spec = SynthSpec {
            n_classes: 2,
            subjects_per_class: 1,
            frames_fixed: 20,
            frames_orbit: 40,
            noise_std: 0.0,
            occlusion_rate: 0.0,
            ..Default::default()
        };
        let items = generate_dataset(&spec).unwrap();
        assert_eq!(items.len(), 2 * 9);
        assert!(items.iter().all(|i| validate_sequence(&i.sequence).missing_joint_count == 0));
    }

    #[test]
    fn front_copies_are_optional() {
        let spec = SynthSpec {
            n_classes: 1,
            subjects_per_class: 1,
            frames_fixed: 10,
            frames_orbit: 20,
            synchronous_front: true,
            ..Default::default()
        };
        let items = generate_dataset(&spec).unwrap();
        assert_eq!(items.len(), 9 + 8);
        assert_eq!(items.iter().filter(|i| i.front_copy).count(), 8);
    }

    #[test]
    fn side_views_drop_more_joints() {
        let spec = SynthSpec { n_classes: 2, subjects_per_class: 3, frames_orbit: 40, ..Default::default() };
        let items = generate_dataset(&spec).unwrap();
        let missing = |view: usize| -> usize {
            items
                .iter()
                .filter(|i| i.sequence.view.fixed().map(|v| v.index()) == Some(view))
                .map(|i| validate_sequence(&i.sequence).missing_joint_count)
                .sum()
        };
        assert_eq!(missing(0), 0);
        assert!(missing(2) > missing(0));
        assert!(missing(6) > missing(0));
    }

    #[test]
    fn segments_drop_together() {
        let spec = SynthSpec { n_classes: 1, subjects_per_class: 2, frames_orbit: 40, ..Default::default() };
        for item in generate_dataset(&spec).unwrap() {
            for f in &item.sequence.frames {
                for j in 0..JOINT_COUNT {
                    let peer = (0..JOINT_COUNT).find(|&k| SEGMENT[k] == SEGMENT[j]).unwrap();
                    assert_eq!(f.valid[j], f.valid[peer]);
                }
            }
        }
    }
}
