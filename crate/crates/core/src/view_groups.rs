//! Four overlapping view groups, the group predictor, fusion weights and the
//! group prediction loss.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::encoder::SkeletonImage;
use crate::error::{invalid, shape, Error, Result};
use crate::nn::{log_softmax, softmax, ConvNet};
use crate::skeleton::Viewpoint;

pub const GROUP_COUNT: usize = 4;

/// A view group, numbered 1 to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewGroup(u8);

impl ViewGroup {
    pub fn new(id: usize) -> Result<Self> {
        if (1..=GROUP_COUNT).contains(&id) {
            Ok(ViewGroup(id as u8))
        } else {
            Err(invalid(format!("view group {id} not in 1..=4")))
        }
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < GROUP_COUNT);
        ViewGroup(index as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = ViewGroup> {
        (1..=GROUP_COUNT as u8).map(ViewGroup)
    }

    /// 1-based id.
    pub fn id(self) -> usize {
        self.0 as usize
    }

    /// 0-based index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// The three viewpoints of this group; group `g` spans viewpoints
    /// `2(g-1) ..= 2g` (mod 8), so consecutive groups share one viewpoint.
    pub fn viewpoints(self) -> [Viewpoint; 3] {
        let first = 2 * self.index();
        [0, 1, 2].map(|k| Viewpoint::new((first + k) % 8).unwrap())
    }

    /// Closed angle range `[lo, hi]` in degrees; group 4 also contains 0°.
    pub fn angle_range(self) -> (f64, f64) {
        let lo = 90.0 * self.index() as f64;
        (lo, lo + 90.0)
    }
}

impl fmt::Display for ViewGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.0)
    }
}

/// Set of view groups (1 or 2 members for any angle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupSet(u8);

impl GroupSet {
    pub fn insert(&mut self, g: ViewGroup) {
        self.0 |= 1 << g.index();
    }

    pub fn contains(self, g: ViewGroup) -> bool {
        self.0 & (1 << g.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ViewGroup> {
        ViewGroup::all().filter(move |g| self.contains(*g))
    }

    pub fn ids(self) -> Vec<usize> {
        self.iter().map(ViewGroup::id).collect()
    }
}

/// Groups whose closed angle range contains `angle_deg` (expected in
/// `[0, 360)`; other values are wrapped).
pub fn group_membership(angle_deg: f64) -> GroupSet {
    let a = crate::skeleton::wrap_deg(angle_deg);
    let mut set = GroupSet::default();
    for g in ViewGroup::all() {
        let (lo, hi) = g.angle_range();
        if (lo..=hi).contains(&a) {
            set.insert(g);
        }
    }
    if a == 0.0 {
        set.insert(ViewGroup(4));
    }
    set
}

/// Ground-truth group distribution: uniform over the member groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTarget(pub [f64; GROUP_COUNT]);

pub fn group_target(angle_deg: f64) -> GroupTarget {
    let set = group_membership(angle_deg);
    let w = 1.0 / set.len() as f64;
    let mut y = [0.0; GROUP_COUNT];
    for g in set.iter() {
        y[g.index()] = w;
    }
    GroupTarget(y)
}

/// Raw predictor logits `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupScore(pub [f64; GROUP_COUNT]);

/// Fusion weights on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights(pub [f64; GROUP_COUNT]);

/// Sign applied to `z` before normalizing into fusion weights.
///
/// `Literal` computes `exp(-z_i) / Σ exp(-z_j)`, which favours the
/// lowest-scoring group. `Corrected` uses `exp(z_i)`, favouring the group the
/// predictor selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionSign {
    #[default]
    Literal,
    Corrected,
}

impl FusionSign {
    pub fn factor(self) -> f64 {
        match self {
            FusionSign::Literal => -1.0,
            FusionSign::Corrected => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FusionSign::Literal => "literal",
            FusionSign::Corrected => "corrected",
        }
    }
}

impl FromStr for FusionSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(FusionSign::Literal),
            "corrected" => Ok(FusionSign::Corrected),
            other => Err(invalid(format!("unknown fusion weight sign {other:?}"))),
        }
    }
}

pub fn fusion_weights(z: &GroupScore, sign: FusionSign) -> FusionWeights {
    let s = sign.factor();
    let scaled = z.0.map(|v| s * v);
    let p = softmax(&scaled);
    FusionWeights([p[0], p[1], p[2], p[3]])
}

/// `dL/dz` given `dL/dα` for the weights produced by [`fusion_weights`].
pub fn fusion_weights_backward(alpha: &FusionWeights, dalpha: &[f64; GROUP_COUNT], sign: FusionSign) -> [f64; GROUP_COUNT] {
    let dot: f64 = alpha.0.iter().zip(dalpha).map(|(a, d)| a * d).sum();
    core::array::from_fn(|k| sign.factor() * alpha.0[k] * (dalpha[k] - dot))
}

/// Cross-entropy between `softmax(z)` and the target distribution.
pub fn group_loss(z: &GroupScore, y: &GroupTarget) -> f64 {
    let logp = log_softmax(&z.0);
    -y.0.iter().zip(&logp).filter(|(t, _)| **t > 0.0).map(|(t, l)| t * l).sum::<f64>()
}

/// `dL/dz = softmax(z) - y`.
pub fn group_loss_grad(z: &GroupScore, y: &GroupTarget) -> [f64; GROUP_COUNT] {
    let p = softmax(&z.0);
    core::array::from_fn(|i| p[i] - y.0[i])
}

/// Layer widths and strides of the group predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorArch {
    pub layers: Vec<(usize, usize)>,
}

impl Default for PredictorArch {
    /// 16 kernels stride 1, 32 kernels stride 1, 32 kernels stride 2.
    fn default() -> Self {
        Self { layers: alloc::vec![(16, 1), (32, 1), (32, 2)] }
    }
}

/// Group predictor: 3×3 conv stack → global average pool → 4 logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub net: ConvNet,
}

impl PredictorParams {
    pub fn init<R: Rng + ?Sized>(arch: &PredictorArch, in_channels: usize, rng: &mut R) -> Self {
        let layers: Vec<_> = arch.layers.iter().map(|&(w, s)| (w, s, false)).collect();
        Self { net: ConvNet::init(in_channels, &layers, GROUP_COUNT, rng) }
    }
}

pub(crate) fn check_image(x: &SkeletonImage, net: &ConvNet) -> Result<()> {
    let p = &x.pixels;
    if p.channels != net.input_channels() {
        return Err(shape(format!("image has {} channels, network expects {}", p.channels, net.input_channels())));
    }
    if p.height == 0 || p.width == 0 || p.data.len() != p.channels * p.height * p.width {
        return Err(shape("empty or inconsistent image"));
    }
    Ok(())
}

pub fn predict_groups(x: &SkeletonImage, params: &PredictorParams) -> Result<GroupScore> {
    check_image(x, &params.net)?;
    let z = params.net.logits(&x.pixels)?;
    Ok(GroupScore([z[0], z[1], z[2], z[3]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn partition_shape() {
        let g: Vec<Vec<usize>> =
            ViewGroup::all().map(|g| g.viewpoints().iter().map(|v| v.index()).collect()).collect();
        assert_eq!(g, vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 5, 6], vec![6, 7, 0]]);
    }

    #[test]
    fn membership_examples() {
        assert_eq!(group_membership(0.0).ids(), vec![1, 4]);
        assert_eq!(group_membership(90.0).ids(), vec![1, 2]);
        assert_eq!(group_membership(160.0).ids(), vec![2]);
        assert_eq!(group_membership(359.9).ids(), vec![4]);
    }

    #[test]
    fn targets() {
        assert_eq!(group_target(45.0).0, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(group_target(90.0).0, [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(group_target(270.0).0, [0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn weights_examples() {
        let w = fusion_weights(&GroupScore([0.0; 4]), FusionSign::Literal);
        assert!(w.0.iter().all(|&a| (a - 0.25).abs() < 1e-12));
        let w = fusion_weights(&GroupScore([1.0, 0.0, 0.0, 0.0]), FusionSign::Literal);
        let e = libm::exp(-1.0);
        let d = e + 3.0;
        assert!((w.0[0] - e / d).abs() < 1e-12);
        assert!((w.0[1] - 1.0 / d).abs() < 1e-12);
        let shifted = fusion_weights(&GroupScore([8.0, 7.0, 7.0, 7.0]), FusionSign::Literal);
        for i in 0..4 {
            assert!((shifted.0[i] - w.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let uniform = GroupScore([0.0; 4]);
        assert!((group_loss(&uniform, &GroupTarget([1.0, 0.0, 0.0, 0.0])) - libm::log(4.0)).abs() < 1e-12);
        assert!((group_loss(&uniform, &GroupTarget([0.5, 0.5, 0.0, 0.0])) - libm::log(4.0)).abs() < 1e-12);
        let sharp = GroupScore([50.0, 0.0, 0.0, 0.0]);
        assert!(group_loss(&sharp, &GroupTarget([1.0, 0.0, 0.0, 0.0])) < 1e-20);
    }

    #[test]
    fn sign_parse() {
        assert_eq!("corrected".parse::<FusionSign>().unwrap(), FusionSign::Corrected);
        assert!("both".parse::<FusionSign>().is_err());
        assert_eq!(FusionSign::default(), FusionSign::Literal);
    }
}
