//! View-guided feature-learning channels and their routing rules.

use alloc::vec::Vec;

use rand::Rng;

use crate::encoder::SkeletonImage;
use crate::error::{invalid, Result};
use crate::nn::{argmax, cross_entropy, softmax, ConvNet};
use crate::view_groups::{check_image, group_membership, GroupScore, GroupSet, ViewGroup};

/// Backbone widths; each block is conv 3×3 → ReLU → 2×2 max pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelArch {
    pub widths: Vec<usize>,
}

impl Default for ChannelArch {
    fn default() -> Self {
        Self { widths: alloc::vec![32, 64, 128, 256] }
    }
}

/// One channel: backbone `θ_i` plus classifier head `ω_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub net: ConvNet,
}

impl ChannelParams {
    pub fn init<R: Rng + ?Sized>(arch: &ChannelArch, in_channels: usize, classes: usize, rng: &mut R) -> Self {
        let layers: Vec<_> = arch.widths.iter().map(|&w| (w, 1, true)).collect();
        Self { net: ConvNet::init(in_channels, &layers, classes, rng) }
    }
}

/// Post-softmax action distribution of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScores(pub Vec<f64>);

/// One-hot action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionTarget {
    pub label: usize,
    pub classes: usize,
}

impl ActionTarget {
    pub fn new(label: usize, classes: usize) -> Result<Self> {
        if label >= classes {
            return Err(invalid(alloc::format!("label {label} outside {classes} classes")));
        }
        Ok(Self { label, classes })
    }

    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.classes];
        v[self.label] = 1.0;
        v
    }
}

pub fn channel_forward(x: &SkeletonImage, params: &ChannelParams) -> Result<ChannelScores> {
    check_image(x, &params.net)?;
    Ok(ChannelScores(softmax(&params.net.logits(&x.pixels)?)))
}

pub fn channel_loss(scores: &ChannelScores, y: &ActionTarget) -> f64 {
    cross_entropy(&scores.0, &y.one_hot())
}

/// `dL/dlogits = ŷ - y`.
pub fn channel_loss_grad(scores: &ChannelScores, y: &ActionTarget) -> Vec<f64> {
    let mut g = scores.0.clone();
    g[y.label] -= 1.0;
    g
}

/// Training-time routing: the ground-truth groups of the sample's view.
pub fn route_training(sample: &SkeletonImage) -> Result<GroupSet> {
    let view = sample.view.as_ref().ok_or_else(|| invalid("sample has no view metadata"))?;
    Ok(group_membership(view.routing_angle()))
}

/// Test-time routing: the highest-scoring group, lowest index on ties.
pub fn route_test(z: &GroupScore) -> ViewGroup {
    ViewGroup::from_index(argmax(&z.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::FeatureMap;
    use crate::skeleton::{ViewDescriptor, Viewpoint};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn image(view: Option<ViewDescriptor>) -> SkeletonImage {
        SkeletonImage { pixels: FeatureMap::zeros(6, 25, 8), label: 0, view, subject_id: 1 }
    }

    #[test]
    fn zero_head_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ChannelParams::init(&ChannelArch { widths: vec![4, 4] }, 6, 40, &mut rng);
        p.net.head.weight.iter_mut().for_each(|w| *w = 0.0);
        let s = channel_forward(&image(None), &p).unwrap();
        assert!(s.0.iter().all(|v| (v - 1.0 / 40.0).abs() < 1e-15));
        let y = ActionTarget::new(3, 40).unwrap();
        assert!((channel_loss(&s, &y) - libm::log(40.0)).abs() < 1e-12);
    }

    #[test]
    fn loss_half_probability() {
        let s = ChannelScores(vec![0.5, 0.25, 0.25]);
        assert!((channel_loss(&s, &ActionTarget::new(0, 3).unwrap()) - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ChannelParams::init(&ChannelArch { widths: vec![4] }, 6, 5, &mut rng);
        let mut bad = image(None);
        bad.pixels = FeatureMap::zeros(3, 25, 8);
        assert!(channel_forward(&bad, &p).is_err());
    }

    #[test]
    fn routing_examples() {
        let at = |i| Some(ViewDescriptor::Fixed(Viewpoint::new(i).unwrap()));
        assert_eq!(route_training(&image(at(1))).unwrap().ids(), vec![1]);
        assert_eq!(route_training(&image(at(4))).unwrap().ids(), vec![2, 3]);
        let orbit = Some(ViewDescriptor::Varying(vec![190.0, 200.0, 210.0]));
        assert_eq!(route_training(&image(orbit)).unwrap().ids(), vec![3]);
        assert!(route_training(&image(None)).is_err());

        assert_eq!(route_test(&GroupScore([0.1, 0.9, 0.2, 0.3])).id(), 2);
        assert_eq!(route_test(&GroupScore([0.5, 0.5, 0.1, 0.1])).id(), 1);
        assert_eq!(route_test(&GroupScore([-3.0, -1.0, -2.0, -5.0])).id(), 2);
    }
}
