//! Weighted fusion of the four channel score vectors and the final
//! classifier.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::channels::{ActionTarget, ChannelScores};
use crate::error::{shape, Result};
use crate::nn::{cross_entropy, softmax, Linear};
use crate::view_groups::{FusionWeights, GROUP_COUNT};

/// Fully connected classifier over the fused score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub layer: Linear,
}

impl FusionParams {
    pub fn init<R: Rng + ?Sized>(classes: usize, rng: &mut R) -> Self {
        Self { layer: Linear::init(classes, classes, rng) }
    }

    pub fn classes(&self) -> usize {
        self.layer.outputs
    }
}

/// `s = Σ α_i ŷ^i`.
pub fn fused_scores(scores: &[ChannelScores; GROUP_COUNT], alpha: &FusionWeights) -> Result<Vec<f64>> {
    let n = scores[0].0.len();
    if scores.iter().any(|s| s.0.len() != n) {
        return Err(shape("channel score vectors differ in length"));
    }
    let mut s = alloc::vec![0.0; n];
    for (sc, &a) in scores.iter().zip(&alpha.0) {
        if a == 0.0 {
            continue;
        }
        s.iter_mut().zip(&sc.0).for_each(|(acc, v)| *acc += a * v);
    }
    Ok(s)
}

/// `softmax(ω · Σ α_i ŷ^i + b)`.
pub fn fuse_predict(
    scores: &[ChannelScores; GROUP_COUNT],
    alpha: &FusionWeights,
    params: &FusionParams,
) -> Result<Vec<f64>> {
    let s = fused_scores(scores, alpha)?;
    if s.len() != params.layer.inputs {
        return Err(shape(format!("{} channel classes, fusion layer expects {}", s.len(), params.layer.inputs)));
    }
    Ok(softmax(&params.layer.forward(&s)))
}

pub fn fusion_loss(prediction: &[f64], y: &ActionTarget) -> f64 {
    cross_entropy(prediction, &y.one_hot())
}
