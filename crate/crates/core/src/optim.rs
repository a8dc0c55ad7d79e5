//! Stochastic gradient descent with momentum.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape, Result};
use crate::nn::Parameters;

/// Per-block velocity buffers, created on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Momentum {
    buffers: Vec<Vec<f64>>,
}

/// `v ← μ·v + g`, `θ ← θ − η·v`. With `μ = 0` this is plain `θ ← θ − η·g`.
pub fn sgd_step<P: Parameters>(
    params: &mut P,
    grads: &P,
    velocity: &mut Momentum,
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    let g = grads.blocks();
    let mut p = params.blocks_mut();
    if g.len() != p.len() || g.iter().zip(&p).any(|(g, p)| g.data.len() != p.len()) {
        return Err(shape("gradient layout does not match parameters"));
    }
    if velocity.buffers.is_empty() {
        velocity.buffers = g.iter().map(|b| alloc::vec![0.0; b.data.len()]).collect();
    } else if velocity.buffers.len() != g.len()
        || velocity.buffers.iter().zip(&g).any(|(v, g)| v.len() != g.data.len())
    {
        return Err(shape(format!("momentum buffers sized for another model")));
    }
    for ((theta, grad), v) in p.iter_mut().zip(&g).zip(&mut velocity.buffers) {
        for ((t, &d), vel) in theta.iter_mut().zip(grad.data).zip(v.iter_mut()) {
            *vel = momentum * *vel + d;
            *t -= learning_rate * *vel;
        }
    }
    Ok(())
}
