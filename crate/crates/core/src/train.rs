//! Full model state, the three-step training procedure, single-channel
//! training and inference.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channels::{channel_loss_grad, route_training, route_test, ActionTarget, ChannelArch, ChannelParams, ChannelScores};
use crate::encoder::{SkeletonImage, DEFAULT_FRAMES, IMAGE_CHANNELS};
use crate::error::{invalid, shape, Result};
use crate::fusion::{fused_scores, FusionParams};
use crate::nn::{argmax, cross_entropy, softmax, Block, Parameters, Trace};
use crate::optim::{sgd_step, Momentum};
use crate::view_groups::{
    check_image, fusion_weights, fusion_weights_backward, group_loss, group_loss_grad, group_target, FusionSign,
    FusionWeights, GroupScore, PredictorArch, PredictorParams, ViewGroup, GROUP_COUNT,
};

/// Architecture of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Sampled frames per image (image width).
    pub frames: usize,
    pub classes: usize,
    pub input_channels: usize,
    pub predictor: PredictorArch,
    pub channel: ChannelArch,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frames: DEFAULT_FRAMES,
            classes: crate::skeleton::ACTION_COUNT,
            input_channels: IMAGE_CHANNELS,
            predictor: PredictorArch::default(),
            channel: ChannelArch::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEpochs {
    pub predictor: usize,
    pub channels: usize,
    pub end_to_end: usize,
}

impl Default for StepEpochs {
    fn default() -> Self {
        Self { predictor: 30, channels: 50, end_to_end: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: StepEpochs,
    pub seed: u64,
    pub fusion_sign: FusionSign,
    pub single_channel_mode: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: StepEpochs::default(),
            seed: 0,
            fusion_sign: FusionSign::Literal,
            single_channel_mode: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        let e = self.epochs;
        if e.predictor == 0 || e.channels == 0 || e.end_to_end == 0 {
            return Err(invalid("every training step needs at least one epoch"));
        }
        Ok(())
    }
}

/// Last training stage applied to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initialized,
    Predictor,
    Channels,
    EndToEnd,
    SingleChannel,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initialized => "initialized",
            Stage::Predictor => "predictor",
            Stage::Channels => "channels",
            Stage::EndToEnd => "e2e",
            Stage::SingleChannel => "single-channel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "initialized" => Ok(Stage::Initialized),
            "predictor" => Ok(Stage::Predictor),
            "channels" => Ok(Stage::Channels),
            "e2e" => Ok(Stage::EndToEnd),
            "single-channel" => Ok(Stage::SingleChannel),
            other => Err(invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// Weights pinned to the first channel in single-channel mode.
pub const SINGLE_CHANNEL_WEIGHTS: FusionWeights = FusionWeights([1.0, 0.0, 0.0, 0.0]);

/// Predictor, four channels and the fusion classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub predictor: PredictorParams,
    pub channels: [ChannelParams; GROUP_COUNT],
    pub fusion: FusionParams,
    pub fusion_sign: FusionSign,
    /// Fixed fusion weights that bypass the predictor.
    pub pinned_alpha: Option<FusionWeights>,
    pub stage: Stage,
}

impl ModelState {
    /// Seeded uniform fan-in initialization.
    pub fn init(config: &ModelConfig, fusion_sign: FusionSign, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x1417);
        let predictor = PredictorParams::init(&config.predictor, config.input_channels, &mut rng);
        let channels = core::array::from_fn(|_| {
            ChannelParams::init(&config.channel, config.input_channels, config.classes, &mut rng)
        });
        let fusion = FusionParams::init(config.classes, &mut rng);
        Self {
            config: config.clone(),
            predictor,
            channels,
            fusion,
            fusion_sign,
            pinned_alpha: None,
            stage: Stage::Initialized,
        }
    }

    /// Same layout with every parameter zero (gradient accumulator).
    pub fn zeroed(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn alpha(&self, z: &GroupScore) -> FusionWeights {
        self.pinned_alpha.unwrap_or_else(|| fusion_weights(z, self.fusion_sign))
    }
}

fn prefixed<'a>(prefix: &str, blocks: Vec<Block<'a>>) -> impl Iterator<Item = Block<'a>> + 'a {
    let prefix = String::from(prefix);
    blocks.into_iter().map(move |b| Block { name: format!("{prefix}.{}", b.name), ..b })
}

impl Parameters for PredictorParams {
    fn blocks(&self) -> Vec<Block<'_>> {
        self.net.blocks()
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.blocks_mut()
    }
}

impl Parameters for ChannelParams {
    fn blocks(&self) -> Vec<Block<'_>> {
        self.net.blocks()
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.blocks_mut()
    }
}

impl Parameters for FusionParams {
    fn blocks(&self) -> Vec<Block<'_>> {
        self.layer.blocks()
    }
    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layer.blocks_mut()
    }
}

impl Parameters for ModelState {
    fn blocks(&self) -> Vec<Block<'_>> {
        let mut out: Vec<Block<'_>> = prefixed("predictor", self.predictor.blocks()).collect();
        for (i, c) in self.channels.iter().enumerate() {
            out.extend(prefixed(&format!("channel{}", i + 1), c.blocks()));
        }
        out.extend(prefixed("fusion", self.fusion.blocks()));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.predictor.blocks_mut();
        for c in &mut self.channels {
            out.extend(c.blocks_mut());
        }
        out.extend(self.fusion.blocks_mut());
        out
    }
}

/// Loss curves and non-fatal training events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// `(stage, epoch, mean loss)`; channel epochs are tagged with the
    /// channel id in `channel`.
    pub epochs: Vec<EpochLoss>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub stage: Stage,
    pub channel: Option<usize>,
    pub epoch: usize,
    pub loss: f64,
}

fn check_dataset(data: &[SkeletonImage], model: &ModelState) -> Result<()> {
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    for (i, x) in data.iter().enumerate() {
        check_image(x, &model.predictor.net)?;
        if x.label >= model.config.classes {
            return Err(invalid(format!("sample {i} label {} outside {} classes", x.label, model.config.classes)));
        }
        if x.view.is_none() {
            return Err(invalid(format!("sample {i} has no view metadata")));
        }
    }
    Ok(())
}

/// Runs `epochs` passes of shuffled mini-batch SGD over `indices`.
/// `sample_grad` accumulates one sample's gradient and returns its loss.
#[allow(clippy::too_many_arguments)]
fn run_sgd<P, F>(
    params: &mut P,
    indices: &[usize],
    cfg: &TrainConfig,
    epochs: usize,
    stream: u64,
    stage: Stage,
    channel: Option<usize>,
    log: &mut TrainingLog,
    mut sample_grad: F,
) -> Result<()>
where
    P: Parameters + Clone,
    F: FnMut(&P, usize, &mut P) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut order = indices.to_vec();
    let mut velocity = Momentum::default();
    let mut grad = params.clone();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                total += sample_grad(params, i, &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for b in grad.blocks_mut() {
                b.iter_mut().for_each(|v| *v *= scale);
            }
            sgd_step(params, &grad, &mut velocity, cfg.learning_rate, cfg.momentum)?;
        }
        log.epochs.push(EpochLoss { stage, channel, epoch, loss: total / order.len() as f64 });
    }
    Ok(())
}

/// Group loss of one sample and its gradient w.r.t. the predictor.
pub fn predictor_loss_and_grad(params: &PredictorParams, x: &SkeletonImage, grad: &mut PredictorParams) -> Result<f64> {
    let view = x.view.as_ref().ok_or_else(|| invalid("sample has no view metadata"))?;
    let target = group_target(view.routing_angle());
    let trace = params.net.forward(&x.pixels)?;
    let z = GroupScore(core::array::from_fn(|i| trace.logits[i]));
    params.net.backward(&trace, &group_loss_grad(&z, &target), &mut grad.net);
    Ok(group_loss(&z, &target))
}

/// Channel loss of one sample and its gradient w.r.t. that channel.
pub fn channel_loss_and_grad(params: &ChannelParams, x: &SkeletonImage, grad: &mut ChannelParams) -> Result<f64> {
    let target = ActionTarget::new(x.label, params.net.outputs())?;
    let trace = params.net.forward(&x.pixels)?;
    let scores = ChannelScores(softmax(&trace.logits));
    params.net.backward(&trace, &channel_loss_grad(&scores, &target), &mut grad.net);
    Ok(cross_entropy(&scores.0, &target.one_hot()))
}

/// Step 1: fit the predictor to ground-truth group targets.
pub fn train_predictor(model: &mut ModelState, data: &[SkeletonImage], cfg: &TrainConfig, log: &mut TrainingLog) -> Result<()> {
    cfg.validate()?;
    check_dataset(data, model)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    run_sgd(&mut model.predictor, &idx, cfg, cfg.epochs.predictor, 1, Stage::Predictor, None, log, |p, i, g| {
        predictor_loss_and_grad(p, &data[i], g)
    })?;
    model.stage = Stage::Predictor;
    Ok(())
}

/// Step 2: each channel trains on the samples routed to it. Overlap-view
/// samples reach both of their channels with full weight.
pub fn train_channels(model: &mut ModelState, data: &[SkeletonImage], cfg: &TrainConfig, log: &mut TrainingLog) -> Result<()> {
    cfg.validate()?;
    check_dataset(data, model)?;
    let mut routed: [Vec<usize>; GROUP_COUNT] = Default::default();
    for (i, x) in data.iter().enumerate() {
        for g in route_training(x)?.iter() {
            routed[g.index()].push(i);
        }
    }
    for (c, idx) in routed.iter().enumerate() {
        if idx.is_empty() {
            log.warnings.push(format!("channel {} received no samples; left at initialization", c + 1));
            continue;
        }
        run_sgd(
            &mut model.channels[c],
            idx,
            cfg,
            cfg.epochs.channels,
            10 + c as u64,
            Stage::Channels,
            Some(c + 1),
            log,
            |p, i, g| channel_loss_and_grad(p, &data[i], g),
        )?;
    }
    model.stage = Stage::Channels;
    Ok(())
}

/// Forward pass of the full network with everything needed for backprop.
pub struct FullTrace {
    pub z: GroupScore,
    pub alpha: FusionWeights,
    pub channel_scores: [ChannelScores; GROUP_COUNT],
    /// `s = Σ α_i ŷ^i`
    pub fused: Vec<f64>,
    pub prediction: Vec<f64>,
    predictor: Option<Trace>,
    channels: [Option<Trace>; GROUP_COUNT],
}

/// Evaluates the whole network. Channels with zero weight are skipped and
/// report a uniform distribution.
pub fn full_forward(model: &ModelState, x: &SkeletonImage) -> Result<FullTrace> {
    forward_with(model, x, true)
}

/// With pinned weights the predictor only feeds diagnostics; `scores`
/// selects whether it is evaluated at all.
fn forward_with(model: &ModelState, x: &SkeletonImage, scores: bool) -> Result<FullTrace> {
    check_image(x, &model.predictor.net)?;
    let (z, ptrace) = if model.pinned_alpha.is_some() {
        let z = if scores {
            let l = model.predictor.net.logits(&x.pixels)?;
            GroupScore(l.try_into().map_err(|_| shape("predictor must emit 4 logits"))?)
        } else {
            GroupScore([0.0; GROUP_COUNT])
        };
        (z, None)
    } else {
        let t = model.predictor.net.forward(&x.pixels)?;
        (GroupScore(core::array::from_fn(|i| t.logits[i])), Some(t))
    };
    let alpha = model.alpha(&z);
    let classes = model.config.classes;
    let mut traces: [Option<Trace>; GROUP_COUNT] = Default::default();
    let channel_scores = core::array::from_fn(|i| {
        if alpha.0[i] == 0.0 {
            return Ok(ChannelScores(vec![1.0 / classes as f64; classes]));
        }
        let t = model.channels[i].net.forward(&x.pixels)?;
        let s = ChannelScores(softmax(&t.logits));
        traces[i] = Some(t);
        Ok(s)
    });
    let channel_scores = {
        let [a, b, c, d]: [Result<ChannelScores>; GROUP_COUNT] = channel_scores;
        [a?, b?, c?, d?]
    };
    let fused = fused_scores(&channel_scores, &alpha)?;
    let prediction = softmax(&model.fusion.layer.forward(&fused));
    Ok(FullTrace { z, alpha, channel_scores, fused, prediction, predictor: ptrace, channels: traces })
}

/// Backpropagates the channel-`i` contribution given `dL/ds`: the score
/// gradient is `α_i · dL/ds`, so a zero weight yields an exactly zero update.
fn backprop_channel(
    model: &ModelState,
    i: usize,
    trace: &FullTrace,
    dfused: &[f64],
    grad: &mut ModelState,
) {
    let a = trace.alpha.0[i];
    let Some(t) = trace.channels[i].as_ref() else { return };
    if a == 0.0 {
        return;
    }
    let y = &trace.channel_scores[i].0;
    let dscore: Vec<f64> = dfused.iter().map(|d| a * d).collect();
    let dot: f64 = y.iter().zip(&dscore).map(|(p, d)| p * d).sum();
    let dlogits: Vec<f64> = y.iter().zip(&dscore).map(|(p, d)| p * (d - dot)).collect();
    model.channels[i].net.backward(t, &dlogits, &mut grad.channels[i].net);
}

/// Fusion loss of one sample and its gradient w.r.t. every parameter
/// (predictor included unless the fusion weights are pinned).
pub fn end_to_end_loss_and_grad(model: &ModelState, x: &SkeletonImage, grad: &mut ModelState) -> Result<f64> {
    let target = ActionTarget::new(x.label, model.config.classes)?;
    let trace = forward_with(model, x, false)?;
    let mut dlogits = trace.prediction.clone();
    dlogits[target.label] -= 1.0;
    let dfused = model.fusion.layer.backward(&trace.fused, &dlogits, &mut grad.fusion.layer);
    for i in 0..GROUP_COUNT {
        backprop_channel(model, i, &trace, &dfused, grad);
    }
    if let Some(pt) = trace.predictor.as_ref() {
        let dalpha: [f64; GROUP_COUNT] = core::array::from_fn(|i| {
            trace.channel_scores[i].0.iter().zip(&dfused).map(|(p, d)| p * d).sum()
        });
        let dz = fusion_weights_backward(&trace.alpha, &dalpha, model.fusion_sign);
        model.predictor.net.backward(pt, &dz, &mut grad.predictor.net);
    }
    Ok(cross_entropy(&trace.prediction, &target.one_hot()))
}

/// Step 3: end-to-end training of the fused network.
pub fn train_end_to_end(model: &mut ModelState, data: &[SkeletonImage], cfg: &TrainConfig, log: &mut TrainingLog) -> Result<()> {
    cfg.validate()?;
    check_dataset(data, model)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let stage = if model.pinned_alpha.is_some() { Stage::SingleChannel } else { Stage::EndToEnd };
    run_sgd(model, &idx, cfg, cfg.epochs.end_to_end, 3, stage, None, log, |m, i, g| {
        end_to_end_loss_and_grad(m, &data[i], g)
    })?;
    model.stage = stage;
    Ok(())
}

/// Predictor, then routed channels, then end-to-end fine-tuning.
pub fn train_three_steps(data: &[SkeletonImage], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<(ModelState, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let mut model = ModelState::init(model_cfg, cfg.fusion_sign, cfg.seed);
    let mut log = TrainingLog::default();
    train_predictor(&mut model, data, cfg, &mut log)?;
    train_channels(&mut model, data, cfg, &mut log)?;
    train_end_to_end(&mut model, data, cfg, &mut log)?;
    Ok((model, log))
}

/// Trains channel 1 and the fusion classifier with α pinned to (1, 0, 0, 0);
/// the predictor and channels 2–4 keep their initial values.
pub fn train_single_channel(data: &[SkeletonImage], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<(ModelState, TrainingLog)> {
    if !cfg.single_channel_mode {
        return Err(invalid("single-channel training requires single_channel_mode"));
    }
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let mut model = ModelState::init(model_cfg, cfg.fusion_sign, cfg.seed);
    model.pinned_alpha = Some(SINGLE_CHANNEL_WEIGHTS);
    let mut log = TrainingLog::default();
    train_end_to_end(&mut model, data, cfg, &mut log)?;
    Ok((model, log))
}

/// Prediction plus the intermediate values behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub action: usize,
    pub z: GroupScore,
    pub alpha: FusionWeights,
    /// Group selected by `argmax z`.
    pub routed: ViewGroup,
    pub channel_scores: [ChannelScores; GROUP_COUNT],
    pub prediction: Vec<f64>,
}

pub fn infer(x: &SkeletonImage, model: &ModelState) -> Result<Inference> {
    let t = full_forward(model, x)?;
    Ok(Inference {
        action: argmax(&t.prediction),
        routed: route_test(&t.z),
        z: t.z,
        alpha: t.alpha,
        channel_scores: t.channel_scores,
        prediction: t.prediction,
    })
}
