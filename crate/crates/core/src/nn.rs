//! Minimal convolutional network: 3×3 same-padded convolutions with
//! rectification and optional 2×2 max pooling, global average pooling and a
//! linear head. Forward passes return a trace that the backward pass consumes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{shape, Result};

/// Dense `channels × height × width` activation, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(shape(format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// `c = a · b + beta · c` where `a` is `m×k` (or its transpose stored `k×m`)
/// and `b` is `k×n` (or its transpose stored `n×k`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the length assertions above bound every index the kernel
    // touches for the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// 3×3 convolution with zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// `out × in × 3 × 3`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            stride,
            weight: vec![0.0; out_channels * in_channels * 9],
            bias: vec![0.0; out_channels],
        }
    }

    /// He-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, stride: usize, rng: &mut R) -> Self {
        let mut conv = Self::zeros(in_channels, out_channels, stride);
        let bound = libm::sqrt(6.0 / (in_channels * 9) as f64);
        conv.weight.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        conv
    }

    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        ((height - 1) / self.stride + 1, (width - 1) / self.stride + 1)
    }

    fn im2col(&self, x: &FeatureMap) -> Vec<f64> {
        let (oh, ow) = self.output_dims(x.height, x.width);
        let p = oh * ow;
        let mut col = vec![0.0; self.in_channels * 9 * p];
        for ci in 0..self.in_channels {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut col[((ci * 3 + ky) * 3 + kx) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy >= x.height as isize {
                            continue;
                        }
                        let src = &x.data[(ci * x.height + iy as usize) * x.width..][..x.width];
                        let dst = &mut row[oy * ow..][..ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && ix < x.width as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, dcol: &[f64], height: usize, width: usize) -> FeatureMap {
        let (oh, ow) = self.output_dims(height, width);
        let p = oh * ow;
        let mut dx = FeatureMap::zeros(self.in_channels, height, width);
        for ci in 0..self.in_channels {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &dcol[((ci * 3 + ky) * 3 + kx) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy >= height as isize {
                            continue;
                        }
                        let base = (ci * height + iy as usize) * width;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && ix < width as isize {
                                dx.data[base + ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Fully connected layer, `weight` is `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(inputs, outputs);
        let bound = 1.0 / libm::sqrt(inputs as f64);
        l.weight.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        l
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &d) in dy.iter().enumerate() {
            grad.bias[o] += d;
            if d == 0.0 {
                continue;
            }
            let row = &self.weight[o * self.inputs..][..self.inputs];
            let grow = &mut grad.weight[o * self.inputs..][..self.inputs];
            for i in 0..self.inputs {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub conv: Conv2d,
    /// 2×2 max pooling after rectification.
    pub pool: bool,
}

/// Conv stack → global average pooling → linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    pub layers: Vec<ConvLayer>,
    pub head: Linear,
}

struct LayerTrace {
    in_dims: (usize, usize),
    col: Vec<f64>,
    /// rectified conv output (before pooling)
    act: FeatureMap,
    /// flat index into `act` for each pooled output
    argmax: Option<Vec<usize>>,
}

/// Intermediate values of one forward pass.
pub struct Trace {
    layers: Vec<LayerTrace>,
    last_dims: (usize, usize, usize),
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
}

fn pooled_dim(n: usize) -> usize {
    (n / 2).max(1)
}

fn max_pool(x: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (oh, ow) = (pooled_dim(x.height), pooled_dim(x.width));
    let mut out = FeatureMap::zeros(x.channels, oh, ow);
    let mut arg = vec![0; x.channels * oh * ow];
    for c in 0..x.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (f64::NEG_INFINITY, 0);
                for y in 2 * oy..(2 * oy + 2).min(x.height) {
                    for xx in 2 * ox..(2 * ox + 2).min(x.width) {
                        let i = (c * x.height + y) * x.width + xx;
                        if x.data[i] > best.0 {
                            best = (x.data[i], i);
                        }
                    }
                }
                let o = (c * oh + oy) * ow + ox;
                out.data[o] = best.0;
                arg[o] = best.1;
            }
        }
    }
    (out, arg)
}

impl ConvNet {
    /// Builds a network from `(out_channels, stride, pool)` layer specs.
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        layers: &[(usize, usize, bool)],
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let mut c = in_channels;
        let layers = layers
            .iter()
            .map(|&(out, stride, pool)| {
                let conv = Conv2d::init(c, out, stride, rng);
                c = out;
                ConvLayer { conv, pool }
            })
            .collect();
        let head = Linear::init(c, outputs, rng);
        Self { layers, head }
    }

    pub fn input_channels(&self) -> usize {
        self.layers.first().map_or(self.head.inputs, |l| l.conv.in_channels)
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<Trace> {
        if x.channels != self.input_channels() {
            return Err(shape(format!(
                "network expects {} input channels, got {}",
                self.input_channels(),
                x.channels
            )));
        }
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut cur: Option<FeatureMap> = None;
        for layer in &self.layers {
            let input = cur.as_ref().unwrap_or(x);
            let conv = &layer.conv;
            let (oh, ow) = conv.output_dims(input.height, input.width);
            let p = oh * ow;
            let col = conv.im2col(input);
            let mut out = vec![0.0; conv.out_channels * p];
            for (o, b) in conv.bias.iter().enumerate() {
                out[o * p..][..p].iter_mut().for_each(|v| *v = *b);
            }
            gemm(conv.out_channels, conv.in_channels * 9, p, &conv.weight, false, &col, false, 1.0, &mut out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            let act = FeatureMap { channels: conv.out_channels, height: oh, width: ow, data: out };
            let in_dims = (input.height, input.width);
            let (next, argmax) = if layer.pool {
                let (pooled, arg) = max_pool(&act);
                (pooled, Some(arg))
            } else {
                (act.clone(), None)
            };
            traces.push(LayerTrace { in_dims, col, act, argmax });
            cur = Some(next);
        }
        let last = cur.as_ref().unwrap_or(x);
        let area = (last.height * last.width) as f64;
        let features: Vec<f64> = last
            .data
            .chunks_exact(last.height * last.width)
            .map(|c| c.iter().sum::<f64>() / area)
            .collect();
        let logits = self.head.forward(&features);
        Ok(Trace {
            layers: traces,
            last_dims: (last.channels, last.height, last.width),
            features,
            logits,
        })
    }

    pub fn logits(&self, x: &FeatureMap) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    /// Accumulates `dL/dθ` into `grad` given `dL/dlogits`.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64], grad: &mut ConvNet) {
        let dfeat = self.head.backward(&trace.features, dlogits, &mut grad.head);
        let (c, h, w) = trace.last_dims;
        let area = (h * w) as f64;
        let mut d = FeatureMap::zeros(c, h, w);
        for (ch, df) in dfeat.iter().enumerate() {
            d.data[ch * h * w..][..h * w].iter_mut().for_each(|v| *v = df / area);
        }
        for (i, (layer, t)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            // undo pooling
            let mut dact = match &t.argmax {
                Some(arg) => {
                    let mut full = FeatureMap::zeros(t.act.channels, t.act.height, t.act.width);
                    for (o, &src) in arg.iter().enumerate() {
                        full.data[src] += d.data[o];
                    }
                    full
                }
                None => d,
            };
            for (g, a) in dact.data.iter_mut().zip(&t.act.data) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            let conv = &layer.conv;
            let gconv = &mut grad.layers[i].conv;
            let p = t.act.height * t.act.width;
            let k = conv.in_channels * 9;
            for (o, gb) in gconv.bias.iter_mut().enumerate() {
                *gb += dact.data[o * p..][..p].iter().sum::<f64>();
            }
            gemm(conv.out_channels, p, k, &dact.data, false, &t.col, true, 1.0, &mut gconv.weight);
            if i == 0 {
                break;
            }
            let mut dcol = vec![0.0; k * p];
            gemm(k, conv.out_channels, p, &conv.weight, true, &dact.data, false, 0.0, &mut dcol);
            d = conv.col2im(&dcol, t.in_dims.0, t.in_dims.1);
        }
    }
}

/// Named parameter block view.
pub struct Block<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// A collection of trainable tensors with a stable order.
pub trait Parameters {
    fn blocks(&self) -> Vec<Block<'_>>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v = value);
        }
    }

    /// `self += scale * other`; both sides must share a layout.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let src = other.blocks();
        for (dst, s) in self.blocks_mut().into_iter().zip(src) {
            dst.iter_mut().zip(s.data).for_each(|(d, v)| *d += scale * v);
        }
    }
}

impl Parameters for ConvNet {
    fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let c = &l.conv;
            out.push(Block {
                name: format!("conv{i}.weight"),
                shape: vec![c.out_channels, c.in_channels, 3, 3],
                data: &c.weight,
            });
            out.push(Block { name: format!("conv{i}.bias"), shape: vec![c.out_channels], data: &c.bias });
        }
        out.push(Block {
            name: "head.weight".into(),
            shape: vec![self.head.outputs, self.head.inputs],
            data: &self.head.weight,
        });
        out.push(Block { name: "head.bias".into(), shape: vec![self.head.outputs], data: &self.head.bias });
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.conv.weight);
            out.push(&mut l.conv.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

impl Parameters for Linear {
    fn blocks(&self) -> Vec<Block<'_>> {
        vec![
            Block { name: "weight".into(), shape: vec![self.outputs, self.inputs], data: &self.weight },
            Block { name: "bias".into(), shape: vec![self.outputs], data: &self.bias },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log softmax(logits)`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
    logits.iter().map(|&v| v - lse).collect()
}

/// `-Σ target · log(probs)`, skipping zero-weight terms.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&p, &t)| -t * libm::log(p.max(f64::MIN_POSITIVE)))
        .sum()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
