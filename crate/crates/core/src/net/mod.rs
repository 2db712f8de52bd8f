//! A small Wave-U-Net-shaped separator.
//!
//! The network maps a mono mixture to a vocal estimate in `[-1, 1]`; the
//! accompaniment is the mixture minus that estimate. All parameters live in a
//! single flat vector so that optimizers, checkpoints and gradients share one
//! layout. Layers are stored in processing order:
//! `down_0 .. down_{d-1}, bottleneck, up_{d-1} .. up_0, output`.

mod checkpoint;
mod ops;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError,
};

use ndarray::{Array2, ArrayView2};
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::FilterBank;
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("expected input of length {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("forward pass was run without keeping activations")]
    MissingCache,
}

/// How feature counts grow from one level to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// `base * 2^level`
    Double,
    /// `base * (level + 1)`
    AddBase,
}

fn default_depth() -> usize {
    4
}
fn default_down_kernel() -> usize {
    15
}
fn default_up_kernel() -> usize {
    5
}
fn default_base_features() -> usize {
    24
}
fn default_growth() -> Growth {
    Growth::Double
}
fn default_input_len() -> usize {
    4096
}
fn default_sample_rate() -> u32 {
    8000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Levels per path.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_down_kernel")]
    pub down_kernel: usize,
    #[serde(default = "default_up_kernel")]
    pub up_kernel: usize,
    #[serde(default = "default_base_features")]
    pub base_features: usize,
    #[serde(default = "default_growth")]
    pub growth: Growth,
    #[serde(default = "default_input_len")]
    pub input_len: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub seed: u64,
    /// Treat the bottleneck conv as its own regularized hidden layer.
    #[serde(default)]
    pub bottleneck_in_mhe: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            depth: default_depth(),
            down_kernel: default_down_kernel(),
            up_kernel: default_up_kernel(),
            base_features: default_base_features(),
            growth: default_growth(),
            input_len: default_input_len(),
            sample_rate: default_sample_rate(),
            seed: 0,
            bottleneck_in_mhe: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: String| Err(NetError::InvalidConfig(msg));
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        if self.depth > 20 {
            return bad(format!("depth {} is too large", self.depth));
        }
        for (name, k) in [
            ("down_kernel", self.down_kernel),
            ("up_kernel", self.up_kernel),
        ] {
            if k % 2 == 0 {
                return bad(format!("{name} must be odd, got {k}"));
            }
        }
        if self.base_features == 0 {
            return bad("base_features must be at least 1".into());
        }
        let stride = 1usize << self.depth;
        if self.input_len == 0 || !self.input_len.is_multiple_of(stride) {
            return bad(format!(
                "input_len {} must be a positive multiple of 2^depth = {stride}",
                self.input_len
            ));
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        Ok(())
    }

    /// Output channels of down level `level` (level `depth` is the bottleneck).
    pub fn features(&self, level: usize) -> usize {
        match self.growth {
            Growth::Double => self.base_features << level,
            Growth::AddBase => self.base_features * (level + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    Down(usize),
    Bottleneck,
    Up(usize),
    Output,
}

/// Shape and parameter offsets of one conv layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvLayer {
    pub role: LayerRole,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    weight_offset: usize,
    bias_offset: usize,
}

impl ConvLayer {
    pub fn weight_count(&self) -> usize {
        self.c_out * self.c_in * self.kernel
    }

    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.weight_offset + self.weight_count()
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.c_out
    }
}

fn build_layers(cfg: &NetConfig) -> (Vec<ConvLayer>, usize) {
    let mut specs = Vec::with_capacity(2 * cfg.depth + 2);
    let mut c_in = 1;
    for level in 0..cfg.depth {
        let c_out = cfg.features(level);
        specs.push((LayerRole::Down(level), c_in, c_out, cfg.down_kernel));
        c_in = c_out;
    }
    let bottom = cfg.features(cfg.depth);
    specs.push((LayerRole::Bottleneck, c_in, bottom, cfg.down_kernel));
    c_in = bottom;
    for level in (0..cfg.depth).rev() {
        let c_out = cfg.features(level);
        specs.push((
            LayerRole::Up(level),
            c_in + cfg.features(level),
            c_out,
            cfg.up_kernel,
        ));
        c_in = c_out;
    }
    specs.push((LayerRole::Output, c_in, 1, 1));

    let mut offset = 0;
    let layers = specs
        .into_iter()
        .map(|(role, c_in, c_out, kernel)| {
            let weight_offset = offset;
            let bias_offset = weight_offset + c_out * c_in * kernel;
            offset = bias_offset + c_out;
            ConvLayer {
                role,
                c_in,
                c_out,
                kernel,
                weight_offset,
                bias_offset,
            }
        })
        .collect();
    (layers, offset)
}

/// Network parameters. Cloning is cheap relative to training and yields an
/// independent copy.
#[derive(Debug, Clone, PartialEq)]
pub struct SepNet {
    cfg: NetConfig,
    layers: Vec<ConvLayer>,
    params: Vec<f64>,
}

/// Activations kept by [`SepNet::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Input to each layer, in layer order.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer, in layer order.
    preacts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SepOutput {
    pub vocals: Vec<f64>,
    pub accompaniment: Vec<f64>,
    cache: Option<ForwardCache>,
}

impl SepOutput {
    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn drop_cache(&mut self) {
        self.cache = None;
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_net(cfg: &NetConfig) -> Result<SepNet, NetError> {
    cfg.validate()?;
    let (layers, total) = build_layers(cfg);
    let mut params = vec![0.0; total];
    let mut rng = rng::stream(cfg.seed, Stream::Init);
    for layer in &layers {
        let fan_in = (layer.c_in * layer.kernel) as f64;
        let fan_out = (layer.c_out * layer.kernel) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in &mut params[layer.weight_range()] {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(SepNet {
        cfg: cfg.clone(),
        layers,
        params,
    })
}

impl SepNet {
    pub(crate) fn from_parts(cfg: NetConfig, params: Vec<f64>) -> Result<Self, NetError> {
        cfg.validate()?;
        let (layers, total) = build_layers(&cfg);
        if params.len() != total {
            return Err(NetError::ShapeMismatch {
                expected: total,
                actual: params.len(),
            });
        }
        Ok(Self {
            cfg,
            layers,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn layer_weights(&self, layer_id: usize) -> &[f64] {
        &self.params[self.layers[layer_id].weight_range()]
    }

    pub fn layer_bias(&self, layer_id: usize) -> &[f64] {
        &self.params[self.layers[layer_id].bias_range()]
    }

    /// Ids of the layers that count as hidden layers for regularization.
    pub fn hidden_layer_ids(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| match l.role {
                LayerRole::Down(_) | LayerRole::Up(_) => true,
                LayerRole::Bottleneck => self.cfg.bottleneck_in_mhe,
                LayerRole::Output => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// `L`: the number of regularized hidden layers.
    pub fn hidden_layer_count(&self) -> usize {
        self.hidden_layer_ids().len()
    }

    fn output_layer_id(&self) -> usize {
        self.layers.len() - 1
    }

    /// Runs the network and keeps the activations needed by [`SepNet::backward`].
    pub fn forward(&self, mixture: &[f64]) -> Result<SepOutput, NetError> {
        self.run(mixture, true)
    }

    /// Forward pass without the activation cache.
    pub fn infer(&self, mixture: &[f64]) -> Result<SepOutput, NetError> {
        self.run(mixture, false)
    }

    fn conv(&self, id: usize, x: &[f64], len: usize) -> Vec<f64> {
        let l = &self.layers[id];
        ops::conv_forward(
            x,
            l.c_in,
            len,
            &self.params[l.weight_range()],
            &self.params[l.bias_range()],
            l.c_out,
            l.kernel,
        )
    }

    fn run(&self, mixture: &[f64], keep: bool) -> Result<SepOutput, NetError> {
        let len = self.cfg.input_len;
        if mixture.len() != len {
            return Err(NetError::ShapeMismatch {
                expected: len,
                actual: mixture.len(),
            });
        }
        let depth = self.cfg.depth;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut skips = Vec::with_capacity(depth);

        let mut x = mixture.to_vec();
        let mut cur_len = len;
        let mut id = 0;
        for _ in 0..depth {
            let z = self.conv(id, &x, cur_len);
            let a = ops::leaky_relu(&z);
            let channels = self.layers[id].c_out;
            let next = ops::decimate(&a, channels, cur_len);
            inputs.push(std::mem::take(&mut x));
            preacts.push(z);
            skips.push(a);
            x = next;
            cur_len /= 2;
            id += 1;
        }

        let z = self.conv(id, &x, cur_len);
        let mut channels = self.layers[id].c_out;
        inputs.push(std::mem::take(&mut x));
        x = ops::leaky_relu(&z);
        preacts.push(z);
        id += 1;

        for level in (0..depth).rev() {
            let mut cat = ops::upsample(&x, channels, cur_len);
            cur_len *= 2;
            cat.extend_from_slice(&skips[level]);
            let z = self.conv(id, &cat, cur_len);
            channels = self.layers[id].c_out;
            x = ops::leaky_relu(&z);
            inputs.push(cat);
            preacts.push(z);
            id += 1;
        }

        let z = self.conv(id, &x, cur_len);
        let vocals: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        let accompaniment = mixture.iter().zip(&vocals).map(|(m, v)| m - v).collect();
        inputs.push(x);
        preacts.push(z);

        Ok(SepOutput {
            vocals,
            accompaniment,
            cache: keep.then_some(ForwardCache { inputs, preacts }),
        })
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the vocal estimate.
    pub fn backward(&self, out: &SepOutput, d_vocals: &[f64]) -> Result<Vec<f64>, NetError> {
        let cache = out.cache.as_ref().ok_or(NetError::MissingCache)?;
        let len = self.cfg.input_len;
        if d_vocals.len() != len {
            return Err(NetError::ShapeMismatch {
                expected: len,
                actual: d_vocals.len(),
            });
        }
        let depth = self.cfg.depth;
        let mut grads = vec![0.0; self.params.len()];

        let conv_back =
            |id: usize, dy: &[f64], cur_len: usize, grads: &mut [f64], need_dx: bool| {
                let l = &self.layers[id];
                let (wg, bg) = grads.split_at_mut(l.bias_offset);
                ops::conv_backward(
                    &cache.inputs[id],
                    l.c_in,
                    cur_len,
                    &self.params[l.weight_range()],
                    l.c_out,
                    l.kernel,
                    dy,
                    &mut wg[l.weight_offset..],
                    &mut bg[..l.c_out],
                    need_dx,
                )
            };

        let out_id = self.output_layer_id();
        let dz: Vec<f64> = d_vocals
            .iter()
            .zip(&out.vocals)
            .map(|(g, v)| g * (1.0 - v * v))
            .collect();
        let mut dx = conv_back(out_id, &dz, len, &mut grads, true).expect("dx requested");

        let mut cur_len = len;
        let mut dskips = Vec::with_capacity(depth);
        // up layers were run deepest first, so walk them back shallowest first
        for level in 0..depth {
            let id = out_id - 1 - level;
            ops::leaky_relu_backward(&cache.preacts[id], &mut dx);
            let dcat = conv_back(id, &dx, cur_len, &mut grads, true).expect("dx requested");
            let below = self.layers[id].c_in - self.cfg.features(level);
            let (du, dskip) = dcat.split_at(below * cur_len);
            dskips.push(dskip.to_vec());
            cur_len /= 2;
            dx = ops::upsample_backward(du, below, cur_len);
        }

        let id = depth;
        ops::leaky_relu_backward(&cache.preacts[id], &mut dx);
        dx = conv_back(id, &dx, cur_len, &mut grads, true).expect("dx requested");

        for level in (0..depth).rev() {
            let channels = self.layers[level].c_out;
            let mut da = ops::decimate_backward(&dx, channels, cur_len * 2);
            cur_len *= 2;
            for (d, s) in da.iter_mut().zip(&dskips[level]) {
                *d += s;
            }
            ops::leaky_relu_backward(&cache.preacts[level], &mut da);
            match conv_back(level, &da, cur_len, &mut grads, level > 0) {
                Some(next) => dx = next,
                None => break,
            }
        }
        Ok(grads)
    }

    /// Separates a signal of any length by running the network over
    /// consecutive windows; the last window is zero-padded.
    pub fn separate(&self, mixture: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        let win = self.cfg.input_len;
        let mut vocals = Vec::with_capacity(mixture.len());
        for chunk in mixture.chunks(win) {
            let out = if chunk.len() == win {
                self.infer(chunk)?
            } else {
                let mut padded = chunk.to_vec();
                padded.resize(win, 0.0);
                self.infer(&padded)?
            };
            vocals.extend_from_slice(&out.vocals[..chunk.len()]);
        }
        let accompaniment = mixture.iter().zip(&vocals).map(|(m, v)| m - v).collect();
        Ok((vocals, accompaniment))
    }

    /// One filter bank per hidden conv layer, rows = output channels and
    /// columns = `c_in * kernel` flattened channel-major then tap. The bank's
    /// `layer_id` is the layer's index in [`SepNet::layers`].
    pub fn collect_filter_banks(&self, include_output: bool) -> Vec<FilterBank> {
        let mut ids = self.hidden_layer_ids();
        if include_output {
            ids.push(self.output_layer_id());
        }
        ids.into_iter()
            .map(|id| {
                let l = &self.layers[id];
                let w = Array2::from_shape_vec(
                    (l.c_out, l.c_in * l.kernel),
                    self.layer_weights(id).to_vec(),
                )
                .expect("layer shape matches its weight slice");
                FilterBank::new(w, id).expect("network weights are finite")
            })
            .collect()
    }

    /// Adds a bank-shaped gradient into the flat gradient vector at the
    /// weights the bank was read from.
    pub fn add_bank_gradient(&self, layer_id: usize, grad: ArrayView2<'_, f64>, grads: &mut [f64]) {
        let l = &self.layers[layer_id];
        assert_eq!(
            grad.dim(),
            (l.c_out, l.c_in * l.kernel),
            "bank gradient shape"
        );
        for (g, d) in grads[l.weight_range()].iter_mut().zip(grad.iter()) {
            *g += d;
        }
    }
}
