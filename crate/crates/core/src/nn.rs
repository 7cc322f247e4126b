//! Fully connected autoencoder with leaky-ReLU activations.
//!
//! The encoder maps `input_dim -> hidden... -> latent_dim` and every encoder
//! layer, including the last one, is followed by a leaky ReLU. The decoder
//! mirrors the hidden sizes back to `input_dim`; its hidden layers are leaky
//! ReLU and its output layer is linear.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
fn leaky_relu_grad(pre: f64, slope: f64) -> f64 {
    if pre >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Weight initialization law. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// Uniform in `±sqrt(6 / ((1 + slope²) · fan_in))`, the variance-preserving
    /// law for leaky-ReLU layers.
    #[default]
    HeUniform,
    /// Uniform in `±1 / sqrt(fan_in)`.
    FanInUniform,
}

impl InitScheme {
    pub fn bound(self, fan_in: usize, slope: f64) -> f64 {
        let fan_in = fan_in as f64;
        match self {
            InitScheme::HeUniform => libm::sqrt(6.0 / ((1.0 + slope * slope) * fan_in)),
            InitScheme::FanInUniform => 1.0 / libm::sqrt(fan_in),
        }
    }
}

/// One affine map `y = x · Wᵀ + b` with `W` stored as `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Tensor2, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch {
                context: "dense layer bias",
                expected: (1, weight.rows()),
                got: (1, bias.len()),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor2::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    fn affine(&self, x: &Tensor2) -> Result<Tensor2> {
        let mut out = x.matmul_nt(&self.weight)?;
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }
}

/// Encoder and decoder parameters plus the activation slope.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
    leaky_slope: f64,
}

/// Gradients with the same layout as [`AutoencoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
}

/// Intermediates recorded by [`AutoencoderParams::forward`].
///
/// Layers are numbered encoder first, then decoder.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Tensor2>,
    pre_activations: Vec<Tensor2>,
    pub z: Tensor2,
    pub xhat: Tensor2,
}

impl Tape {
    pub fn layer_input(&self, layer: usize) -> &Tensor2 {
        &self.inputs[layer]
    }

    pub fn pre_activation(&self, layer: usize) -> &Tensor2 {
        &self.pre_activations[layer]
    }

    pub fn num_layers(&self) -> usize {
        self.pre_activations.len()
    }
}

/// Layer widths for an encoder `sizes[0] -> ... -> latent` and its mirror.
fn layer_dims(layer_sizes: &[usize], latent_dim: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if layer_sizes.is_empty() {
        return Err(Error::NoLayers);
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(Error::ZeroSizedLayer(pos));
    }
    if latent_dim == 0 {
        return Err(Error::ZeroSizedLayer(layer_sizes.len()));
    }
    let mut enc = layer_sizes.to_vec();
    enc.push(latent_dim);
    let dec: Vec<usize> = enc.iter().rev().copied().collect();
    Ok((enc, dec))
}

impl AutoencoderParams {
    pub fn new(
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
        leaky_slope: f64,
    ) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::NoLayers);
        }
        for stack in [&encoder, &decoder] {
            for pair in stack.windows(2) {
                if pair[1].fan_in() != pair[0].fan_out() {
                    return Err(Error::ShapeMismatch {
                        context: "layer chain",
                        expected: (pair[1].fan_out(), pair[0].fan_out()),
                        got: pair[1].weight.shape(),
                    });
                }
            }
        }
        let latent = encoder[encoder.len() - 1].fan_out();
        let input = encoder[0].fan_in();
        let dec_in = decoder[0].fan_in();
        let dec_out = decoder[decoder.len() - 1].fan_out();
        if dec_in != latent || dec_out != input {
            return Err(Error::ShapeMismatch {
                context: "decoder endpoints",
                expected: (latent, input),
                got: (dec_in, dec_out),
            });
        }
        if !leaky_slope.is_finite() {
            return Err(Error::InvalidConfig("leaky slope must be finite"));
        }
        Ok(Self {
            encoder,
            decoder,
            leaky_slope,
        })
    }

    /// Random weights drawn with `scheme`, zero biases, deterministic in `seed`.
    pub fn init(
        layer_sizes: &[usize],
        latent_dim: usize,
        seed: u64,
        scheme: InitScheme,
        leaky_slope: f64,
    ) -> Result<Self> {
        let (enc, dec) = layer_dims(layer_sizes, latent_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut build = |dims: &[usize]| -> Vec<DenseLayer> {
            dims.windows(2)
                .map(|w| {
                    let (fan_in, fan_out) = (w[0], w[1]);
                    let bound = scheme.bound(fan_in, leaky_slope);
                    let dist =
                        Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
                    let data = (0..fan_in * fan_out)
                        .map(|_| dist.sample(&mut rng))
                        .collect();
                    DenseLayer {
                        weight: Tensor2::from_vec(fan_out, fan_in, data).expect("sized above"),
                        bias: vec![0.0; fan_out],
                    }
                })
                .collect()
        };
        let encoder = build(&enc);
        let decoder = build(&dec);
        Self::new(encoder, decoder, leaky_slope)
    }

    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize], latent_dim: usize) -> Result<Self> {
        let (enc, dec) = layer_dims(layer_sizes, latent_dim)?;
        let build = |dims: &[usize]| {
            dims.windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect()
        };
        Self::new(build(&enc), build(&dec), DEFAULT_LEAKY_SLOPE)
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].fan_in()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].fan_out()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Encoder layers followed by decoder layers.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    /// Every parameter buffer in a fixed order: per layer (encoder first), the
    /// weight and then the bias. [`GradientSet::tensors`] uses the same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn check_input(&self, x: &Tensor2, expected: usize, context: &'static str) -> Result<()> {
        if x.cols() != expected {
            return Err(Error::ShapeMismatch {
                context,
                expected: (x.rows(), expected),
                got: x.shape(),
            });
        }
        Ok(())
    }

    fn activate(&self, t: &mut Tensor2) {
        let s = self.leaky_slope;
        t.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = leaky_relu(*v, s));
    }

    /// Latent codes `h(x)`, one row per input row.
    pub fn encode(&self, x: &Tensor2) -> Result<Tensor2> {
        self.check_input(x, self.input_dim(), "encode input")?;
        let mut h = x.clone();
        for layer in &self.encoder {
            h = layer.affine(&h)?;
            self.activate(&mut h);
        }
        Ok(h)
    }

    /// Reconstructions `g(z)`, one row per latent row.
    pub fn decode(&self, z: &Tensor2) -> Result<Tensor2> {
        self.check_input(z, self.latent_dim(), "decode input")?;
        let last = self.decoder.len() - 1;
        let mut h = z.clone();
        for (i, layer) in self.decoder.iter().enumerate() {
            h = layer.affine(&h)?;
            if i != last {
                self.activate(&mut h);
            }
        }
        Ok(h)
    }

    /// Encode and decode, keeping every layer's input and pre-activation.
    pub fn forward(&self, x: &Tensor2) -> Result<Tape> {
        self.check_input(x, self.input_dim(), "forward input")?;
        let n_layers = self.encoder.len() + self.decoder.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let last = n_layers - 1;

        let mut h = x.clone();
        let mut z = None;
        for (i, layer) in self.layers().enumerate() {
            let pre = layer.affine(&h)?;
            let mut out = pre.clone();
            if i != last {
                self.activate(&mut out);
            }
            inputs.push(core::mem::replace(&mut h, out));
            pre_activations.push(pre);
            if i + 1 == self.encoder.len() {
                z = Some(h.clone());
            }
        }
        Ok(Tape {
            inputs,
            pre_activations,
            z: z.expect("encoder is non-empty"),
            xhat: h,
        })
    }

    /// Reverse-mode gradients of a scalar loss whose partial derivatives with
    /// respect to `xhat` and `z` are `d_xhat` and `d_z`.
    pub fn backward(&self, tape: &Tape, d_xhat: &Tensor2, d_z: &Tensor2) -> Result<GradientSet> {
        let n_enc = self.encoder.len();
        if tape.num_layers() != n_enc + self.decoder.len()
            || tape
                .inputs
                .iter()
                .zip(self.layers())
                .any(|(inp, l)| inp.cols() != l.fan_in())
        {
            return Err(Error::ShapeMismatch {
                context: "tape does not belong to these parameters",
                expected: (n_enc + self.decoder.len(), 0),
                got: (tape.num_layers(), 0),
            });
        }
        d_xhat.expect_shape(tape.xhat.shape(), "backward xhat seed")?;
        d_z.expect_shape(tape.z.shape(), "backward z seed")?;

        let slope = self.leaky_slope;
        let mut encoder_grads = Vec::with_capacity(n_enc);
        let mut decoder_grads = Vec::with_capacity(self.decoder.len());
        let last = n_enc + self.decoder.len() - 1;

        // `delta` is dL/d(output of the current layer).
        let mut delta = d_xhat.clone();
        for (j, layer) in self.decoder.iter().enumerate().rev() {
            let idx = n_enc + j;
            let mut d_pre = delta;
            if idx != last {
                mask_by_activation(&mut d_pre, &tape.pre_activations[idx], slope);
            }
            decoder_grads.push(layer_gradient(&d_pre, &tape.inputs[idx])?);
            delta = d_pre.matmul(&layer.weight)?;
        }
        for (d, s) in delta.as_mut_slice().iter_mut().zip(d_z.as_slice()) {
            *d += s;
        }
        for (i, layer) in self.encoder.iter().enumerate().rev() {
            let mut d_pre = delta;
            mask_by_activation(&mut d_pre, &tape.pre_activations[i], slope);
            encoder_grads.push(layer_gradient(&d_pre, &tape.inputs[i])?);
            delta = if i > 0 {
                d_pre.matmul(&layer.weight)?
            } else {
                Tensor2::default()
            };
        }
        encoder_grads.reverse();
        decoder_grads.reverse();
        Ok(GradientSet {
            encoder: encoder_grads,
            decoder: decoder_grads,
        })
    }
}

fn mask_by_activation(d: &mut Tensor2, pre: &Tensor2, slope: f64) {
    for (g, p) in d.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        *g *= leaky_relu_grad(*p, slope);
    }
}

fn layer_gradient(d_pre: &Tensor2, input: &Tensor2) -> Result<DenseLayer> {
    Ok(DenseLayer {
        weight: d_pre.matmul_tn(input)?,
        bias: d_pre.col_sums(),
    })
}

impl GradientSet {
    pub fn zeros_like(params: &AutoencoderParams) -> Self {
        let z = |ls: &[DenseLayer]| {
            ls.iter()
                .map(|l| DenseLayer::zeros(l.fan_in(), l.fan_out()))
                .collect()
        };
        Self {
            encoder: z(params.encoder()),
            decoder: z(params.decoder()),
        }
    }

    /// Same order as [`AutoencoderParams::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn is_congruent_with(&self, params: &AutoencoderParams) -> bool {
        self.encoder.len() == params.encoder().len()
            && self.decoder.len() == params.decoder().len()
            && self
                .encoder
                .iter()
                .chain(self.decoder.iter())
                .zip(params.layers())
                .all(|(g, p)| g.weight.shape() == p.weight.shape() && g.bias.len() == p.bias.len())
    }
}

/// Default-slope autoencoder with He-uniform weights.
pub fn init_params(
    layer_sizes: &[usize],
    latent_dim: usize,
    seed: u64,
) -> Result<AutoencoderParams> {
    AutoencoderParams::init(
        layer_sizes,
        latent_dim,
        seed,
        InitScheme::default(),
        DEFAULT_LEAKY_SLOPE,
    )
}
