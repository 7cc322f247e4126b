//! Anomaly score, training objective and the alternating training loop.
//!
//! For a sample `x` with latent code `z = h(x)` and reconstruction
//! `x̂ = g(z)`, the anomaly score is
//!
//! ```text
//! S(x) = ||x̂ - x||² + γ · ||z - c||²
//! ```
//!
//! Training minimizes the batch mean of `S` over normal samples. Each batch is
//! split positionally: the first `⌈κ·n⌉` rows drive one Adam step on the
//! network with `c` frozen, the remaining rows drive one AdaGrad step on `c`
//! with the network frozen.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{AutoencoderParams, GradientSet, InitScheme, DEFAULT_LEAKY_SLOPE};
use crate::optim::{AdaGrad, Adam};
use crate::tensor::Tensor2;

/// Rows evaluated per forward pass when scoring.
const SCORE_CHUNK: usize = 256;

/// Latent norms below this are skipped by the gamma estimator.
const GAMMA_MIN_LATENT_SQ: f64 = 1e-12;

/// Slack so that e.g. `0.9 * 200` rounds up to 180, not 181.
const SPLIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// Estimated from freshly initialized networks before training.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: Gamma,
    /// Fraction of each batch used for the network update.
    pub kappa: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_lr: f64,
    pub adagrad_lr: f64,
    pub adagrad_decay: f64,
    /// L2 weight decay on network weights and biases.
    pub weight_decay: f64,
    /// Number of random initializations averaged by the gamma estimator.
    pub gamma_repeats: usize,
    pub seed: u64,
    /// Input dimension followed by the hidden widths of the encoder.
    pub layer_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub leaky_slope: f64,
    pub init: InitScheme,
}

impl TrainConfig {
    pub fn new(layer_sizes: Vec<usize>, latent_dim: usize) -> Self {
        Self {
            gamma: Gamma::Auto,
            kappa: 0.9,
            batch_size: 200,
            epochs: 300,
            adam_lr: 1e-3,
            adagrad_lr: 1.0,
            adagrad_decay: 0.1,
            weight_decay: 1e-7,
            gamma_repeats: 10,
            seed: 0,
            layer_sizes,
            latent_dim,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            init: InitScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidConfig("kappa must lie in (0, 1)"));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be at least 2"));
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(
                    "fixed gamma must be positive and finite",
                ));
            }
        }
        if self.gamma == Gamma::Auto && self.gamma_repeats == 0 {
            return Err(Error::InvalidConfig("gamma_repeats must be at least 1"));
        }
        if self.layer_sizes.is_empty() {
            return Err(Error::NoLayers);
        }
        let rates = [self.adam_lr, self.adagrad_lr];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig("learning rates must be positive"));
        }
        if !(self.adagrad_decay >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("decay terms must be non-negative"));
        }
        Ok(())
    }

    /// Rows of an `n`-row batch that update the network: `⌈κ·n⌉`.
    pub fn network_rows(&self, n: usize) -> usize {
        (libm::ceil(self.kappa * n as f64 - SPLIT_EPS) as usize).min(n)
    }
}

/// Epoch means of the training objective and its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub svdd: f64,
}

/// Batch means: `total = recon + γ · svdd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub recon: f64,
    pub svdd: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: AutoencoderParams,
    pub center: Vec<f64>,
    pub initial_center: Vec<f64>,
    pub gamma: f64,
    pub history: Vec<LossBreakdown>,
}

impl TrainedModel {
    pub fn score(&self, x: &Tensor2) -> Result<Vec<f64>> {
        score_dataset(&self.params, &self.center, self.gamma, x)
    }
}

fn check_center(params: &AutoencoderParams, c: &[f64]) -> Result<()> {
    if c.len() != params.latent_dim() {
        return Err(Error::ShapeMismatch {
            context: "center",
            expected: (1, params.latent_dim()),
            got: (1, c.len()),
        });
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Per-row reconstruction error and squared latent distance to `c`.
fn score_terms(params: &AutoencoderParams, c: &[f64], x: &Tensor2) -> Result<(Vec<f64>, Vec<f64>)> {
    check_center(params, c)?;
    let mut recon = Vec::with_capacity(x.rows());
    let mut svdd = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + SCORE_CHUNK).min(x.rows());
        let chunk = x.slice_rows(start, end);
        let tape = params.forward(&chunk)?;
        for i in 0..chunk.rows() {
            recon.push(sq_dist(tape.xhat.row(i), chunk.row(i)));
            svdd.push(sq_dist(tape.z.row(i), c));
        }
        start = end;
    }
    if x.rows() == 0 && x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            context: "score input",
            expected: (0, params.input_dim()),
            got: x.shape(),
        });
    }
    Ok((recon, svdd))
}

/// `||g(h(x)) - x||² + γ · ||h(x) - c||²` for a single sample.
pub fn anomaly_score(params: &AutoencoderParams, c: &[f64], gamma: f64, x: &[f64]) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::InvalidConfig("gamma must be non-negative"));
    }
    let x = Tensor2::from_vec(1, x.len(), x.to_vec())?;
    let (r, d) = score_terms(params, c, &x)?;
    Ok(r[0] + gamma * d[0])
}

/// Anomaly scores for every row of `x`, in row order.
pub fn score_dataset(
    params: &AutoencoderParams,
    c: &[f64],
    gamma: f64,
    x: &Tensor2,
) -> Result<Vec<f64>> {
    let (r, d) = score_terms(params, c, x)?;
    Ok(r.into_iter().zip(d).map(|(r, d)| r + gamma * d).collect())
}

/// Mean training objective over a batch; this is the loss the network update
/// differentiates.
pub fn batch_objective(
    params: &AutoencoderParams,
    c: &[f64],
    gamma: f64,
    x: &Tensor2,
) -> Result<Objective> {
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let (r, d) = score_terms(params, c, x)?;
    let n = x.rows() as f64;
    let recon = r.iter().sum::<f64>() / n;
    let svdd = d.iter().sum::<f64>() / n;
    Ok(Objective {
        total: recon + gamma * svdd,
        recon,
        svdd,
    })
}

/// [`batch_objective`] together with its gradient with respect to the network
/// parameters (center held fixed).
pub fn objective_gradients(
    params: &AutoencoderParams,
    c: &[f64],
    gamma: f64,
    x: &Tensor2,
) -> Result<(Objective, GradientSet)> {
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    check_center(params, c)?;
    let tape = params.forward(x)?;
    let k = x.rows() as f64;
    let mut d_xhat = tape.xhat.sub(x)?;
    let mut d_z = Tensor2::zeros(x.rows(), c.len());
    let (mut r_sum, mut d_sum) = (0.0, 0.0);
    for i in 0..x.rows() {
        r_sum += d_xhat.row(i).iter().map(|v| v * v).sum::<f64>();
        for ((dz, z), ci) in d_z.row_mut(i).iter_mut().zip(tape.z.row(i)).zip(c) {
            let diff = z - ci;
            d_sum += diff * diff;
            *dz = 2.0 * gamma * diff / k;
        }
    }
    d_xhat.scale(2.0 / k);
    let (recon, svdd) = (r_sum / k, d_sum / k);
    let grads = params.backward(&tape, &d_xhat, &d_z)?;
    Ok((
        Objective {
            total: recon + gamma * svdd,
            recon,
            svdd,
        },
        grads,
    ))
}

/// Gradient of the mean SVDD term `(1/n) Σ ||h(xᵢ) - c||²` with respect to
/// `c`: `2 (c - mean h(x))`.
pub fn center_gradient(params: &AutoencoderParams, c: &[f64], x: &Tensor2) -> Result<Vec<f64>> {
    check_center(params, c)?;
    let mean = optimal_center(params, x)?;
    Ok(c.iter().zip(&mean).map(|(ci, m)| 2.0 * (ci - m)).collect())
}

/// Mean latent code of the batch: the minimizer of `Σ ||h(xᵢ) - c||²` over
/// `c` with the network fixed.
pub fn optimal_center(params: &AutoencoderParams, x: &Tensor2) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let z = params.encode(x)?;
    let n = z.rows() as f64;
    Ok(z.col_sums().into_iter().map(|s| s / n).collect())
}

/// Averages, over `repeats` fresh networks from `factory`, the mean per-sample
/// ratio of reconstruction error to squared latent norm (center at the
/// origin). Samples whose latent norm is numerically zero are skipped.
pub fn estimate_gamma<F>(mut factory: F, x: &Tensor2, repeats: usize, seed: u64) -> Result<f64>
where
    F: FnMut(u64) -> Result<AutoencoderParams>,
{
    if repeats == 0 {
        return Err(Error::InvalidConfig("gamma_repeats must be at least 1"));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..repeats {
        let params = factory(rng.next_u64())?;
        let origin = vec![0.0; params.latent_dim()];
        let (recon, latent) = score_terms(&params, &origin, x)?;
        let (sum, kept) = recon
            .iter()
            .zip(&latent)
            .filter(|(_, &d)| d >= GAMMA_MIN_LATENT_SQ)
            .fold((0.0, 0usize), |(s, k), (r, d)| (s + r / d, k + 1));
        if kept == 0 {
            return Err(Error::DegenerateGamma);
        }
        acc += sum / kept as f64;
    }
    let gamma = acc / repeats as f64;
    if !gamma.is_finite() {
        return Err(Error::NonFiniteGamma);
    }
    Ok(gamma)
}

/// Turns an automatic gamma estimate into a usable weight. A zero, negative,
/// non-finite or failed estimate falls back to 1.
pub fn resolve_auto_gamma(estimate: Result<f64>) -> f64 {
    match estimate {
        Ok(g) if g > 0.0 && g.is_finite() => g,
        Ok(g) => {
            log::warn!("automatic gamma estimate {g} is unusable, falling back to 1");
            1.0
        }
        Err(e) => {
            log::warn!("automatic gamma estimation failed ({e}), falling back to 1");
            1.0
        }
    }
}

/// Seeds for the independent random streams of one training run.
struct RunSeeds {
    init: u64,
    center: u64,
    shuffle: u64,
    gamma: u64,
}

impl RunSeeds {
    fn derive(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        Self {
            init: rng.next_u64(),
            center: rng.next_u64(),
            shuffle: rng.next_u64(),
            gamma: rng.next_u64(),
        }
    }
}

pub fn train(config: &TrainConfig, x_train: &Tensor2) -> Result<TrainedModel> {
    train_with(config, x_train, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with<F>(
    config: &TrainConfig,
    x_train: &Tensor2,
    mut on_epoch: F,
) -> Result<TrainedModel>
where
    F: FnMut(&LossBreakdown),
{
    config.validate()?;
    let n = x_train.rows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if x_train.cols() != config.layer_sizes[0] {
        return Err(Error::ShapeMismatch {
            context: "training data",
            expected: (n, config.layer_sizes[0]),
            got: x_train.shape(),
        });
    }
    let first_batch = config.batch_size.min(n);
    if config.network_rows(first_batch) >= first_batch {
        return Err(Error::KappaSplit {
            batch: first_batch,
            kappa: config.kappa,
        });
    }

    let seeds = RunSeeds::derive(config.seed);
    let init = |seed| {
        AutoencoderParams::init(
            &config.layer_sizes,
            config.latent_dim,
            seed,
            config.init,
            config.leaky_slope,
        )
    };
    let mut params = init(seeds.init)?;
    let gamma = match config.gamma {
        Gamma::Fixed(g) => g,
        Gamma::Auto => resolve_auto_gamma(estimate_gamma(
            init,
            x_train,
            config.gamma_repeats,
            seeds.gamma,
        )),
    };

    let mut center_rng = ChaCha8Rng::seed_from_u64(seeds.center);
    let mut center: Vec<f64> = (0..config.latent_dim)
        .map(|_| StandardNormal.sample(&mut center_rng))
        .collect();
    let initial_center = center.clone();

    let mut adam = Adam::new(config.adam_lr, config.weight_decay);
    let mut adagrad = AdaGrad::new(config.latent_dim, config.adagrad_lr, config.adagrad_decay);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds.shuffle);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut total, mut recon, mut svdd, mut batches) = (0.0, 0.0, 0.0, 0usize);

        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let m = chunk.len();
            let k = config.network_rows(m);
            // a short trailing batch needs two rows on each side of the split
            if b > 0 && m < config.batch_size && (k < 2 || m - k < 2) {
                continue;
            }

            let xb = x_train.select_rows(&chunk[..k]);
            let (objective, grads) = objective_gradients(&params, &center, gamma, &xb)?;
            if !objective.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: objective.total,
                });
            }
            adam.step(&mut params, &grads)?;

            let grad_c = center_gradient(&params, &center, &x_train.select_rows(&chunk[k..]))?;
            adagrad.step(&mut center, &grad_c)?;
            if center.iter().any(|c| !c.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }

            total += objective.total;
            recon += objective.recon;
            svdd += objective.svdd;
            batches += 1;
        }

        let nb = batches as f64;
        let entry = LossBreakdown {
            epoch,
            total: total / nb,
            recon: recon / nb,
            svdd: svdd / nb,
        };
        on_epoch(&entry);
        history.push(entry);
    }

    Ok(TrainedModel {
        params,
        center,
        initial_center,
        gamma,
        history,
    })
}
