//! Two well-separated Gaussian clusters in the plane, for smoke tests and
//! demos.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::preprocess::LabeledDataset;
use crate::tensor::Tensor2;

pub const TOY_NORMAL_MEAN: [f64; 2] = [1.0, 1.0];
pub const TOY_ANOMALY_MEAN: [f64; 2] = [-3.0, -3.0];
pub const TOY_SPREAD: f64 = 0.1;

/// `n_normal` rows around (1, 1) labeled 0 followed by `n_anomaly` rows
/// around (-3, -3) labeled 1, isotropic standard deviation 0.1.
pub fn toy_blobs(n_normal: usize, n_anomaly: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, TOY_SPREAD).expect("positive spread");
    let mut data = Vec::with_capacity(2 * (n_normal + n_anomaly));
    let mut labels = Vec::with_capacity(n_normal + n_anomaly);
    for (count, mean, label) in [
        (n_normal, TOY_NORMAL_MEAN, 0),
        (n_anomaly, TOY_ANOMALY_MEAN, 1),
    ] {
        for _ in 0..count {
            data.push(mean[0] + noise.sample(&mut rng));
            data.push(mean[1] + noise.sample(&mut rng));
            labels.push(label);
        }
    }
    let features = Tensor2::from_vec(labels.len(), 2, data).expect("two columns per row");
    LabeledDataset::new(features, labels, "toy").expect("one label per row")
}
