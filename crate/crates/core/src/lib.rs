//! Deep autoencoding support vector data description.
//!
//! A fully connected autoencoder is trained jointly with the center of a
//! minimum-volume hypersphere in its latent space. A sample's anomaly score is
//! its reconstruction error plus `gamma` times its squared latent distance to
//! the center; training minimizes the mean score over normal data, alternating
//! between network updates (Adam) and center updates (AdaGrad) within each
//! batch.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature only enables
//! runtime SIMD detection in the matrix kernels.

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod dasvdd;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod preprocess;
pub mod synthetic;
pub mod tensor;

pub use dasvdd::{
    anomaly_score, batch_objective, center_gradient, estimate_gamma, objective_gradients,
    optimal_center, resolve_auto_gamma, score_dataset, train, train_with, Gamma, LossBreakdown,
    Objective, TrainConfig, TrainedModel,
};
pub use error::{Error, Result};
pub use eval::{auc, extremes, roc_curve, Extremes, RocCurve, RocPoint, ScoredSample};
pub use nn::{AutoencoderParams, DenseLayer, GradientSet, InitScheme, Tape};
pub use optim::{AdaGrad, Adam};
pub use preprocess::{LabeledDataset, OneClassSplit, Standardizer};
pub use tensor::Tensor2;
