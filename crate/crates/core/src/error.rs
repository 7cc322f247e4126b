use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("layer size at position {0} is zero")]
    ZeroSizedLayer(usize),
    #[error("layer size list is empty")]
    NoLayers,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("batch of {batch} leaves no samples for the center update at kappa = {kappa}")]
    KappaSplit { batch: usize, kappa: f64 },
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("gamma estimation skipped every sample (latent norms all near zero)")]
    DegenerateGamma,
    #[error("gamma estimation produced a non-finite value")]
    NonFiniteGamma,
    #[error("ROC/AUC needs at least one normal and one anomalous sample")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(i64),
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("k = {k} exceeds the {n} available samples")]
    TooManyExtremes { k: usize, n: usize },
    #[error("class {0} does not occur in the training labels")]
    AbsentClass(i64),
}
