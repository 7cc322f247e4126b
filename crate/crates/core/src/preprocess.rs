//! Feature scaling and one-class train/test construction.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

const GCN_EPS: f64 = 1e-8;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Tensor2,
    pub labels: Vec<i64>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(features: Tensor2, labels: Vec<i64>, name: impl Into<String>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch {
                context: "labels vs feature rows",
                expected: (features.rows(), 1),
                got: (labels.len(), 1),
            });
        }
        Ok(Self {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count_label(&self, label: i64) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Normal-only training rows and a relabeled test set (0 normal, 1 anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSplit {
    pub train_normals: Tensor2,
    pub test_features: Tensor2,
    pub test_labels: Vec<u8>,
    pub normal_class: i64,
}

impl OneClassSplit {
    /// Keeps at most `limit` training normals, drawn without replacement and
    /// kept in their original order.
    pub fn subsample_train(mut self, limit: usize, seed: u64) -> Self {
        let n = self.train_normals.rows();
        if limit < n {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx.truncate(limit);
            idx.sort_unstable();
            self.train_normals = self.train_normals.select_rows(&idx);
        }
        self
    }

    /// Applies the same row transform to both partitions.
    pub fn map_features<F>(mut self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Tensor2) -> Result<Tensor2>,
    {
        self.train_normals = f(&self.train_normals)?;
        self.test_features = f(&self.test_features)?;
        Ok(self)
    }
}

/// Uses the given train/test partition: the training side keeps only rows of
/// `normal_class`, the test side keeps every row, relabeled.
pub fn make_one_class_split(
    train: &LabeledDataset,
    test: &LabeledDataset,
    normal_class: i64,
) -> Result<OneClassSplit> {
    if train.features.cols() != test.features.cols() {
        return Err(Error::ShapeMismatch {
            context: "train vs test width",
            expected: (test.len(), train.features.cols()),
            got: test.features.shape(),
        });
    }
    let normal_rows: Vec<usize> = (0..train.len())
        .filter(|&i| train.labels[i] == normal_class)
        .collect();
    if normal_rows.is_empty() {
        return Err(Error::AbsentClass(normal_class));
    }
    Ok(OneClassSplit {
        train_normals: train.features.select_rows(&normal_rows),
        test_features: test.features.clone(),
        test_labels: test
            .labels
            .iter()
            .map(|&l| u8::from(l != normal_class))
            .collect(),
        normal_class,
    })
}

/// For data already labeled 0 (normal) / 1 (anomaly) without a predefined
/// partition: a seeded `test_fraction` of the normals plus every anomaly form
/// the test set, the remaining normals the training set. Rows keep their
/// original order within each side.
pub fn split_labeled_normals(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<OneClassSplit> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig("test_fraction must lie in [0, 1)"));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l != 0 && l != 1) {
        return Err(Error::InvalidLabel(bad));
    }
    let mut normals: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == 0).collect();
    if normals.is_empty() {
        return Err(Error::AbsentClass(0));
    }
    normals.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = libm::round(test_fraction * normals.len() as f64) as usize;
    let mut test_rows: Vec<usize> = normals[..n_test].to_vec();
    let mut train_rows: Vec<usize> = normals[n_test..].to_vec();
    if train_rows.is_empty() {
        return Err(Error::InvalidConfig(
            "test_fraction leaves no training normals",
        ));
    }
    test_rows.extend((0..data.len()).filter(|&i| data.labels[i] == 1));
    test_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok(OneClassSplit {
        train_normals: data.features.select_rows(&train_rows),
        test_features: data.features.select_rows(&test_rows),
        test_labels: test_rows.iter().map(|&i| data.labels[i] as u8).collect(),
        normal_class: 0,
    })
}

/// Per row: subtract the mean, then divide by the root-mean-square of the
/// centered row (floored at 1e-8).
pub fn global_contrast_normalization(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    let d = x.cols() as f64;
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / d;
        row.iter_mut().for_each(|v| *v -= mean);
        let rms = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>() / d);
        let scale = rms.max(GCN_EPS);
        row.iter_mut().for_each(|v| *v /= scale);
    }
    out
}

/// Per-feature z-scoring with statistics fitted on one set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at 1e-8.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Tensor2) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = train.rows() as f64;
        let mean: Vec<f64> = train.col_sums().into_iter().map(|s| s / n).collect();
        let mut var = alloc::vec![0.0; train.cols()];
        for row in train.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| libm::sqrt(v / n).max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn transform(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                context: "standardize",
                expected: (x.rows(), self.mean.len()),
                got: x.shape(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// Fits on `train`, returns `(train', other', fitted)`.
pub fn standardize(train: &Tensor2, other: &Tensor2) -> Result<(Tensor2, Tensor2, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.transform(train)?, s.transform(other)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ds(rows: &[[f64; 2]], labels: &[i64]) -> LabeledDataset {
        LabeledDataset::new(Tensor2::from_rows(rows).unwrap(), labels.to_vec(), "toy").unwrap()
    }

    #[test]
    fn gcn_examples() {
        let x = Tensor2::from_rows(&[[3.0, 3.0, 3.0, 3.0], [0.0, 2.0, 0.0, 2.0]]).unwrap();
        let g = global_contrast_normalization(&x);
        assert_eq!(g.row(0), &[0.0; 4]);
        assert_eq!(g.row(1), &[-1.0, 1.0, -1.0, 1.0]);
        let pair = global_contrast_normalization(&Tensor2::from_rows(&[[0.0, 2.0]]).unwrap());
        assert_eq!(pair.row(0), &[-1.0, 1.0]);
    }

    #[test]
    fn standardize_examples() {
        let train = Tensor2::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let other = Tensor2::from_rows(&[[2.0, 6.0], [5.0, 5.0]]).unwrap();
        let (t, o, s) = standardize(&train, &other).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.std[1], STD_FLOOR);
        assert_eq!(t.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
        // other uses training statistics
        assert_eq!(o.row(1)[0], 3.0);
        assert!(Standardizer::fit(&Tensor2::zeros(0, 2)).is_err());
        assert!(s.transform(&Tensor2::zeros(1, 3)).is_err());
    }

    #[test]
    fn one_class_split_relabels() {
        let train = ds(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], &[0, 1, 1]);
        let test = ds(&[[5.0, 5.0], [6.0, 6.0]], &[0, 1]);
        let split = make_one_class_split(&train, &test, 1).unwrap();
        assert_eq!(split.train_normals.rows(), 2);
        assert_eq!(split.test_labels, vec![1, 0]);
        assert_eq!(split.test_features, test.features);
        assert_eq!(
            make_one_class_split(&train, &test, 7),
            Err(Error::AbsentClass(7))
        );
    }

    #[test]
    fn labeled_split_keeps_anomalies_out_of_training() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 0.0]).collect();
        let labels: Vec<i64> = (0..20).map(|i| i64::from(i % 4 == 0)).collect();
        let data = ds(&rows, &labels);
        let split = split_labeled_normals(&data, 0.2, 3).unwrap();
        assert_eq!(split.train_normals.rows(), 12);
        assert_eq!(split.test_labels.len(), 8);
        assert_eq!(split.test_labels.iter().filter(|&&l| l == 1).count(), 5);
        for r in split.train_normals.iter_rows() {
            assert!(r[0] as usize % 4 != 0);
        }
        assert_eq!(split, split_labeled_normals(&data, 0.2, 3).unwrap());
        assert!(split_labeled_normals(&ds(&[[0.0, 0.0]], &[2]), 0.2, 0).is_err());
    }

    #[test]
    fn subsample_is_a_subset() {
        let train = ds(
            &[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]],
            &[1, 1, 1, 1],
        );
        let split = make_one_class_split(&train, &train, 1)
            .unwrap()
            .subsample_train(2, 9);
        assert_eq!(split.train_normals.rows(), 2);
        for r in split.train_normals.iter_rows() {
            assert!(train.features.iter_rows().any(|t| t == r));
        }
    }

    proptest! {
        #[test]
        fn gcn_normalizes_and_is_idempotent(row in proptest::collection::vec(-100.0f64..100.0, 2..50)) {
            let spread = row.iter().cloned().fold(f64::MIN, f64::max) - row.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            let x = Tensor2::from_rows(core::slice::from_ref(&row)).unwrap();
            let g = global_contrast_normalization(&x);
            let d = row.len() as f64;
            let mean = g.row(0).iter().sum::<f64>() / d;
            let rms = (g.row(0).iter().map(|v| v * v).sum::<f64>() / d).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((rms - 1.0).abs() < 1e-9);
            let gg = global_contrast_normalization(&g);
            for (a, b) in g.as_slice().iter().zip(gg.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
