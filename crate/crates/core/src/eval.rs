//! ROC analysis of anomaly scores. Label 1 marks an anomaly; higher scores
//! mean "more anomalous".

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub index: usize,
    pub score: f64,
    pub label: u8,
}

impl ScoredSample {
    pub fn new(index: usize, score: f64, label: i64) -> Result<Self> {
        if label != 0 && label != 1 {
            return Err(Error::InvalidLabel(label));
        }
        if !score.is_finite() {
            return Err(Error::NonFiniteScore(index));
        }
        Ok(Self {
            index,
            score,
            label: label as u8,
        })
    }

    pub fn is_anomaly(&self) -> bool {
        self.label == 1
    }
}

/// Pairs `scores[i]` with `labels[i]` under index `i`.
pub fn scored_samples(scores: &[f64], labels: &[u8]) -> Result<Vec<ScoredSample>> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "scores vs labels",
            expected: (scores.len(), 1),
            got: (labels.len(), 1),
        });
    }
    scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&s, &l))| ScoredSample::new(i, s, i64::from(l)))
        .collect()
}

fn class_counts(samples: &[ScoredSample]) -> Result<(usize, usize)> {
    let anomalies = samples.iter().filter(|s| s.is_anomaly()).count();
    let normals = samples.len() - anomalies;
    if anomalies == 0 || normals == 0 {
        return Err(Error::SingleClass);
    }
    Ok((normals, anomalies))
}

fn by_score(a: &ScoredSample, b: &ScoredSample) -> Ordering {
    a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal)
}

/// Fraction of (anomaly, normal) pairs ranked correctly, ties counting one
/// half.
pub fn auc(samples: &[ScoredSample]) -> Result<f64> {
    let (normals, anomalies) = class_counts(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(by_score);

    let mut wins = 0.0;
    let mut normals_below = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut a, mut n) = (0usize, 0usize);
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            if sorted[j].is_anomaly() {
                a += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        wins += (a * normals_below) as f64 + 0.5 * (a * n) as f64;
        normals_below += n;
        i = j;
    }
    Ok(wins / (normals as f64 * anomalies as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Samples scoring at or above the threshold are flagged. The initial
    /// point uses `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
            .sum()
    }
}

/// One point per distinct score, from the highest threshold down, preceded by
/// `(0, 0)`.
pub fn roc_curve(samples: &[ScoredSample]) -> Result<RocCurve> {
    let (normals, anomalies) = class_counts(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| by_score(b, a));

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].score;
        while i < sorted.len() && sorted[i].score == threshold {
            if sorted[i].is_anomaly() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / normals as f64,
            tpr: tp as f64 / anomalies as f64,
            threshold,
        });
    }
    Ok(RocCurve { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extreme {
    pub sample: ScoredSample,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    /// Ascending by score.
    pub lowest: Vec<Extreme>,
    /// Descending by score.
    pub highest: Vec<Extreme>,
}

/// The `k` lowest- and `k` highest-scoring samples with their feature rows
/// (`data.row(sample.index)`). Equal scores are ordered by index.
pub fn extremes(samples: &[ScoredSample], data: &Tensor2, k: usize) -> Result<Extremes> {
    if k > samples.len() {
        return Err(Error::TooManyExtremes {
            k,
            n: samples.len(),
        });
    }
    if let Some(s) = samples.iter().find(|s| s.index >= data.rows()) {
        return Err(Error::ShapeMismatch {
            context: "extremes sample index",
            expected: (data.rows(), data.cols()),
            got: (s.index + 1, data.cols()),
        });
    }
    let mut asc = samples.to_vec();
    asc.sort_by(|a, b| by_score(a, b).then(a.index.cmp(&b.index)));
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| by_score(b, a).then(a.index.cmp(&b.index)));
    let take = |v: &[ScoredSample]| {
        v.iter()
            .take(k)
            .map(|s| Extreme {
                sample: *s,
                features: data.row(s.index).to_vec(),
            })
            .collect()
    };
    Ok(Extremes {
        lowest: take(&asc),
        highest: take(&desc),
    })
}
