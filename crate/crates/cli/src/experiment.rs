//! Data → train → score → evaluate, repeated over seeded runs, with every
//! artifact written to disk.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dasvdd_core::preprocess::{
    global_contrast_normalization, make_one_class_split, split_labeled_normals, standardize,
};
use dasvdd_core::{
    auc, extremes, roc_curve, synthetic, train_with, Extremes, LabeledDataset, LossBreakdown,
    OneClassSplit, RocCurve, ScoredSample,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{DatasetSpec, ExperimentConfig, GammaSetting, Preprocess};
use crate::data::{load_csv, load_idx, DataError};

/// Offsets the run seed before it drives the train/test split, so the split
/// and the training streams never share a seed.
const SPLIT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Split,
    Preprocess,
    Train,
    Score,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Score => "score",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] dasvdd_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub struct ExperimentError {
    /// `None` for failures outside any run (loading, writing the summary).
    pub run: Option<usize>,
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(run) = self.run {
            write!(f, "run {run}, ")?;
        }
        write!(f, "stage {}: {}", self.stage, self.source)
    }
}

fn at<E: Into<StageError>>(run: Option<usize>, stage: Stage) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError {
        run,
        stage,
        source: e.into(),
    }
}

/// Loaded data, before any run-specific split.
#[derive(Debug, Clone)]
pub enum Source {
    Partitioned {
        train: LabeledDataset,
        test: LabeledDataset,
    },
    Single(LabeledDataset),
}

pub fn load_source(spec: &DatasetSpec) -> Result<Source, StageError> {
    Ok(match spec {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            ..
        } => Source::Partitioned {
            train: load_idx(train_images, train_labels)?,
            test: load_idx(test_images, test_labels)?,
        },
        DatasetSpec::Csv { path, .. } => Source::Single(load_csv(path)?),
        DatasetSpec::Toy {
            normals,
            anomalies,
            data_seed,
            ..
        } => Source::Single(synthetic::toy_blobs(*normals, *anomalies, *data_seed)),
    })
}

/// The one-class split for the run seeded with `seed`.
pub fn build_split(
    cfg: &ExperimentConfig,
    source: &Source,
    seed: u64,
) -> Result<OneClassSplit, dasvdd_core::Error> {
    let split_seed = seed.wrapping_add(SPLIT_SEED_OFFSET);
    match (source, &cfg.dataset) {
        (Source::Partitioned { train, test }, DatasetSpec::Idx { train_limit, .. }) => {
            let class = cfg.normal_class.ok_or(dasvdd_core::Error::InvalidConfig(
                "normal_class is required",
            ))?;
            let split = make_one_class_split(train, test, class)?;
            Ok(match train_limit {
                Some(limit) => split.subsample_train(*limit, split_seed),
                None => split,
            })
        }
        (
            Source::Single(data),
            DatasetSpec::Csv { test_fraction, .. } | DatasetSpec::Toy { test_fraction, .. },
        ) => match cfg.normal_class {
            Some(class) => {
                let mut relabeled = data.clone();
                relabeled
                    .labels
                    .iter_mut()
                    .for_each(|l| *l = i64::from(*l != class));
                let mut split = split_labeled_normals(&relabeled, *test_fraction, split_seed)?;
                split.normal_class = class;
                Ok(split)
            }
            None => split_labeled_normals(data, *test_fraction, split_seed),
        },
        _ => Err(dasvdd_core::Error::InvalidConfig(
            "dataset kind does not match the loaded data",
        )),
    }
}

pub fn preprocess(
    split: OneClassSplit,
    mode: Preprocess,
) -> Result<OneClassSplit, dasvdd_core::Error> {
    match mode {
        Preprocess::None => Ok(split),
        Preprocess::Gcn => split.map_features(|x| Ok(global_contrast_normalization(x))),
        Preprocess::Standardize => {
            let (train, test, _) = standardize(&split.train_normals, &split.test_features)?;
            Ok(OneClassSplit {
                train_normals: train,
                test_features: test,
                ..split
            })
        }
    }
}

fn preprocess_mode(spec: &DatasetSpec) -> Preprocess {
    match spec {
        DatasetSpec::Idx { preprocess, .. }
        | DatasetSpec::Csv { preprocess, .. }
        | DatasetSpec::Toy { preprocess, .. } => *preprocess,
    }
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run: usize,
    pub seed: u64,
    pub auc: f64,
    pub gamma: f64,
    pub train_rows: usize,
    pub samples: Vec<ScoredSample>,
    pub roc: RocCurve,
    pub history: Vec<LossBreakdown>,
    pub extremes: Extremes,
    pub center_moved: bool,
    pub nonzero_bias: bool,
}

pub fn execute_run(
    cfg: &ExperimentConfig,
    source: &Source,
    run: usize,
) -> Result<RunArtifacts, ExperimentError> {
    let seed = cfg.train.seed.wrapping_add(run as u64);
    let r = Some(run);
    let split = build_split(cfg, source, seed).map_err(at(r, Stage::Split))?;
    let split =
        preprocess(split, preprocess_mode(&cfg.dataset)).map_err(at(r, Stage::Preprocess))?;

    let train_cfg = cfg.train.to_train_config(seed);
    log::info!(
        "run {run}: seed {seed}, {} training normals, {} test rows",
        split.train_normals.rows(),
        split.test_labels.len()
    );
    let model = train_with(&train_cfg, &split.train_normals, |h| {
        log::debug!(
            "run {run} epoch {}: total {} recon {} svdd {}",
            h.epoch,
            h.total,
            h.recon,
            h.svdd
        );
    })
    .map_err(at(r, Stage::Train))?;

    let scores = model
        .score(&split.test_features)
        .map_err(at(r, Stage::Score))?;
    let samples = dasvdd_core::eval::scored_samples(&scores, &split.test_labels)
        .map_err(at(r, Stage::Evaluate))?;
    let auc = auc(&samples).map_err(at(r, Stage::Evaluate))?;
    let roc = roc_curve(&samples).map_err(at(r, Stage::Evaluate))?;
    let k = cfg.extremes.min(samples.len());
    let extremes = extremes(&samples, &split.test_features, k).map_err(at(r, Stage::Evaluate))?;
    log::info!("run {run}: gamma {}, AUC {auc:.4}", model.gamma);
    let center_moved = model.center != model.initial_center;
    let nonzero_bias = model
        .params
        .layers()
        .any(|l| l.bias.iter().any(|&b| b != 0.0));

    Ok(RunArtifacts {
        run,
        seed,
        auc,
        gamma: model.gamma,
        train_rows: split.train_normals.rows(),
        center_moved,
        nonzero_bias,
        samples,
        roc,
        history: model.history,
        extremes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub auc: f64,
    pub gamma: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_anomalies: usize,
    pub epochs: usize,
    pub final_total_loss: f64,
}

impl From<&RunArtifacts> for RunRecord {
    fn from(a: &RunArtifacts) -> Self {
        Self {
            run: a.run,
            seed: a.seed,
            auc: a.auc,
            gamma: a.gamma,
            train_rows: a.train_rows,
            test_rows: a.samples.len(),
            test_anomalies: a.samples.iter().filter(|s| s.is_anomaly()).count(),
            epochs: a.history.len(),
            final_total_loss: a.history.last().map_or(f64::NAN, |h| h.total),
        }
    }
}

pub fn scores_csv(samples: &[ScoredSample]) -> String {
    let mut out = String::from("index,score,label\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{}", s.index, s.score, s.label);
    }
    out
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &roc.points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

pub fn loss_csv(history: &[LossBreakdown]) -> String {
    let mut out = String::from("epoch,total,recon,svdd\n");
    for h in history {
        let _ = writeln!(out, "{},{},{},{}", h.epoch, h.total, h.recon, h.svdd);
    }
    out
}

fn extreme_rows(
    e: &Extremes,
) -> impl Iterator<Item = (usize, &'static str, &dasvdd_core::eval::Extreme)> {
    let low = e
        .lowest
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1, "lowest", x));
    let high = e
        .highest
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1, "highest", x));
    low.chain(high)
}

pub fn extremes_csv(e: &Extremes) -> String {
    let mut out = String::from("rank,kind,index,score\n");
    for (rank, kind, x) in extreme_rows(e) {
        let _ = writeln!(out, "{rank},{kind},{},{}", x.sample.index, x.sample.score);
    }
    out
}

/// The extreme samples' preprocessed feature rows, for rendering them as
/// images or inspecting them.
pub fn extreme_features_csv(e: &Extremes) -> String {
    let dim = e
        .lowest
        .first()
        .or(e.highest.first())
        .map_or(0, |x| x.features.len());
    let mut out = String::from("rank,kind,index");
    for j in 0..dim {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (rank, kind, x) in extreme_rows(e) {
        let _ = write!(out, "{rank},{kind},{}", x.sample.index);
        for v in &x.features {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn run_dir_name(run: usize) -> String {
    format!("run_{run:02}")
}

/// Writes a run's files into a staging directory, then renames it into
/// place, so a run directory is either complete or absent.
pub fn write_run(out_dir: &Path, a: &RunArtifacts) -> io::Result<PathBuf> {
    let final_dir = out_dir.join(run_dir_name(a.run));
    let staging = out_dir.join(format!(".{}.partial", run_dir_name(a.run)));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    fs::write(staging.join("scores.csv"), scores_csv(&a.samples))?;
    fs::write(staging.join("roc.csv"), roc_csv(&a.roc))?;
    fs::write(staging.join("loss.csv"), loss_csv(&a.history))?;
    fs::write(staging.join("extremes.csv"), extremes_csv(&a.extremes))?;
    fs::write(
        staging.join("extremes_features.csv"),
        extreme_features_csv(&a.extremes),
    )?;
    let record = serde_json::to_string_pretty(&RunRecord::from(a)).map_err(io::Error::other)?;
    fs::write(staging.join("run.json"), record + "\n")?;
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir)?;
    }
    fs::rename(&staging, &final_dir)?;
    Ok(final_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub normal_class: Option<i64>,
    pub runs: usize,
    pub mean_auc: f64,
    /// Population standard deviation over runs; 0 for a single run.
    pub std_auc: f64,
    /// Percentages, e.g. "72.2 ± 1.2".
    pub auc_display: String,
    pub aucs: Vec<f64>,
    /// One entry per run; differs between runs when gamma is estimated.
    pub gamma_used: Vec<f64>,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
}

/// Rounds a fraction to a percentage with one decimal, halves away from
/// zero: 0.9765 → "97.7".
pub fn percent(x: f64) -> String {
    format!("{:.1}", (x * 1000.0).round() / 10.0)
}

pub fn format_auc(mean: f64, std: f64) -> String {
    format!("{} ± {}", percent(mean), percent(std))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(
    cfg: &ExperimentConfig,
    runs: &[RunRecord],
) -> Result<ExperimentSummary, serde_json::Error> {
    let aucs: Vec<f64> = runs.iter().map(|r| r.auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    Ok(ExperimentSummary {
        name: cfg.name(),
        normal_class: cfg.normal_class,
        runs: runs.len(),
        mean_auc,
        std_auc,
        auc_display: format_auc(mean_auc, std_auc),
        aucs,
        gamma_used: runs.iter().map(|r| r.gamma).collect(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        config: serde_json::to_value(cfg)?,
    })
}

/// Runs `cfg.runs` seeded trainings, writing each run's directory as soon as
/// it completes and `summary.json` at the end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    run_experiment_with(cfg, |_| {})
}

/// As [`run_experiment`], handing each completed run to `on_run`.
pub fn run_experiment_with<F>(
    cfg: &ExperimentConfig,
    mut on_run: F,
) -> Result<ExperimentSummary, ExperimentError>
where
    F: FnMut(&RunArtifacts),
{
    let source = load_source(&cfg.dataset).map_err(at(None, Stage::Load))?;
    fs::create_dir_all(&cfg.out_dir).map_err(at(None, Stage::Write))?;
    let mut records = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let artifacts = execute_run(cfg, &source, run)?;
        write_run(&cfg.out_dir, &artifacts).map_err(at(Some(run), Stage::Write))?;
        records.push(RunRecord::from(&artifacts));
        on_run(&artifacts);
    }
    let summary = summarize(cfg, &records).map_err(at(None, Stage::Write))?;
    let json = serde_json::to_string_pretty(&summary).map_err(at(None, Stage::Write))?;
    fs::write(cfg.out_dir.join("summary.json"), json + "\n").map_err(at(None, Stage::Write))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    LatentDim,
    Gamma,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::LatentDim => "latent_dim",
            SweepParam::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep parameter {0:?} (expected latent_dim or gamma)")]
    UnknownParam(String),
    #[error("sweep needs at least one value")]
    EmptyValues,
    #[error("invalid value {value} for {param}")]
    InvalidValue { param: &'static str, value: f64 },
    #[error("{param} = {value}: {source}")]
    Experiment {
        param: &'static str,
        value: f64,
        #[source]
        source: ExperimentError,
    },
    #[error("cannot write sweep table: {0}")]
    Io(#[from] io::Error),
}

impl std::str::FromStr for SweepParam {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latent_dim" => Ok(SweepParam::LatentDim),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(SweepError::UnknownParam(other.to_string())),
        }
    }
}

/// One experiment per value, each in `<out_dir>/<param>_<value>`, plus
/// `<out_dir>/sweep_<param>.csv` with columns value,mean_auc,std_auc.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<(f64, ExperimentSummary)>, SweepError> {
    if values.is_empty() {
        return Err(SweepError::EmptyValues);
    }
    let name = param.as_str();
    let variants = values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            match param {
                SweepParam::LatentDim
                    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 =>
                {
                    c.train.latent_dim = value as usize;
                }
                SweepParam::Gamma if value > 0.0 && value.is_finite() => {
                    c.train.gamma = GammaSetting::Fixed(value)
                }
                _ => return Err(SweepError::InvalidValue { param: name, value }),
            }
            c.out_dir = cfg.out_dir.join(format!("{name}_{value}"));
            Ok((value, c))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut results = Vec::with_capacity(values.len());
    let mut table = String::from("value,mean_auc,std_auc\n");
    for (value, c) in variants {
        let summary = run_experiment(&c).map_err(|source| SweepError::Experiment {
            param: name,
            value,
            source,
        })?;
        let _ = writeln!(table, "{value},{},{}", summary.mean_auc, summary.std_auc);
        results.push((value, summary));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(format!("sweep_{name}.csv")), table)?;
    Ok(results)
}
