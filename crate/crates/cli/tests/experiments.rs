use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dasvdd::{
    collect, render, run_experiment, sweep, ExperimentConfig, ExperimentSummary, Stage, SweepError,
    SweepParam,
};

const TOY: &str = r#"
runs = 2
extremes = 3

[dataset]
kind = "toy"
normals = 200
anomalies = 40
data_seed = 3

[train]
layer_sizes = [2, 8]
latent_dim = 2
batch_size = 40
epochs = 15
"#;

fn toy(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(TOY).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn run_writes_every_artifact_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let summary = run_experiment(&toy(&a)).unwrap();
    run_experiment(&toy(&b)).unwrap();

    assert_eq!(summary.runs, 2);
    assert_eq!(summary.seeds, vec![0, 1]);
    assert!(summary.mean_auc > 0.9);
    for name in [
        "scores.csv",
        "roc.csv",
        "loss.csv",
        "extremes.csv",
        "extremes_features.csv",
        "run.json",
    ] {
        assert!(a.join("run_00").join(name).is_file(), "{name}");
    }

    let fa = files_under(&a);
    let fb = files_under(&b);
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(&a).unwrap(), y.strip_prefix(&b).unwrap());
        assert_eq!(
            fs::read(x).unwrap(),
            fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }

    let scores = fs::read_to_string(a.join("run_00/scores.csv")).unwrap();
    assert!(scores.starts_with("index,score,label\n"));
    let extremes = fs::read_to_string(a.join("run_00/extremes.csv")).unwrap();
    assert_eq!(extremes.lines().count(), 1 + 2 * 3);
    let roc = fs::read_to_string(a.join("run_00/roc.csv")).unwrap();
    assert_eq!(roc.lines().nth(1), Some("0,0,inf"));

    let gamma = summary.gamma_used[0];
    let loss = fs::read_to_string(a.join("run_00/loss.csv")).unwrap();
    let rows: Vec<Vec<f64>> = loss
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 15);
    for r in &rows {
        assert!((r[1] - (r[2] + gamma * r[3])).abs() <= 1e-9 * r[1].abs().max(1.0));
    }
}

#[test]
fn single_run_has_zero_std() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy(tmp.path());
    cfg.runs = 1;
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.std_auc, 0.0);
    assert!(s.auc_display.ends_with(" ± 0.0"));
}

#[test]
fn failures_name_the_run_and_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy(tmp.path());
    // batches of two leave no rows for the center step
    cfg.train.batch_size = 2;
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.run, Some(0));
    assert_eq!(err.stage, Stage::Train);
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn sweep_validates_and_tabulates() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy(tmp.path());
    cfg.runs = 1;
    assert!(matches!(
        sweep(&cfg, SweepParam::Gamma, &[]),
        Err(SweepError::EmptyValues)
    ));
    assert!(matches!(
        sweep(&cfg, SweepParam::LatentDim, &[1.5]),
        Err(SweepError::InvalidValue { .. })
    ));
    assert!(matches!(
        sweep(&cfg, SweepParam::Gamma, &[-1.0]),
        Err(SweepError::InvalidValue { .. })
    ));

    let out = sweep(&cfg, SweepParam::Gamma, &[0.1, 10.0]).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[1].1.gamma_used, vec![10.0]);
    let table = fs::read_to_string(tmp.path().join("sweep_gamma.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "value,mean_auc,std_auc");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.1,"));
    assert!(tmp.path().join("gamma_10/summary.json").is_file());

    let latent = sweep(&cfg, SweepParam::LatentDim, &[3.0]).unwrap();
    assert_eq!(latent[0].1.config["train"]["latent_dim"], 3);
}

fn fake_summary(name: &str, mean: f64, std: f64) -> ExperimentSummary {
    ExperimentSummary {
        name: name.to_string(),
        normal_class: None,
        runs: 10,
        mean_auc: mean,
        std_auc: std,
        auc_display: dasvdd::format_auc(mean, std),
        aucs: Vec::new(),
        gamma_used: Vec::new(),
        seeds: Vec::new(),
        config: serde_json::Value::Null,
    }
}

fn write_summary(dir: &Path, s: &ExperimentSummary) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("summary.json"), serde_json::to_string(s).unwrap()).unwrap();
}

#[test]
fn report_single_summary_is_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_summary(tmp.path(), &fake_summary("pima", 0.9765, 0.012));
    let text = render(&collect(tmp.path()).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].contains("97.7 ± 1.2"));
    assert!(!text.contains("avg:"));
}

#[test]
fn report_averages_classes_and_lists_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let means: Vec<f64> = (0..10).map(|k| 0.9 + 0.01 * k as f64).collect();
    for (k, m) in means.iter().enumerate() {
        write_summary(
            &tmp.path().join(format!("class{k}")),
            &fake_summary(&format!("mnist-class{k}"), *m, 0.01),
        );
    }
    fs::create_dir_all(tmp.path().join("broken")).unwrap();
    fs::write(tmp.path().join("broken/summary.json"), "{ not json").unwrap();
    fs::create_dir_all(tmp.path().join("crashed/run_00")).unwrap();

    let report = collect(tmp.path()).unwrap();
    assert_eq!(report.rows.len(), 10);
    assert_eq!(report.problems.len(), 2);
    let text = render(&report);
    let avg = means.iter().sum::<f64>() / 10.0;
    let avg_line = text.lines().find(|l| l.starts_with("avg:")).unwrap();
    assert!(
        avg_line.ends_with(&dasvdd::format_auc(avg, 0.01)),
        "{avg_line}"
    );
    assert!(avg_line.contains("94.5 ± 1.0"));
    assert!(text.contains("broken"));
    assert!(text.contains("crashed"));

    let empty = tempfile::tempdir().unwrap();
    assert!(collect(empty.path()).is_err());
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dasvdd"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn command_line_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("toy.toml");
    fs::write(
        &config,
        TOY.replace("runs = 2", "runs = 1\nout_dir = \"results\""),
    )
    .unwrap();

    let out = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--seed", "4", "--gamma", "0.5"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("AUC (%)"), "{stdout}");
    let summary: ExperimentSummary =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("results/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.seeds, vec![4]);
    assert_eq!(summary.gamma_used, vec![0.5]);

    let swept = tmp.path().join("swept");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--param", "latent_dim", "--values", "1,2", "--out"])
        .arg(&swept)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(swept.join("sweep_latent_dim.csv").is_file());

    let out = bin()
        .args(["report", "--dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().filter(|l| l.starts_with("toy")).count(), 3);
    assert!(table.contains("avg:"));

    for bad in [
        vec!["--param", "kappa", "--values", "1"],
        vec!["--param", "gamma", "--values", ""],
    ] {
        let out = bin()
            .args(["sweep", "--config"])
            .arg(&config)
            .args(&bad)
            .output()
            .unwrap();
        assert!(!out.status.success(), "{bad:?}");
    }
    let out = bin()
        .args(["train", "--config"])
        .arg(tmp.path().join("nope.toml"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--gamma", "-2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
