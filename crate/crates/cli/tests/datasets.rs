//! Loader checks against the real data files. Each test is skipped, with a
//! note on stderr, when its files are absent (see scripts/fetch-data.sh).

use std::path::{Path, PathBuf};

use dasvdd::{load_csv, load_idx};
use dasvdd_core::preprocess::make_one_class_split;

fn data_dir() -> PathBuf {
    std::env::var_os("DASVDD_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn present(paths: &[&Path]) -> bool {
    let missing: Vec<_> = paths.iter().filter(|p| !p.is_file()).collect();
    if !missing.is_empty() {
        eprintln!("skipping: missing {missing:?}");
    }
    missing.is_empty()
}

#[test]
fn mnist_files_load_with_expected_shapes_and_split() {
    let dir = data_dir().join("mnist");
    let files = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .map(|f| dir.join(f));
    if !present(&files.each_ref().map(PathBuf::as_path)) {
        return;
    }
    let train = load_idx(&files[0], &files[1]).unwrap();
    let test = load_idx(&files[2], &files[3]).unwrap();
    assert_eq!(train.features.shape(), (60000, 784));
    assert_eq!(test.features.shape(), (10000, 784));
    assert!(train
        .features
        .as_slice()
        .iter()
        .all(|v| (0.0..=1.0).contains(v)));

    // Published label histograms of the two partitions.
    let train_counts: Vec<usize> = (0..10).map(|k| train.count_label(k)).collect();
    assert_eq!(
        train_counts,
        [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]
    );
    let test_counts: Vec<usize> = (0..10).map(|k| test.count_label(k)).collect();
    assert_eq!(
        test_counts,
        [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009]
    );

    let split = make_one_class_split(&train, &test, 1).unwrap();
    assert_eq!(split.train_normals.rows(), 6742);
    assert_eq!(split.test_labels.len(), 10000);
    assert_eq!(split.test_labels.iter().filter(|&&l| l == 0).count(), 1135);

    let again = load_idx(&files[0], &files[1]).unwrap();
    assert_eq!(again, train);
}

#[test]
fn pima_csv_loads() {
    let path = data_dir().join("pima/pima.csv");
    if !present(&[&path]) {
        return;
    }
    let ds = load_csv(&path).unwrap();
    assert_eq!(ds.features.shape(), (768, 8));
    assert_eq!(ds.count_label(1), 268);
    assert_eq!(ds.count_label(0), 500);
}
