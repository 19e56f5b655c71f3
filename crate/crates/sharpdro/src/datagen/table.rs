//! Ingestion of delimited numeric tables into corrupted datasets.
//!
//! The file must be comma-delimited with a header row; one column holds
//! integer class labels and every other column is a numeric feature.
//! Features are standardized per column with statistics from the training
//! split. The held-out test split gets severities assigned round-robin and
//! is trimmed to a multiple of the severity-level count, so it stays
//! balanced per severity like the synthetic generator's test split.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::corruption::{apply_corruption, CorruptionKind};
use super::dataset::{spec_hash, CorruptedDataset, Provenance};
use super::poisson::{sample_severities, SeverityDistribution};
use super::DatagenError;
use crate::autodiff::Tensor;
use crate::rng::{stream, Purpose};

/// Fraction of rows held out for the test split.
const TEST_FRACTION: f64 = 0.2;
/// Columns whose variance falls below this floor standardize to all zeros.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Serialize)]
struct TableSpec<'a> {
    path: &'a str,
    label_column: &'a str,
    dist: &'a SeverityDistribution,
    kind: &'a CorruptionKind,
}

/// Loads a CSV table, standardizes features on the training split, and
/// applies Poisson-severity corruption exactly as the synthetic generator
/// does.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    dist: &SeverityDistribution,
    kind: &CorruptionKind,
    seed: u64,
) -> Result<(CorruptedDataset, CorruptedDataset), DatagenError> {
    kind.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DatagenError::MissingColumn {
            column: label_column.to_string(),
        })?;

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx == label_idx {
                let label: i64 = cell.trim().parse().map_err(|_| DatagenError::BadCell {
                    row: row_idx + 2, // 1-based, after the header line
                    column: headers[col_idx].to_string(),
                    cell: cell.to_string(),
                })?;
                raw_labels.push(label);
            } else {
                let value: f64 = cell.trim().parse().map_err(|_| DatagenError::BadCell {
                    row: row_idx + 2,
                    column: headers[col_idx].to_string(),
                    cell: cell.to_string(),
                })?;
                row.push(value);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(DatagenError::Inconsistent {
            detail: "table has no data rows".to_string(),
        });
    }

    // map raw labels to a dense 0..c-1 index, sorted by raw value
    let mut classes: Vec<i64> = raw_labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(DatagenError::SingleClass);
    }
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();

    let n = features.len();
    let dim = features[0].len();
    let levels = dist.num_levels();

    // deterministic shuffled split; test trimmed to a multiple of the
    // severity-level count so every level gets the same sample count
    let mut order: Vec<usize> = (0..n).collect();
    let mut split_rng = stream(seed, Purpose::SplitShuffle, 0);
    order.shuffle(&mut split_rng);
    let mut n_test = ((n as f64) * TEST_FRACTION).floor() as usize;
    n_test -= n_test % levels;
    if n_test == 0 || n - n_test == 0 {
        return Err(DatagenError::Inconsistent {
            detail: format!(
                "table with {n} rows is too small to split into train and a \
                 per-severity-balanced test set over {levels} levels"
            ),
        });
    }
    let test_idx = &order[..n_test];
    let train_idx = &order[n_test..];

    // per-column standardization statistics from the training split
    let mut mean = vec![0.0; dim];
    for &i in train_idx {
        for (j, &v) in features[i].iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= train_idx.len() as f64;
    }
    let mut var = vec![0.0; dim];
    for &i in train_idx {
        for (j, &v) in features[i].iter().enumerate() {
            var[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    for v in var.iter_mut() {
        *v /= train_idx.len() as f64;
    }
    let standardize = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if var[j] < VARIANCE_FLOOR {
                    0.0
                } else {
                    (v - mean[j]) / var[j].sqrt()
                }
            })
            .collect()
    };

    let provenance = Provenance {
        seed,
        spec_hash: spec_hash(&TableSpec {
            path: &path.to_string_lossy(),
            label_column,
            dist,
            kind,
        }),
    };
    let num_classes = classes.len();

    // train: Poisson severities keyed per sample
    let severities = sample_severities(train_idx.len(), dist, seed);
    let mut train_x = Vec::with_capacity(train_idx.len() * dim);
    let mut train_y = Vec::with_capacity(train_idx.len());
    for (k, &i) in train_idx.iter().enumerate() {
        let clean = standardize(&features[i]);
        let corrupted = apply_corruption(
            &clean,
            severities[k],
            kind,
            seed,
            Purpose::TrainCorruption,
            k as u64,
        );
        train_x.extend_from_slice(&corrupted);
        train_y.push(labels[i]);
    }
    let train = CorruptedDataset::new(
        Tensor::matrix(train_idx.len(), dim, train_x).expect("consistent by construction"),
        train_y,
        severities,
        num_classes,
        dist.max_severity,
        provenance.clone(),
    )?;

    // test: round-robin severities over the trimmed, shuffled rows
    let mut test_x = Vec::with_capacity(n_test * dim);
    let mut test_y = Vec::with_capacity(n_test);
    let mut test_s = Vec::with_capacity(n_test);
    for (k, &i) in test_idx.iter().enumerate() {
        let severity = k % levels;
        let clean = standardize(&features[i]);
        let corrupted = apply_corruption(
            &clean,
            severity,
            kind,
            seed,
            Purpose::TestCorruption,
            k as u64,
        );
        test_x.extend_from_slice(&corrupted);
        test_y.push(labels[i]);
        test_s.push(severity);
    }
    let test = CorruptedDataset::new(
        Tensor::matrix(n_test, dim, test_x).expect("consistent by construction"),
        test_y,
        test_s,
        num_classes,
        dist.max_severity,
        provenance,
    )?;

    Ok((train, test))
}
