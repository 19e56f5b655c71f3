//! Synthetic Gaussian-blob classification data with Poisson-severity
//! corruption.
//!
//! Class means sit at the vertices of a regular simplex scaled to the
//! requested separation; each sample is its class mean plus isotropic
//! Gaussian noise, then corrupted at its assigned severity. The training
//! split draws severities from the Poisson law; the test split is balanced,
//! with exactly `n_test_per_severity` samples at every level so per-severity
//! metrics are well posed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corruption::{apply_corruption, CorruptionKind};
use super::dataset::{spec_hash, CorruptedDataset, Provenance};
use super::poisson::{sample_severities, SeverityDistribution};
use super::DatagenError;
use crate::autodiff::Tensor;
use crate::rng::{stream, Purpose};

/// Geometry and size of a synthetic classification problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Pairwise distance between class means.
    pub class_separation: f64,
    /// Isotropic within-class standard deviation.
    pub within_class_sigma: f64,
    pub n_train: usize,
    pub n_test_per_severity: usize,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.num_classes < 2 {
            return Err(DatagenError::Inconsistent {
                detail: "num_classes must be >= 2".to_string(),
            });
        }
        if self.dim < 1 || self.n_train < 1 || self.n_test_per_severity < 1 {
            return Err(DatagenError::Inconsistent {
                detail: "dim and sample counts must be >= 1".to_string(),
            });
        }
        if !(self.class_separation > 0.0) {
            return Err(DatagenError::Inconsistent {
                detail: "class_separation must be positive".to_string(),
            });
        }
        if self.within_class_sigma < 0.0 {
            return Err(DatagenError::Inconsistent {
                detail: "within_class_sigma must be nonnegative".to_string(),
            });
        }
        Ok(())
    }
}

/// Class means with pairwise distance `separation`.
///
/// For `dim >= c - 1` the means are regular-simplex vertices built from the
/// Helmert basis (vertex `i` has coordinates `h_k[i]`, `k = 1..c-1`), scaled
/// by `separation / sqrt(2)` and zero-padded to `dim`. When the ambient
/// dimension cannot hold a regular simplex (`dim < c - 1`), means fall back
/// to scaled coordinate axes: mean `i` is `separation * (1 + i/dim)` along
/// axis `i % dim`.
pub fn class_means(num_classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let c = num_classes;
    if dim >= c - 1 {
        let scale = separation / 2.0_f64.sqrt();
        (0..c)
            .map(|i| {
                let mut mean = vec![0.0; dim];
                for k in 1..c {
                    // Helmert row k evaluated at coordinate i
                    let denom = ((k * (k + 1)) as f64).sqrt();
                    let h = if i < k {
                        1.0 / denom
                    } else if i == k {
                        -(k as f64) / denom
                    } else {
                        0.0
                    };
                    mean[k - 1] = scale * h;
                }
                mean
            })
            .collect()
    } else {
        (0..c)
            .map(|i| {
                let mut mean = vec![0.0; dim];
                mean[i % dim] = separation * (1.0 + (i / dim) as f64);
                mean
            })
            .collect()
    }
}

fn clean_sample(
    mean: &[f64],
    sigma: f64,
    seed: u64,
    purpose: Purpose,
    index: u64,
) -> Vec<f64> {
    let mut rng = stream(seed, purpose, index);
    mean.iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(&mut rng);
            m + sigma * z
        })
        .collect()
}

/// Poisson-corrupted train and balanced test splits for a synthetic spec.
///
/// Every sample is generated from streams keyed by its own index, so the
/// result is bitwise identical for any worker-thread count.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    dist: &SeverityDistribution,
    kind: &CorruptionKind,
    seed: u64,
) -> Result<(CorruptedDataset, CorruptedDataset), DatagenError> {
    spec.validate()?;
    kind.validate()?;
    let means = class_means(spec.num_classes, spec.dim, spec.class_separation);
    let provenance = Provenance {
        seed,
        spec_hash: spec_hash(&(spec, dist, kind)),
    };

    // train split: Poisson severities, uniform random labels
    let severities = sample_severities(spec.n_train, dist, seed);
    let train_rows: Vec<(Vec<f64>, usize)> = (0..spec.n_train)
        .into_par_iter()
        .map(|i| {
            let mut label_rng = stream(seed, Purpose::TrainLabels, i as u64);
            let label = label_rng.gen_range(0..spec.num_classes);
            let clean = clean_sample(
                &means[label],
                spec.within_class_sigma,
                seed,
                Purpose::TrainFeatures,
                i as u64,
            );
            let corrupted = apply_corruption(
                &clean,
                severities[i],
                kind,
                seed,
                Purpose::TrainCorruption,
                i as u64,
            );
            (corrupted, label)
        })
        .collect();

    let mut train_x = Vec::with_capacity(spec.n_train * spec.dim);
    let mut train_y = Vec::with_capacity(spec.n_train);
    for (row, label) in train_rows {
        train_x.extend_from_slice(&row);
        train_y.push(label);
    }
    let train = CorruptedDataset::new(
        Tensor::matrix(spec.n_train, spec.dim, train_x).expect("consistent by construction"),
        train_y,
        severities,
        spec.num_classes,
        dist.max_severity,
        provenance.clone(),
    )?;

    // test split: exactly n_test_per_severity per severity level
    let levels = dist.num_levels();
    let n_test = levels * spec.n_test_per_severity;
    let test_rows: Vec<(Vec<f64>, usize, usize)> = (0..n_test)
        .into_par_iter()
        .map(|i| {
            let severity = i / spec.n_test_per_severity;
            let mut label_rng = stream(seed, Purpose::TestLabels, i as u64);
            let label = label_rng.gen_range(0..spec.num_classes);
            let clean = clean_sample(
                &means[label],
                spec.within_class_sigma,
                seed,
                Purpose::TestFeatures,
                i as u64,
            );
            let corrupted = apply_corruption(
                &clean,
                severity,
                kind,
                seed,
                Purpose::TestCorruption,
                i as u64,
            );
            (corrupted, label, severity)
        })
        .collect();

    let mut test_x = Vec::with_capacity(n_test * spec.dim);
    let mut test_y = Vec::with_capacity(n_test);
    let mut test_s = Vec::with_capacity(n_test);
    for (row, label, severity) in test_rows {
        test_x.extend_from_slice(&row);
        test_y.push(label);
        test_s.push(severity);
    }
    let test = CorruptedDataset::new(
        Tensor::matrix(n_test, spec.dim, test_x).expect("consistent by construction"),
        test_y,
        test_s,
        spec.num_classes,
        dist.max_severity,
        provenance,
    )?;

    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::poisson::TailMode;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 3,
            dim: 5,
            class_separation: 2.0,
            within_class_sigma: 0.4,
            n_train: 300,
            n_test_per_severity: 20,
        }
    }

    fn dist() -> SeverityDistribution {
        SeverityDistribution::new(1.0, 5, TailMode::Renormalize).unwrap()
    }

    fn kind() -> CorruptionKind {
        CorruptionKind::AdditiveGaussian { sigma_unit: 0.2 }
    }

    #[test]
    fn simplex_means_are_equidistant() {
        for (c, d) in [(2, 1), (3, 4), (5, 4), (6, 10)] {
            let means = class_means(c, d, 3.0);
            for i in 0..c {
                for j in i + 1..c {
                    let dist2: f64 = means[i]
                        .iter()
                        .zip(&means[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    assert!(
                        (dist2.sqrt() - 3.0).abs() < 1e-10,
                        "c={c} d={d} pair ({i},{j}) dist {}",
                        dist2.sqrt()
                    );
                }
            }
        }
    }

    #[test]
    fn low_dimension_falls_back_to_axes() {
        let means = class_means(4, 2, 1.5);
        assert_eq!(means.len(), 4);
        // all means distinct
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(means[i], means[j]);
            }
        }
    }

    #[test]
    fn test_split_is_balanced_per_severity() {
        let (_, test) = generate_synthetic(&spec(), &dist(), &kind(), 5).unwrap();
        assert_eq!(test.len(), 6 * 20);
        for s in 0..=5 {
            assert_eq!(test.indices_at_severity(s).len(), 20);
        }
    }

    #[test]
    fn zero_spread_clean_samples_equal_their_mean() {
        let mut sp = spec();
        sp.within_class_sigma = 0.0;
        let (train, _) = generate_synthetic(&sp, &dist(), &kind(), 5).unwrap();
        let means = class_means(sp.num_classes, sp.dim, sp.class_separation);
        for i in 0..train.len() {
            if train.severities()[i] == 0 {
                let mean = &means[train.labels()[i]];
                for (a, b) in train.features().row(i).iter().zip(mean) {
                    assert_eq!(*a, *b);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (tr1, te1) = generate_synthetic(&spec(), &dist(), &kind(), 5).unwrap();
        let (tr2, te2) = generate_synthetic(&spec(), &dist(), &kind(), 5).unwrap();
        assert_eq!(tr1.content_hash(), tr2.content_hash());
        assert_eq!(te1.content_hash(), te2.content_hash());
    }

    #[test]
    fn generation_is_thread_invariant() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| generate_synthetic(&spec(), &dist(), &kind(), 5).unwrap());
        let b = four.install(|| generate_synthetic(&spec(), &dist(), &kind(), 5).unwrap());
        assert_eq!(a.0.content_hash(), b.0.content_hash());
        assert_eq!(a.1.content_hash(), b.1.content_hash());
    }

    #[test]
    fn severity_frequencies_match_probs_within_three_se() {
        let mut sp = spec();
        sp.n_train = 100_000;
        sp.dim = 2;
        let d = dist();
        let (train, _) = generate_synthetic(&sp, &d, &kind(), 13).unwrap();
        let probs = crate::datagen::severity_probs(&d);
        let n = sp.n_train as f64;
        for (s, &p) in probs.iter().enumerate() {
            let f = train.indices_at_severity(s).len() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!(
                (f - p).abs() <= 3.0 * se,
                "severity {s}: freq {f} vs prob {p} (3se = {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn gaussian_distortion_grows_with_severity() {
        // E||x' - x||^2 = d * (s * sigma_unit)^2, checked by Monte Carlo
        let d = 8;
        let sigma_unit = 0.2;
        let kind = CorruptionKind::AdditiveGaussian { sigma_unit };
        let n = 20_000;
        let mut prev = 0.0;
        for s in 1..=5 {
            let mut total = 0.0;
            for i in 0..n {
                let x = vec![0.5; d];
                let out = apply_corruption(&x, s, &kind, 21, Purpose::Test, i as u64);
                total += out
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            let measured = total / n as f64;
            let expected = d as f64 * (s as f64 * sigma_unit).powi(2);
            assert!(
                (measured - expected).abs() < 0.05 * expected,
                "s={s}: measured {measured} expected {expected}"
            );
            assert!(measured > prev);
            prev = measured;
        }
    }
}
