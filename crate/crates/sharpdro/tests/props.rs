//! Property tests for the structural invariants.

use proptest::prelude::*;
use sharpdro::autodiff::{forward, Activation, ModelSpec, ParamLayout, ParameterVector, Tensor};
use sharpdro::datagen::{apply_corruption, CorruptedDataset, CorruptionKind, Provenance};
use sharpdro::methods::{
    normalize_scores, project_to_simplex, weight_update, SimplexWeights, WeightUpdateMode,
};
use sharpdro::rng::Purpose;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn severity_zero_never_changes_features(
        x in prop::collection::vec(-50.0f64..50.0, 1..24),
        sigma in 0.01f64..5.0,
        levels in 2u32..64,
        seed in any::<u64>(),
    ) {
        for kind in [
            CorruptionKind::AdditiveGaussian { sigma_unit: sigma },
            CorruptionKind::Quantize { base_levels: levels },
        ] {
            let out = apply_corruption(&x, 0, &kind, seed, Purpose::Test, 0);
            prop_assert_eq!(out, x.clone());
        }
    }

    #[test]
    fn flatten_unflatten_roundtrips_bitwise(
        widths in prop::collection::vec(1usize..5, 1..4),
        raw in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 64),
    ) {
        let parts: Vec<(String, Vec<usize>)> = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| (format!("p{i}"), vec![w]))
            .collect();
        let layout = ParamLayout::new(parts);
        let values: Vec<f64> = raw[..layout.total_len()].to_vec();
        let pv = ParameterVector::new(layout, values.clone()).unwrap();
        let mut rebuilt = Vec::new();
        for (_, _, window) in pv.unflatten() {
            rebuilt.extend_from_slice(window);
        }
        prop_assert_eq!(rebuilt.len(), values.len());
        for (a, b) in rebuilt.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn softmax_rows_always_normalize(
        values in prop::collection::vec(-40.0f64..40.0, 12),
        inputs in prop::collection::vec(-100.0f64..100.0, 12),
    ) {
        let model = ModelSpec::new(3, vec![], 3, Activation::Tanh).unwrap();
        let mut theta = ParameterVector::zeros(model.layout());
        theta.values_mut().copy_from_slice(&values);
        let x = Tensor::matrix(4, 3, inputs).unwrap();
        let pred = forward(&model, &theta, &x).unwrap();
        for i in 0..4 {
            let sum: f64 = pred.probs.row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(pred.probs.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn weight_updates_stay_on_the_simplex(
        raw in prop::collection::vec(0.01f64..10.0, 2..8),
        losses in prop::collection::vec(prop::option::of(-3.0f64..3.0), 2..8),
        eta in 0.0f64..2.0,
        exponentiated in any::<bool>(),
    ) {
        let n = raw.len().min(losses.len());
        let total: f64 = raw[..n].iter().sum();
        let w = SimplexWeights::new(raw[..n].iter().map(|v| v / total).collect()).unwrap();
        let mut ls = losses[..n].to_vec();
        if ls.iter().all(Option::is_none) {
            ls[0] = Some(1.0);
        }
        let mode = if exponentiated {
            WeightUpdateMode::Exponentiated
        } else {
            WeightUpdateMode::AdditiveProjected
        };
        let out = weight_update(&w, &ls, eta, mode).unwrap();
        let sum: f64 = out.values().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(out.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn simplex_projection_satisfies_the_variational_inequality(
        point in prop::collection::vec(-5.0f64..5.0, 2..8),
        probe in prop::collection::vec(0.01f64..1.0, 2..8),
    ) {
        let n = point.len().min(probe.len());
        let p = project_to_simplex(&point[..n]);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        // <y - proj, q - proj> <= 0 for any simplex point q
        let total: f64 = probe[..n].iter().sum();
        let q: Vec<f64> = probe[..n].iter().map(|v| v / total).collect();
        let inner: f64 = point[..n]
            .iter()
            .zip(&p)
            .zip(&q)
            .map(|((y, pj), qj)| (y - pj) * (qj - pj))
            .sum();
        prop_assert!(inner <= 1e-9, "variational inequality violated: {inner}");
    }

    #[test]
    fn normalized_scores_are_nonnegative_with_unit_mean(
        raw in prop::collection::vec(-2.0f64..2.0, 1..32),
    ) {
        let sw = normalize_scores(&raw);
        prop_assert!(sw.values().iter().all(|&v| v >= 0.0));
        let mean: f64 = sw.values().iter().sum::<f64>() / sw.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_container_roundtrips(
        rows in 1usize..12,
        cols in 1usize..6,
        seed in any::<u64>(),
        raw in prop::collection::vec(-1e6f64..1e6, 72),
    ) {
        let data: Vec<f64> = raw[..rows * cols].to_vec();
        let ds = CorruptedDataset::new(
            Tensor::matrix(rows, cols, data).unwrap(),
            (0..rows).map(|i| i % 2).collect(),
            (0..rows).map(|i| i % 3).collect(),
            2,
            2,
            Provenance { seed, spec_hash: "prop".to_string() },
        )
        .unwrap();
        let mut bytes = Vec::new();
        ds.write_to(&mut bytes).unwrap();
        let back = CorruptedDataset::read_from(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(ds, back);
    }
}
