//! Confidence-drop OOD scores for worst-case sample selection.
//!
//! A sample's score is the drop in maximum predicted-class probability when
//! the parameters move by the adversarial perturbation. Samples the model
//! barely knows lose confidence fastest, so large scores flag worst-case
//! (heavily corrupted) data.

use super::weights::SampleWeights;
use super::MethodsError;
use crate::autodiff::Prediction;

/// Raw per-sample scores: max-probability at `theta` minus max-probability
/// at `theta + epsilon_star`.
pub fn ood_scores(p: &Prediction, p_hat: &Prediction) -> Result<Vec<f64>, MethodsError> {
    if p.probs.nrows() != p_hat.probs.nrows() {
        return Err(MethodsError::InvalidWeights {
            detail: format!(
                "prediction counts differ: {} vs {}",
                p.probs.nrows(),
                p_hat.probs.nrows()
            ),
        });
    }
    Ok(p.max_probs()
        .into_iter()
        .zip(p_hat.max_probs())
        .map(|(a, b)| a - b)
        .collect())
}

/// Normalizes raw scores into nonnegative unit-mean sample weights:
/// negatives clamp to zero, then each score divides by the mean. Equal
/// scores (and a vanishing mean) give exact ones.
pub fn normalize_scores(raw: &[f64]) -> SampleWeights {
    let clamped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    SampleWeights::from_raw(&clamped)
}
