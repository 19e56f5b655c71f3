//! Distribution weights on the probability simplex and per-sample weights.

use serde::{Deserialize, Serialize};

use super::MethodsError;

/// Nonnegative weights over severity groups summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights {
    w: Vec<f64>,
}

impl SimplexWeights {
    pub fn uniform(levels: usize) -> Self {
        Self {
            w: vec![1.0 / levels as f64; levels],
        }
    }

    pub fn new(w: Vec<f64>) -> Result<Self, MethodsError> {
        if w.is_empty() || w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(MethodsError::InvalidWeights {
                detail: "simplex weights must be nonnegative and finite".to_string(),
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MethodsError::InvalidWeights {
                detail: format!("simplex weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self { w })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// How the simplex weights ascend toward the worst group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightUpdateMode {
    /// Multiplicative (mirror-ascent) update `w_s <- w_s * exp(eta * l_s)`
    /// followed by normalization.
    Exponentiated,
    /// Euclidean projection of `w + eta * l` back onto the simplex.
    AdditiveProjected,
}

/// Euclidean projection onto the probability simplex (sort-based threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("weights are finite"));
    let mut acc = 0.0;
    let mut tau = 0.0;
    let mut support = 0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
            support = k + 1;
        }
    }
    debug_assert!(support > 0);
    v.iter().map(|&u| (u - tau).max(0.0)).collect()
}

/// Euclidean projection onto the scaled simplex `{v >= 0, sum v = mass}`.
fn project_to_scaled_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("weights are finite"));
    let mut acc = 0.0;
    let mut tau = 0.0;
    let mut support = 0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - mass) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
            support = k + 1;
        }
    }
    debug_assert!(support > 0);
    v.iter().map(|&u| (u - tau).max(0.0)).collect()
}

/// One ascent step on the group weights.
///
/// Groups absent from the batch (`None` loss) are frozen: their weights are
/// untouched, and the updated present-group weights are renormalized (or
/// projected) within the mass the present groups already held, so severity
/// levels that rarely appear in a batch are not starved between the batches
/// that do contain them.
pub fn weight_update(
    w: &SimplexWeights,
    losses: &[Option<f64>],
    eta_omega: f64,
    mode: WeightUpdateMode,
) -> Result<SimplexWeights, MethodsError> {
    if losses.len() != w.len() {
        return Err(MethodsError::InvalidWeights {
            detail: format!(
                "{} group losses for {} weights",
                losses.len(),
                w.len()
            ),
        });
    }
    if losses.iter().all(Option::is_none) {
        return Err(MethodsError::InvalidWeights {
            detail: "weight update needs at least one present group".to_string(),
        });
    }
    if eta_omega == 0.0 {
        return Ok(w.clone());
    }
    let present: Vec<usize> = (0..w.len()).filter(|&s| losses[s].is_some()).collect();
    let present_mass: f64 = present.iter().map(|&s| w.values()[s]).sum();
    let mut updated = w.values().to_vec();
    match mode {
        WeightUpdateMode::Exponentiated => {
            let ascended: Vec<f64> = present
                .iter()
                .map(|&s| w.values()[s] * (eta_omega * losses[s].unwrap()).exp())
                .collect();
            let total: f64 = ascended.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(MethodsError::InvalidWeights {
                    detail: format!("exponentiated update degenerated (sum = {total})"),
                });
            }
            for (&s, a) in present.iter().zip(ascended) {
                updated[s] = a * present_mass / total;
            }
        }
        WeightUpdateMode::AdditiveProjected => {
            let ascended: Vec<f64> = present
                .iter()
                .map(|&s| w.values()[s] + eta_omega * losses[s].unwrap())
                .collect();
            let projected = project_to_scaled_simplex(&ascended, present_mass);
            for (&s, p) in present.iter().zip(projected) {
                updated[s] = p;
            }
        }
    }
    // guard against slow drift of the invariant over many updates
    let sum: f64 = updated.iter().sum();
    if (sum - 1.0).abs() > 1e-13 {
        for v in updated.iter_mut() {
            *v /= sum;
        }
    }
    SimplexWeights::new(updated)
}

/// Nonnegative per-sample weights with unit mean (or exact ones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    w: Vec<f64>,
}

impl SampleWeights {
    pub fn ones(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    /// Normalizes raw nonnegative values to unit mean. All-equal inputs map
    /// to exact ones, and a vanishing mean falls back to ones, so the
    /// degenerate cases reduce bitwise to the unweighted path.
    pub fn from_raw(raw: &[f64]) -> Self {
        if raw.is_empty() {
            return Self { w: Vec::new() };
        }
        let first = raw[0];
        if raw.iter().all(|&v| v == first) {
            return Self::ones(raw.len());
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if !(mean >= 1e-12) {
            return Self::ones(raw.len());
        }
        Self {
            w: raw.iter().map(|&v| v / mean).collect(),
        }
    }

    /// Expands group weights to per-sample weights with unit mean: sample
    /// `i` gets `omega[s_i]` divided by the batch mean of the group weights.
    pub fn from_simplex(omega: &SimplexWeights, severities: &[usize]) -> Self {
        let raw: Vec<f64> = severities.iter().map(|&s| omega.values()[s]).collect();
        Self::from_raw(&raw)
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponentiated_update_hand_value() {
        // w = (1/2, 1/2), losses (1, 0), eta = ln 2 -> (2/3, 1/3)
        let w = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
        let out = weight_update(
            &w,
            &[Some(1.0), Some(0.0)],
            2.0_f64.ln(),
            WeightUpdateMode::Exponentiated,
        )
        .unwrap();
        assert!((out.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.values()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_losses_leave_weights_unchanged() {
        let w = SimplexWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let losses = [Some(1.3), Some(1.3), Some(1.3)];
        for mode in [
            WeightUpdateMode::Exponentiated,
            WeightUpdateMode::AdditiveProjected,
        ] {
            let out = weight_update(&w, &losses, 0.7, mode).unwrap();
            for (a, b) in out.values().iter().zip(w.values()) {
                assert!((a - b).abs() < 1e-12, "{mode:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_rate_is_the_identity() {
        let w = SimplexWeights::new(vec![0.25, 0.75]).unwrap();
        let out = weight_update(
            &w,
            &[Some(2.0), Some(-1.0)],
            0.0,
            WeightUpdateMode::Exponentiated,
        )
        .unwrap();
        assert_eq!(out.values(), w.values());
    }

    #[test]
    fn largest_loss_group_strictly_gains() {
        let w = SimplexWeights::uniform(4);
        let losses = [Some(0.5), Some(2.0), Some(0.1), Some(0.5)];
        let out = weight_update(&w, &losses, 0.3, WeightUpdateMode::Exponentiated).unwrap();
        assert!(out.values()[1] > w.values()[1]);
        let sum: f64 = out.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_groups_stay_frozen() {
        let w = SimplexWeights::new(vec![0.4, 0.4, 0.2]).unwrap();
        let out = weight_update(
            &w,
            &[Some(1.0), None, Some(2.0)],
            0.5,
            WeightUpdateMode::Exponentiated,
        )
        .unwrap();
        // the absent group keeps its weight bitwise
        assert_eq!(out.values()[1].to_bits(), 0.4_f64.to_bits());
        // present groups trade mass among themselves, preserving their total
        assert!((out.values()[0] + out.values()[2] - 0.6).abs() < 1e-12);
        assert!(out.values()[2] > w.values()[2], "higher-loss group gains");
        let sum: f64 = out.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_groups_survive_repeated_absence() {
        // a rare group's weight must not decay while it is absent
        let mut w = SimplexWeights::new(vec![0.3, 0.3, 0.4]).unwrap();
        for _ in 0..1000 {
            w = weight_update(
                &w,
                &[Some(1.0), Some(0.5), None],
                0.1,
                WeightUpdateMode::Exponentiated,
            )
            .unwrap();
        }
        assert!((w.values()[2] - 0.4).abs() < 1e-9, "rare group starved: {}", w.values()[2]);
    }

    #[test]
    fn projection_matches_known_cases() {
        // already on the simplex -> unchanged
        let p = project_to_simplex(&[0.2, 0.5, 0.3]);
        for (a, b) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        // uniform shift projects back to the original point
        let p = project_to_simplex(&[0.2 + 0.7, 0.5 + 0.7, 0.3 + 0.7]);
        for (a, b) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
        // dominant coordinate saturates
        let p = project_to_simplex(&[5.0, 0.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert_eq!(&p[1..], &[0.0, 0.0]);
    }

    #[test]
    fn sample_weights_from_simplex_have_unit_mean() {
        let omega = SimplexWeights::new(vec![0.1, 0.6, 0.3]).unwrap();
        let severities = [0, 1, 1, 2, 0, 1];
        let sw = SampleWeights::from_simplex(&omega, &severities);
        let mean: f64 = sw.values().iter().sum::<f64>() / sw.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(sw.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn single_group_gives_exact_ones() {
        let omega = SimplexWeights::new(vec![0.37, 0.63]).unwrap();
        let sw = SampleWeights::from_simplex(&omega, &[1, 1, 1, 1]);
        assert!(sw.values().iter().all(|&v| v.to_bits() == 1.0_f64.to_bits()));
    }

    #[test]
    fn vanishing_mean_falls_back_to_ones() {
        let sw = SampleWeights::from_raw(&[0.0, 1e-15, 0.0]);
        assert!(sw.values().iter().all(|&v| v == 1.0));
    }
}
