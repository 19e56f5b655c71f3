//! Feature-space corruption operators with integer severity scaling.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::rng::{stream, Purpose};

/// A corruption family applied per feature vector at severity `s >= 1`;
/// severity 0 always returns the input unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorruptionKind {
    /// Adds isotropic Gaussian noise with standard deviation `s * sigma_unit`.
    AdditiveGaussian { sigma_unit: f64 },
    /// Snaps every coordinate to a grid of `base_levels / 2^{s-1}` levels
    /// per unit range; each added severity halves the resolution.
    Quantize { base_levels: u32 },
}

impl CorruptionKind {
    pub fn validate(&self) -> Result<(), DatagenError> {
        match *self {
            CorruptionKind::AdditiveGaussian { sigma_unit } => {
                if !(sigma_unit > 0.0) || !sigma_unit.is_finite() {
                    return Err(DatagenError::InvalidCorruption {
                        detail: format!("sigma_unit must be positive, got {sigma_unit}"),
                    });
                }
            }
            CorruptionKind::Quantize { base_levels } => {
                if base_levels < 2 {
                    return Err(DatagenError::InvalidCorruption {
                        detail: format!("base_levels must be >= 2, got {base_levels}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Corrupts one feature vector at severity `s`. Randomness comes from the
/// stream keyed by `(seed, purpose, index)`, so corruption of sample `index`
/// does not depend on evaluation order.
pub fn apply_corruption(
    x: &[f64],
    s: usize,
    kind: &CorruptionKind,
    seed: u64,
    purpose: Purpose,
    index: u64,
) -> Vec<f64> {
    if s == 0 {
        return x.to_vec();
    }
    match *kind {
        CorruptionKind::AdditiveGaussian { sigma_unit } => {
            let std = s as f64 * sigma_unit;
            let mut rng = stream(seed, purpose, index);
            x.iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + std * z
                })
                .collect()
        }
        CorruptionKind::Quantize { base_levels } => {
            // unit feature range; levels halve per added severity
            let step = f64::powi(2.0, s as i32 - 1) / base_levels as f64;
            x.iter().map(|&v| (v / step).round() * step).collect()
        }
    }
}
