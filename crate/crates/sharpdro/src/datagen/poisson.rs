//! Poisson severity distribution over bounded corruption levels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::rng::{stream, Purpose};

/// How the unbounded Poisson law is folded onto severities `0..=S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    /// Severities below `S` keep their raw pmf; `S` absorbs the tail mass.
    Clamp,
    /// Raw pmf over `0..=S` divided by its sum.
    Renormalize,
}

/// Poisson-distributed severity levels `0..=max_severity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityDistribution {
    pub lambda: f64,
    pub max_severity: usize,
    pub mode: TailMode,
}

impl SeverityDistribution {
    pub fn new(lambda: f64, max_severity: usize, mode: TailMode) -> Result<Self, DatagenError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(DatagenError::InvalidRate { lambda });
        }
        Ok(Self {
            lambda,
            max_severity,
            mode,
        })
    }

    /// Number of severity levels, including the clean level 0.
    pub fn num_levels(&self) -> usize {
        self.max_severity + 1
    }
}

/// Poisson pmf `P(s; lambda) = e^{-lambda} lambda^s / s!`, evaluated in
/// log space so large `s` stays accurate.
pub fn poisson_pmf(s: usize, lambda: f64) -> Result<f64, DatagenError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(DatagenError::InvalidRate { lambda });
    }
    let ln_factorial: f64 = (2..=s).map(|k| (k as f64).ln()).sum();
    Ok((-lambda + (s as f64) * lambda.ln() - ln_factorial).exp())
}

/// Probability of each severity level under the distribution's tail mode.
pub fn severity_probs(dist: &SeverityDistribution) -> Vec<f64> {
    let s_max = dist.max_severity;
    let raw: Vec<f64> = (0..=s_max)
        .map(|s| poisson_pmf(s, dist.lambda).expect("lambda validated on construction"))
        .collect();
    match dist.mode {
        TailMode::Clamp => {
            let head: f64 = raw[..s_max].iter().sum();
            let mut probs = raw;
            probs[s_max] = (1.0 - head).max(0.0);
            probs
        }
        TailMode::Renormalize => {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|p| p / total).collect()
        }
    }
}

/// Draws one severity by inverse CDF from a single uniform variate.
fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    probs.len() - 1
}

/// `n` i.i.d. severity draws; draw `i` comes from the stream keyed by
/// `(seed, Severity, i)`, so the result is independent of scheduling.
pub fn sample_severities(n: usize, dist: &SeverityDistribution, seed: u64) -> Vec<usize> {
    let probs = severity_probs(dist);
    (0..n)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Severity, i as u64);
            draw(&probs, rng.gen::<f64>())
        })
        .collect()
}
