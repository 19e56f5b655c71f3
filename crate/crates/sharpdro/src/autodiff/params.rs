//! Flat parameter vectors with a named layout.
//!
//! Model parameters live in one flat `Vec<f64>` so that perturbations,
//! SGD updates, and norms are simple vector operations. The layout maps
//! named, shaped entries (weight matrices, bias vectors) onto disjoint
//! windows of the flat storage.

use serde::{Deserialize, Serialize};

use super::AutodiffError;

/// One named entry of a parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An ordered set of layout entries partitioning a flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

impl ParamLayout {
    /// Builds a layout from `(name, shape)` pairs; offsets are assigned
    /// contiguously in order, so the partition is exact by construction.
    pub fn new(parts: Vec<(String, Vec<usize>)>) -> Self {
        let mut entries = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for (name, shape) in parts {
            let len: usize = shape.iter().product();
            entries.push(LayoutEntry {
                name,
                shape,
                offset,
            });
            offset += len;
        }
        Self {
            entries,
            total: offset,
        }
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn total_len(&self) -> usize {
        self.total
    }
}

/// Flat model parameters plus their layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<Self, AutodiffError> {
        if layout.total_len() != values.len() {
            return Err(AutodiffError::LayoutMismatch {
                detail: format!(
                    "layout covers {} values, got {}",
                    layout.total_len(),
                    values.len()
                ),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        let n = layout.total_len();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The flat window for the layout entry at position `i`.
    pub fn part(&self, i: usize) -> &[f64] {
        let e = &self.layout.entries[i];
        &self.values[e.offset..e.offset + e.len()]
    }

    /// Structured view: `(name, shape, values)` per entry. Reassembling the
    /// windows in order reproduces the flat vector bitwise, since the
    /// offsets partition it exactly.
    pub fn unflatten(&self) -> Vec<(&str, &[usize], &[f64])> {
        self.layout
            .entries
            .iter()
            .map(|e| {
                (
                    e.name.as_str(),
                    e.shape.as_slice(),
                    &self.values[e.offset..e.offset + e.len()],
                )
            })
            .collect()
    }

    /// Elementwise `self + eps`, leaving `self` untouched.
    pub fn perturbed(&self, eps: &ParameterVector) -> Result<ParameterVector, AutodiffError> {
        if self.layout != eps.layout {
            return Err(AutodiffError::LayoutMismatch {
                detail: "perturbation layout differs from parameter layout".to_string(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&eps.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ParameterVector {
            layout: self.layout.clone(),
            values,
        })
    }

    /// In-place `self += scale * other` (same layout required).
    pub fn axpy(&mut self, scale: f64, other: &ParameterVector) -> Result<(), AutodiffError> {
        if self.layout != other.layout {
            return Err(AutodiffError::LayoutMismatch {
                detail: "axpy operand layout differs".to_string(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn check_finite(&self, context: &str) -> Result<(), AutodiffError> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(AutodiffError::NonFinite {
                context: context.to_string(),
            })
        }
    }
}

/// Elementwise `theta + eps` with layout checking; `theta` is unmodified.
pub fn apply_perturbation(
    theta: &ParameterVector,
    eps: &ParameterVector,
) -> Result<ParameterVector, AutodiffError> {
    theta.perturbed(eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> ParamLayout {
        ParamLayout::new(vec![
            ("w0".to_string(), vec![2, 3]),
            ("b0".to_string(), vec![3]),
        ])
    }

    #[test]
    fn offsets_partition_exactly() {
        let l = layout();
        assert_eq!(l.total_len(), 9);
        assert_eq!(l.entries()[0].offset, 0);
        assert_eq!(l.entries()[1].offset, 6);
    }

    #[test]
    fn unflatten_roundtrips_bitwise() {
        let vals: Vec<f64> = (0..9).map(|i| (i as f64) * 0.137 - 0.4).collect();
        let pv = ParameterVector::new(layout(), vals.clone()).unwrap();
        let mut rebuilt = Vec::new();
        for (_, _, window) in pv.unflatten() {
            rebuilt.extend_from_slice(window);
        }
        assert_eq!(rebuilt.len(), vals.len());
        for (a, b) in rebuilt.iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn perturbation_identity_and_inverse() {
        let vals = vec![1.0, 2.0, -0.5, 0.25, 3.0, -1.0, 0.0, 0.5, 2.5];
        let theta = ParameterVector::new(layout(), vals.clone()).unwrap();

        let zero = ParameterVector::zeros(layout());
        let same = apply_perturbation(&theta, &zero).unwrap();
        for (a, b) in same.values().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // Dyadic offsets keep x + e - e exact, so the round trip is bitwise.
        let eps_vals: Vec<f64> = (0..9).map(|i| 0.0625 * ((i % 3) as f64 - 1.0)).collect();
        let eps = ParameterVector::new(layout(), eps_vals.clone()).unwrap();
        let mut neg = eps.clone();
        for v in neg.values_mut() {
            *v = -*v;
        }
        let back = apply_perturbation(&apply_perturbation(&theta, &eps).unwrap(), &neg).unwrap();
        for (a, b) in back.values().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits(), "a={a} b={b}");
        }
    }

    #[test]
    fn perturbation_arithmetic() {
        let l = ParamLayout::new(vec![("w".to_string(), vec![2])]);
        let theta = ParameterVector::new(l.clone(), vec![1.0, 2.0]).unwrap();
        let eps = ParameterVector::new(l, vec![0.05, -0.05]).unwrap();
        let out = apply_perturbation(&theta, &eps).unwrap();
        assert_eq!(out.values(), &[1.05, 1.95]);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let theta = ParameterVector::zeros(layout());
        let other = ParameterVector::zeros(ParamLayout::new(vec![("w".to_string(), vec![9])]));
        assert!(apply_perturbation(&theta, &other).is_err());
    }
}
