//! Classifier models and their exact reverse-mode gradients.
//!
//! The model family is a multilayer perceptron with softmax output; an empty
//! hidden-layer list gives a linear softmax classifier. Gradients are
//! computed by backpropagation through the stored forward activations, so
//! they match the analytic derivative of the returned scalar exactly (up to
//! floating-point rounding of the same expression).

use serde::{Deserialize, Serialize};

use super::params::{ParamLayout, ParameterVector};
use super::tensor::Tensor;
use super::AutodiffError;
use crate::rng::{stream, Purpose};
use rand_distr::{Distribution, StandardNormal};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the post-activation value where cheap.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture of a classifier: layer widths and activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    /// Empty list = linear softmax classifier.
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
}

impl ModelSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        num_classes: usize,
        activation: Activation,
    ) -> Result<Self, AutodiffError> {
        if num_classes < 2 {
            return Err(AutodiffError::InvalidSpec {
                detail: format!("num_classes must be >= 2, got {num_classes}"),
            });
        }
        if input_dim < 1 {
            return Err(AutodiffError::InvalidSpec {
                detail: "input_dim must be >= 1".to_string(),
            });
        }
        if hidden_dims.iter().any(|&h| h == 0) {
            return Err(AutodiffError::InvalidSpec {
                detail: "hidden layer widths must be positive".to_string(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            num_classes,
            activation,
        })
    }

    /// Widths of consecutive layers, input to output.
    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.num_classes);
        d
    }

    fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// The parameter layout for this architecture: per layer a weight
    /// matrix `w{k}` of shape (in, out) and a bias `b{k}` of shape (out).
    pub fn layout(&self) -> ParamLayout {
        let dims = self.dims();
        let mut parts = Vec::new();
        for k in 0..self.num_layers() {
            parts.push((format!("w{k}"), vec![dims[k], dims[k + 1]]));
            parts.push((format!("b{k}"), vec![dims[k + 1]]));
        }
        ParamLayout::new(parts)
    }

    /// Seeded Gaussian initialization with per-layer 1/sqrt(fan_in) scale.
    pub fn init_params(&self, seed: u64) -> ParameterVector {
        let layout = self.layout();
        let mut values = vec![0.0; layout.total_len()];
        let dims = self.dims();
        for k in 0..self.num_layers() {
            let scale = 1.0 / (dims[k] as f64).sqrt();
            let mut rng = stream(seed, Purpose::ParamInit, k as u64);
            let w_entry = &layout.entries()[2 * k];
            for i in 0..w_entry.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                values[w_entry.offset + i] = scale * z;
            }
            // biases start at zero
        }
        ParameterVector::new(layout, values).expect("layout matches by construction")
    }

    fn check_inputs(&self, theta: &ParameterVector, x: &Tensor) -> Result<(), AutodiffError> {
        if x.shape().len() != 2 || x.ncols() != self.input_dim {
            return Err(AutodiffError::ShapeMismatch {
                expected: format!("(n, {})", self.input_dim),
                got: format!("{:?}", x.shape()),
            });
        }
        if *theta.layout() != self.layout() {
            return Err(AutodiffError::LayoutMismatch {
                detail: "parameter layout does not match the model".to_string(),
            });
        }
        Ok(())
    }
}

/// Per-sample softmax probabilities and raw logits.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probs: Tensor,
    pub logits: Tensor,
}

impl Prediction {
    /// Maximum class probability of each sample.
    pub fn max_probs(&self) -> Vec<f64> {
        (0..self.probs.nrows())
            .map(|i| {
                self.probs
                    .row(i)
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Argmax class of each sample (first index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.probs.nrows())
            .map(|i| {
                let row = self.probs.row(i);
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Activations retained for the backward pass.
struct ForwardTrace {
    /// Post-activation of each layer; index 0 is the input.
    activations: Vec<Tensor>,
    /// Pre-activation of each hidden layer.
    pre_activations: Vec<Tensor>,
    logits: Tensor,
}

fn affine(input: &Tensor, theta: &ParameterVector, layer: usize, out_dim: usize) -> Tensor {
    let n = input.nrows();
    let w = theta.part(2 * layer);
    let b = theta.part(2 * layer + 1);
    let mut out = vec![0.0; n * out_dim];
    for i in 0..n {
        let row = input.row(i);
        let o = &mut out[i * out_dim..(i + 1) * out_dim];
        o.copy_from_slice(b);
        for (k, &xk) in row.iter().enumerate() {
            let wrow = &w[k * out_dim..(k + 1) * out_dim];
            for j in 0..out_dim {
                o[j] += xk * wrow[j];
            }
        }
    }
    Tensor::matrix(n, out_dim, out).expect("dimensions are consistent")
}

fn run_forward(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &Tensor,
) -> Result<ForwardTrace, AutodiffError> {
    model.check_inputs(theta, x)?;
    let dims = model.dims();
    let mut activations = vec![x.clone()];
    let mut pre_activations = Vec::new();
    for k in 0..model.hidden_dims.len() {
        let z = affine(activations.last().unwrap(), theta, k, dims[k + 1]);
        let mut a = z.clone();
        for v in a.data_mut() {
            *v = model.activation.apply(*v);
        }
        pre_activations.push(z);
        activations.push(a);
    }
    let logits = affine(
        activations.last().unwrap(),
        theta,
        model.num_layers() - 1,
        model.num_classes,
    );
    logits.check_finite("logits")?;
    Ok(ForwardTrace {
        activations,
        pre_activations,
        logits,
    })
}

/// Row-wise softmax with max subtraction.
fn softmax(logits: &Tensor) -> Tensor {
    let n = logits.nrows();
    let c = logits.ncols();
    let mut out = vec![0.0; n * c];
    for i in 0..n {
        let row = logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out[i * c..(i + 1) * c];
        let mut sum = 0.0;
        for (j, &z) in row.iter().enumerate() {
            let e = (z - m).exp();
            o[j] = e;
            sum += e;
        }
        for v in o.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::matrix(n, c, out).expect("dimensions are consistent")
}

/// Logits and softmax probabilities for every row of `x`.
pub fn forward(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &Tensor,
) -> Result<Prediction, AutodiffError> {
    let trace = run_forward(model, theta, x)?;
    let probs = softmax(&trace.logits);
    probs.check_finite("probabilities")?;
    Ok(Prediction {
        probs,
        logits: trace.logits,
    })
}

fn check_batch(
    model: &ModelSpec,
    x: &Tensor,
    y: &[usize],
    weights: Option<&[f64]>,
) -> Result<(), AutodiffError> {
    if x.nrows() == 0 {
        return Err(AutodiffError::EmptyBatch);
    }
    if y.len() != x.nrows() {
        return Err(AutodiffError::ShapeMismatch {
            expected: format!("{} labels", x.nrows()),
            got: format!("{}", y.len()),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= model.num_classes) {
        return Err(AutodiffError::InvalidSpec {
            detail: format!("label {bad} out of range for {} classes", model.num_classes),
        });
    }
    if let Some(w) = weights {
        if w.len() != x.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                expected: format!("{} weights", x.nrows()),
                got: format!("{}", w.len()),
            });
        }
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(AutodiffError::InvalidSpec {
                detail: "sample weights must be finite and nonnegative".to_string(),
            });
        }
    }
    Ok(())
}

/// Weighted-mean cross-entropy without the backward pass.
pub fn loss_only(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &Tensor,
    y: &[usize],
    weights: Option<&[f64]>,
) -> Result<f64, AutodiffError> {
    check_batch(model, x, y, weights)?;
    let trace = run_forward(model, theta, x)?;
    let n = x.nrows();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for i in 0..n {
        let row = trace.logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &z in row {
            sum += (z - m).exp();
        }
        let lse = m + sum.ln();
        let w = weights.map_or(1.0, |w| w[i]);
        loss += w * (lse - row[y[i]]) * inv_n;
    }
    if !loss.is_finite() {
        return Err(AutodiffError::NonFinite {
            context: "loss".to_string(),
        });
    }
    Ok(loss)
}

/// Weighted-mean cross-entropy and its exact gradient.
///
/// The loss is `(1/n) * sum_i w_i * ce_i` where `ce_i` is the cross-entropy
/// of sample `i` computed through log-sum-exp with max subtraction. Callers
/// supplying weights keep their mean at one; `None` means all ones.
pub fn loss_and_grad(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &Tensor,
    y: &[usize],
    weights: Option<&[f64]>,
) -> Result<(f64, ParameterVector), AutodiffError> {
    check_batch(model, x, y, weights)?;
    let trace = run_forward(model, theta, x)?;
    let n = x.nrows();
    let c = model.num_classes;
    let inv_n = 1.0 / n as f64;

    // loss and dL/dlogits in one pass over rows
    let mut loss = 0.0;
    let mut dlogits = vec![0.0; n * c];
    for i in 0..n {
        let row = trace.logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &z in row {
            sum += (z - m).exp();
        }
        let lse = m + sum.ln();
        let w = weights.map_or(1.0, |w| w[i]);
        loss += w * (lse - row[y[i]]) * inv_n;
        let scale = w * inv_n;
        let d = &mut dlogits[i * c..(i + 1) * c];
        for (j, &z) in row.iter().enumerate() {
            d[j] = scale * ((z - m).exp() / sum);
        }
        d[y[i]] -= scale;
    }
    if !loss.is_finite() {
        return Err(AutodiffError::NonFinite {
            context: "loss".to_string(),
        });
    }

    // backward through the layers
    let mut grad = ParameterVector::zeros(model.layout().clone());
    let dims = model.dims();
    let mut delta = Tensor::matrix(n, c, dlogits).expect("dimensions are consistent");
    for k in (0..model.num_layers()).rev() {
        let input = &trace.activations[k];
        let in_dim = dims[k];
        let out_dim = dims[k + 1];
        let w_entry_offset = grad.layout().entries()[2 * k].offset;
        let b_entry_offset = grad.layout().entries()[2 * k + 1].offset;

        // dW = input^T * delta; db = column sums of delta
        {
            let gvals = grad.values_mut();
            for i in 0..n {
                let xin = input.row(i);
                let drow = delta.row(i);
                for (a, &xa) in xin.iter().enumerate() {
                    let base = w_entry_offset + a * out_dim;
                    for (j, &dj) in drow.iter().enumerate() {
                        gvals[base + j] += xa * dj;
                    }
                }
                for (j, &dj) in drow.iter().enumerate() {
                    gvals[b_entry_offset + j] += dj;
                }
            }
        }

        if k > 0 {
            // d(input) = delta * W^T, then through the activation
            let w = theta.part(2 * k);
            let pre = &trace.pre_activations[k - 1];
            let act_out = &trace.activations[k];
            let mut next = vec![0.0; n * in_dim];
            for i in 0..n {
                let drow = delta.row(i);
                let o = &mut next[i * in_dim..(i + 1) * in_dim];
                for a in 0..in_dim {
                    let wrow = &w[a * out_dim..(a + 1) * out_dim];
                    let mut acc = 0.0;
                    for (j, &dj) in drow.iter().enumerate() {
                        acc += dj * wrow[j];
                    }
                    o[a] = acc
                        * model
                            .activation
                            .derivative(pre.row(i)[a], act_out.row(i)[a]);
                }
            }
            delta = Tensor::matrix(n, in_dim, next).expect("dimensions are consistent");
        }
    }
    grad.check_finite("gradient")?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_model(d: usize, c: usize) -> ModelSpec {
        ModelSpec::new(d, vec![], c, Activation::Tanh).unwrap()
    }

    #[test]
    fn zero_parameters_give_uniform_probs() {
        let model = linear_model(3, 4);
        let theta = ParameterVector::zeros(model.layout());
        let x = Tensor::matrix(2, 3, vec![0.3, -1.2, 0.7, 2.0, 0.0, -0.5]).unwrap();
        let pred = forward(&model, &theta, &x).unwrap();
        for i in 0..2 {
            for &p in pred.probs.row(i) {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_matches_direct_arithmetic() {
        // logits (0, ln 3) -> probs (1/4, 3/4)
        let model = linear_model(1, 2);
        let mut theta = ParameterVector::zeros(model.layout());
        // w = [[0, ln 3]], b = [0, 0]; x = 1 gives logits (0, ln 3)
        theta.values_mut()[1] = 3.0_f64.ln();
        let x = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let pred = forward(&model, &theta, &x).unwrap();
        assert!((pred.probs.row(0)[0] - 0.25).abs() < 1e-12);
        assert!((pred.probs.row(0)[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_weights_classify_one_hot_rows() {
        let c = 4;
        let model = linear_model(c, c);
        let mut theta = ParameterVector::zeros(model.layout());
        for j in 0..c {
            theta.values_mut()[j * c + j] = 1.0;
        }
        for k in 0..c {
            let mut row = vec![0.0; c];
            row[k] = 1.0;
            let x = Tensor::matrix(1, c, row).unwrap();
            let pred = forward(&model, &theta, &x).unwrap();
            assert_eq!(pred.argmax()[0], k);
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let model = ModelSpec::new(5, vec![7], 3, Activation::Tanh).unwrap();
        let theta = model.init_params(11);
        let mut data = Vec::new();
        let mut rng = crate::rng::stream(3, Purpose::Test, 0);
        use rand::Rng;
        for _ in 0..40 {
            data.push(rng.gen_range(-30.0..30.0));
        }
        let x = Tensor::matrix(8, 5, data).unwrap();
        let pred = forward(&model, &theta, &x).unwrap();
        for i in 0..8 {
            let s: f64 = pred.probs.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row sum {s}");
            assert!(pred.probs.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn uniform_weights_match_no_weights_bitwise() {
        let model = ModelSpec::new(4, vec![6], 3, Activation::Relu).unwrap();
        let theta = model.init_params(5);
        let x = Tensor::matrix(
            3,
            4,
            vec![0.5, -1.0, 2.0, 0.1, -0.4, 0.9, 1.5, -2.0, 0.0, 0.3, -0.7, 1.1],
        )
        .unwrap();
        let y = vec![0, 2, 1];
        let (l0, g0) = loss_and_grad(&model, &theta, &x, &y, None).unwrap();
        let ones = vec![1.0; 3];
        let (l1, g1) = loss_and_grad(&model, &theta, &x, &y, Some(&ones)).unwrap();
        assert_eq!(l0.to_bits(), l1.to_bits());
        for (a, b) in g0.values().iter().zip(g1.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn weight_masking_selects_single_sample() {
        let model = linear_model(3, 2);
        let theta = model.init_params(2);
        let x = Tensor::matrix(2, 3, vec![0.2, -0.1, 0.5, 1.0, 0.4, -0.9]).unwrap();
        let y = vec![1, 0];
        // weights (2, 0): only sample 0 contributes, at twice its share
        let (l, g) = loss_and_grad(&model, &theta, &x, &y, Some(&[2.0, 0.0])).unwrap();
        let x0 = x.gather_rows(&[0]);
        let (l0, g0) = loss_and_grad(&model, &theta, &x0, &y[..1], None).unwrap();
        // batch mean over 2 samples of 2*ce_0 equals ce_0
        assert!((l - l0).abs() < 1e-15);
        for (a, b) in g.values().iter().zip(g0.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_batch_is_rejected() {
        let model = linear_model(2, 2);
        let theta = ParameterVector::zeros(model.layout());
        let x = Tensor::matrix(0, 2, vec![]).unwrap();
        let err = loss_and_grad(&model, &theta, &x, &[], None).unwrap_err();
        assert!(matches!(err, AutodiffError::EmptyBatch));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ModelSpec::new(3, vec![], 1, Activation::Tanh).is_err());
        assert!(ModelSpec::new(0, vec![], 2, Activation::Tanh).is_err());
        assert!(ModelSpec::new(3, vec![4, 0], 2, Activation::Tanh).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let model = linear_model(3, 2);
        let theta = ParameterVector::zeros(model.layout());
        let x = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(forward(&model, &theta, &x).is_err());
    }
}
