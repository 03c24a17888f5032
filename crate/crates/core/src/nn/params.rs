use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Trainable weights and biases of one layer, with gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub biases: Tensor,
    pub grad_weights: Tensor,
    pub grad_biases: Tensor,
}

impl LayerParams {
    pub fn new(weights: Tensor, biases: Tensor) -> Self {
        let grad_weights = Tensor::zeros(weights.shape().to_vec());
        let grad_biases = Tensor::zeros(biases.shape().to_vec());
        Self {
            weights,
            biases,
            grad_weights,
            grad_biases,
        }
    }

    pub fn zeros(weight_shape: Vec<usize>, bias_shape: Vec<usize>) -> Self {
        Self::new(Tensor::zeros(weight_shape), Tensor::zeros(bias_shape))
    }

    /// Uniform He-style initialization with limit `sqrt(6 / fan_in)`; biases start at zero.
    pub fn he_uniform<R: Rng + ?Sized>(
        weight_shape: Vec<usize>,
        bias_shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / fan_in.max(1) as f64).sqrt();
        let mut weights = Tensor::zeros(weight_shape);
        for w in weights.data_mut() {
            *w = rng.random_range(-limit..limit);
        }
        Self::new(weights, Tensor::zeros(bias_shape))
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
        self.grad_biases.fill(0.0);
    }

    /// Applies `p <- p - lr * g` to both weights and biases.
    pub fn sgd_update(&mut self, learning_rate: f64) -> Result<()> {
        sgd_update(&mut self.weights, &self.grad_weights, learning_rate)?;
        sgd_update(&mut self.biases, &self.grad_biases, learning_rate)
    }
}

/// In-place plain gradient step on a single tensor.
pub fn sgd_update(values: &mut Tensor, gradients: &Tensor, learning_rate: f64) -> Result<()> {
    if values.shape() != gradients.shape() {
        return Err(Error::Dimension(format!(
            "parameter shape {:?} does not match gradient shape {:?}",
            values.shape(),
            gradients.shape()
        )));
    }
    for (p, g) in values.data_mut().iter_mut().zip(gradients.data()) {
        *p -= learning_rate * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut p = LayerParams::new(
            Tensor::new(vec![2], vec![1.0, -3.0]).unwrap(),
            Tensor::from_vec(vec![0.5]),
        );
        p.grad_weights = Tensor::from_vec(vec![10.0, 4.0]);
        p.grad_biases = Tensor::from_vec(vec![2.0]);
        let before = p.clone();
        p.sgd_update(0.0).unwrap();
        assert_eq!(p.weights, before.weights);
        assert_eq!(p.biases, before.biases);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut v = Tensor::from_vec(vec![1.0]);
        sgd_update(&mut v, &Tensor::from_vec(vec![2.0]), 0.05).unwrap();
        assert!((v.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut v = Tensor::from_vec(vec![1.0, 2.0]);
        let err = sgd_update(&mut v, &Tensor::from_vec(vec![1.0]), 0.1).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn quadratic_descent_is_monotone_below_curvature_bound() {
        // f(x) = 0.5 * sum(a_i x_i^2), curvature max(a) = 4, so any lr < 2/4 descends.
        let a = [1.0, 2.5, 4.0];
        let mut x = Tensor::from_vec(vec![3.0, -2.0, 1.5]);
        let loss =
            |x: &Tensor| -> f64 { x.data().iter().zip(a).map(|(v, c)| 0.5 * c * v * v).sum() };
        let mut prev = loss(&x);
        for _ in 0..50 {
            let g = Tensor::from_vec(x.data().iter().zip(a).map(|(v, c)| c * v).collect());
            sgd_update(&mut x, &g, 0.4).unwrap();
            let cur = loss(&x);
            assert!(cur < prev);
            prev = cur;
        }
    }
}
