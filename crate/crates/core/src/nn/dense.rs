use rand::Rng;

use super::params::LayerParams;
use super::Activation;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `input · W + b` followed by `activation`.
///
/// `W` has shape `(in, out)`. The input may be a single vector of length `in`
/// or a matrix whose trailing dimension is `in` (one row per example).
pub fn dense_forward(
    params: &LayerParams,
    input: &Tensor,
    activation: Activation,
) -> Result<Tensor> {
    let (pre, _) = dense_pre_activation(params, input)?;
    let mut out = pre;
    activation.apply_in_place(out.data_mut());
    Ok(out)
}

fn dense_pre_activation(params: &LayerParams, input: &Tensor) -> Result<(Tensor, usize)> {
    let w_shape = params.weights.shape();
    if w_shape.len() != 2 || params.biases.shape() != [w_shape[1]] {
        return Err(Error::Dimension(format!(
            "dense weights {:?} / biases {:?} are not (in, out) / (out)",
            w_shape,
            params.biases.shape()
        )));
    }
    let (n_in, n_out) = (w_shape[0], w_shape[1]);
    if input.last_dim() != n_in {
        return Err(Error::Dimension(format!(
            "dense input shape {:?} does not match weight shape {:?}",
            input.shape(),
            w_shape
        )));
    }
    let rows = input.len() / n_in;
    let w = params.weights.data();
    let b = params.biases.data();
    let x = input.data();
    let mut out = vec![0.0; rows * n_out];
    for r in 0..rows {
        let row_out = &mut out[r * n_out..(r + 1) * n_out];
        row_out.copy_from_slice(b);
        for (i, &xi) in x[r * n_in..(r + 1) * n_in].iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w_row = &w[i * n_out..(i + 1) * n_out];
            for (o, wv) in row_out.iter_mut().zip(w_row) {
                *o += xi * wv;
            }
        }
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().expect("non-empty shape") = n_out;
    Ok((Tensor::new(shape, out)?, rows))
}

/// Fully connected layer.
#[derive(Debug, Clone)]
pub struct Dense {
    pub params: LayerParams,
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Dense {
    pub fn new(params: LayerParams, activation: Activation) -> Self {
        Self {
            params,
            activation,
            cache: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self::new(
            LayerParams::he_uniform(vec![n_in, n_out], vec![n_out], n_in, rng),
            activation,
        )
    }

    pub fn input_size(&self) -> usize {
        self.params.weights.shape()[0]
    }

    pub fn output_size(&self) -> usize {
        self.params.weights.shape()[1]
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (pre, _) = dense_pre_activation(&self.params, input)?;
        let mut out = pre.clone();
        self.activation.apply_in_place(out.data_mut());
        self.cache = Some((input.clone(), pre));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (input, pre) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("dense backward called before forward".into()))?;
        if grad_out.shape() != pre.shape() {
            return Err(Error::Dimension(format!(
                "dense gradient shape {:?} does not match output shape {:?}",
                grad_out.shape(),
                pre.shape()
            )));
        }
        let (n_in, n_out) = (self.input_size(), self.output_size());
        let rows = input.len() / n_in;
        let mut g = grad_out.data().to_vec();
        self.activation.backprop_in_place(pre.data(), &mut g);

        let x = input.data();
        let w = self.params.weights.data();
        let gw = self.params.grad_weights.data_mut();
        let mut grad_in = vec![0.0; input.len()];
        for r in 0..rows {
            let g_row = &g[r * n_out..(r + 1) * n_out];
            for i in 0..n_in {
                let xi = x[r * n_in + i];
                let w_row = &w[i * n_out..(i + 1) * n_out];
                let gw_row = &mut gw[i * n_out..(i + 1) * n_out];
                let mut acc = 0.0;
                for o in 0..n_out {
                    gw_row[o] += xi * g_row[o];
                    acc += g_row[o] * w_row[o];
                }
                grad_in[r * n_in + i] = acc;
            }
            for (gb, gv) in self.params.grad_biases.data_mut().iter_mut().zip(g_row) {
                *gb += gv;
            }
        }
        Tensor::new(input.shape().to_vec(), grad_in)
    }
}
