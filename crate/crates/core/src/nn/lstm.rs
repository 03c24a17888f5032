use rand::Rng;

use super::params::LayerParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate activations and state of one step, kept for backpropagation.
#[derive(Debug, Clone)]
struct StepCache {
    concat: Vec<f64>,
    input_gate: Vec<f64>,
    forget_gate: Vec<f64>,
    candidate: Vec<f64>,
    output_gate: Vec<f64>,
    c_prev: Vec<f64>,
    c: Vec<f64>,
}

fn check_shapes(params: &LayerParams, n_in: usize, hidden: usize) -> Result<()> {
    let ws = params.weights.shape();
    if ws != [n_in + hidden, 4 * hidden] || params.biases.shape() != [4 * hidden] {
        return Err(Error::Dimension(format!(
            "LSTM weights {:?} / biases {:?} do not fit input {n_in} and {hidden} units",
            ws,
            params.biases.shape()
        )));
    }
    Ok(())
}

fn step(params: &LayerParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, StepCache) {
    let hidden = h_prev.len();
    let width = 4 * hidden;
    let mut concat = Vec::with_capacity(x.len() + hidden);
    concat.extend_from_slice(x);
    concat.extend_from_slice(h_prev);

    let w = params.weights.data();
    let mut z = params.biases.data().to_vec();
    for (i, &v) in concat.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (zj, wj) in z.iter_mut().zip(&w[i * width..(i + 1) * width]) {
            *zj += v * wj;
        }
    }
    let input_gate: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let forget_gate: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let candidate: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|v| v.tanh()).collect();
    let output_gate: Vec<f64> = z[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..hidden)
        .map(|u| forget_gate[u] * c_prev[u] + input_gate[u] * candidate[u])
        .collect();
    let h: Vec<f64> = (0..hidden).map(|u| output_gate[u] * c[u].tanh()).collect();
    (
        h,
        StepCache {
            concat,
            input_gate,
            forget_gate,
            candidate,
            output_gate,
            c_prev: c_prev.to_vec(),
            c,
        },
    )
}

/// One LSTM recurrence step.
///
/// Weights are `(input + units, 4 * units)` with gate blocks ordered input,
/// forget, candidate, output; biases are `(4 * units)`.
pub fn lstm_step(
    params: &LayerParams,
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor)> {
    if h_prev.len() != c_prev.len() {
        return Err(Error::Dimension(format!(
            "hidden state {:?} and cell state {:?} differ in size",
            h_prev.shape(),
            c_prev.shape()
        )));
    }
    check_shapes(params, x_t.len(), h_prev.len())?;
    let (h, cache) = step(params, x_t.data(), h_prev.data(), c_prev.data());
    Ok((Tensor::from_vec(h), Tensor::from_vec(cache.c)))
}

/// LSTM layer over a `(steps, features)` sequence, emitting the final hidden state.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub params: LayerParams,
    pub units: usize,
    cache: Option<(Vec<usize>, Vec<StepCache>)>,
}

impl Lstm {
    pub fn new(params: LayerParams, units: usize) -> Self {
        Self {
            params,
            units,
            cache: None,
        }
    }

    /// He-uniform weights; forget-gate biases start at 1.
    pub fn init<R: Rng + ?Sized>(n_in: usize, units: usize, rng: &mut R) -> Self {
        let mut params = LayerParams::he_uniform(
            vec![n_in + units, 4 * units],
            vec![4 * units],
            n_in + units,
            rng,
        );
        params.biases.data_mut()[units..2 * units].fill(1.0);
        Self::new(params, units)
    }

    pub fn input_size(&self) -> usize {
        self.params.weights.shape()[0] - self.units
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [steps, features] = *input.shape() else {
            return Err(Error::Dimension(format!(
                "LSTM expects a (steps, features) input, got {:?}",
                input.shape()
            )));
        };
        check_shapes(&self.params, features, self.units)?;
        let mut h = vec![0.0; self.units];
        let mut c = vec![0.0; self.units];
        let mut caches = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = &input.data()[t * features..(t + 1) * features];
            let (h_next, cache) = step(&self.params, x, &h, &c);
            h = h_next;
            c.clone_from(&cache.c);
            caches.push(cache);
        }
        self.cache = Some((input.shape().to_vec(), caches));
        Ok(Tensor::from_vec(h))
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (shape, caches) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("LSTM backward called before forward".into()))?;
        if grad_out.len() != self.units {
            return Err(Error::Dimension(format!(
                "LSTM gradient has {} entries, expected {}",
                grad_out.len(),
                self.units
            )));
        }
        let hidden = self.units;
        let width = 4 * hidden;
        let features = shape[1];
        let w = self.params.weights.data();
        let gw = self.params.grad_weights.data_mut();
        let gb = self.params.grad_biases.data_mut();
        let mut grad_in = vec![0.0; shape[0] * features];
        let mut dh = grad_out.data().to_vec();
        let mut dc = vec![0.0; hidden];
        let mut dz = vec![0.0; width];
        for (t, s) in caches.iter().enumerate().rev() {
            for u in 0..hidden {
                let tc = s.c[u].tanh();
                let d_o = dh[u] * tc;
                let dcu = dc[u] + dh[u] * s.output_gate[u] * (1.0 - tc * tc);
                let d_i = dcu * s.candidate[u];
                let d_g = dcu * s.input_gate[u];
                let d_f = dcu * s.c_prev[u];
                dc[u] = dcu * s.forget_gate[u];
                dz[u] = d_i * s.input_gate[u] * (1.0 - s.input_gate[u]);
                dz[hidden + u] = d_f * s.forget_gate[u] * (1.0 - s.forget_gate[u]);
                dz[2 * hidden + u] = d_g * (1.0 - s.candidate[u] * s.candidate[u]);
                dz[3 * hidden + u] = d_o * s.output_gate[u] * (1.0 - s.output_gate[u]);
            }
            for (b, d) in gb.iter_mut().zip(&dz) {
                *b += d;
            }
            let mut d_concat = vec![0.0; features + hidden];
            for (i, &v) in s.concat.iter().enumerate() {
                let w_row = &w[i * width..(i + 1) * width];
                let gw_row = &mut gw[i * width..(i + 1) * width];
                let mut acc = 0.0;
                for j in 0..width {
                    gw_row[j] += v * dz[j];
                    acc += w_row[j] * dz[j];
                }
                d_concat[i] = acc;
            }
            grad_in[t * features..(t + 1) * features].copy_from_slice(&d_concat[..features]);
            dh.copy_from_slice(&d_concat[features..]);
        }
        Tensor::new(shape.clone(), grad_in)
    }
}
