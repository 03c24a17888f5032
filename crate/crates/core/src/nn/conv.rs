use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::LayerParams;
use super::Activation;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Border handling for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; the kernel must fit entirely inside the input.
    Valid,
    /// Zero padding so that the output extent is `ceil(extent / stride)`.
    Same,
}

/// Output extent and leading pad for one spatial axis.
fn axis_geometry(
    extent: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::Config("convolution stride must be positive".into()));
    }
    match padding {
        Padding::Valid => {
            if kernel > extent {
                return Err(Error::Dimension(format!(
                    "kernel size {kernel} exceeds input extent {extent}"
                )));
            }
            Ok(((extent - kernel) / stride + 1, 0))
        }
        Padding::Same => {
            let out = extent.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(extent);
            Ok((out, total / 2))
        }
    }
}

/// Valid or same cross-correlation of a `(length, channels)` input.
///
/// Weights are `(filters, kernel, in_channels)`, biases `(filters)`; the
/// output is `(out_length, filters)`.
pub fn conv1d_forward(
    params: &LayerParams,
    input: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let g = Conv1dGeometry::new(params, input, stride, padding)?;
    let mut out = vec![0.0; g.out_len * g.filters];
    let x = input.data();
    let w = params.weights.data();
    let b = params.biases.data();
    for o in 0..g.out_len {
        for f in 0..g.filters {
            let mut acc = b[f];
            for t in 0..g.kernel {
                let Some(pos) = g.source(o, t) else { continue };
                let xs = &x[pos * g.channels..(pos + 1) * g.channels];
                let ws = &w[(f * g.kernel + t) * g.channels..(f * g.kernel + t + 1) * g.channels];
                acc += xs.iter().zip(ws).map(|(a, b)| a * b).sum::<f64>();
            }
            out[o * g.filters + f] = acc;
        }
    }
    Tensor::new(vec![g.out_len, g.filters], out)
}

struct Conv1dGeometry {
    len: usize,
    channels: usize,
    filters: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_len: usize,
}

impl Conv1dGeometry {
    fn new(params: &LayerParams, input: &Tensor, stride: usize, padding: Padding) -> Result<Self> {
        let ws = params.weights.shape();
        if ws.len() != 3 {
            return Err(Error::Dimension(format!(
                "conv1d weights {ws:?} are not (filters, kernel, channels)"
            )));
        }
        let is = input.shape();
        if is.len() != 2 || is[1] != ws[2] {
            return Err(Error::Dimension(format!(
                "conv1d input {is:?} does not match weights {ws:?}"
            )));
        }
        let (out_len, pad) = axis_geometry(is[0], ws[1], stride, padding)?;
        Ok(Self {
            len: is[0],
            channels: is[1],
            filters: ws[0],
            kernel: ws[1],
            stride,
            pad,
            out_len,
        })
    }

    #[inline]
    fn source(&self, o: usize, t: usize) -> Option<usize> {
        let p = (o * self.stride + t).checked_sub(self.pad)?;
        (p < self.len).then_some(p)
    }
}

/// One-dimensional convolution layer.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub params: LayerParams,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Conv1d {
    pub fn new(
        params: LayerParams,
        stride: usize,
        padding: Padding,
        activation: Activation,
    ) -> Self {
        Self {
            params,
            stride,
            padding,
            activation,
            cache: None,
        }
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let params = LayerParams::he_uniform(
            vec![filters, kernel, in_channels],
            vec![filters],
            kernel * in_channels,
            rng,
        );
        Self::new(params, stride, padding, activation)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let pre = conv1d_forward(&self.params, input, self.stride, self.padding)?;
        let mut out = pre.clone();
        self.activation.apply_in_place(out.data_mut());
        self.cache = Some((input.clone(), pre));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (input, pre) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("conv1d backward called before forward".into()))?;
        if grad_out.shape() != pre.shape() {
            return Err(Error::Dimension(format!(
                "conv1d gradient {:?} does not match output {:?}",
                grad_out.shape(),
                pre.shape()
            )));
        }
        let g = Conv1dGeometry::new(&self.params, input, self.stride, self.padding)?;
        let mut go = grad_out.data().to_vec();
        self.activation.backprop_in_place(pre.data(), &mut go);
        let x = input.data();
        let w = self.params.weights.data();
        let mut grad_in = vec![0.0; input.len()];
        let gw = self.params.grad_weights.data_mut();
        let gb = self.params.grad_biases.data_mut();
        for o in 0..g.out_len {
            for f in 0..g.filters {
                let gv = go[o * g.filters + f];
                if gv == 0.0 {
                    continue;
                }
                gb[f] += gv;
                for t in 0..g.kernel {
                    let Some(pos) = g.source(o, t) else { continue };
                    let base_w = (f * g.kernel + t) * g.channels;
                    let base_x = pos * g.channels;
                    for c in 0..g.channels {
                        gw[base_w + c] += gv * x[base_x + c];
                        grad_in[base_x + c] += gv * w[base_w + c];
                    }
                }
            }
        }
        Tensor::new(input.shape().to_vec(), grad_in)
    }
}

struct Conv2dGeometry {
    rows: usize,
    cols: usize,
    channels: usize,
    filters: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_r: usize,
    pad_c: usize,
    out_r: usize,
    out_c: usize,
}

impl Conv2dGeometry {
    fn new(params: &LayerParams, input: &Tensor, stride: usize, padding: Padding) -> Result<Self> {
        let ws = params.weights.shape();
        if ws.len() != 4 {
            return Err(Error::Dimension(format!(
                "conv2d weights {ws:?} are not (filters, kernel_rows, kernel_cols, channels)"
            )));
        }
        let is = input.shape();
        if is.len() != 3 || is[2] != ws[3] {
            return Err(Error::Dimension(format!(
                "conv2d input {is:?} does not match weights {ws:?}"
            )));
        }
        let (out_r, pad_r) = axis_geometry(is[0], ws[1], stride, padding)?;
        let (out_c, pad_c) = axis_geometry(is[1], ws[2], stride, padding)?;
        Ok(Self {
            rows: is[0],
            cols: is[1],
            channels: is[2],
            filters: ws[0],
            kh: ws[1],
            kw: ws[2],
            stride,
            pad_r,
            pad_c,
            out_r,
            out_c,
        })
    }

    #[inline]
    fn source(&self, o: usize, k: usize, pad: usize, extent: usize) -> Option<usize> {
        let p = (o * self.stride + k).checked_sub(pad)?;
        (p < extent).then_some(p)
    }
}

/// Cross-correlation of a `(rows, cols, channels)` input.
///
/// Weights are `(filters, kernel_rows, kernel_cols, in_channels)`; output is
/// `(out_rows, out_cols, filters)`.
pub fn conv2d_forward(
    params: &LayerParams,
    input: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let g = Conv2dGeometry::new(params, input, stride, padding)?;
    let x = input.data();
    let w = params.weights.data();
    let b = params.biases.data();
    let mut out = vec![0.0; g.out_r * g.out_c * g.filters];
    for orow in 0..g.out_r {
        for ocol in 0..g.out_c {
            let dst = &mut out
                [(orow * g.out_c + ocol) * g.filters..(orow * g.out_c + ocol + 1) * g.filters];
            dst.copy_from_slice(b);
            for kr in 0..g.kh {
                let Some(r) = g.source(orow, kr, g.pad_r, g.rows) else {
                    continue;
                };
                for kc in 0..g.kw {
                    let Some(c) = g.source(ocol, kc, g.pad_c, g.cols) else {
                        continue;
                    };
                    let xs = &x[(r * g.cols + c) * g.channels..(r * g.cols + c + 1) * g.channels];
                    for (f, d) in dst.iter_mut().enumerate() {
                        let base = ((f * g.kh + kr) * g.kw + kc) * g.channels;
                        let ws = &w[base..base + g.channels];
                        *d += xs.iter().zip(ws).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.out_r, g.out_c, g.filters], out)
}

/// Two-dimensional convolution layer.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub params: LayerParams,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Conv2d {
    pub fn new(
        params: LayerParams,
        stride: usize,
        padding: Padding,
        activation: Activation,
    ) -> Self {
        Self {
            params,
            stride,
            padding,
            activation,
            cache: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let params = LayerParams::he_uniform(
            vec![filters, kernel, kernel, in_channels],
            vec![filters],
            kernel * kernel * in_channels,
            rng,
        );
        Self::new(params, stride, padding, activation)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let pre = conv2d_forward(&self.params, input, self.stride, self.padding)?;
        let mut out = pre.clone();
        self.activation.apply_in_place(out.data_mut());
        self.cache = Some((input.clone(), pre));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (input, pre) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("conv2d backward called before forward".into()))?;
        if grad_out.shape() != pre.shape() {
            return Err(Error::Dimension(format!(
                "conv2d gradient {:?} does not match output {:?}",
                grad_out.shape(),
                pre.shape()
            )));
        }
        let g = Conv2dGeometry::new(&self.params, input, self.stride, self.padding)?;
        let mut go = grad_out.data().to_vec();
        self.activation.backprop_in_place(pre.data(), &mut go);
        let x = input.data();
        let w = self.params.weights.data();
        let mut grad_in = vec![0.0; input.len()];
        let gw = self.params.grad_weights.data_mut();
        let gb = self.params.grad_biases.data_mut();
        for orow in 0..g.out_r {
            for ocol in 0..g.out_c {
                let gs = &go
                    [(orow * g.out_c + ocol) * g.filters..(orow * g.out_c + ocol + 1) * g.filters];
                for (f, &gv) in gs.iter().enumerate() {
                    gb[f] += gv;
                }
                for kr in 0..g.kh {
                    let Some(r) = g.source(orow, kr, g.pad_r, g.rows) else {
                        continue;
                    };
                    for kc in 0..g.kw {
                        let Some(c) = g.source(ocol, kc, g.pad_c, g.cols) else {
                            continue;
                        };
                        let base_x = (r * g.cols + c) * g.channels;
                        for (f, &gv) in gs.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let base_w = ((f * g.kh + kr) * g.kw + kc) * g.channels;
                            for ch in 0..g.channels {
                                gw[base_w + ch] += gv * x[base_x + ch];
                                grad_in[base_x + ch] += gv * w[base_w + ch];
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(input.shape().to_vec(), grad_in)
    }
}
