use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn pooled_extent(extent: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::Config(
            "pooling window and stride must be positive".into(),
        ));
    }
    if window > extent {
        return Err(Error::Dimension(format!(
            "pooling window {window} exceeds input extent {extent}"
        )));
    }
    Ok((extent - window) / stride + 1)
}

/// Max pooling forward pass.
///
/// A rank-2 input `(length, channels)` is pooled along its length; a rank-3
/// input `(rows, cols, channels)` is pooled with a square window over both
/// spatial axes. Channels are untouched. Returns the pooled tensor together
/// with, for every output cell, the flat input index that won (first index on
/// ties).
pub fn maxpool_forward_indexed(
    input: &Tensor,
    window: usize,
    stride: usize,
) -> Result<(Tensor, Vec<usize>)> {
    match *input.shape() {
        [len, ch] => {
            let out_len = pooled_extent(len, window, stride)?;
            let x = input.data();
            let mut out = Vec::with_capacity(out_len * ch);
            let mut arg = Vec::with_capacity(out_len * ch);
            for o in 0..out_len {
                for c in 0..ch {
                    let mut best = (o * stride) * ch + c;
                    for t in 1..window {
                        let idx = (o * stride + t) * ch + c;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.push(x[best]);
                    arg.push(best);
                }
            }
            Ok((Tensor::new(vec![out_len, ch], out)?, arg))
        }
        [rows, cols, ch] => {
            let out_r = pooled_extent(rows, window, stride)?;
            let out_c = pooled_extent(cols, window, stride)?;
            let x = input.data();
            let mut out = Vec::with_capacity(out_r * out_c * ch);
            let mut arg = Vec::with_capacity(out_r * out_c * ch);
            for orow in 0..out_r {
                for ocol in 0..out_c {
                    for c in 0..ch {
                        let mut best = ((orow * stride) * cols + ocol * stride) * ch + c;
                        for kr in 0..window {
                            for kc in 0..window {
                                let idx =
                                    ((orow * stride + kr) * cols + ocol * stride + kc) * ch + c;
                                if x[idx] > x[best] {
                                    best = idx;
                                }
                            }
                        }
                        out.push(x[best]);
                        arg.push(best);
                    }
                }
            }
            Ok((Tensor::new(vec![out_r, out_c, ch], out)?, arg))
        }
        _ => Err(Error::Dimension(format!(
            "max pooling expects (length, channels) or (rows, cols, channels), got {:?}",
            input.shape()
        ))),
    }
}

pub fn maxpool_forward(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    maxpool_forward_indexed(input, window, stride).map(|(t, _)| t)
}

/// Max pooling layer.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool {
    pub fn new(window: usize, stride: usize) -> Self {
        Self {
            window,
            stride,
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (out, arg) = maxpool_forward_indexed(input, self.window, self.stride)?;
        self.cache = Some((input.shape().to_vec(), arg));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (shape, arg) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("max-pool backward called before forward".into()))?;
        if grad_out.len() != arg.len() {
            return Err(Error::Dimension(format!(
                "max-pool gradient has {} entries, expected {}",
                grad_out.len(),
                arg.len()
            )));
        }
        let mut grad_in = Tensor::zeros(shape.clone());
        let gi = grad_in.data_mut();
        for (&idx, &g) in arg.iter().zip(grad_out.data()) {
            gi[idx] += g;
        }
        Ok(grad_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn constant_input() {
        let out = maxpool_forward(&col(&[4.0; 6]), 2, 2).unwrap();
        assert_eq!(out.data(), &[4.0, 4.0, 4.0]);
    }

    #[test]
    fn picks_window_maximum() {
        let out = maxpool_forward(&col(&[1.0, 3.0, 2.0, 5.0]), 2, 2).unwrap();
        assert_eq!(out.data(), &[3.0, 5.0]);
    }

    #[test]
    fn tie_routes_gradient_to_first() {
        let mut pool = MaxPool::new(2, 2);
        let out = pool.forward(&col(&[2.0, 2.0])).unwrap();
        assert_eq!(out.data(), &[2.0]);
        let g = pool
            .backward(&Tensor::new(vec![1, 1], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(g.data(), &[1.0, 0.0]);
    }

    #[test]
    fn two_dimensional_keeps_channels() {
        let x = Tensor::new(
            vec![2, 2, 2],
            vec![1.0, -1.0, 5.0, -2.0, 3.0, -3.0, 0.0, -4.0],
        )
        .unwrap();
        let out = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(out.shape(), &[1, 1, 2]);
        assert_eq!(out.data(), &[5.0, -1.0]);
    }

    #[test]
    fn window_too_large() {
        assert!(matches!(
            maxpool_forward(&col(&[1.0, 2.0]), 3, 1),
            Err(Error::Dimension(_))
        ));
    }
}
