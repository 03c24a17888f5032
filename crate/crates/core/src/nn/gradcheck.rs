//! Central finite-difference verification of analytic gradients.

use rand::Rng;

use super::{softmax_cross_entropy, Layer, Network, NnRng};
use crate::error::Result;
use crate::tensor::Tensor;

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;

/// Largest discrepancy found by a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries_checked: usize,
}

impl GradCheckReport {
    fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            entries_checked: self.entries_checked + other.entries_checked,
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// turning rounding noise into large relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences of a scalar function at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn compare(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    GradCheckReport {
        max_relative_error: analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max),
        entries_checked: analytic.len(),
    }
}

/// Checks one layer using the scalar objective `sum(r * layer(x))` for a
/// random projection `r`. Every parameter entry and every input entry is
/// verified. Dropout layers should be put in frozen-mask mode first.
pub fn check_layer(layer: &mut Layer, input: &Tensor, rng: &mut NnRng) -> Result<GradCheckReport> {
    let out = layer.forward(input, true, rng)?;
    let projection: Vec<f64> = (0..out.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let upstream = Tensor::new(out.shape().to_vec(), projection.clone())?;

    let mut net = Network::new(vec![layer.clone()]);
    net.zero_grad();
    net.forward(input, true, rng)?;
    let grad_in = net.backward(&upstream)?;

    let objective = |net: &mut Network, x: &Tensor, rng: &mut NnRng| -> f64 {
        let y = net.forward(x, true, rng).expect("forward succeeded once");
        y.data().iter().zip(&projection).map(|(a, b)| a * b).sum()
    };

    let mut report = {
        let shape = input.shape().to_vec();
        let mut probe = net.clone();
        let numeric = numeric_gradient(
            |x| {
                objective(
                    &mut probe,
                    &Tensor::new(shape.clone(), x.to_vec()).unwrap(),
                    rng,
                )
            },
            input.data(),
            STEP,
        );
        compare(grad_in.data(), &numeric)
    };

    if let Some(params) = net.layers[0].params().cloned() {
        for which in [ParamPart::Weights, ParamPart::Biases] {
            let (values, analytic) = match which {
                ParamPart::Weights => (params.weights.clone(), params.grad_weights.clone()),
                ParamPart::Biases => (params.biases.clone(), params.grad_biases.clone()),
            };
            let mut probe = net.clone();
            let numeric = numeric_gradient(
                |v| {
                    let p = probe.layers[0].params_mut().expect("layer has params");
                    let target = match which {
                        ParamPart::Weights => &mut p.weights,
                        ParamPart::Biases => &mut p.biases,
                    };
                    target.data_mut().copy_from_slice(v);
                    objective(&mut probe, input, rng)
                },
                values.data(),
                STEP,
            );
            report = report.merge(compare(analytic.data(), &numeric));
        }
    }
    *layer = net.layers.remove(0);
    Ok(report)
}

#[derive(Clone, Copy)]
enum ParamPart {
    Weights,
    Biases,
}

/// Checks d(cross-entropy)/d(logits).
pub fn check_softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<GradCheckReport> {
    let analytic = softmax_cross_entropy(logits, labels)?.gradient;
    let shape = logits.shape().to_vec();
    let numeric = numeric_gradient(
        |z| {
            softmax_cross_entropy(&Tensor::new(shape.clone(), z.to_vec()).unwrap(), labels)
                .unwrap()
                .value
        },
        logits.data(),
        STEP,
    );
    Ok(compare(analytic.data(), &numeric))
}

/// End-to-end check of every parameter of a network under cross-entropy loss.
/// Dropout layers should be frozen beforehand so the objective is deterministic.
pub fn check_network(
    net: &mut Network,
    input: &Tensor,
    label: usize,
    rng: &mut NnRng,
) -> Result<GradCheckReport> {
    net.zero_grad();
    let logits = net.forward(input, true, rng)?;
    let loss = softmax_cross_entropy(&logits, &[label])?;
    net.backward(&loss.gradient)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        entries_checked: 0,
    };
    let n_layers = net.layers.len();
    for li in 0..n_layers {
        let Some(params) = net.layers[li].params().cloned() else {
            continue;
        };
        for which in [ParamPart::Weights, ParamPart::Biases] {
            let (values, analytic) = match which {
                ParamPart::Weights => (params.weights.clone(), params.grad_weights.clone()),
                ParamPart::Biases => (params.biases.clone(), params.grad_biases.clone()),
            };
            let mut probe = net.clone();
            let numeric = numeric_gradient(
                |v| {
                    let p = probe.layers[li].params_mut().expect("layer has params");
                    let target = match which {
                        ParamPart::Weights => &mut p.weights,
                        ParamPart::Biases => &mut p.biases,
                    };
                    target.data_mut().copy_from_slice(v);
                    let z = probe.forward(input, true, rng).unwrap();
                    softmax_cross_entropy(&z, &[label]).unwrap().value
                },
                values.data(),
                STEP,
            );
            report = report.merge(compare(analytic.data(), &numeric));
        }
    }
    Ok(report)
}
