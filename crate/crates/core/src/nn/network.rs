use super::{Conv1d, Conv2d, Dense, Dropout, LayerParams, Lstm, MaxPool, NnRng};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One stage of a sequential network.
#[derive(Debug, Clone)]
pub enum Layer {
    /// Reinterprets the input with a new shape of the same size.
    Reshape(Vec<usize>),
    Flatten,
    Dense(Dense),
    Conv1d(Conv1d),
    Conv2d(Conv2d),
    MaxPool(MaxPool),
    Lstm(Lstm),
    Dropout(Dropout),
}

impl Layer {
    pub fn params(&self) -> Option<&LayerParams> {
        match self {
            Layer::Dense(l) => Some(&l.params),
            Layer::Conv1d(l) => Some(&l.params),
            Layer::Conv2d(l) => Some(&l.params),
            Layer::Lstm(l) => Some(&l.params),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut LayerParams> {
        match self {
            Layer::Dense(l) => Some(&mut l.params),
            Layer::Conv1d(l) => Some(&mut l.params),
            Layer::Conv2d(l) => Some(&mut l.params),
            Layer::Lstm(l) => Some(&mut l.params),
            _ => None,
        }
    }

    pub fn forward(&mut self, input: &Tensor, training: bool, rng: &mut NnRng) -> Result<Tensor> {
        match self {
            Layer::Reshape(shape) => input.clone().reshape(shape.clone()),
            Layer::Flatten => input.clone().reshape(vec![input.len()]),
            Layer::Dense(l) => l.forward(input),
            Layer::Conv1d(l) => l.forward(input),
            Layer::Conv2d(l) => l.forward(input),
            Layer::MaxPool(l) => l.forward(input),
            Layer::Lstm(l) => l.forward(input),
            Layer::Dropout(l) => l.forward(input, training, rng),
        }
    }

    /// `input_shape` is the shape this layer saw on its last forward pass.
    fn backward(&mut self, grad: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
        match self {
            Layer::Reshape(_) | Layer::Flatten => grad.clone().reshape(input_shape.to_vec()),
            Layer::Dense(l) => l.backward(grad),
            Layer::Conv1d(l) => l.backward(grad),
            Layer::Conv2d(l) => l.backward(grad),
            Layer::MaxPool(l) => l.backward(grad),
            Layer::Lstm(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
        }
    }
}

/// Sequential stack of layers producing class logits.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    input_shapes: Option<Vec<Vec<usize>>>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self {
            layers,
            input_shapes: None,
        }
    }

    /// Runs every layer, caching intermediates for a following `backward`.
    pub fn forward(&mut self, input: &Tensor, training: bool, rng: &mut NnRng) -> Result<Tensor> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &mut self.layers {
            shapes.push(x.shape().to_vec());
            x = layer.forward(&x, training, rng)?;
        }
        self.input_shapes = Some(shapes);
        Ok(x)
    }

    /// Accumulates parameter gradients given d(loss)/d(output) and returns
    /// d(loss)/d(input).
    pub fn backward(&mut self, loss_gradient: &Tensor) -> Result<Tensor> {
        let shapes = self
            .input_shapes
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut g = loss_gradient.clone();
        for (layer, shape) in self.layers.iter_mut().zip(shapes).rev() {
            g = layer.backward(&g, shape)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.layers.iter_mut().filter_map(Layer::params_mut) {
            p.zero_grad();
        }
    }

    pub fn sgd_update(&mut self, learning_rate: f64) -> Result<()> {
        for p in self.layers.iter_mut().filter_map(Layer::params_mut) {
            p.sgd_update(learning_rate)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(LayerParams::param_count)
            .sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &LayerParams> {
        self.layers.iter().filter_map(Layer::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.layers.iter_mut().filter_map(Layer::params_mut)
    }

    /// Inference-mode logits; dropout is inactive so no generator is consumed.
    pub fn logits(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut rng = <NnRng as rand::SeedableRng>::seed_from_u64(0);
        self.forward(input, false, &mut rng)
    }

    /// Predicted class (lowest index on ties).
    pub fn predict(&mut self, input: &Tensor) -> Result<usize> {
        Ok(self.logits(input)?.argmax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax_cross_entropy, Activation};
    use rand::SeedableRng;

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let mut rng = NnRng::seed_from_u64(5);
        let mut net = Network::new(vec![
            Layer::Dense(Dense::init(4, 6, Activation::Relu, &mut rng)),
            Layer::Dense(Dense::init(6, 3, Activation::Identity, &mut rng)),
        ]);
        net.forward(&Tensor::from_vec(vec![0.1, -0.4, 2.0, 1.0]), true, &mut rng)
            .unwrap();
        net.backward(&Tensor::zeros(vec![3])).unwrap();
        assert!(net.params().all(|p| p
            .grad_weights
            .data()
            .iter()
            .chain(p.grad_biases.data())
            .all(|&g| g == 0.0)));
    }

    #[test]
    fn backward_before_forward() {
        let mut rng = NnRng::seed_from_u64(5);
        let mut net = Network::new(vec![Layer::Dense(Dense::init(
            2,
            2,
            Activation::Identity,
            &mut rng,
        ))]);
        assert!(matches!(
            net.backward(&Tensor::zeros(vec![2])),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn linear_least_squares_gradient_matches_normal_equations() {
        // For a linear layer y = X W + b and L = 0.5 * ||y - t||^2 the gradient is
        // X^T (X W + 1 b^T - T) and 1^T (X W + 1 b^T - T).
        let x = [[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let t = [[1.0], [0.0], [2.0]];
        let w = [[0.3], [-0.2]];
        let b = 0.1;
        let params = LayerParams::new(
            Tensor::new(vec![2, 1], vec![w[0][0], w[1][0]]).unwrap(),
            Tensor::from_vec(vec![b]),
        );
        let mut net = Network::new(vec![Layer::Dense(Dense::new(params, Activation::Identity))]);
        let mut rng = NnRng::seed_from_u64(0);
        let input = Tensor::new(vec![3, 2], x.iter().flatten().copied().collect()).unwrap();
        let y = net.forward(&input, true, &mut rng).unwrap();
        let resid: Vec<f64> = y
            .data()
            .iter()
            .zip(t.iter().flatten())
            .map(|(a, b)| a - b)
            .collect();
        net.backward(&Tensor::new(vec![3, 1], resid.clone()).unwrap())
            .unwrap();

        let mut gw = [0.0; 2];
        for (row, r) in x.iter().zip(&resid) {
            gw[0] += row[0] * r;
            gw[1] += row[1] * r;
        }
        let gb: f64 = resid.iter().sum();
        let p = net.params().next().unwrap();
        assert!((p.grad_weights.data()[0] - gw[0]).abs() < 1e-12);
        assert!((p.grad_weights.data()[1] - gw[1]).abs() < 1e-12);
        assert!((p.grad_biases.data()[0] - gb).abs() < 1e-12);
    }

    #[test]
    fn softmax_gradient_flows_through_network() {
        let mut rng = NnRng::seed_from_u64(11);
        let mut net = Network::new(vec![
            Layer::Reshape(vec![4, 1]),
            Layer::Conv1d(crate::nn::Conv1d::init(
                1,
                2,
                2,
                1,
                crate::nn::Padding::Valid,
                Activation::Relu,
                &mut rng,
            )),
            Layer::Flatten,
            Layer::Dense(Dense::init(6, 3, Activation::Identity, &mut rng)),
        ]);
        let logits = net
            .forward(
                &Tensor::new(vec![1, 4], vec![0.5, -1.0, 2.0, 0.3]).unwrap(),
                true,
                &mut rng,
            )
            .unwrap();
        let loss = softmax_cross_entropy(&logits, &[2]).unwrap();
        let gin = net.backward(&loss.gradient).unwrap();
        assert_eq!(gin.shape(), &[1, 4]);
    }
}
