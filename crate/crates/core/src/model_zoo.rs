//! Declarative constructors for the four network architectures compared by
//! the bench, with their published layer widths.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    Activation, Conv1d, Conv2d, Dense, Dropout, Layer, MaxPool, Network, NnRng, Padding,
};
use crate::tensor::Tensor;

/// Quarters consumed by the sequence models.
pub const SEQUENCE_WINDOW: usize = 4;
pub const MLP_HIDDEN_UNITS: usize = 41;
pub const MLP_HIDDEN_LAYERS: usize = 3;
pub const CONV_FILTERS: [usize; 2] = [64, 32];
pub const CONV_KERNEL: usize = 3;
pub const CONV_STRIDE: usize = 1;
pub const DENSE_HEAD: [usize; 2] = [128, 128];
pub const LSTM_UNITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Mlp,
    Cnn,
    Cnn2d,
    Lstm,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Mlp,
        Architecture::Cnn,
        Architecture::Cnn2d,
        Architecture::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
            Architecture::Cnn2d => "cnn2d",
            Architecture::Lstm => "lstm",
        }
    }

    /// Quarters of history the architecture reads per sample.
    pub fn window(self) -> usize {
        match self {
            Architecture::Mlp | Architecture::Cnn => 1,
            Architecture::Cnn2d | Architecture::Lstm => SEQUENCE_WINDOW,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlp" => Ok(Architecture::Mlp),
            "cnn" => Ok(Architecture::Cnn),
            "cnn2d" => Ok(Architecture::Cnn2d),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(Error::Config(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Architecture plus every width needed to build it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input_features: usize,
    pub window: usize,
    pub n_classes: usize,
    /// MLP hidden widths, or the dense head after the conv/LSTM stage.
    pub dense_units: Vec<usize>,
    #[serde(default)]
    pub conv_filters: Vec<usize>,
    #[serde(default)]
    pub kernel_size: usize,
    #[serde(default)]
    pub stride: usize,
    #[serde(default)]
    pub lstm_units: usize,
    /// Optional max-pool window inserted after each convolution.
    #[serde(default)]
    pub pool_window: Option<usize>,
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    Ok(())
}

pub fn make_mlp(
    input_features: usize,
    n_classes: usize,
    hidden_units: usize,
    hidden_layers: usize,
) -> Result<ModelSpec> {
    positive("hidden_units", hidden_units)?;
    positive("hidden_layers", hidden_layers)?;
    let spec = ModelSpec {
        architecture: Architecture::Mlp,
        input_features,
        window: 1,
        n_classes,
        dense_units: vec![hidden_units; hidden_layers],
        conv_filters: Vec::new(),
        kernel_size: 0,
        stride: 0,
        lstm_units: 0,
        pool_window: None,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn make_cnn(input_features: usize, n_classes: usize) -> Result<ModelSpec> {
    let spec = ModelSpec {
        architecture: Architecture::Cnn,
        input_features,
        window: 1,
        n_classes,
        dense_units: DENSE_HEAD.to_vec(),
        conv_filters: CONV_FILTERS.to_vec(),
        kernel_size: CONV_KERNEL,
        stride: CONV_STRIDE,
        lstm_units: 0,
        pool_window: None,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn make_cnn2d(input_features: usize, n_classes: usize) -> Result<ModelSpec> {
    let spec = ModelSpec {
        architecture: Architecture::Cnn2d,
        input_features,
        window: SEQUENCE_WINDOW,
        n_classes,
        dense_units: DENSE_HEAD.to_vec(),
        conv_filters: CONV_FILTERS.to_vec(),
        kernel_size: CONV_KERNEL,
        stride: CONV_STRIDE,
        lstm_units: 0,
        pool_window: None,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn make_lstm(input_features: usize, n_classes: usize) -> Result<ModelSpec> {
    let spec = ModelSpec {
        architecture: Architecture::Lstm,
        input_features,
        window: SEQUENCE_WINDOW,
        n_classes,
        dense_units: DENSE_HEAD.to_vec(),
        conv_filters: Vec::new(),
        kernel_size: 0,
        stride: 0,
        lstm_units: LSTM_UNITS,
        pool_window: None,
    };
    spec.validate()?;
    Ok(spec)
}

/// Default spec for an architecture with its published widths.
pub fn make_default(
    architecture: Architecture,
    input_features: usize,
    n_classes: usize,
) -> Result<ModelSpec> {
    match architecture {
        Architecture::Mlp => make_mlp(
            input_features,
            n_classes,
            MLP_HIDDEN_UNITS,
            MLP_HIDDEN_LAYERS,
        ),
        Architecture::Cnn => make_cnn(input_features, n_classes),
        Architecture::Cnn2d => make_cnn2d(input_features, n_classes),
        Architecture::Lstm => make_lstm(input_features, n_classes),
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        positive("input_features", self.input_features)?;
        positive("n_classes", self.n_classes)?;
        if self.window != self.architecture.window() {
            return Err(Error::Config(format!(
                "{} consumes {} quarter(s), spec declares window {}",
                self.architecture,
                self.architecture.window(),
                self.window
            )));
        }
        if self.dense_units.contains(&0) {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        match self.architecture {
            Architecture::Mlp => {
                if self.dense_units.is_empty() {
                    return Err(Error::Config("MLP needs at least one hidden layer".into()));
                }
            }
            Architecture::Cnn | Architecture::Cnn2d => {
                if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
                    return Err(Error::Config(
                        "convolution filter counts must be positive".into(),
                    ));
                }
                positive("kernel_size", self.kernel_size)?;
                positive("stride", self.stride)?;
                self.conv_output_extents()?;
            }
            Architecture::Lstm => positive("lstm_units", self.lstm_units)?,
        }
        Ok(())
    }

    /// Shape of one input sample: `(window, features)`.
    pub fn input_shape(&self) -> [usize; 2] {
        [self.window, self.input_features]
    }

    /// `(rows, cols)` after each convolution (and optional pooling) stage;
    /// rows is 1 for the 1-D CNN.
    pub fn conv_output_extents(&self) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        match self.architecture {
            Architecture::Cnn => {
                let mut len = self.input_features;
                for _ in &self.conv_filters {
                    if self.kernel_size > len {
                        return Err(Error::Dimension(format!(
                            "input of {} features is too short for {} valid convolutions of size {}",
                            self.input_features,
                            self.conv_filters.len(),
                            self.kernel_size
                        )));
                    }
                    len = (len - self.kernel_size) / self.stride + 1;
                    if let Some(w) = self.pool_window {
                        if w > len {
                            return Err(Error::Dimension(format!(
                                "pool window {w} exceeds length {len}"
                            )));
                        }
                        len = (len - w) / w + 1;
                    }
                    out.push((1, len));
                }
            }
            Architecture::Cnn2d => {
                if self.input_features < self.kernel_size {
                    return Err(Error::Dimension(format!(
                        "CNN2D needs at least {} features, got {}",
                        self.kernel_size, self.input_features
                    )));
                }
                let (mut r, mut c) = (self.window, self.input_features);
                for _ in &self.conv_filters {
                    r = r.div_ceil(self.stride);
                    c = c.div_ceil(self.stride);
                    if let Some(w) = self.pool_window {
                        if w > r || w > c {
                            return Err(Error::Dimension(format!(
                                "pool window {w} exceeds extent {r}x{c}"
                            )));
                        }
                        r = (r - w) / w + 1;
                        c = (c - w) / w + 1;
                    }
                    out.push((r, c));
                }
            }
            _ => {}
        }
        Ok(out)
    }

    /// Width of the vector entering the dense head.
    pub fn flatten_width(&self) -> Result<usize> {
        Ok(match self.architecture {
            Architecture::Mlp => self.window * self.input_features,
            Architecture::Cnn | Architecture::Cnn2d => {
                let (r, c) = *self
                    .conv_output_extents()?
                    .last()
                    .expect("validated non-empty");
                r * c * self.conv_filters.last().expect("validated non-empty")
            }
            Architecture::Lstm => self.lstm_units,
        })
    }

    /// Closed-form trainable-parameter count.
    pub fn param_count(&self) -> Result<usize> {
        let dense =
            |widths: &[usize]| -> usize { widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum() };
        let mut head = vec![self.flatten_width()?];
        head.extend(&self.dense_units);
        head.push(self.n_classes);
        let trunk = match self.architecture {
            Architecture::Mlp => 0,
            Architecture::Cnn | Architecture::Cnn2d => {
                let k = match self.architecture {
                    Architecture::Cnn => self.kernel_size,
                    _ => self.kernel_size * self.kernel_size,
                };
                let mut channels = 1;
                let mut total = 0;
                for &f in &self.conv_filters {
                    total += f * k * channels + f;
                    channels = f;
                }
                total
            }
            Architecture::Lstm => {
                4 * (self.lstm_units * (self.input_features + self.lstm_units) + self.lstm_units)
            }
        };
        Ok(trunk + dense(&head))
    }

    pub fn describe(&self) -> String {
        match self.architecture {
            Architecture::Mlp => format!(
                "mlp {}x{}",
                self.dense_units.first().copied().unwrap_or(0),
                self.dense_units.len()
            ),
            Architecture::Cnn | Architecture::Cnn2d => format!(
                "{} filters={:?} k={} dense={:?}",
                self.architecture, self.conv_filters, self.kernel_size, self.dense_units
            ),
            Architecture::Lstm => format!(
                "lstm units={} dense={:?}",
                self.lstm_units, self.dense_units
            ),
        }
    }

    /// Instantiates the network with freshly initialized parameters. Dropout
    /// follows every hidden fully connected layer when `dropout_rate > 0`.
    pub fn build(&self, dropout_rate: f64, rng: &mut NnRng) -> Result<Network> {
        self.validate()?;
        let mut layers = Vec::new();
        match self.architecture {
            Architecture::Mlp => {
                layers.push(Layer::Reshape(vec![self.window * self.input_features]))
            }
            Architecture::Cnn => {
                layers.push(Layer::Reshape(vec![self.input_features, 1]));
                let mut channels = 1;
                for &f in &self.conv_filters {
                    layers.push(Layer::Conv1d(Conv1d::init(
                        channels,
                        f,
                        self.kernel_size,
                        self.stride,
                        Padding::Valid,
                        Activation::Relu,
                        rng,
                    )));
                    if let Some(w) = self.pool_window {
                        layers.push(Layer::MaxPool(MaxPool::new(w, w)));
                    }
                    channels = f;
                }
                layers.push(Layer::Flatten);
            }
            Architecture::Cnn2d => {
                layers.push(Layer::Reshape(vec![self.window, self.input_features, 1]));
                let mut channels = 1;
                for &f in &self.conv_filters {
                    layers.push(Layer::Conv2d(Conv2d::init(
                        channels,
                        f,
                        self.kernel_size,
                        self.stride,
                        Padding::Same,
                        Activation::Relu,
                        rng,
                    )));
                    if let Some(w) = self.pool_window {
                        layers.push(Layer::MaxPool(MaxPool::new(w, w)));
                    }
                    channels = f;
                }
                layers.push(Layer::Flatten);
            }
            Architecture::Lstm => {
                layers.push(Layer::Reshape(vec![self.window, self.input_features]));
                layers.push(Layer::Lstm(crate::nn::Lstm::init(
                    self.input_features,
                    self.lstm_units,
                    rng,
                )));
            }
        }
        let mut width = self.flatten_width()?;
        for &units in &self.dense_units {
            layers.push(Layer::Dense(Dense::init(
                width,
                units,
                Activation::Relu,
                rng,
            )));
            if dropout_rate > 0.0 {
                layers.push(Layer::Dropout(Dropout::new(dropout_rate)?));
            }
            width = units;
        }
        layers.push(Layer::Dense(Dense::init(
            width,
            self.n_classes,
            Activation::Identity,
            rng,
        )));
        Ok(Network::new(layers))
    }

    /// Pushes a zero sample through a freshly built network and checks that
    /// `n_classes` logits come out.
    pub fn dry_run(&self) -> Result<Tensor> {
        let mut rng = <NnRng as rand::SeedableRng>::seed_from_u64(0);
        let mut net = self.build(0.0, &mut rng)?;
        let out = net.logits(&Tensor::zeros(self.input_shape().to_vec()))?;
        if out.shape() != [self.n_classes] {
            return Err(Error::Dimension(format!(
                "dry run produced {:?}, expected [{}]",
                out.shape(),
                self.n_classes
            )));
        }
        if net.param_count() != self.param_count()? {
            return Err(Error::Dimension(format!(
                "built network has {} parameters, closed form says {}",
                net.param_count(),
                self.param_count()?
            )));
        }
        Ok(out)
    }
}

/// A network together with the spec it was built from.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub network: Network,
}

impl TrainedModel {
    pub fn predict(&mut self, input: &Tensor) -> Result<usize> {
        self.network.predict(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_widths_and_counts() {
        let s = make_mlp(332, 7, 41, 3).unwrap();
        assert_eq!(s.dense_units, vec![41, 41, 41]);
        assert_eq!(s.input_features, 332);
        let s = make_mlp(20, 7, 41, 3).unwrap();
        assert_eq!(s.input_features, 20);
        let tiny = make_mlp(2, 2, 1, 1).unwrap();
        assert_eq!(tiny.param_count().unwrap(), 7);
        tiny.dry_run().unwrap();
    }

    #[test]
    fn mlp_rejects_zero_sizes() {
        assert!(matches!(make_mlp(4, 2, 0, 3), Err(Error::Config(_))));
        assert!(matches!(make_mlp(4, 2, 3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn cnn_lengths() {
        let s = make_cnn(332, 5).unwrap();
        assert_eq!(s.conv_output_extents().unwrap(), vec![(1, 330), (1, 328)]);
        assert_eq!(s.flatten_width().unwrap(), 10496);
        assert_eq!(s.conv_filters, vec![64, 32]);
        let s = make_cnn(5, 2).unwrap();
        assert_eq!(s.conv_output_extents().unwrap(), vec![(1, 3), (1, 1)]);
        s.dry_run().unwrap();
        assert!(matches!(make_cnn(4, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn cnn2d_geometry() {
        let s = make_cnn2d(332, 5).unwrap();
        assert_eq!(s.flatten_width().unwrap(), 42496);
        assert_eq!(s.window, 4);
        assert_eq!(s.kernel_size, 3);
        assert!(make_cnn2d(2, 2).is_err());
        make_cnn2d(3, 2).unwrap().dry_run().unwrap();
    }

    #[test]
    fn lstm_counts() {
        let s = make_lstm(10, 3).unwrap();
        assert_eq!(s.lstm_units, 32);
        assert_eq!(s.dense_units, vec![128, 128]);
        let gate = 4 * (32 * (10 + 32) + 32);
        let head = 32 * 128 + 128 + 128 * 128 + 128 + 128 * 3 + 3;
        assert_eq!(s.param_count().unwrap(), gate + head);
        s.dry_run().unwrap();
    }

    #[test]
    fn window_invariant_enforced() {
        let mut s = make_lstm(10, 3).unwrap();
        s.window = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn architecture_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        }
        assert!("cnnlstm".parse::<Architecture>().is_err());
    }
}
