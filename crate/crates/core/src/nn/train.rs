use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{softmax_cross_entropy, Network, NnRng};
use crate::error::{Error, Result};
use crate::model_zoo::{ModelSpec, TrainedModel};
use crate::tensor::Tensor;

/// One labelled input sample.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: Tensor,
    pub label: usize,
}

/// Stochastic-gradient training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Zero returns the freshly initialized network.
    pub max_epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub early_stop_patience: usize,
    /// Fraction of the training data carved out to monitor early stopping.
    pub early_stop_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_epochs: 100,
            batch_size: 32,
            dropout_rate: 0.5,
            early_stop_patience: 10,
            early_stop_fraction: 0.1,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.early_stop_fraction > 0.0 && self.early_stop_fraction < 1.0) {
            return Err(Error::Config(format!(
                "early_stop_fraction must be in (0, 1), got {}",
                self.early_stop_fraction
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub monitor_loss: f64,
    pub monitor_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned; `None` when untrained.
    pub best_epoch: Option<usize>,
    pub fit_size: usize,
    pub monitor_size: usize,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Splits `0..n` into (fit, monitor) index sets; the monitor set holds
/// `round(n * fraction)` indices, at least one when `n >= 2`, and never all.
fn carve_monitor(n: usize, fraction: f64, rng: &mut NnRng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut m = (n as f64 * fraction).round() as usize;
    if n >= 2 {
        m = m.clamp(1, n - 1);
    } else {
        m = 0;
    }
    let monitor = idx.split_off(n - m);
    (idx, monitor)
}

fn mean_loss_and_accuracy(
    net: &mut Network,
    data: &[Example],
    idx: &[usize],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for &i in idx {
        let logits = net.logits(&data[i].input)?;
        if logits.argmax() == data[i].label {
            correct += 1;
        }
        loss += softmax_cross_entropy(&logits, &[data[i].label])?.value;
    }
    let n = idx.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_data(spec: &ModelSpec, data: &[Example]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("training data is empty".into()));
    }
    let shape = spec.input_shape();
    for (i, ex) in data.iter().enumerate() {
        if ex.label >= spec.n_classes {
            return Err(Error::Label(format!(
                "example {i} has label {} but the model has {} classes",
                ex.label, spec.n_classes
            )));
        }
        if ex.input.shape() != shape {
            return Err(Error::Dimension(format!(
                "example {i} has shape {:?}, model expects {:?}",
                ex.input.shape(),
                shape
            )));
        }
    }
    Ok(())
}

/// Mini-batch SGD with dropout and early stopping on a monitor split carved
/// from `data`. Returns the parameters from the best monitor epoch.
pub fn train(
    spec: &ModelSpec,
    data: &[Example],
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    config.validate()?;
    spec.validate()?;
    check_data(spec, data)?;

    let mut rng = NnRng::seed_from_u64(config.rng_seed);
    let (mut fit, monitor) = carve_monitor(data.len(), config.early_stop_fraction, &mut rng);
    let mut network = spec.build(config.dropout_rate, &mut rng)?;
    let mut history = TrainHistory {
        fit_size: fit.len(),
        monitor_size: monitor.len(),
        ..TrainHistory::default()
    };

    let mut best: Option<(f64, Network)> = None;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        fit.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in fit.chunks(config.batch_size) {
            network.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let logits = network.forward(&data[i].input, true, &mut rng)?;
                let loss = softmax_cross_entropy(&logits, &[data[i].label])?;
                epoch_loss += loss.value;
                let mut grad = loss.gradient;
                grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                network.backward(&grad)?;
            }
            network.sgd_update(config.learning_rate)?;
        }
        let train_loss = epoch_loss / fit.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric {
                epoch,
                message: format!("training loss became {train_loss}"),
            });
        }
        let (monitor_loss, monitor_accuracy) = if monitor.is_empty() {
            let (l, a) = mean_loss_and_accuracy(&mut network, data, &fit)?;
            (l, a)
        } else {
            mean_loss_and_accuracy(&mut network, data, &monitor)?
        };
        if !monitor_loss.is_finite() {
            return Err(Error::Numeric {
                epoch,
                message: format!("monitor loss became {monitor_loss}"),
            });
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            monitor_loss,
            monitor_accuracy,
        });

        let improved = best.as_ref().is_none_or(|(l, _)| monitor_loss < *l);
        if improved {
            best = Some((monitor_loss, network.clone()));
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale > config.early_stop_patience {
                break;
            }
        }
    }

    let network = best.map(|(_, n)| n).unwrap_or(network);
    Ok((
        TrainedModel {
            spec: spec.clone(),
            network,
        },
        history,
    ))
}

/// Score row of one grid-search candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub label: String,
    pub monitor_accuracy: f64,
    pub train_accuracy: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct GridSearchReport {
    pub best_index: usize,
    pub best_spec: ModelSpec,
    pub rows: Vec<GridRow>,
}

/// Trains every candidate with the same seed (hence the same monitor split)
/// and keeps the one with the highest monitor accuracy; ties go to the
/// earliest candidate.
pub fn grid_search(
    candidates: &[ModelSpec],
    data: &[Example],
    config: &TrainConfig,
) -> Result<GridSearchReport> {
    if candidates.is_empty() {
        return Err(Error::Config(
            "grid search needs at least one candidate".into(),
        ));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    let mut best_index = 0;
    for (ci, spec) in candidates.iter().enumerate() {
        let (mut model, history) = train(spec, data, config)?;
        let mut rng = NnRng::seed_from_u64(config.rng_seed);
        let (fit, monitor) = carve_monitor(data.len(), config.early_stop_fraction, &mut rng);
        let (_, train_accuracy) = mean_loss_and_accuracy(&mut model.network, data, &fit)?;
        let monitor_accuracy = if monitor.is_empty() {
            train_accuracy
        } else {
            mean_loss_and_accuracy(&mut model.network, data, &monitor)?.1
        };
        if monitor_accuracy
            > rows
                .get(best_index)
                .map_or(f64::NEG_INFINITY, |r: &GridRow| r.monitor_accuracy)
        {
            best_index = ci;
        }
        rows.push(GridRow {
            label: spec.describe(),
            monitor_accuracy,
            train_accuracy,
            epochs_run: history.epochs_run(),
        });
    }
    Ok(GridSearchReport {
        best_index,
        best_spec: candidates[best_index].clone(),
        rows,
    })
}
