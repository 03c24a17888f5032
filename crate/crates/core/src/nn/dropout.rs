use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate {rate} is outside [0, 1)"
        )));
    }
    Ok(())
}

fn sample_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

/// Inverted dropout: in training mode each unit is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`. Inference is identity.
pub fn dropout_apply<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let mask = sample_mask(input.len(), rate, rng);
    let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Dropout layer. With `frozen` set, the first sampled mask is reused by later
/// training passes, which makes the layer deterministic for gradient checks.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    pub frozen: bool,
    mask: Option<Vec<f64>>,
    forwarded: bool,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self {
            rate,
            frozen: false,
            mask: None,
            forwarded: false,
        })
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        self.forwarded = true;
        if !training || self.rate == 0.0 {
            if !self.frozen {
                self.mask = None;
            }
            if !training {
                return Ok(input.clone());
            }
        }
        let reuse = self.frozen && self.mask.as_ref().is_some_and(|m| m.len() == input.len());
        if !reuse {
            self.mask = Some(if self.rate == 0.0 {
                vec![1.0; input.len()]
            } else {
                sample_mask(input.len(), self.rate, rng)
            });
        }
        let mask = self.mask.as_ref().expect("mask set above");
        let data = input.data().iter().zip(mask).map(|(x, m)| x * m).collect();
        Tensor::new(input.shape().to_vec(), data)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        if !self.forwarded {
            return Err(Error::State(
                "dropout backward called before forward".into(),
            ));
        }
        match &self.mask {
            Some(mask) if mask.len() == grad_out.len() => {
                let data = grad_out
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(g, m)| g * m)
                    .collect();
                Tensor::new(grad_out.shape().to_vec(), data)
            }
            _ => Ok(grad_out.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.5]);
        assert_eq!(dropout_apply(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.0, false, &mut rng).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.7, false, &mut rng).unwrap(), x);
    }

    #[test]
    fn mask_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::filled(vec![1_000_000], 1.0);
        let out = dropout_apply(&x, 0.5, true, &mut rng).unwrap();
        let mean = out.data().iter().sum::<f64>() / out.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(vec![1.0]);
        assert!(matches!(
            dropout_apply(&x, 1.0, true, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(Dropout::new(1.0).is_err());
    }

    #[test]
    fn frozen_mask_is_reused() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Dropout::new(0.5).unwrap();
        d.frozen = true;
        let x = Tensor::filled(vec![64], 1.0);
        let a = d.forward(&x, true, &mut rng).unwrap();
        let b = d.forward(&x, true, &mut rng).unwrap();
        assert_eq!(a, b);
    }
}
