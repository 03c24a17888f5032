use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean categorical cross-entropy of a batch and its softmax rows.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    /// One predicted distribution per example.
    pub probabilities: Vec<Vec<f64>>,
    /// `(p - onehot) / batch`, shaped like the logits.
    pub gradient: Tensor,
}

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax + cross-entropy over `(batch, classes)` logits (or a single
/// `(classes)` row).
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossValue> {
    let classes = logits.last_dim();
    let batch = logits.len() / classes;
    if labels.len() != batch {
        return Err(Error::Dimension(format!(
            "{} labels for {batch} logit rows",
            labels.len()
        )));
    }
    let mut value = 0.0;
    let mut probabilities = Vec::with_capacity(batch);
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        if label >= classes {
            return Err(Error::Label(format!(
                "label index {label} is out of range for {classes} classes"
            )));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        value += log_total - (row[label] - max);
        let p = softmax(row);
        for (k, &pk) in p.iter().enumerate() {
            let target = if k == label { 1.0 } else { 0.0 };
            grad.push((pk - target) / batch as f64);
        }
        probabilities.push(p);
    }
    Ok(LossValue {
        value: value / batch as f64,
        probabilities,
        gradient: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        for k in 2..9 {
            let l = softmax_cross_entropy(&Tensor::filled(vec![k], 0.3), &[k - 1]).unwrap();
            assert!((l.value - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_invariance() {
        let logits = Tensor::new(vec![2, 3], vec![0.1, 2.0, -1.0, 3.0, 0.0, 0.5]).unwrap();
        let shifted =
            Tensor::new(vec![2, 3], logits.data().iter().map(|v| v + 40.0).collect()).unwrap();
        let a = softmax_cross_entropy(&logits, &[1, 2]).unwrap();
        let b = softmax_cross_entropy(&shifted, &[1, 2]).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        for (ra, rb) in a.probabilities.iter().zip(&b.probabilities) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_two_class() {
        let l = softmax_cross_entropy(&Tensor::from_vec(vec![2.0, 0.0]), &[0]).unwrap();
        let expected = (1.0 + (-2.0_f64).exp()).ln();
        assert!((l.value - expected).abs() < 1e-15);
        assert!((l.value - 0.1269).abs() < 5e-5);
    }

    #[test]
    fn rows_sum_to_one_and_large_logits_stay_finite() {
        let l = softmax_cross_entropy(&Tensor::from_vec(vec![1000.0, -1000.0, 0.0]), &[1]).unwrap();
        assert!(l.value.is_finite());
        let s: f64 = l.probabilities[0].iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label_names_index() {
        let err = softmax_cross_entropy(&Tensor::from_vec(vec![0.0, 0.0]), &[5]).unwrap_err();
        assert!(matches!(err, Error::Label(ref m) if m.contains('5')));
    }
}
