//! One-sided Welch two-sample t-test.

use serde::{Deserialize, Serialize};

use super::special::{student_t_cdf, student_t_sf};
use crate::error::{Error, Result};

/// Mean, sample (n - 1) standard deviation and size of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SampleSummary {
    pub fn new(mean: f64, std: f64, n: usize) -> Result<Self> {
        let s = Self { mean, std, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::DegenerateTest(format!(
                "sample size must be at least 2, got {}",
                self.n
            )));
        }
        if self.std.is_nan() || self.std < 0.0 || !self.mean.is_finite() {
            return Err(Error::DegenerateTest(format!(
                "invalid summary mean {} std {}",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::DegenerateTest(format!(
                "sample size must be at least 2, got {n}"
            )));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self::new(mean, var.sqrt(), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// P(T > t): evidence that the first mean exceeds the second.
    pub p_value: f64,
}

/// Tests H1: mean_a > mean_b without assuming equal variances.
pub fn welch_one_sided(a: &SampleSummary, b: &SampleSummary) -> Result<TTestResult> {
    a.validate()?;
    b.validate()?;
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(Error::DegenerateTest(
            "both samples have zero variance".into(),
        ));
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    Ok(TTestResult {
        t,
        df,
        p_value: student_t_sf(t, df),
    })
}

/// Pooled-variance two-sample t statistic and its degrees of freedom.
pub fn pooled_t(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let sa = SampleSummary::from_values(a)?;
    let sb = SampleSummary::from_values(b)?;
    let df = (sa.n + sb.n - 2) as f64;
    let sp2 = ((sa.n - 1) as f64 * sa.std.powi(2) + (sb.n - 1) as f64 * sb.std.powi(2)) / df;
    if sp2 <= 0.0 {
        return Err(Error::DegenerateTest(
            "both samples have zero variance".into(),
        ));
    }
    let t = (sa.mean - sb.mean) / (sp2 * (1.0 / sa.n as f64 + 1.0 / sb.n as f64)).sqrt();
    Ok((t, df))
}

/// Two-sided p-value for a t statistic.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    2.0 * student_t_cdf(-t.abs(), df)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(mean: f64, std: f64, n: usize) -> SampleSummary {
        SampleSummary::new(mean, std, n).unwrap()
    }

    #[test]
    fn identical_summaries() {
        let r = welch_one_sided(&s(0.8, 0.02, 15), &s(0.8, 0.02, 15)).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_value - 0.5).abs() < 1e-15);
        assert!((r.df - 28.0).abs() < 1e-12);
    }

    #[test]
    fn antisymmetry() {
        let (a, b) = (s(0.8359, 0.02, 15), s(0.7704, 0.1427, 7));
        let ab = welch_one_sided(&a, &b).unwrap();
        let ba = welch_one_sided(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert!((ab.p_value + ba.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            welch_one_sided(&s(1.0, 0.0, 3), &s(2.0, 0.0, 3)),
            Err(Error::DegenerateTest(_))
        ));
        assert!(SampleSummary::new(1.0, 0.1, 1).is_err());
    }

    #[test]
    fn one_zero_variance_side_is_fine() {
        // df collapses to n - 1 of the varying sample
        let r = welch_one_sided(&s(1.0, 0.0, 5), &s(0.0, 1.0, 9)).unwrap();
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_matches_hand_value() {
        // means 2 and 5, pooled variance 1, n 3 each: t = -3 / sqrt(2/3)
        let (t, df) = pooled_t(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((t + 3.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(df, 4.0);
    }
}
