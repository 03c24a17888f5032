//! Train/test allocation: seeded random percentage splits and
//! leave-one-year-out temporal splits over windowed samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitPlan {
    Random { test_fraction: f64, seed: u64 },
    LeaveOneYearOut { year: i32 },
}

/// Disjoint, exhaustive, both sides non-empty; indices ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitResult {
    fn checked(train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::Split(format!(
                "degenerate split: {} train / {} test samples",
                train.len(),
                test.len()
            )));
        }
        Ok(Self { train, test })
    }
}

/// Uniformly permutes the sample indices with `seed` and sends the first
/// `round(n * test_fraction)` to the test side.
pub fn random_split(n_samples: usize, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction {test_fraction} is outside (0, 1)"
        )));
    }
    if n_samples < 2 {
        return Err(Error::Split(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_samples).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (n_samples as f64 * test_fraction).round() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    SplitResult::checked(train, test)
}

/// Test side = samples whose target quarter falls in `year`.
pub fn leave_one_year_out(target_years: &[i32], year: i32) -> Result<SplitResult> {
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..target_years.len()).partition(|&i| target_years[i] == year);
    if test.is_empty() {
        let mut years = target_years.to_vec();
        years.sort_unstable();
        years.dedup();
        return Err(Error::Split(format!(
            "year {year} is not among the sample years {years:?}"
        )));
    }
    SplitResult::checked(train, test)
}

/// One leave-one-year-out split per distinct target year, ascending.
pub fn year_sweep(target_years: &[i32]) -> Result<Vec<(i32, SplitResult)>> {
    let mut years = target_years.to_vec();
    years.sort_unstable();
    years.dedup();
    if years.len() < 2 {
        return Err(Error::Split(format!(
            "a year sweep needs at least 2 distinct years, got {years:?}"
        )));
    }
    years
        .into_iter()
        .map(|y| leave_one_year_out(target_years, y).map(|s| (y, s)))
        .collect()
}

impl SplitPlan {
    pub fn apply(&self, target_years: &[i32]) -> Result<SplitResult> {
        match *self {
            SplitPlan::Random {
                test_fraction,
                seed,
            } => random_split(target_years.len(), test_fraction, seed),
            SplitPlan::LeaveOneYearOut { year } => leave_one_year_out(target_years, year),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn random_split_sizes() {
        assert_eq!(random_split(100, 0.15, 1).unwrap().test.len(), 15);
        assert_eq!(random_split(100, 0.06, 1).unwrap().test.len(), 6);
    }

    #[test]
    fn random_split_is_seeded() {
        assert_eq!(
            random_split(50, 0.2, 9).unwrap(),
            random_split(50, 0.2, 9).unwrap()
        );
        assert_ne!(
            random_split(50, 0.2, 9).unwrap(),
            random_split(50, 0.2, 10).unwrap()
        );
    }

    #[test]
    fn random_split_degenerate() {
        assert!(matches!(random_split(1, 0.5, 0), Err(Error::Split(_))));
        assert!(matches!(random_split(10, 0.01, 0), Err(Error::Split(_))));
        assert!(matches!(random_split(10, 1.0, 0), Err(Error::Split(_))));
    }

    #[test]
    fn random_split_marginal_frequency() {
        let mut hits = [0usize; 20];
        for seed in 0..10_000 {
            for i in random_split(20, 0.25, seed).unwrap().test {
                hits[i] += 1;
            }
        }
        for h in hits {
            let f = h as f64 / 10_000.0;
            assert!((f - 0.25).abs() <= 0.02, "{f}");
        }
    }

    #[test]
    fn hold_out_2014() {
        let years: Vec<i32> = (2010..=2016).flat_map(|y| [y; 4]).collect();
        let s = leave_one_year_out(&years, 2014).unwrap();
        let mut train_years: Vec<i32> = s.train.iter().map(|&i| years[i]).collect();
        train_years.dedup();
        assert_eq!(train_years, vec![2010, 2011, 2012, 2013, 2015, 2016]);
        assert!(s.test.iter().all(|&i| years[i] == 2014));
    }

    #[test]
    fn absent_and_single_year() {
        let err = leave_one_year_out(&[2010, 2011], 2009).unwrap_err();
        assert!(err.to_string().contains("2010"));
        assert!(matches!(
            leave_one_year_out(&[2010, 2010], 2010),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn sweep_counts() {
        let energy: Vec<i32> = (2010..=2016).collect();
        assert_eq!(year_sweep(&energy).unwrap().len(), 7);
        let fin: Vec<i32> = (2000..=2016).collect();
        let s = year_sweep(&fin).unwrap();
        assert_eq!(s.len(), 17);
        assert!(s.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(year_sweep(&[2000, 2001]).unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn splits_partition_the_samples(years in prop::collection::vec(2000i32..2005, 2..60), seed: u64, frac in 0.05f64..0.95) {
            let n = years.len();
            let check = |s: &SplitResult| {
                let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
                all.sort_unstable();
                all == (0..n).collect::<Vec<_>>()
            };
            if let Ok(s) = random_split(n, frac, seed) {
                prop_assert!(check(&s));
            }
            if let Ok(sweep) = year_sweep(&years) {
                for (y, s) in sweep {
                    prop_assert!(check(&s));
                    prop_assert!(s.train.iter().all(|&i| years[i] != y));
                }
            }
        }
    }
}
