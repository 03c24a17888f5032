//! Synthetic sector panels with AR(1) latent credit quality and shared
//! sector-year shocks.
//!
//! For company `c` and quarter `t`:
//!
//! ```text
//! s[c,t] = rho * s[c,t-1] + shock[year(t)] + eps[c,t]
//! ```
//!
//! Ratings are equal-frequency bins of `s` over the whole panel (highest `s`
//! gets the best rating). Informative feature columns are `loading_j * s`
//! plus noise; the rest are noise. Each cell is independently missing with
//! probability `missing_rate`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_panel::{feature_column_name, Panel, PanelRecord, RATING_SCALE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub sector: String,
    pub n_companies: usize,
    pub first_year: i32,
    pub last_year: i32,
    #[serde(default = "default_features")]
    pub n_features: usize,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    pub ar_coefficient: f64,
    pub year_shock_sd: f64,
    pub idiosyncratic_sd: f64,
    pub feature_noise_sd: f64,
    pub informative_fraction: f64,
    pub missing_rate: f64,
    pub rng_seed: u64,
}

fn default_features() -> usize {
    332
}

fn default_classes() -> usize {
    8
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_companies == 0 {
            return bad("n_companies must be positive".into());
        }
        if self.first_year > self.last_year {
            return bad(format!(
                "year range {}..={} is empty",
                self.first_year, self.last_year
            ));
        }
        if self.n_features == 0 {
            return bad("n_features must be positive".into());
        }
        if !(1..=RATING_SCALE.len()).contains(&self.n_classes) {
            return bad(format!(
                "n_classes must be in 1..={}, got {}",
                RATING_SCALE.len(),
                self.n_classes
            ));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return bad(format!(
                "ar_coefficient must be in [0, 1), got {}",
                self.ar_coefficient
            ));
        }
        if !(self.year_shock_sd >= 0.0 && self.year_shock_sd.is_finite()) {
            return bad(format!(
                "year_shock_sd must be >= 0, got {}",
                self.year_shock_sd
            ));
        }
        if !(self.idiosyncratic_sd > 0.0 && self.idiosyncratic_sd.is_finite()) {
            return bad(format!(
                "idiosyncratic_sd must be > 0, got {}",
                self.idiosyncratic_sd
            ));
        }
        if !(self.feature_noise_sd > 0.0 && self.feature_noise_sd.is_finite()) {
            return bad(format!(
                "feature_noise_sd must be > 0, got {}",
                self.feature_noise_sd
            ));
        }
        if !(self.informative_fraction > 0.0 && self.informative_fraction <= 1.0) {
            return bad(format!(
                "informative_fraction must be in (0, 1], got {}",
                self.informative_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!(
                "missing_rate must be in [0, 1), got {}",
                self.missing_rate
            ));
        }
        Ok(())
    }

    pub fn n_years(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }

    pub fn n_records(&self) -> usize {
        self.n_companies * self.n_years() * 4
    }

    pub fn n_informative(&self) -> usize {
        ((self.n_features as f64 * self.informative_fraction).round() as usize)
            .clamp(1, self.n_features)
    }
}

fn preset(sector: &str, n_companies: usize, first_year: i32, seed: u64) -> SynthConfig {
    SynthConfig {
        sector: sector.into(),
        n_companies,
        first_year,
        last_year: 2016,
        n_features: 332,
        n_classes: 8,
        ar_coefficient: 0.9,
        year_shock_sd: 0.5,
        idiosyncratic_sd: 0.5,
        feature_noise_sd: 2.0,
        informative_fraction: 0.25,
        missing_rate: 0.1,
        rng_seed: seed,
    }
}

/// Energy (30 companies, 2010-2016), financial (66, 2000-2016) and
/// healthcare (59, 2000-2016), each with 332 features.
pub fn paper_regime_presets() -> [SynthConfig; 3] {
    [
        preset("energy", 30, 2010, 1),
        preset("financial", 66, 2000, 2),
        preset("healthcare", 59, 2000, 3),
    ]
}

pub fn preset_by_name(sector: &str) -> Result<SynthConfig> {
    paper_regime_presets()
        .into_iter()
        .find(|c| c.sector == sector)
        .ok_or_else(|| {
            Error::Config(format!(
                "no preset named '{sector}' (energy, financial, healthcare)"
            ))
        })
}

/// Rating symbol of ordinal class `k` out of `n` (0 = best), spread evenly
/// over the S&P scale.
pub fn class_symbol(k: usize, n: usize) -> &'static str {
    if n <= 1 {
        return RATING_SCALE[0];
    }
    let last = RATING_SCALE.len() - 1;
    RATING_SCALE[((k * last) as f64 / (n - 1) as f64).round() as usize]
}

/// Ground truth behind a generated panel, aligned with the panel's records.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub scores: Vec<f64>,
    pub classes: Vec<usize>,
    pub year_shocks: BTreeMap<i32, f64>,
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub panel: Panel,
    pub latent: LatentState,
}

impl SynthPanel {
    pub fn write_latent_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "company_id",
            "year",
            "quarter",
            "latent",
            "class",
            "year_shock",
        ])?;
        for ((r, s), k) in self
            .panel
            .records()
            .iter()
            .zip(&self.latent.scores)
            .zip(&self.latent.classes)
        {
            w.write_record([
                r.company_id.clone(),
                r.year.to_string(),
                r.quarter.to_string(),
                s.to_string(),
                k.to_string(),
                self.latent.year_shocks[&r.year].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, panel_path: impl AsRef<Path>, latent_path: impl AsRef<Path>) -> Result<()> {
        self.panel.save(panel_path)?;
        let file = std::fs::File::create(latent_path)?;
        self.write_latent_csv(std::io::BufWriter::new(file))
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

pub fn generate(config: &SynthConfig) -> Result<SynthPanel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let unit = normal(1.0);

    let year_shocks: BTreeMap<i32, f64> = (config.first_year..=config.last_year)
        .map(|y| (y, config.year_shock_sd * unit.sample(&mut rng)))
        .collect();
    let n_inf = config.n_informative();
    let loadings: Vec<f64> = (0..n_inf)
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * rng.random_range(0.5..1.5)
        })
        .collect();

    let rho = config.ar_coefficient;
    let stationary_sd = config.idiosyncratic_sd / (1.0 - rho * rho).sqrt();
    let eps = normal(config.idiosyncratic_sd);
    let noise = normal(config.feature_noise_sd);

    let width = (config.n_companies as f64).log10().floor() as usize + 1;
    let mut records = Vec::with_capacity(config.n_records());
    let mut scores = Vec::with_capacity(config.n_records());
    for c in 0..config.n_companies {
        let company_id = format!("{}{:0width$}", config.sector, c + 1, width = width.max(3));
        let mut s = stationary_sd * unit.sample(&mut rng);
        for year in config.first_year..=config.last_year {
            for quarter in 1..=4u8 {
                s = rho * s + year_shocks[&year] + eps.sample(&mut rng);
                let features = (0..config.n_features)
                    .map(|j| {
                        let signal = loadings.get(j).map_or(0.0, |l| l * s);
                        let value = signal + noise.sample(&mut rng);
                        let missing =
                            config.missing_rate > 0.0 && rng.random::<f64>() < config.missing_rate;
                        (!missing).then_some(value)
                    })
                    .collect();
                records.push(PanelRecord {
                    company_id: company_id.clone(),
                    sector: config.sector.clone(),
                    year,
                    quarter,
                    rating: String::new(),
                    features,
                });
                scores.push(s);
            }
        }
    }

    // equal-frequency bins, best class for the highest scores
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let k = config.n_classes;
    let mut classes = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        classes[i] = k - 1 - rank * k / n;
    }
    for (r, &cls) in records.iter_mut().zip(&classes) {
        r.rating = class_symbol(cls, k).to_string();
    }

    let names = (0..config.n_features).map(feature_column_name).collect();
    // records are generated in (company, year, quarter) order, so sorting keeps alignment
    let panel = Panel::new(records, names, config.sector.clone())?;
    Ok(SynthPanel {
        panel,
        latent: LatentState {
            scores,
            classes,
            year_shocks,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_features: 12,
            n_companies: 10,
            first_year: 2014,
            last_year: 2016,
            rng_seed: seed,
            ..preset("energy", 30, 2010, 0)
        }
    }

    #[test]
    fn preset_record_counts() {
        let [e, f, h] = paper_regime_presets();
        assert_eq!(e.n_records(), 840);
        assert_eq!(f.n_records(), 4488);
        assert_eq!(h.n_records(), 4012);
        assert!(e.validate().is_ok() && f.validate().is_ok() && h.validate().is_ok());
        assert_eq!(generate(&e).unwrap().panel.len(), 840);
    }

    #[test]
    fn invalid_bounds_are_config_errors() {
        let base = small(0);
        for bad in [
            SynthConfig {
                ar_coefficient: 1.0,
                ..base.clone()
            },
            SynthConfig {
                idiosyncratic_sd: 0.0,
                ..base.clone()
            },
            SynthConfig {
                missing_rate: 1.0,
                ..base.clone()
            },
            SynthConfig {
                informative_fraction: 0.0,
                ..base.clone()
            },
            SynthConfig {
                first_year: 2017,
                ..base.clone()
            },
            SynthConfig {
                n_classes: 23,
                ..base.clone()
            },
        ] {
            assert!(matches!(generate(&bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn no_missing_cells_at_zero_rate() {
        let cfg = SynthConfig {
            missing_rate: 0.0,
            ..small(4)
        };
        let p = generate(&cfg).unwrap().panel;
        assert!(p
            .records()
            .iter()
            .all(|r| r.features.iter().all(Option::is_some)));
    }

    #[test]
    fn class_counts_balanced() {
        let out = generate(&small(5)).unwrap();
        let mut counts = vec![0usize; 8];
        for &c in &out.latent.classes {
            counts[c] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn best_class_has_highest_scores() {
        let out = generate(&small(6)).unwrap();
        let best_min = out
            .latent
            .scores
            .iter()
            .zip(&out.latent.classes)
            .filter(|(_, &c)| c == 0)
            .map(|(s, _)| *s)
            .fold(f64::INFINITY, f64::min);
        let rest_max = out
            .latent
            .scores
            .iter()
            .zip(&out.latent.classes)
            .filter(|(_, &c)| c != 0)
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best_min >= rest_max);
        assert_eq!(
            out.panel.records()[0].rating,
            class_symbol(out.latent.classes[0], 8)
        );
    }

    #[test]
    fn same_seed_same_panel() {
        let a = generate(&small(8)).unwrap();
        let b = generate(&small(8)).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.panel.write_csv(&mut ba).unwrap();
        b.panel.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(generate(&small(9)).unwrap().panel, a.panel);
    }

    #[test]
    fn class_symbols_are_ordered() {
        let syms: Vec<_> = (0..8).map(|k| class_symbol(k, 8)).collect();
        assert_eq!(syms, ["AAA", "AA-", "A-", "BBB-", "BB-", "B-", "CCC-", "D"]);
    }
}
