//! TOML experiment configs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use creditnn::experiments::CaseSpec;
use creditnn::synthgen::{preset_by_name, SynthConfig};
use serde::Deserialize;

/// A sector preset with optional field overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub preset: String,
    pub n_companies: Option<usize>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub n_features: Option<usize>,
    pub n_classes: Option<usize>,
    pub ar_coefficient: Option<f64>,
    pub year_shock_sd: Option<f64>,
    pub idiosyncratic_sd: Option<f64>,
    pub feature_noise_sd: Option<f64>,
    pub informative_fraction: Option<f64>,
    pub missing_rate: Option<f64>,
    pub rng_seed: Option<u64>,
}

impl SynthSection {
    pub fn resolve(&self) -> Result<SynthConfig> {
        let mut c = preset_by_name(&self.preset).context("synth.preset")?;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            n_companies,
            first_year,
            last_year,
            n_features,
            n_classes,
            ar_coefficient,
            year_shock_sd,
            idiosyncratic_sd,
            feature_noise_sd,
            informative_fraction,
            missing_rate,
            rng_seed
        );
        c.validate().context("synth")?;
        Ok(c)
    }
}

/// Reads a `synth` config: a full generator config, or a `preset` key plus overrides.
pub fn read_synth_file(path: &Path) -> Result<SynthConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let config = if table.contains_key("preset") {
        let section: SynthSection =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        section.resolve()?
    } else {
        let config: SynthConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        config
    };
    Ok(config)
}

/// Input for `run`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Panel CSV; relative paths resolve against the working directory.
    pub panel: Option<PathBuf>,
    /// Generate the panel in memory instead of reading one.
    pub synth: Option<SynthSection>,
    /// Hidden-unit candidates for the MLP grid search (case 1).
    #[serde(default)]
    pub grid_hidden_units: Vec<usize>,
    pub case: CaseSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.panel, &self.synth) {
            (Some(_), Some(_)) => bail!("config sets both `panel` and `synth`; choose one"),
            (None, None) => bail!("config needs either `panel` or a `synth` section"),
            _ => {}
        }
        if let Some(s) = &self.synth {
            s.resolve()?;
        }
        if self.grid_hidden_units.contains(&0) {
            bail!("grid_hidden_units must be positive");
        }
        self.case.validate().context("case")?;
        Ok(())
    }
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
