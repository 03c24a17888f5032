use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use creditnn::data_panel::{load_panel, Panel};
use creditnn::experiments::{
    grid_search_case, run_case_with, CaseSpec, ExperimentResult, ResultStore,
};
use creditnn::features::{default_field_mapping, ratio_panel, FieldMapping};
use creditnn::model_zoo::Architecture;
use creditnn::report::{
    grid_to_csv, is_summary_header, read_grid_csv, read_summary_pairs, render_report,
    summary_pairs, tukey_for_case, two_way_for_case, welch_grid, welch_grid_csv, welch_grid_text,
};
use creditnn::synthgen::{generate, preset_by_name, SynthPanel};

use crate::config::{read_synth_file, read_toml, RunConfig};
use crate::{Format, StatsMode};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Record count, class histogram and observed missing share.
pub fn synth_summary(synth: &SynthPanel) -> String {
    let panel = &synth.panel;
    let mut hist: BTreeMap<usize, (String, usize)> = BTreeMap::new();
    for r in panel.records() {
        let rank = creditnn::data_panel::rating_rank(&r.rating).unwrap_or(usize::MAX);
        hist.entry(rank).or_insert_with(|| (r.rating.clone(), 0)).1 += 1;
    }
    let cells = panel.len() * panel.n_features();
    let missing = panel
        .records()
        .iter()
        .flat_map(|r| &r.features)
        .filter(|v| v.is_none())
        .count();
    let share = missing as f64 / cells as f64;
    let mut out = format!(
        "sector: {}\nrecords: {}\nfeatures: {}\nclasses:",
        panel.sector(),
        panel.len(),
        panel.n_features()
    );
    for (symbol, count) in hist.values() {
        let _ = write!(out, " {symbol}={count}");
    }
    if missing == 0 {
        out.push_str("\nmissing: 0\n");
    } else {
        let _ = writeln!(out, "\nmissing: {share:.4}");
    }
    out
}

pub fn synth(
    config: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
    features: Option<usize>,
    out_dir: &Path,
) -> Result<()> {
    let mut cfg = match (config, preset) {
        (Some(path), _) => read_synth_file(path)?,
        (None, Some(name)) => preset_by_name(name)?,
        (None, None) => bail!("pass --config or --preset"),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    if let Some(f) = features {
        cfg.n_features = f;
    }
    cfg.validate()?;
    let synth = generate(&cfg)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let panel_path = out_dir.join(format!("{}_panel.csv", cfg.sector));
    let latent_path = out_dir.join(format!("{}_latent.csv", cfg.sector));
    synth
        .save(&panel_path, &latent_path)
        .with_context(|| format!("writing {}", panel_path.display()))?;
    print!("{}", synth_summary(&synth));
    println!(
        "panel: {}\nlatent: {}",
        panel_path.display(),
        latent_path.display()
    );
    Ok(())
}

pub fn ratios(
    panel: &Path,
    mapping: Option<&Path>,
    out: Option<PathBuf>,
    out_dir: &Path,
) -> Result<()> {
    let mapping: FieldMapping = match mapping {
        Some(p) => read_toml(p)?,
        None => default_field_mapping(),
    };
    let src = load_panel(panel)?;
    let (imputed, report) = creditnn::data_panel::impute_zero(&src);
    let result = ratio_panel(&imputed, &mapping)?;
    let stem = panel
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("panel");
    let out = out.unwrap_or_else(|| out_dir.join(format!("{stem}_ratios.csv")));
    ensure_parent(&out)?;
    result
        .save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "records: {}\nimputed cells: {}\nratios: {}",
        result.len(),
        report.total(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Default)]
pub struct RunOverrides {
    pub panel: Option<PathBuf>,
    pub seed: Option<u64>,
    pub case: Option<u8>,
    pub sector: Option<String>,
    pub arch: Option<Vec<String>>,
    pub replicates: Option<usize>,
    pub epochs: Option<usize>,
}

impl RunOverrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(p) = &self.panel {
            cfg.panel = Some(p.clone());
            cfg.synth = None;
        }
        if let Some(s) = self.seed {
            cfg.case.seed = s;
        }
        if let Some(c) = self.case {
            cfg.case.case_id = c;
            cfg.case.architectures = CaseSpec::allowed_architectures(c)?.to_vec();
        }
        if let Some(sector) = &self.sector {
            cfg.case.sector = sector.clone();
            cfg.case.test_fraction = creditnn::experiments::sector_test_fraction(sector);
            if let Some(synth) = &mut cfg.synth {
                synth.preset = sector.clone();
            }
        }
        if let Some(names) = &self.arch {
            cfg.case.architectures = names
                .iter()
                .map(|n| n.parse::<Architecture>())
                .collect::<creditnn::Result<Vec<_>>>()
                .context("--arch")?;
        }
        if let Some(r) = self.replicates {
            cfg.case.replicates = r;
        }
        if let Some(e) = self.epochs {
            cfg.case.train.max_epochs = e;
        }
        Ok(())
    }
}

fn load_run_panel(cfg: &RunConfig) -> Result<Panel> {
    if let Some(path) = &cfg.panel {
        return Ok(load_panel(path)?);
    }
    let synth = cfg
        .synth
        .as_ref()
        .expect("validated config has a panel source");
    Ok(generate(&synth.resolve()?)?.panel)
}

fn progress_line(r: &ExperimentResult) -> String {
    format!(
        "[case {} {} {} {}] train {:.4} test {:.4} epochs {}",
        r.case_id, r.sector, r.arch, r.allocation, r.train_acc, r.test_acc, r.epochs
    )
}

pub fn run(
    config: &Path,
    overrides: RunOverrides,
    jobs: usize,
    out: Option<PathBuf>,
    quiet: bool,
    out_dir: &Path,
) -> Result<()> {
    let mut cfg: RunConfig = read_toml(config)?;
    overrides.apply(&mut cfg)?;
    cfg.validate()
        .with_context(|| format!("invalid config {}", config.display()))?;
    if jobs == 0 {
        bail!("--jobs must be positive");
    }
    let panel = load_run_panel(&cfg)?;
    if panel.sector() != cfg.case.sector {
        bail!(
            "panel sector '{}' does not match case sector '{}'",
            panel.sector(),
            cfg.case.sector
        );
    }
    let spec = &cfg.case;
    let out = out.unwrap_or_else(|| {
        out_dir.join(format!("results_case{}_{}.csv", spec.case_id, spec.sector))
    });
    ensure_parent(&out)?;

    if !cfg.grid_hidden_units.is_empty() {
        let grid = grid_search_case(spec, &panel, &cfg.grid_hidden_units)?;
        let grid_path =
            out.with_file_name(format!("grid_case{}_{}.csv", spec.case_id, spec.sector));
        write_file(&grid_path, &grid_to_csv(&grid))?;
        if !quiet {
            eprintln!(
                "grid search: selected {} -> {}",
                grid.rows[grid.best_index].label,
                grid_path.display()
            );
        }
    }

    let progress = |r: &ExperimentResult| {
        if !quiet {
            eprintln!("{}", progress_line(r));
        }
    };
    let store = run_case_with(spec, &panel, jobs, &progress)?;
    store
        .save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("{} rows -> {}", store.len(), out.display());
    Ok(())
}

fn load_results(paths: &[PathBuf]) -> Result<ResultStore> {
    let mut store = ResultStore::new();
    for p in paths {
        store
            .extend(ResultStore::load(p)?)
            .with_context(|| format!("merging {}", p.display()))?;
    }
    store.sort_canonical();
    Ok(store)
}

fn first_line(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().next().unwrap_or_default().to_string())
}

pub fn stats(
    results: &[PathBuf],
    mode: StatsMode,
    case: u8,
    alpha: f64,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let text = match mode {
        StatsMode::Ttest => {
            let pairs = if results.len() == 1 && is_summary_header(&first_line(&results[0])?) {
                let file = fs::File::open(&results[0])?;
                read_summary_pairs(file)?
            } else {
                summary_pairs(&load_results(results)?)
            };
            if pairs.is_empty() {
                return Err(creditnn::Error::Design(
                    "results contain no sector/architecture cell with both case 3 and case 4 rows"
                        .into(),
                )
                .into());
            }
            let grid = welch_grid(&pairs);
            match format {
                Format::Text => welch_grid_text(&grid),
                Format::Csv => welch_grid_csv(&grid),
            }
        }
        StatsMode::Anova2 => {
            let table = two_way_for_case(&load_results(results)?, case)?;
            match format {
                Format::Text => table.to_text(),
                Format::Csv => table.to_csv(),
            }
        }
        StatsMode::Tukey => {
            let table = tukey_for_case(&load_results(results)?, case, alpha)?;
            match format {
                Format::Text => table.to_text(),
                Format::Csv => table.to_csv(),
            }
        }
    };
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn report(
    results: &[PathBuf],
    grid: Option<&Path>,
    out: Option<PathBuf>,
    out_dir: &Path,
) -> Result<()> {
    let store = load_results(results)?;
    let grid_rows = match grid {
        Some(p) => Some(read_grid_csv(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )?),
        None => None,
    };
    let text = render_report(&store, grid_rows.as_deref());
    let out = out.unwrap_or_else(|| out_dir.join("report.md"));
    write_file(&out, &text)?;
    println!("report -> {}", out.display());
    Ok(())
}
