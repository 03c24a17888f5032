//! Case orchestration: feature preparation, allocation (random replicates or
//! a leave-one-year-out sweep), training, evaluation and result persistence.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_panel::{
    impute_zero, materialize, window_keys, LabelCodec, Panel, Standardizer, WindowKey,
    WindowedSample,
};
use crate::error::{Error, Result};
use crate::features::{default_field_mapping, ratio_panel, FieldMapping};
use crate::model_zoo::{make_default, Architecture, ModelSpec, TrainedModel};
use crate::nn::{grid_search, train, Example, GridSearchReport, TrainConfig};
use crate::splitters::{random_split, year_sweep, SplitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Ratios20,
    AllFeatures,
}

/// Optional width overrides applied on top of the published architectures,
/// for desk-scale runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub mlp_hidden_units: Option<usize>,
    pub mlp_hidden_layers: Option<usize>,
    pub conv_filters: Option<Vec<usize>>,
    pub dense_units: Option<Vec<usize>>,
    pub lstm_units: Option<usize>,
    pub pool_window: Option<usize>,
}

impl ModelOverrides {
    pub fn apply(&self, mut spec: ModelSpec) -> Result<ModelSpec> {
        match spec.architecture {
            Architecture::Mlp => {
                let units = self.mlp_hidden_units.unwrap_or(spec.dense_units[0]);
                let layers = self.mlp_hidden_layers.unwrap_or(spec.dense_units.len());
                spec.dense_units = vec![units; layers];
            }
            Architecture::Cnn | Architecture::Cnn2d => {
                if let Some(f) = &self.conv_filters {
                    spec.conv_filters = f.clone();
                }
                if let Some(d) = &self.dense_units {
                    spec.dense_units = d.clone();
                }
                if self.pool_window.is_some() {
                    spec.pool_window = self.pool_window;
                }
            }
            Architecture::Lstm => {
                if let Some(u) = self.lstm_units {
                    spec.lstm_units = u;
                }
                if let Some(d) = &self.dense_units {
                    spec.dense_units = d.clone();
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Everything needed to run one case on one sector panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub case_id: u8,
    pub sector: String,
    pub architectures: Vec<Architecture>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Test share for random splits (cases 1-3).
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Reuse one random split for every replicate (only initialization varies).
    #[serde(default)]
    pub fix_split: bool,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_field_mapping")]
    pub field_mapping: FieldMapping,
    #[serde(default)]
    pub model: ModelOverrides,
    /// Record wall-clock seconds; off by default so result files are reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_replicates() -> usize {
    15
}

fn default_test_fraction() -> f64 {
    0.15
}

fn default_true() -> bool {
    true
}

/// Test share used for a sector's random splits (85/15 for energy, 94/6 otherwise).
pub fn sector_test_fraction(sector: &str) -> f64 {
    if sector == "energy" {
        0.15
    } else {
        0.06
    }
}

impl CaseSpec {
    /// Defaults for a case: the architectures it compares, 15 replicates and
    /// the sector's split ratio.
    pub fn new(case_id: u8, sector: &str) -> Result<Self> {
        let spec = CaseSpec {
            case_id,
            sector: sector.into(),
            architectures: Self::allowed_architectures(case_id)?.to_vec(),
            replicates: default_replicates(),
            test_fraction: sector_test_fraction(sector),
            fix_split: false,
            standardize: true,
            train: TrainConfig::default(),
            seed: 0,
            field_mapping: default_field_mapping(),
            model: ModelOverrides::default(),
            record_timing: false,
        };
        Ok(spec)
    }

    pub fn allowed_architectures(case_id: u8) -> Result<&'static [Architecture]> {
        match case_id {
            1 => Ok(&[Architecture::Mlp]),
            2 => Ok(&[Architecture::Mlp, Architecture::Cnn]),
            3 | 4 => Ok(&Architecture::ALL),
            other => Err(Error::Config(format!("case_id must be 1-4, got {other}"))),
        }
    }

    pub fn feature_mode(&self) -> FeatureMode {
        if self.case_id == 1 {
            FeatureMode::Ratios20
        } else {
            FeatureMode::AllFeatures
        }
    }

    pub fn is_temporal(&self) -> bool {
        self.case_id == 4
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = Self::allowed_architectures(self.case_id)?;
        if self.architectures.is_empty() {
            return Err(Error::Config("architectures must not be empty".into()));
        }
        if let Some(a) = self.architectures.iter().find(|a| !allowed.contains(a)) {
            return Err(Error::Config(format!(
                "architectures: {a} is not part of case {} (allowed: {})",
                self.case_id,
                allowed
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.train.validate().map_err(|e| e.context("train"))?;
        Ok(())
    }
}

/// Accuracy of one trained model on one allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    #[serde(rename = "case")]
    pub case_id: u8,
    pub sector: String,
    pub arch: Architecture,
    /// Replicate index (cases 1-3) or held-out year (case 4).
    pub allocation: i64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub epochs: usize,
    pub seconds: f64,
}

impl ExperimentResult {
    fn sort_key(&self) -> (u8, &str, Architecture, i64) {
        (self.case_id, &self.sector, self.arch, self.allocation)
    }
}

pub const RESULTS_HEADER: [&str; 8] = [
    "case",
    "sector",
    "arch",
    "allocation",
    "train_acc",
    "test_acc",
    "epochs",
    "seconds",
];

/// Append-only collection of results, persisted as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultStore {
    rows: Vec<ExperimentResult>,
}

impl ResultStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ExperimentResult] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: ExperimentResult) -> Result<()> {
        if self.rows.iter().any(|r| r.sort_key() == row.sort_key()) {
            return Err(Error::Integrity(format!(
                "duplicate result for case {} {} {} allocation {}",
                row.case_id, row.sector, row.arch, row.allocation
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: ResultStore) -> Result<()> {
        for r in other.rows {
            self.push(r)?;
        }
        Ok(())
    }

    /// Sorted by (case, sector, architecture, allocation).
    pub fn sort_canonical(&mut self) {
        self.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn filter(&self, mut keep: impl FnMut(&ExperimentResult) -> bool) -> ResultStore {
        ResultStore {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.case_id.to_string(),
                r.sector.clone(),
                r.arch.to_string(),
                r.allocation.to_string(),
                format!("{:.6}", r.train_acc),
                format!("{:.6}", r.test_acc),
                r.epochs.to_string(),
                format!("{:.3}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if header != RESULTS_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "results header should be {}, found {}",
                    RESULTS_HEADER.join(","),
                    header.join(",")
                ),
            });
        }
        let mut store = ResultStore::new();
        for row in rdr.deserialize::<ExperimentResult>() {
            store.push(row?)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(e).context(format!("opening {}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Fraction of samples whose argmax prediction equals the true class.
pub fn evaluate(model: &mut TrainedModel, samples: &[WindowedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Evaluation("no samples to evaluate".into()));
    }
    let mut correct = 0usize;
    for s in samples {
        if model.predict(&s.matrix)? == s.class {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Imputed (and, for case 1, ratio-transformed) panel.
pub fn prepare_panel(spec: &CaseSpec, panel: &Panel) -> Result<Panel> {
    let (imputed, _) = impute_zero(panel);
    match spec.feature_mode() {
        FeatureMode::AllFeatures => Ok(imputed),
        FeatureMode::Ratios20 => ratio_panel(&imputed, &spec.field_mapping),
    }
}

/// One train/test allocation of one architecture.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub arch: Architecture,
    pub id: i64,
    pub split: SplitResult,
    pub train_seed: u64,
}

/// Window keys by window size.
pub type KeysByWindow = BTreeMap<usize, Vec<WindowKey>>;

/// Window keys per architecture window size, plus the allocations over them.
pub fn plan_allocations(spec: &CaseSpec, panel: &Panel) -> Result<(KeysByWindow, Vec<Allocation>)> {
    let mut keys_by_window = BTreeMap::new();
    let mut allocations = Vec::new();
    for &arch in &spec.architectures {
        let w = arch.window();
        let keys = keys_by_window
            .entry(w)
            .or_insert_with(|| window_keys(panel, w));
        let years: Vec<i32> = keys
            .iter()
            .map(|k| panel.records()[k.target()].year)
            .collect();
        let ctx = |e: Error| e.context(format!("case {} {} {arch}", spec.case_id, spec.sector));
        if spec.is_temporal() {
            for (i, (year, split)) in year_sweep(&years).map_err(ctx)?.into_iter().enumerate() {
                allocations.push(Allocation {
                    arch,
                    id: year as i64,
                    split,
                    train_seed: spec.seed.wrapping_add(i as u64),
                });
            }
        } else {
            for i in 0..spec.replicates {
                let split_seed = if spec.fix_split {
                    spec.seed
                } else {
                    spec.seed.wrapping_add(i as u64)
                };
                let split =
                    random_split(keys.len(), spec.test_fraction, split_seed).map_err(ctx)?;
                allocations.push(Allocation {
                    arch,
                    id: i as i64,
                    split,
                    train_seed: spec.seed.wrapping_add(i as u64),
                });
            }
        }
    }
    Ok((keys_by_window, allocations))
}

/// Samples for a split, labelled and standardized with training-side statistics only.
pub struct PreparedSplit {
    pub codec: LabelCodec,
    pub train: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
}

pub fn prepare_split(
    panel: &Panel,
    keys: &[WindowKey],
    split: &SplitResult,
    standardize: bool,
) -> Result<PreparedSplit> {
    assert!(
        split
            .train
            .iter()
            .all(|i| split.test.binary_search(i).is_err()),
        "holdout isolation violated: a test sample is on the training side"
    );
    let train_targets: Vec<usize> = split.train.iter().map(|&i| keys[i].target()).collect();
    let codec = LabelCodec::from_symbols(
        train_targets
            .iter()
            .map(|&r| panel.records()[r].rating.as_str()),
    )?;
    let working = if standardize {
        let stats = Standardizer::fit(
            train_targets
                .iter()
                .map(|&r| panel.records()[r].features.as_slice()),
            panel.n_features(),
        )?;
        stats.transform(panel)
    } else {
        panel.clone()
    };
    let pick = |idx: &[usize]| {
        idx.iter()
            .map(|&i| materialize(&working, &codec, &keys[i]))
            .collect::<Vec<_>>()
    };
    Ok(PreparedSplit {
        train: pick(&split.train),
        test: pick(&split.test),
        codec,
    })
}

fn model_spec(
    spec: &CaseSpec,
    arch: Architecture,
    n_features: usize,
    n_classes: usize,
) -> Result<ModelSpec> {
    spec.model.apply(make_default(arch, n_features, n_classes)?)
}

fn to_examples(samples: &[WindowedSample]) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            input: s.matrix.clone(),
            label: s.class,
        })
        .collect()
}

fn run_allocation(
    spec: &CaseSpec,
    panel: &Panel,
    keys: &[WindowKey],
    alloc: &Allocation,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    let prepared = prepare_split(panel, keys, &alloc.split, spec.standardize)?;
    let model_spec = model_spec(spec, alloc.arch, panel.n_features(), prepared.codec.len())?;
    let config = spec.train.with_seed(alloc.train_seed);
    let (mut model, history) = train(&model_spec, &to_examples(&prepared.train), &config)?;
    let train_acc = evaluate(&mut model, &prepared.train)?;
    let test_acc = evaluate(&mut model, &prepared.test)?;
    Ok(ExperimentResult {
        case_id: spec.case_id,
        sector: spec.sector.clone(),
        arch: alloc.arch,
        allocation: alloc.id,
        train_acc,
        test_acc,
        epochs: history.epochs_run(),
        seconds: if spec.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Runs every allocation of every architecture in the case.
pub fn run_case(spec: &CaseSpec, panel: &Panel) -> Result<ResultStore> {
    run_case_with(spec, panel, 1, &|_| {})
}

/// `run_case` with up to `jobs` allocations in flight and a callback per
/// finished allocation. Output order is canonical regardless of scheduling.
pub fn run_case_with(
    spec: &CaseSpec,
    panel: &Panel,
    jobs: usize,
    progress: &(dyn Fn(&ExperimentResult) + Sync),
) -> Result<ResultStore> {
    spec.validate()?;
    if panel.is_empty() {
        return Err(Error::Data(format!(
            "panel for case {} {} is empty",
            spec.case_id, spec.sector
        )));
    }
    let prepared = prepare_panel(spec, panel)?;
    let (keys_by_window, allocations) = plan_allocations(spec, &prepared)?;
    let run_one = |alloc: &Allocation| -> Result<ExperimentResult> {
        let keys = &keys_by_window[&alloc.arch.window()];
        let r = run_allocation(spec, &prepared, keys, alloc).map_err(|e| {
            e.context(format!(
                "case {} {} {} allocation {}",
                spec.case_id, spec.sector, alloc.arch, alloc.id
            ))
        })?;
        progress(&r);
        Ok(r)
    };
    let results: Vec<Result<ExperimentResult>> = if jobs <= 1 {
        allocations.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| allocations.par_iter().map(run_one).collect())
    };
    let mut store = ResultStore::new();
    for r in results {
        store.push(r?)?;
    }
    store.sort_canonical();
    Ok(store)
}

/// Hidden-unit grid search for the MLP on the first random allocation's
/// training side.
pub fn grid_search_case(
    spec: &CaseSpec,
    panel: &Panel,
    hidden_units: &[usize],
) -> Result<GridSearchReport> {
    spec.validate()?;
    let prepared = prepare_panel(spec, panel)?;
    let keys = window_keys(&prepared, 1);
    let split = random_split(keys.len(), spec.test_fraction, spec.seed)?;
    let data = prepare_split(&prepared, &keys, &split, spec.standardize)?;
    let layers = spec
        .model
        .mlp_hidden_layers
        .unwrap_or(crate::model_zoo::MLP_HIDDEN_LAYERS);
    let grid = hidden_units
        .iter()
        .map(|&h| crate::model_zoo::make_mlp(prepared.n_features(), data.codec.len(), h, layers))
        .collect::<Result<Vec<_>>>()?;
    grid_search(
        &grid,
        &to_examples(&data.train),
        &spec.train.with_seed(spec.seed),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Case,
    Sector,
    Arch,
}

/// Mean and sample standard deviation of test accuracy for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub train_mean: f64,
    pub train_std: f64,
}

impl SummaryRow {
    /// `mean(std)` with four decimals, e.g. `0.8359(0.0200)`.
    pub fn cell(&self) -> String {
        format!("{:.4}({:.4})", self.mean, self.std)
    }
}

/// Sample mean and (n - 1) standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

type SortKey = Vec<(u8, String, Option<Architecture>)>;
/// Labels, test accuracies and train accuracies of one group.
type GroupValues = (Vec<String>, Vec<f64>, Vec<f64>);

pub fn summarize(store: &ResultStore, keys: &[GroupKey]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<SortKey, GroupValues> = BTreeMap::new();
    for r in store.rows() {
        let mut sort_key = Vec::new();
        let mut label = Vec::new();
        for k in keys {
            match k {
                GroupKey::Case => {
                    sort_key.push((r.case_id, String::new(), None));
                    label.push(r.case_id.to_string());
                }
                GroupKey::Sector => {
                    sort_key.push((0, r.sector.clone(), None));
                    label.push(r.sector.clone());
                }
                GroupKey::Arch => {
                    sort_key.push((0, String::new(), Some(r.arch)));
                    label.push(r.arch.to_string());
                }
            }
        }
        let entry = groups
            .entry(sort_key)
            .or_insert_with(|| (label, Vec::new(), Vec::new()));
        entry.1.push(r.test_acc);
        entry.2.push(r.train_acc);
    }
    groups
        .into_values()
        .map(|(key, test, train)| {
            let (mean, std) = mean_std(&test);
            let (train_mean, train_std) = mean_std(&train);
            SummaryRow {
                key,
                n: test.len(),
                mean,
                std,
                train_mean,
                train_std,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_panel::{encode_labels, make_windows, PanelRecord};
    use crate::model_zoo::make_mlp;
    use crate::nn::{Dense, Layer, LayerParams, Network};
    use crate::tensor::Tensor;

    fn row(arch: Architecture, alloc: i64, acc: f64) -> ExperimentResult {
        ExperimentResult {
            case_id: 3,
            sector: "energy".into(),
            arch,
            allocation: alloc,
            train_acc: acc,
            test_acc: acc,
            epochs: 1,
            seconds: 0.0,
        }
    }

    #[test]
    fn two_point_summary() {
        let mut s = ResultStore::new();
        s.push(row(Architecture::Mlp, 0, 0.8)).unwrap();
        s.push(row(Architecture::Mlp, 1, 0.9)).unwrap();
        s.push(row(Architecture::Cnn, 0, 0.7)).unwrap();
        s.push(row(Architecture::Cnn, 1, 0.7)).unwrap();
        let out = summarize(&s, &[GroupKey::Sector, GroupKey::Arch]);
        assert_eq!(out[0].key, vec!["energy", "mlp"]);
        assert!((out[0].mean - 0.85).abs() < 1e-12);
        assert!((out[0].std - 0.0707).abs() < 1e-4);
        assert_eq!(out[1].std, 0.0);
        let single = summarize(
            &s.filter(|r| r.allocation == 0 && r.arch == Architecture::Mlp),
            &[GroupKey::Arch],
        );
        assert_eq!(single[0].std, 0.0);
    }

    #[test]
    fn cell_format() {
        let r = SummaryRow {
            key: vec![],
            n: 15,
            mean: 0.8359,
            std: 0.02,
            train_mean: 0.0,
            train_std: 0.0,
        };
        assert_eq!(r.cell(), "0.8359(0.0200)");
    }

    #[test]
    fn duplicate_allocation_rejected() {
        let mut s = ResultStore::new();
        s.push(row(Architecture::Mlp, 0, 0.8)).unwrap();
        assert!(matches!(
            s.push(row(Architecture::Mlp, 0, 0.9)),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn results_csv_round_trip() {
        let mut s = ResultStore::new();
        s.push(row(Architecture::Lstm, 2014, 0.5)).unwrap();
        s.push(row(Architecture::Mlp, 2013, 0.25)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("case,sector,arch,allocation,train_acc,test_acc,epochs,seconds\n"));
        assert_eq!(ResultStore::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn case_invariants() {
        let mut c = CaseSpec::new(1, "energy").unwrap();
        assert_eq!(c.architectures, vec![Architecture::Mlp]);
        assert_eq!(c.feature_mode(), FeatureMode::Ratios20);
        c.architectures = vec![Architecture::Cnn];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c2 = CaseSpec::new(2, "healthcare").unwrap();
        assert_eq!(c2.architectures, vec![Architecture::Mlp, Architecture::Cnn]);
        assert_eq!(c2.test_fraction, 0.06);
        assert!(CaseSpec::new(4, "energy").unwrap().is_temporal());
        assert!(CaseSpec::new(5, "energy").is_err());
    }

    fn constant_model(n_features: usize, n_classes: usize, favoured: usize) -> TrainedModel {
        let spec = make_mlp(n_features, n_classes, 1, 1).unwrap();
        let mut out_bias = vec![0.0; n_classes];
        out_bias[favoured] = 1.0;
        let net = Network::new(vec![
            Layer::Reshape(vec![n_features]),
            Layer::Dense(Dense::new(
                LayerParams::zeros(vec![n_features, 1], vec![1]),
                crate::nn::Activation::Relu,
            )),
            Layer::Dense(Dense::new(
                LayerParams::new(
                    Tensor::zeros(vec![1, n_classes]),
                    Tensor::from_vec(out_bias),
                ),
                crate::nn::Activation::Identity,
            )),
        ]);
        TrainedModel { spec, network: net }
    }

    fn samples(classes: &[usize]) -> Vec<WindowedSample> {
        classes
            .iter()
            .map(|&c| WindowedSample {
                company_id: "A".into(),
                year: 2010,
                quarter: 1,
                matrix: Tensor::zeros(vec![1, 2]),
                class: c,
            })
            .collect()
    }

    #[test]
    fn evaluation_counts() {
        let mut m = constant_model(2, 2, 0);
        assert_eq!(evaluate(&mut m, &samples(&[0, 0, 0])).unwrap(), 1.0);
        assert_eq!(evaluate(&mut m, &samples(&[0, 1, 0, 1])).unwrap(), 0.5);
        let mut m3 = constant_model(2, 3, 1);
        assert!((evaluate(&mut m3, &samples(&[1, 1, 2])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(evaluate(&mut m, &[]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn standardization_uses_training_targets_only() {
        let recs: Vec<PanelRecord> = (0..4)
            .map(|i| PanelRecord {
                company_id: "A".into(),
                sector: "energy".into(),
                year: 2010,
                quarter: i as u8 + 1,
                rating: "A".into(),
                features: vec![Some(if i == 3 { 100.0 } else { i as f64 })],
            })
            .collect();
        let panel = Panel::new(recs, vec!["f001".into()], "energy").unwrap();
        let keys = window_keys(&panel, 1);
        let split = SplitResult {
            train: vec![0, 1, 2],
            test: vec![3],
        };
        let p = prepare_split(&panel, &keys, &split, true).unwrap();
        // mean 1, population std sqrt(2/3) from the three training rows
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((p.test[0].matrix.data()[0] - 99.0 / sd).abs() < 1e-9);
        let codec = encode_labels(&panel).unwrap();
        assert_eq!(make_windows(&panel, &codec, 1).len(), 4);
    }
}
