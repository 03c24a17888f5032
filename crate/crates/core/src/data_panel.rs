//! Quarterly financial panels: CSV ingestion, zero-imputation, z-scoring,
//! rating-label encoding and consecutive-quarter windowing.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Columns preceding the feature block in the panel CSV.
pub const KEY_COLUMNS: [&str; 5] = ["company_id", "sector", "year", "quarter", "rating"];

/// S&P long-term issuer ratings from best to worst.
pub const RATING_SCALE: [&str; 22] = [
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-", "B+",
    "B", "B-", "CCC+", "CCC", "CCC-", "CC", "C", "D",
];

/// Position of a rating symbol on [`RATING_SCALE`].
pub fn rating_rank(symbol: &str) -> Option<usize> {
    RATING_SCALE.iter().position(|s| *s == symbol)
}

/// Name of the i-th (zero-based) feature column: `f001`, `f002`, ...
pub fn feature_column_name(i: usize) -> String {
    format!("f{:03}", i + 1)
}

/// One company-quarter observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub company_id: String,
    pub sector: String,
    pub year: i32,
    pub quarter: u8,
    pub rating: String,
    pub features: Vec<Option<f64>>,
}

impl PanelRecord {
    /// Quarter counter where Q4 of year y is immediately followed by Q1 of y + 1.
    pub fn period_index(&self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn key(&self) -> (&str, i32, u8) {
        (&self.company_id, self.year, self.quarter)
    }
}

/// Records sorted by `(company_id, year, quarter)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    records: Vec<PanelRecord>,
    feature_names: Vec<String>,
    sector: String,
}

impl Panel {
    /// Sorts the records and checks key uniqueness, quarter range and feature width.
    pub fn new(
        mut records: Vec<PanelRecord>,
        feature_names: Vec<String>,
        sector: impl Into<String>,
    ) -> Result<Self> {
        for r in &records {
            if !(1..=4).contains(&r.quarter) {
                return Err(Error::Integrity(format!(
                    "{} {} has quarter {} outside 1..=4",
                    r.company_id, r.year, r.quarter
                )));
            }
            if r.features.len() != feature_names.len() {
                return Err(Error::Integrity(format!(
                    "{} {}Q{} has {} features, panel declares {}",
                    r.company_id,
                    r.year,
                    r.quarter,
                    r.features.len(),
                    feature_names.len()
                )));
            }
        }
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        for pair in records.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(Error::Integrity(format!(
                    "duplicate record for {} {}Q{}",
                    pair[0].company_id, pair[0].year, pair[0].quarter
                )));
            }
        }
        Ok(Self {
            records,
            feature_names,
            sector: sector.into(),
        })
    }

    pub fn records(&self) -> &[PanelRecord] {
        &self.records
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn sector(&self) -> &str {
        &self.sector
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Replaces the feature names, e.g. from a manifest file.
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(Error::Config(format!(
                "manifest lists {} names for {} feature columns",
                names.len(),
                self.feature_names.len()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Same keys, new feature block.
    pub fn map_features(
        &self,
        names: Vec<String>,
        mut f: impl FnMut(&PanelRecord) -> Vec<Option<f64>>,
    ) -> Result<Panel> {
        let records = self
            .records
            .iter()
            .map(|r| PanelRecord {
                features: f(r),
                ..r.clone()
            })
            .collect();
        Panel::new(records, names, self.sector.clone())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.records.iter().map(|r| r.year).collect();
        ys.sort_unstable();
        ys.dedup();
        ys
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
        header.extend(self.feature_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.company_id.clone(),
                r.sector.clone(),
                r.year.to_string(),
                r.quarter.to_string(),
                r.rating.clone(),
            ];
            row.extend(
                r.features
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a wide-format panel CSV. Feature names come from the header.
pub fn read_panel<R: Read>(reader: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    for (i, want) in KEY_COLUMNS.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*want) {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header column {} should be '{want}', found {:?}",
                    i + 1,
                    header.get(i)
                ),
            });
        }
    }
    let feature_names: Vec<String> = header
        .iter()
        .skip(KEY_COLUMNS.len())
        .map(|s| s.trim().to_string())
        .collect();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if row.len() != header.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                header.len(),
                row.len()
            )));
        }
        let year: i32 = row[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad year '{}'", &row[2])))?;
        let quarter: u8 = row[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad quarter '{}'", &row[3])))?;
        if !(1..=4).contains(&quarter) {
            return Err(parse_err(format!("quarter {quarter} outside 1..=4")));
        }
        let features = row
            .iter()
            .skip(KEY_COLUMNS.len())
            .enumerate()
            .map(|(j, cell)| {
                let cell = cell.trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| {
                        parse_err(format!("bad value '{cell}' in column {}", feature_names[j]))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let record = PanelRecord {
            company_id: row[0].trim().to_string(),
            sector: row[1].trim().to_string(),
            year,
            quarter,
            rating: row[4].trim().to_string(),
            features,
        };
        if !seen.insert((record.company_id.clone(), year, quarter)) {
            return Err(Error::Integrity(format!(
                "duplicate record for {} {}Q{} at line {line}",
                record.company_id, year, quarter
            )));
        }
        records.push(record);
    }
    let sector = sector_tag(&records);
    Panel::new(records, feature_names, sector)
}

fn sector_tag(records: &[PanelRecord]) -> String {
    let mut sectors: Vec<&str> = records.iter().map(|r| r.sector.as_str()).collect();
    sectors.sort_unstable();
    sectors.dedup();
    match sectors.as_slice() {
        [] => String::new(),
        [one] => (*one).to_string(),
        many => many.join("+"),
    }
}

pub fn load_panel(path: impl AsRef<Path>) -> Result<Panel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(e).context(format!("opening {}", path.display())))?;
    read_panel(std::io::BufReader::new(file))
        .map_err(|e| e.context(format!("reading {}", path.display())))
}

/// One feature name per line; blank lines are ignored.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Per-feature count of cells that were missing before imputation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingReport {
    pub per_feature: Vec<usize>,
}

impl MissingReport {
    pub fn total(&self) -> usize {
        self.per_feature.iter().sum()
    }
}

/// Replaces every missing feature value with 0.
pub fn impute_zero(panel: &Panel) -> (Panel, MissingReport) {
    let mut per_feature = vec![0; panel.n_features()];
    let records = panel
        .records
        .iter()
        .map(|r| {
            let features = r
                .features
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    if v.is_none() {
                        per_feature[j] += 1;
                    }
                    Some(v.unwrap_or(0.0))
                })
                .collect();
            PanelRecord {
                features,
                ..r.clone()
            }
        })
        .collect();
    (
        Panel {
            records,
            feature_names: panel.feature_names.clone(),
            sector: panel.sector.clone(),
        },
        MissingReport { per_feature },
    )
}

/// Per-feature z-score statistics fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fits population mean and standard deviation per column. Missing cells
    /// are skipped.
    pub fn fit<'a>(
        rows: impl IntoIterator<Item = &'a [Option<f64>]>,
        n_features: usize,
    ) -> Result<Self> {
        let mut count = vec![0usize; n_features];
        let mut sum = vec![0.0; n_features];
        let rows: Vec<&[Option<f64>]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Data(
                "cannot fit standardization on an empty training set".into(),
            ));
        }
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(x) = v {
                    count[j] += 1;
                    sum[j] += x;
                }
            }
        }
        let means: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let mut ss = vec![0.0; n_features];
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(x) = v {
                    ss[j] += (x - means[j]).powi(2);
                }
            }
        }
        let stds = ss
            .iter()
            .zip(&count)
            .map(|(s, &c)| if c > 0 { (s / c as f64).sqrt() } else { 0.0 })
            .collect();
        Ok(Self { means, stds })
    }

    /// z-score of one value; zero-variance features map to 0.
    #[inline]
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let sd = self.stds[j];
        if sd > 0.0 && sd.is_finite() {
            (x - self.means[j]) / sd
        } else {
            0.0
        }
    }

    pub fn transform(&self, panel: &Panel) -> Panel {
        let records = panel
            .records
            .iter()
            .map(|r| PanelRecord {
                features: r
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v.map(|x| self.transform_value(j, x)))
                    .collect(),
                ..r.clone()
            })
            .collect();
        Panel {
            records,
            feature_names: panel.feature_names.clone(),
            sector: panel.sector.clone(),
        }
    }
}

/// Fits z-scoring on `train` and applies it to `train` and each of `others`.
pub fn standardize(train: &Panel, others: &[&Panel]) -> Result<(Panel, Vec<Panel>, Standardizer)> {
    let stats = Standardizer::fit(
        train.records.iter().map(|r| r.features.as_slice()),
        train.n_features(),
    )?;
    let train_out = stats.transform(train);
    let others_out = others.iter().map(|p| stats.transform(p)).collect();
    Ok((train_out, others_out, stats))
}

/// Bijection between rating symbols present in training data and class
/// indices; index 0 is the best rating present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCodec {
    symbols: Vec<String>,
}

impl LabelCodec {
    pub fn from_symbols<'a>(symbols: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut ranks = BTreeMap::new();
        for s in symbols {
            let rank = rating_rank(s)
                .ok_or_else(|| Error::Label(format!("unknown rating symbol '{s}'")))?;
            ranks.insert(rank, s.to_string());
        }
        if ranks.is_empty() {
            return Err(Error::Label("no ratings to encode".into()));
        }
        Ok(Self {
            symbols: ranks.into_values().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn encode(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::Label(format!("rating '{symbol}' is not in the codec")))
    }

    /// Class index, or `len()` for a symbol never seen in training. Such a
    /// sample can never be predicted correctly.
    pub fn encode_or_unseen(&self, symbol: &str) -> usize {
        self.encode(symbol).unwrap_or(self.symbols.len())
    }

    pub fn decode(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }
}

pub fn encode_labels(train: &Panel) -> Result<LabelCodec> {
    LabelCodec::from_symbols(train.records.iter().map(|r| r.rating.as_str()))
}

/// Record indices of one window: consecutive quarters of one company ending
/// at the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowKey {
    pub rows: Vec<usize>,
}

impl WindowKey {
    pub fn target(&self) -> usize {
        *self.rows.last().expect("windows are non-empty")
    }
}

/// Every window of `window` consecutive quarters in the panel, in record order.
pub fn window_keys(panel: &Panel, window: usize) -> Vec<WindowKey> {
    let recs = &panel.records;
    let mut out = Vec::new();
    let mut run_start = 0;
    for i in 0..recs.len() {
        let continues = i > 0
            && recs[i].company_id == recs[i - 1].company_id
            && recs[i].period_index() == recs[i - 1].period_index() + 1;
        if !continues {
            run_start = i;
        }
        if window > 0 && i + 1 - run_start >= window {
            out.push(WindowKey {
                rows: (i + 1 - window..=i).collect(),
            });
        }
    }
    out
}

/// A model-ready sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub company_id: String,
    pub year: i32,
    pub quarter: u8,
    /// `(window, features)`; missing cells are read as 0.
    pub matrix: Tensor,
    pub class: usize,
}

pub fn materialize(panel: &Panel, codec: &LabelCodec, key: &WindowKey) -> WindowedSample {
    let target = &panel.records[key.target()];
    let n = panel.n_features().max(1);
    let mut data = Vec::with_capacity(key.rows.len() * n);
    for &r in &key.rows {
        if panel.n_features() == 0 {
            data.push(0.0);
        } else {
            data.extend(panel.records[r].features.iter().map(|v| v.unwrap_or(0.0)));
        }
    }
    WindowedSample {
        company_id: target.company_id.clone(),
        year: target.year,
        quarter: target.quarter,
        matrix: Tensor::new(vec![key.rows.len(), n], data).expect("window shape matches data"),
        class: codec.encode_or_unseen(&target.rating),
    }
}

/// One sample per company-quarter with `window - 1` gap-free predecessors.
pub fn make_windows(panel: &Panel, codec: &LabelCodec, window: usize) -> Vec<WindowedSample> {
    window_keys(panel, window)
        .iter()
        .map(|k| materialize(panel, codec, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(c: &str, y: i32, q: u8, rating: &str, f: Vec<Option<f64>>) -> PanelRecord {
        PanelRecord {
            company_id: c.into(),
            sector: "energy".into(),
            year: y,
            quarter: q,
            rating: rating.into(),
            features: f,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(feature_column_name).collect()
    }

    #[test]
    fn header_only_csv_is_empty_panel() {
        let p = read_panel("company_id,sector,year,quarter,rating,f001,f002\n".as_bytes()).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.n_features(), 2);
    }

    #[test]
    fn one_row_with_missing_cell() {
        let csv = "company_id,sector,year,quarter,rating,f001,f002\nACME,energy,2010,3,BBB,1.5,\n";
        let p = read_panel(csv.as_bytes()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.records()[0].features, vec![Some(1.5), None]);
        assert_eq!(p.sector(), "energy");
    }

    #[test]
    fn duplicate_key_is_integrity_error() {
        let csv = "company_id,sector,year,quarter,rating,f001\nA,energy,2010,1,AA,1\nA,energy,2010,1,AA,2\n";
        assert!(matches!(
            read_panel(csv.as_bytes()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "company_id,sector,year,quarter,rating,f001\nA,energy,2010,1,AA,1\nB,energy,20x0,1,AA,2\n";
        match read_panel(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let csv = "company_id,sector,year,quarter,rating,f001\nA,energy,2010,5,AA,1\n";
        assert!(matches!(
            read_panel(csv.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip_preserves_missing() {
        let p = Panel::new(
            vec![
                rec("B", 2011, 1, "A", vec![None, Some(-0.25)]),
                rec("A", 2010, 4, "AA", vec![Some(3.0), None]),
            ],
            names(2),
            "energy",
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(read_panel(buf.as_slice()).unwrap(), p);
        assert_eq!(p.records()[0].company_id, "A");
    }

    #[test]
    fn imputation_cases() {
        let p = Panel::new(
            vec![
                rec("A", 2010, 1, "A", vec![Some(1.5), None]),
                rec("A", 2010, 2, "A", vec![None, None]),
                rec("A", 2010, 3, "A", vec![Some(2.0), None]),
            ],
            names(2),
            "energy",
        )
        .unwrap();
        let (imp, report) = impute_zero(&p);
        let col0: Vec<_> = imp.records().iter().map(|r| r.features[0]).collect();
        assert_eq!(col0, vec![Some(1.5), Some(0.0), Some(2.0)]);
        assert!(imp.records().iter().all(|r| r.features[1] == Some(0.0)));
        assert_eq!(report.per_feature, vec![1, 3]);

        let (again, r2) = impute_zero(&imp);
        assert_eq!(again, imp);
        assert_eq!(r2.total(), 0);
    }

    #[test]
    fn standardization_rules() {
        let train = Panel::new(
            vec![
                rec("A", 2010, 1, "A", vec![Some(1.0), Some(5.0)]),
                rec("A", 2010, 2, "A", vec![Some(3.0), Some(5.0)]),
            ],
            names(2),
            "energy",
        )
        .unwrap();
        let test = Panel::new(
            vec![rec("B", 2010, 1, "A", vec![Some(3.0), Some(9.0)])],
            names(2),
            "energy",
        )
        .unwrap();
        let (tr, others, stats) = standardize(&train, &[&test]).unwrap();
        assert_eq!(stats.means, vec![2.0, 5.0]);
        assert_eq!(stats.stds, vec![1.0, 0.0]);
        assert_eq!(others[0].records()[0].features, vec![Some(1.0), Some(0.0)]);
        assert!(tr.records().iter().all(|r| r.features[1] == Some(0.0)));
        // test data did not move the statistics
        let (_, _, again) = standardize(&train, &[]).unwrap();
        assert_eq!(again, stats);
    }

    #[test]
    fn label_order_follows_rating_scale() {
        let codec = LabelCodec::from_symbols(["BBB", "A", "AA", "A"]).unwrap();
        assert_eq!(codec.symbols(), &["AA", "A", "BBB"]);
        assert_eq!(codec.encode("AA").unwrap(), 0);
        assert_eq!(codec.encode("BBB").unwrap(), 2);
        assert_eq!(LabelCodec::from_symbols(["B"]).unwrap().len(), 1);
        assert!(matches!(
            LabelCodec::from_symbols(["XX"]),
            Err(Error::Label(_))
        ));
        assert_eq!(codec.encode_or_unseen("D"), 3);
    }

    #[test]
    fn windows_respect_gaps_and_companies() {
        let mut recs = Vec::new();
        for q in 1..=4 {
            recs.push(rec("A", 2010, q, "A", vec![Some(q as f64)]));
        }
        recs.push(rec("A", 2011, 2, "A", vec![Some(9.0)]));
        for q in 1..=3 {
            recs.push(rec("B", 2010, q, "BBB", vec![Some(0.0)]));
        }
        let p = Panel::new(recs, names(1), "energy").unwrap();
        let codec = encode_labels(&p).unwrap();
        assert_eq!(make_windows(&p, &codec, 1).len(), 8);
        let w4 = make_windows(&p, &codec, 4);
        assert_eq!(w4.len(), 1);
        assert_eq!(
            (w4[0].company_id.as_str(), w4[0].year, w4[0].quarter),
            ("A", 2010, 4)
        );
        assert_eq!(w4[0].matrix.shape(), &[4, 1]);
        assert_eq!(w4[0].matrix.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn windows_cross_year_boundary() {
        let recs = vec![
            rec("A", 2010, 3, "A", vec![]),
            rec("A", 2010, 4, "A", vec![]),
            rec("A", 2011, 1, "A", vec![]),
            rec("A", 2011, 2, "A", vec![]),
        ];
        let p = Panel::new(recs, vec![], "x").unwrap();
        let keys = window_keys(&p, 4);
        assert_eq!(
            keys,
            vec![WindowKey {
                rows: vec![0, 1, 2, 3]
            }]
        );
    }
}
