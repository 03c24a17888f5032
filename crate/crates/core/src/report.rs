//! Analyses over result stores and the markdown report bundle.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{mean_std, ResultStore};
use crate::model_zoo::Architecture;
use crate::nn::GridSearchReport;
use crate::stats::{
    rank_table, tukey_hsd, two_way_anova, welch_one_sided, AnovaTable, Group, RankTable,
    SampleSummary, TTestResult,
};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Row order of the summary and p-value tables.
pub const TABLE_ORDER: [Architecture; 4] = [
    Architecture::Mlp,
    Architecture::Cnn,
    Architecture::Lstm,
    Architecture::Cnn2d,
];

/// Random-allocation and yearly-allocation summaries for one sector/architecture cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPair {
    pub sector: String,
    pub arch: Architecture,
    pub case3_mean: f64,
    pub case3_std: f64,
    pub case3_n: usize,
    pub case4_mean: f64,
    pub case4_std: f64,
    pub case4_n: usize,
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "sector",
    "arch",
    "case3_mean",
    "case3_std",
    "case3_n",
    "case4_mean",
    "case4_std",
    "case4_n",
];

impl SummaryPair {
    pub fn random(&self) -> Result<SampleSummary> {
        SampleSummary::new(self.case3_mean, self.case3_std, self.case3_n)
    }

    pub fn yearly(&self) -> Result<SampleSummary> {
        SampleSummary::new(self.case4_mean, self.case4_std, self.case4_n)
    }
}

pub fn read_summary_pairs<R: Read>(reader: R) -> Result<Vec<SummaryPair>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("summary header should be {}", SUMMARY_HEADER.join(",")),
        });
    }
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// True when the CSV header names the summary-pair layout rather than raw results.
pub fn is_summary_header(first_line: &str) -> bool {
    first_line.trim_end() == SUMMARY_HEADER.join(",")
}

/// Case 3 vs case 4 summaries computed from raw results.
pub fn summary_pairs(store: &ResultStore) -> Vec<SummaryPair> {
    let mut out = Vec::new();
    for sector in sectors(store) {
        for arch in TABLE_ORDER {
            let acc = |case: u8| -> Vec<f64> {
                store
                    .rows()
                    .iter()
                    .filter(|r| r.case_id == case && r.sector == sector && r.arch == arch)
                    .map(|r| r.test_acc)
                    .collect()
            };
            let (c3, c4) = (acc(3), acc(4));
            if c3.is_empty() || c4.is_empty() {
                continue;
            }
            let (m3, s3) = mean_std(&c3);
            let (m4, s4) = mean_std(&c4);
            out.push(SummaryPair {
                sector: sector.clone(),
                arch,
                case3_mean: m3,
                case3_std: s3,
                case3_n: c3.len(),
                case4_mean: m4,
                case4_std: s4,
                case4_n: c4.len(),
            });
        }
    }
    out
}

/// One-sided Welch test (random allocation better than yearly) per cell.
pub fn welch_grid(pairs: &[SummaryPair]) -> Vec<(SummaryPair, Result<TTestResult>)> {
    pairs
        .iter()
        .map(|p| {
            let r = p.random().and_then(|a| welch_one_sided(&a, &p.yearly()?));
            (p.clone(), r)
        })
        .collect()
}

/// `0.1357` for moderate p, `2.82E-05` below 1e-4.
pub fn format_p(p: f64) -> String {
    if p >= 1e-4 {
        format!("{p:.4}")
    } else {
        let s = format!("{p:.2E}");
        match s.split_once('E') {
            Some((m, e)) => {
                let exp: i32 = e.parse().unwrap_or(0);
                format!("{m}E{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
            }
            None => s,
        }
    }
}

/// Architecture-by-sector p-value grid as aligned text.
pub fn welch_grid_text(grid: &[(SummaryPair, Result<TTestResult>)]) -> String {
    let mut sectors: Vec<&str> = Vec::new();
    for (p, _) in grid {
        if !sectors.contains(&p.sector.as_str()) {
            sectors.push(&p.sector);
        }
    }
    let mut out = format!("{:<6}", "");
    for s in &sectors {
        let _ = write!(out, " {s:>12}");
    }
    out.push('\n');
    for a in TABLE_ORDER {
        if !grid.iter().any(|(p, _)| p.arch == a) {
            continue;
        }
        let _ = write!(out, "{:<6}", a.name());
        for s in &sectors {
            let cell = grid
                .iter()
                .find(|(p, _)| p.sector == *s && p.arch == a)
                .map(|(_, r)| match r {
                    Ok(t) => format_p(t.p_value),
                    Err(_) => "n/a".into(),
                })
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, " {cell:>12}");
        }
        out.push('\n');
    }
    out
}

pub fn welch_grid_csv(grid: &[(SummaryPair, Result<TTestResult>)]) -> String {
    let mut out = String::from("sector,arch,t,df,p_value\n");
    for (p, r) in grid {
        match r {
            Ok(t) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.4},{:.6e}",
                    p.sector, p.arch, t.t, t.df, t.p_value
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,,\"{e}\"", p.sector, p.arch);
            }
        }
    }
    out
}

/// Distinct sectors, sorted.
pub fn sectors(store: &ResultStore) -> Vec<String> {
    store
        .rows()
        .iter()
        .map(|r| r.sector.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Sector x architecture ANOVA with interaction on one case's test accuracies.
pub fn two_way_for_case(store: &ResultStore, case_id: u8) -> Result<AnovaTable> {
    let rows = store.filter(|r| r.case_id == case_id);
    if rows.is_empty() {
        return Err(Error::Design(format!("no results for case {case_id}")));
    }
    let y: Vec<f64> = rows.rows().iter().map(|r| r.test_acc).collect();
    let a: Vec<String> = rows.rows().iter().map(|r| r.sector.clone()).collect();
    let b: Vec<String> = rows.rows().iter().map(|r| r.arch.to_string()).collect();
    two_way_anova(&y, &a, &b, ("sector", "arch"))
}

/// Per-sector Tukey groupings of architectures for one case.
pub fn tukey_for_case(store: &ResultStore, case_id: u8, alpha: f64) -> Result<RankTable> {
    let rows = store.filter(|r| r.case_id == case_id);
    if rows.is_empty() {
        return Err(Error::Design(format!("no results for case {case_id}")));
    }
    let mut out = Vec::new();
    for sector in sectors(&rows) {
        let groups: Vec<Group> = Architecture::ALL
            .iter()
            .filter_map(|&a| {
                let v: Vec<f64> = rows
                    .rows()
                    .iter()
                    .filter(|r| r.sector == sector && r.arch == a)
                    .map(|r| r.test_acc)
                    .collect();
                (!v.is_empty()).then(|| Group::new(a.name(), v))
            })
            .collect();
        let g = tukey_hsd(&groups, alpha).map_err(|e| e.context(format!("sector {sector}")))?;
        out.push((sector, g));
    }
    Ok(rank_table(out))
}

pub fn grid_to_csv(report: &GridSearchReport) -> String {
    let mut out = String::from("candidate,monitor_accuracy,train_accuracy,epochs,selected\n");
    for (i, r) in report.rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            r.label,
            r.monitor_accuracy,
            r.train_accuracy,
            r.epochs_run,
            i == report.best_index
        );
    }
    out
}

/// Parsed rows of a grid CSV: (candidate, monitor accuracy, train accuracy).
pub fn read_grid_csv<R: Read>(reader: R) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: rec.position().map_or(0, |p| p.line()),
                    message: format!("column {i} is not a number"),
                })
        };
        out.push((rec.get(0).unwrap_or_default().to_string(), num(1)?, num(2)?));
    }
    Ok(out)
}

const NO_DATA: &str = "no data";

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "## {title}\n");
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Markdown document with one section per results table (Tables 2-10).
pub fn render_report(store: &ResultStore, grid: Option<&[(String, f64, f64)]>) -> String {
    let mut out = String::from("# Credit-rating bench report\n\n");
    let secs = sectors(store);

    section(&mut out, "Table 2: hidden-unit search (case 1, MLP)");
    out.push_str("| Candidate | Monitor accuracy | Train accuracy |\n|---|---|---|\n");
    match grid {
        Some(rows) if !rows.is_empty() => {
            for (label, m, t) in rows {
                let _ = writeln!(out, "| {label} | {} | {} |", fmt3(*m), fmt3(*t));
            }
        }
        _ => {
            let _ = writeln!(out, "| {NO_DATA} | | |");
        }
    }
    out.push('\n');

    section(
        &mut out,
        "Table 3: case 2 accuracy (random allocation, all features)",
    );
    out.push_str("| Sector | Arch | Test mean | Test std | Train mean | Train std |\n|---|---|---|---|---|---|\n");
    let case2 = store.filter(|r| r.case_id == 2);
    if case2.is_empty() {
        let _ = writeln!(out, "| {NO_DATA} | | | | | |");
    }
    for row in crate::experiments::summarize(
        &case2,
        &[
            crate::experiments::GroupKey::Sector,
            crate::experiments::GroupKey::Arch,
        ],
    ) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            row.key[0],
            row.key[1],
            fmt3(row.mean),
            fmt3(row.std),
            fmt3(row.train_mean),
            fmt3(row.train_std)
        );
    }
    out.push('\n');

    section(&mut out, "Table 4: case 1 vs case 2 (MLP test accuracy)");
    out.push_str(
        "| Sector | Case 1 mean | Case 1 std | Case 2 mean | Case 2 std |\n|---|---|---|---|---|\n",
    );
    let mut any = false;
    for s in &secs {
        let acc = |case: u8| -> Vec<f64> {
            store
                .rows()
                .iter()
                .filter(|r| r.case_id == case && &r.sector == s && r.arch == Architecture::Mlp)
                .map(|r| r.test_acc)
                .collect()
        };
        let (c1, c2) = (acc(1), acc(2));
        if c1.is_empty() && c2.is_empty() {
            continue;
        }
        any = true;
        let cell = |v: &[f64]| {
            if v.is_empty() {
                ("-".to_string(), "-".to_string())
            } else {
                let (m, sd) = mean_std(v);
                (fmt3(m), fmt3(sd))
            }
        };
        let ((m1, s1), (m2, s2)) = (cell(&c1), cell(&c2));
        let _ = writeln!(out, "| {s} | {m1} | {s1} | {m2} | {s2} |");
    }
    if !any {
        let _ = writeln!(out, "| {NO_DATA} | | | | |");
    }
    out.push('\n');

    section(&mut out, "Table 5: case 4 test accuracy by held-out year");
    let case4 = store.filter(|r| r.case_id == 4);
    if case4.is_empty() {
        out.push_str("| Year | cnn | cnn2d | lstm | mlp |\n|---|---|---|---|---|\n");
        let _ = writeln!(out, "| {NO_DATA} | | | | |");
    }
    let table5_archs = [
        Architecture::Cnn,
        Architecture::Cnn2d,
        Architecture::Lstm,
        Architecture::Mlp,
    ];
    for s in sectors(&case4) {
        let _ = writeln!(
            out,
            "| {s} | cnn | cnn2d | lstm | mlp |\n|---|---|---|---|---|"
        );
        let years: BTreeSet<i64> = case4
            .rows()
            .iter()
            .filter(|r| r.sector == s)
            .map(|r| r.allocation)
            .collect();
        for y in years {
            let _ = write!(out, "| {y} |");
            for a in table5_archs {
                let cell = case4
                    .rows()
                    .iter()
                    .find(|r| r.sector == s && r.arch == a && r.allocation == y)
                    .map(|r| fmt3(r.test_acc))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if case4.is_empty() {
        out.push('\n');
    }

    let pairs = summary_pairs(store);
    section(
        &mut out,
        "Table 6: case 3 vs case 4 test accuracy, mean (std)",
    );
    out.push_str("| Sector | Arch | Case 3 | Case 4 |\n|---|---|---|---|\n");
    if pairs.is_empty() {
        let _ = writeln!(out, "| {NO_DATA} | | | |");
    }
    for p in &pairs {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4}({:.4}) | {:.4}({:.4}) |",
            p.sector, p.arch, p.case3_mean, p.case3_std, p.case4_mean, p.case4_std
        );
    }
    out.push('\n');

    section(
        &mut out,
        "Table 7: one-sided Welch p-values (case 3 > case 4)",
    );
    if pairs.is_empty() {
        out.push_str("| Arch | Sector |\n|---|---|\n");
        let _ = writeln!(out, "| {NO_DATA} | |");
    } else {
        let _ = writeln!(out, "```\n{}```", welch_grid_text(&welch_grid(&pairs)));
    }
    out.push('\n');

    for case in [3u8, 4] {
        section(
            &mut out,
            &format!("Table 8: two-way ANOVA, case {case} (sector x arch)"),
        );
        match two_way_for_case(store, case) {
            Ok(t) => {
                let _ = writeln!(out, "```\n{}```", t.to_text());
            }
            Err(e) => {
                let _ = writeln!(out, "{NO_DATA}: {e}");
            }
        }
        out.push('\n');
    }

    for (table, case) in [(9, 3u8), (10, 4)] {
        section(
            &mut out,
            &format!("Table {table}: Tukey rank groups, case {case} (alpha {DEFAULT_ALPHA})"),
        );
        match tukey_for_case(store, case, DEFAULT_ALPHA) {
            Ok(t) => {
                let _ = writeln!(out, "```\n{}```", t.to_text());
            }
            Err(e) => {
                let _ = writeln!(out, "{NO_DATA}: {e}");
            }
        }
        out.push('\n');
    }
    out
}
