//! One-way and two-way (with interaction) analysis of variance.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::f_sf;
use crate::error::{Error, Result};

/// A labelled sample for one level of a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    pub values: Vec<f64>,
}

impl Group {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub source: String,
    pub sum_sq: f64,
    pub df: f64,
    /// None on the residual row.
    pub f: Option<f64>,
    pub p_value: Option<f64>,
}

impl AnovaRow {
    pub fn mean_sq(&self) -> f64 {
        self.sum_sq / self.df
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
}

impl AnovaTable {
    fn from_effects(effects: Vec<(String, f64, f64)>, ss_res: f64, df_res: f64) -> Self {
        let ms_res = ss_res / df_res;
        let mut rows: Vec<AnovaRow> = effects
            .into_iter()
            .map(|(source, ss, df)| {
                let ss = ss.max(0.0);
                let f = if ms_res > 0.0 {
                    (ss / df) / ms_res
                } else if ss > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                AnovaRow {
                    source,
                    sum_sq: ss,
                    df,
                    f: Some(f),
                    p_value: Some(f_sf(f, df, df_res)),
                }
            })
            .collect();
        rows.push(AnovaRow {
            source: "Residual".into(),
            sum_sq: ss_res.max(0.0),
            df: df_res,
            f: None,
            p_value: None,
        });
        Self { rows }
    }

    pub fn row(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn residual(&self) -> &AnovaRow {
        self.rows.last().expect("table has a residual row")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,sum_sq,df,F,PR(>F)\n");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.6e},{},{},{}",
                r.source,
                r.sum_sq,
                r.df,
                opt(r.f),
                opt(r.p_value)
            );
        }
        out
    }

    /// Aligned text block with the usual `sum_sq df F PR(>F)` columns.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.source.len())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = format!(
            "{:<width$} {:>14} {:>6} {:>12} {:>12}\n",
            "", "sum_sq", "df", "F", "PR(>F)"
        );
        for r in &self.rows {
            let f =
                r.f.map(|x| format!("{x:.4}"))
                    .unwrap_or_else(|| "NaN".into());
            let p = r
                .p_value
                .map(|x| format!("{x:.4e}"))
                .unwrap_or_else(|| "NaN".into());
            let _ = writeln!(
                out,
                "{:<width$} {:>14.6} {:>6} {:>12} {:>12}",
                r.source, r.sum_sq, r.df, f, p
            );
        }
        out
    }
}

fn total_ss(values: impl Iterator<Item = f64> + Clone) -> (f64, usize) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum(), n)
}

/// True when every value equals the first up to rounding.
fn all_identical(values: impl Iterator<Item = f64> + Clone) -> bool {
    let Some(first) = values.clone().next() else {
        return true;
    };
    let scale = values.clone().fold(first.abs(), |m, v| m.max(v.abs()));
    values
        .into_iter()
        .all(|v| (v - first).abs() <= 4.0 * f64::EPSILON * scale)
}

/// Between/within decomposition; rows `Between` and `Residual`.
pub fn one_way_anova(groups: &[Group]) -> Result<AnovaTable> {
    if groups.len() < 2 {
        return Err(Error::Design(format!(
            "one-way ANOVA needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.values.is_empty()) {
        return Err(Error::Design(format!("group '{}' is empty", g.label)));
    }
    let (sst, n) = total_ss(groups.iter().flat_map(|g| g.values.iter().copied()));
    let k = groups.len();
    if n <= k {
        return Err(Error::Design(format!(
            "{n} observations leave no residual degrees of freedom for {k} groups"
        )));
    }
    if sst == 0.0 || all_identical(groups.iter().flat_map(|g| g.values.iter().copied())) {
        return Err(Error::ZeroVariance("all observations are identical".into()));
    }
    let grand = groups.iter().flat_map(|g| &g.values).sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.mean();
        ssb += g.values.len() as f64 * (m - grand).powi(2);
        ssw += g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    Ok(AnovaTable::from_effects(
        vec![("Between".into(), ssb, (k - 1) as f64)],
        ssw,
        (n - k) as f64,
    ))
}

/// Level index per observation, levels in order of first appearance.
fn encode_levels<S: AsRef<str>>(values: &[S]) -> (Vec<String>, Vec<usize>) {
    let mut levels: Vec<String> = Vec::new();
    let codes = values
        .iter()
        .map(|v| {
            let v = v.as_ref();
            match levels.iter().position(|l| l == v) {
                Some(i) => i,
                None => {
                    levels.push(v.to_string());
                    levels.len() - 1
                }
            }
        })
        .collect();
    (levels, codes)
}

/// Encoded two-factor layout with per-cell counts.
struct Layout {
    names: [String; 2],
    a_levels: Vec<String>,
    b_levels: Vec<String>,
    a: Vec<usize>,
    b: Vec<usize>,
    y: Vec<f64>,
    counts: Vec<usize>,
}

impl Layout {
    fn new<S: AsRef<str>>(
        y: &[f64],
        factor_a: &[S],
        factor_b: &[S],
        names: (&str, &str),
    ) -> Result<Self> {
        if factor_a.len() != y.len() || factor_b.len() != y.len() {
            return Err(Error::Design(format!(
                "{} responses but {} / {} factor labels",
                y.len(),
                factor_a.len(),
                factor_b.len()
            )));
        }
        let (a_levels, a) = encode_levels(factor_a);
        let (b_levels, b) = encode_levels(factor_b);
        for (name, levels) in [(names.0, &a_levels), (names.1, &b_levels)] {
            if levels.len() < 2 {
                return Err(Error::Design(format!(
                    "factor {name} needs at least 2 levels, got {}",
                    levels.len()
                )));
            }
        }
        let nb = b_levels.len();
        let mut counts = vec![0usize; a_levels.len() * nb];
        for (&i, &j) in a.iter().zip(&b) {
            counts[i * nb + j] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Design(format!(
                "cell ({}={}, {}={}) has no observations",
                names.0,
                a_levels[c / nb],
                names.1,
                b_levels[c % nb]
            )));
        }
        let cells = counts.len();
        if y.len() <= cells {
            return Err(Error::Design(format!(
                "{} observations in {cells} cells leave no residual degrees of freedom",
                y.len()
            )));
        }
        let (sst, _) = total_ss(y.iter().copied());
        if sst == 0.0 || all_identical(y.iter().copied()) {
            return Err(Error::ZeroVariance("all responses are identical".into()));
        }
        Ok(Self {
            names: [names.0.to_string(), names.1.to_string()],
            a_levels,
            b_levels,
            a,
            b,
            y: y.to_vec(),
            counts,
        })
    }

    fn is_balanced(&self) -> bool {
        self.counts.iter().all(|&c| c == self.counts[0])
    }

    fn level_means(&self, codes: &[usize], n_levels: usize) -> Vec<f64> {
        let mut sum = vec![0.0; n_levels];
        let mut cnt = vec![0usize; n_levels];
        for (&c, &v) in codes.iter().zip(&self.y) {
            sum[c] += v;
            cnt[c] += 1;
        }
        sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect()
    }

    fn cell_means(&self) -> Vec<f64> {
        let nb = self.b_levels.len();
        let cells: Vec<usize> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&i, &j)| i * nb + j)
            .collect();
        self.level_means(&cells, self.counts.len())
    }

    fn cell_of(&self, obs: usize) -> usize {
        self.a[obs] * self.b_levels.len() + self.b[obs]
    }

    fn dfs(&self) -> [f64; 4] {
        let (na, nb) = (self.a_levels.len() as f64, self.b_levels.len() as f64);
        [
            na - 1.0,
            nb - 1.0,
            (na - 1.0) * (nb - 1.0),
            self.y.len() as f64 - na * nb,
        ]
    }

    fn residual_ss(&self) -> f64 {
        let cm = self.cell_means();
        (0..self.y.len())
            .map(|i| (self.y[i] - cm[self.cell_of(i)]).powi(2))
            .sum()
    }

    fn table(&self, ss_a: f64, ss_b: f64, ss_ab: f64) -> AnovaTable {
        let [da, db, dab, dres] = self.dfs();
        let interaction = format!("{}:{}", self.names[0], self.names[1]);
        AnovaTable::from_effects(
            vec![
                (self.names[0].clone(), ss_a, da),
                (self.names[1].clone(), ss_b, db),
                (interaction, ss_ab, dab),
            ],
            self.residual_ss(),
            dres,
        )
    }

    /// Fitted values of the additive model, by least squares on a
    /// treatment-coded design.
    fn additive_fit(&self) -> Vec<f64> {
        let (na, nb) = (self.a_levels.len(), self.b_levels.len());
        let n = self.y.len();
        let p = na + nb - 1;
        let x = DMatrix::from_fn(n, p, |r, c| {
            if c == 0 {
                1.0
            } else if c < na {
                (self.a[r] == c) as u8 as f64
            } else {
                (self.b[r] == c - na + 1) as u8 as f64
            }
        });
        let q = x.qr().q();
        let y = DVector::from_column_slice(&self.y);
        let fitted = &q * (q.transpose() * y);
        fitted.iter().copied().collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Type II sums of squares from nested model fits: each main effect is
/// adjusted for the other, the interaction for both.
pub fn two_way_anova_type2<S: AsRef<str>>(
    responses: &[f64],
    factor_a: &[S],
    factor_b: &[S],
    names: (&str, &str),
) -> Result<AnovaTable> {
    let l = Layout::new(responses, factor_a, factor_b, names)?;
    let n = responses.len();
    let ma = l.level_means(&l.a, l.a_levels.len());
    let mb = l.level_means(&l.b, l.b_levels.len());
    let fit_a: Vec<f64> = (0..n).map(|i| ma[l.a[i]]).collect();
    let fit_b: Vec<f64> = (0..n).map(|i| mb[l.b[i]]).collect();
    let fit_ab = l.additive_fit();
    let cm = l.cell_means();
    let fit_full: Vec<f64> = (0..n).map(|i| cm[l.cell_of(i)]).collect();
    Ok(l.table(
        sq_dist(&fit_ab, &fit_b),
        sq_dist(&fit_ab, &fit_a),
        sq_dist(&fit_full, &fit_ab),
    ))
}

/// Classical decomposition from marginal and cell means; valid for
/// balanced designs only.
pub fn two_way_anova_balanced<S: AsRef<str>>(
    responses: &[f64],
    factor_a: &[S],
    factor_b: &[S],
    names: (&str, &str),
) -> Result<AnovaTable> {
    let l = Layout::new(responses, factor_a, factor_b, names)?;
    if !l.is_balanced() {
        return Err(Error::Design(
            "classical decomposition requires equal cell sizes".into(),
        ));
    }
    let r = l.counts[0] as f64;
    let (na, nb) = (l.a_levels.len(), l.b_levels.len());
    let grand = responses.iter().sum::<f64>() / responses.len() as f64;
    let ma = l.level_means(&l.a, na);
    let mb = l.level_means(&l.b, nb);
    let cm = l.cell_means();
    let ss_a = r * nb as f64 * ma.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = r * na as f64 * mb.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..na {
        for j in 0..nb {
            ss_ab += r * (cm[i * nb + j] - ma[i] - mb[j] + grand).powi(2);
        }
    }
    Ok(l.table(ss_a, ss_b, ss_ab))
}

/// Two-way ANOVA with interaction. Rows: factor A, factor B, `A:B`, `Residual`.
pub fn two_way_anova<S: AsRef<str>>(
    responses: &[f64],
    factor_a: &[S],
    factor_b: &[S],
    names: (&str, &str),
) -> Result<AnovaTable> {
    let l = Layout::new(responses, factor_a, factor_b, names)?;
    if l.is_balanced() {
        two_way_anova_balanced(responses, factor_a, factor_b, names)
    } else {
        two_way_anova_type2(responses, factor_a, factor_b, names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ss(t: &AnovaTable, src: &str) -> f64 {
        t.row(src).unwrap().sum_sq
    }

    #[test]
    fn one_way_hand_values() {
        // means 2, 5, 8; grand 5; SSB = 4 * (9 + 0 + 9) = 72
        let groups = vec![
            Group::new("a", vec![1.0, 2.0, 2.0, 3.0]),
            Group::new("b", vec![4.0, 5.0, 5.0, 6.0]),
            Group::new("c", vec![7.0, 8.0, 8.0, 9.0]),
        ];
        let t = one_way_anova(&groups).unwrap();
        assert!((ss(&t, "Between") - 72.0).abs() < 1e-12);
        assert!((ss(&t, "Residual") - 6.0).abs() < 1e-12);
        assert!((t.rows[0].f.unwrap() - 36.0 / (6.0 / 9.0)).abs() < 1e-10);
    }

    #[test]
    fn one_way_errors() {
        let same = vec![
            Group::new("a", vec![1.0, 1.0]),
            Group::new("b", vec![1.0, 1.0]),
        ];
        assert!(matches!(one_way_anova(&same), Err(Error::ZeroVariance(_))));
        let rounded = vec![Group::new("a", vec![0.8; 3]), Group::new("b", vec![0.8; 3])];
        assert!(matches!(
            one_way_anova(&rounded),
            Err(Error::ZeroVariance(_))
        ));
        assert!(matches!(one_way_anova(&same[..1]), Err(Error::Design(_))));
        let tiny = vec![Group::new("a", vec![1.0]), Group::new("b", vec![2.0])];
        assert!(matches!(one_way_anova(&tiny), Err(Error::Design(_))));
    }

    fn design(
        cell_means: &[f64],
        reps: usize,
        noise: &[f64],
    ) -> (Vec<f64>, Vec<String>, Vec<String>) {
        let mut y = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (c, m) in cell_means.iter().enumerate() {
            for r in 0..reps {
                y.push(m + noise[r % noise.len()]);
                a.push(format!("a{}", c / 2));
                b.push(format!("b{}", c % 2));
            }
        }
        (y, a, b)
    }

    #[test]
    fn additive_two_by_two() {
        let (y, a, b) = design(&[10.0, 12.0, 20.0, 22.0], 2, &[1.0, -1.0]);
        let t = two_way_anova(&y, &a, &b, ("A", "B")).unwrap();
        // A effect +-5 on 4 obs each: 8 * 25; B effect +-1: 8 * 1
        assert!((ss(&t, "A") - 200.0).abs() < 1e-9);
        assert!((ss(&t, "B") - 8.0).abs() < 1e-9);
        assert!(ss(&t, "A:B").abs() < 1e-9);
        assert!((ss(&t, "Residual") - 8.0).abs() < 1e-9);
    }

    #[test]
    fn interaction_only() {
        let (y, a, b) = design(&[0.0, 1.0, 1.0, 0.0], 3, &[0.1, 0.0, -0.1]);
        let t = two_way_anova(&y, &a, &b, ("A", "B")).unwrap();
        assert!(ss(&t, "A").abs() < 1e-12);
        assert!(ss(&t, "B").abs() < 1e-12);
        assert!(ss(&t, "A:B") > 1.0);
    }

    #[test]
    fn null_factor() {
        let (y, a, b) = design(&[1.0, 1.0, 4.0, 4.0], 2, &[0.5, -0.5]);
        let t = two_way_anova(&y, &a, &b, ("A", "B")).unwrap();
        assert!(ss(&t, "B").abs() < 1e-9);
        assert!(ss(&t, "A:B").abs() < 1e-9);
    }

    #[test]
    fn empty_cell_is_named() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let a = ["x", "x", "y", "y", "y"];
        let b = ["p", "q", "p", "p", "p"];
        let err = two_way_anova(&y, &a, &b, ("sector", "arch")).unwrap_err();
        assert!(
            matches!(err, Error::Design(ref m) if m.contains("sector=y") && m.contains("arch=q")),
            "{err}"
        );
    }

    #[test]
    fn text_and_csv_shapes() {
        let (y, a, b) = design(&[10.0, 12.0, 20.0, 23.0], 2, &[1.0, -1.0]);
        let t = two_way_anova(&y, &a, &b, ("sector", "arch")).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("source,sum_sq,df,F,PR(>F)\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("sector:arch"));
        assert!(t.to_text().lines().next().unwrap().contains("PR(>F)"));
    }
}
