//! Studentized range distribution and Tukey-Kramer multiple comparison
//! with rank groupings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::anova::{one_way_anova, Group};
use super::special::{gauss_legendre, integrate, normal_cdf, normal_pdf};
use crate::error::{Error, Result};

const INNER_PANELS: usize = 24;
const OUTER_PANELS: usize = 32;
const RULE_POINTS: usize = 12;
const Z_LIMIT: f64 = 8.5;

/// P(range of k standard normals <= w).
fn normal_range_cdf(w: f64, k: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let inner = |z: f64| normal_pdf(z) * (normal_cdf(z) - normal_cdf(z - w)).powi(k as i32 - 1);
    (k as f64 * integrate(inner, -Z_LIMIT, Z_LIMIT, INNER_PANELS, rule)).min(1.0)
}

/// P(Q > q) for the studentized range of `k` means with `df` error degrees of freedom.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df > 0.0, "studentized range needs df > 0");
    if q <= 0.0 {
        return 1.0;
    }
    if q.is_infinite() {
        return 0.0;
    }
    let rule = gauss_legendre(RULE_POINTS);
    if df > 1e5 {
        return (1.0 - normal_range_cdf(q, k, &rule)).clamp(0.0, 1.0);
    }
    // density of s = sqrt(chi2_df / df)
    let half = 0.5 * df;
    let ln_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_norm + (df - 1.0) * s.ln() - half * s * s).exp()
        }
    };
    let spread = 12.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let cdf = integrate(
        |s| density(s) * normal_range_cdf(q * s, k, &rule),
        lo,
        hi,
        OUTER_PANELS,
        &rule,
    );
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Critical value q with `studentized_range_sf(q, k, df) = alpha`, by bisection.
pub fn studentized_range_inverse(alpha: f64, k: usize, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while studentized_range_sf(hi, k, df) > alpha {
        hi *= 2.0;
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_sf(mid, k, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub first: String,
    pub second: String,
    /// mean(first) - mean(second)
    pub difference: f64,
    pub q: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyGrouping {
    pub alpha: f64,
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    pub sizes: Vec<usize>,
    pub ms_within: f64,
    pub df_within: f64,
    pub comparisons: Vec<PairwiseComparison>,
    /// Level indices by descending mean; position 0 is rank 1.
    pub ranking: Vec<usize>,
    /// Connected components of non-significant pairs, each listed by rank,
    /// ordered by their best member.
    pub groups: Vec<Vec<usize>>,
}

impl TukeyGrouping {
    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// 1-based rank of a level (1 = highest mean).
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        let i = self.index(label)?;
        self.ranking.iter().position(|&r| r == i).map(|p| p + 1)
    }

    /// True when the level is rank 1 or indistinguishable from it.
    pub fn in_top_group(&self, label: &str) -> bool {
        match self.index(label) {
            Some(i) => self.groups[0].contains(&i),
            None => false,
        }
    }

    /// `[lstm cnn2d] [cnn] [mlp]`
    pub fn format_row(&self) -> String {
        self.groups
            .iter()
            .map(|g| {
                format!(
                    "[{}]",
                    g.iter()
                        .map(|&i| self.labels[i].as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn distinguishable(&self, a: &str, b: &str) -> Option<bool> {
        self.comparisons
            .iter()
            .find(|c| (c.first == a && c.second == b) || (c.first == b && c.second == a))
            .map(|c| c.significant)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// All-pairs Tukey-Kramer comparison at level `alpha`.
pub fn tukey_hsd(groups: &[Group], alpha: f64) -> Result<TukeyGrouping> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let table = one_way_anova(groups)?;
    let res = table.residual();
    let ms_within = res.sum_sq / res.df;
    let df_within = res.df;
    let k = groups.len();
    let means: Vec<f64> = groups.iter().map(Group::mean).collect();
    let sizes: Vec<usize> = groups.iter().map(|g| g.values.len()).collect();
    let mut parent: Vec<usize> = (0..k).collect();
    let mut comparisons = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let diff = means[i] - means[j];
            let se = (0.5 * ms_within * (1.0 / sizes[i] as f64 + 1.0 / sizes[j] as f64)).sqrt();
            let q = if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let p = studentized_range_sf(q, k, df_within);
            let significant = p < alpha;
            if !significant {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
            comparisons.push(PairwiseComparison {
                first: groups[i].label.clone(),
                second: groups[j].label.clone(),
                difference: diff,
                q,
                p_adjusted: p,
                significant,
            });
        }
    }
    let mut ranking: Vec<usize> = (0..k).collect();
    ranking.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    let mut grouped: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; k];
    for &i in &ranking {
        let r = find(&mut parent, i);
        match root_slot[r] {
            Some(slot) => grouped[slot].push(i),
            None => {
                root_slot[r] = Some(grouped.len());
                grouped.push(vec![i]);
            }
        }
    }
    Ok(TukeyGrouping {
        alpha,
        labels: groups.iter().map(|g| g.label.clone()).collect(),
        means,
        sizes,
        ms_within,
        df_within,
        comparisons,
        ranking,
        groups: grouped,
    })
}

/// One rank row per sector, mirroring the circled rank tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<(String, TukeyGrouping)>,
}

pub fn rank_table(groupings: Vec<(String, TukeyGrouping)>) -> RankTable {
    RankTable { rows: groupings }
}

impl RankTable {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (sector, g) in &self.rows {
            let _ = writeln!(out, "{sector:<width$}  {}", g.format_row());
        }
        out
    }

    /// `sector,rank,arch,mean,group`; group numbers start at 1 for the top bracket.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sector,rank,arch,mean,group\n");
        for (sector, g) in &self.rows {
            for (pos, &i) in g.ranking.iter().enumerate() {
                let group = g.groups.iter().position(|grp| grp.contains(&i)).unwrap() + 1;
                let _ = writeln!(
                    out,
                    "{sector},{},{},{:.6},{group}",
                    pos + 1,
                    g.labels[i],
                    g.means[i]
                );
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let k = self
            .rows
            .iter()
            .map(|(_, g)| g.labels.len())
            .max()
            .unwrap_or(0);
        let mut out = String::from("| Sector |");
        for r in 1..=k {
            let _ = write!(out, " Rank {r} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(k));
        out.push('\n');
        for (sector, g) in &self.rows {
            let _ = write!(out, "| {sector} |");
            for &i in &g.ranking {
                let group = g.groups.iter().find(|grp| grp.contains(&i)).unwrap();
                let cell = if group.len() > 1 {
                    format!("({})", g.labels[i])
                } else {
                    g.labels[i].clone()
                };
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::student_t_sf;

    #[test]
    fn sf_at_zero_and_monotone() {
        assert_eq!(studentized_range_sf(0.0, 3, 12.0), 1.0);
        let mut prev = 1.0;
        for i in 1..40 {
            let v = studentized_range_sf(i as f64 * 0.2, 4, 10.0);
            assert!(v < prev, "{i}");
            prev = v;
        }
    }

    #[test]
    fn two_means_reduce_to_t() {
        // Q = sqrt(2) |T| for k = 2
        for (q, df) in [(1.0, 5.0), (2.5, 12.0), (3.6, 30.0), (4.0, 2.0)] {
            let oracle = 2.0 * student_t_sf(q / std::f64::consts::SQRT_2, df);
            assert!(
                (studentized_range_sf(q, 2, df) - oracle).abs() < 5e-5,
                "q={q} df={df}"
            );
        }
    }

    #[test]
    fn published_critical_values() {
        for (k, df, expected) in [
            (3, 12.0, 3.773),
            (4, 20.0, 3.958),
            (3, f64::INFINITY, 3.314),
            (5, 60.0, 3.977),
        ] {
            let q = studentized_range_inverse(0.05, k, df);
            assert!((q - expected).abs() < 3e-3, "k={k} df={df}: {q}");
        }
    }

    fn noisy(label: &str, mean: f64, sd: f64, n: usize) -> Group {
        // deterministic alternating +-sd pattern; sample std ~ sd
        Group::new(
            label,
            (0..n)
                .map(|i| mean + if i % 2 == 0 { sd } else { -sd })
                .collect(),
        )
    }

    #[test]
    fn equal_means_single_group() {
        let g = vec![
            noisy("a", 0.5, 0.1, 10),
            noisy("b", 0.5, 0.1, 10),
            noisy("c", 0.5, 0.1, 10),
        ];
        let t = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(t.groups.len(), 1);
        assert_eq!(t.format_row(), "[a b c]");
    }

    #[test]
    fn two_pairs() {
        let g = vec![
            noisy("A", 0.0, 0.02, 15),
            noisy("B", 0.01, 0.02, 15),
            noisy("C", 1.0, 0.02, 15),
            noisy("D", 1.01, 0.02, 15),
        ];
        let t = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(t.format_row(), "[D C] [B A]");
        assert_eq!(t.rank_of("D"), Some(1));
        assert!(t.in_top_group("C"));
        assert!(!t.in_top_group("A"));
        assert_eq!(t.distinguishable("A", "C"), Some(true));
    }

    #[test]
    fn chained_overlap_becomes_one_component() {
        // A~B and B~C but A vs C significant: components merge all three
        let g = vec![
            noisy("A", 0.0, 1.0, 12),
            noisy("B", 0.9, 1.0, 12),
            noisy("C", 1.8, 1.0, 12),
        ];
        let t = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(t.distinguishable("A", "C"), Some(true));
        assert_eq!(t.distinguishable("A", "B"), Some(false));
        assert_eq!(t.groups.len(), 1);
    }

    #[test]
    fn table_formats() {
        let g = vec![noisy("mlp", 0.0, 0.01, 6), noisy("cnn", 1.0, 0.01, 6)];
        let table = rank_table(vec![("energy".into(), tukey_hsd(&g, 0.05).unwrap())]);
        assert_eq!(table.to_text(), "energy  [cnn] [mlp]\n");
        assert_eq!(
            table.to_csv().lines().nth(1).unwrap(),
            "energy,1,cnn,1.000000,1"
        );
        assert!(table.to_markdown().contains("| energy | cnn | mlp |"));
    }
}
