//! The twenty informative financial ratios used as the reduced feature set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_panel::Panel;
use crate::error::{Error, Result};

pub const N_RATIOS: usize = 20;

/// Accounting items the ratios are built from, in field order.
pub const ACCOUNTING_ITEMS: [&str; 19] = [
    "debt",
    "total_debt",
    "ebitda",
    "ffo",
    "interest",
    "cfo",
    "net_profit",
    "nwc",
    "revenue",
    "current_assets",
    "current_liabilities",
    "cash",
    "tangible_net_worth",
    "capital",
    "total_assets",
    "total_fixed_capital",
    "total_fixed_assets",
    "equity",
    "retained_earnings",
];

/// Human-readable ratio labels, `R1` first.
pub const RATIO_LABELS: [&str; N_RATIOS] = [
    "Debt/EBITDA",
    "FFO/Total Debt",
    "EBITDA/Interest",
    "FFO/Interest",
    "CFO/Debt",
    "FFO/Net Profit",
    "NWC/Revenue",
    "Current Assets/Current Liabilities",
    "(FFO+Cash)/Current Liabilities",
    "EBITDA/Revenue",
    "Cash/Total Debt",
    "Total Debt/Tangible Net Worth",
    "Total Debt/Revenue",
    "Debt/Capital",
    "Cash/Total Assets",
    "Total Fixed Capital/Total Fixed Assets",
    "Equity/Total Assets",
    "NWC/Total Assets",
    "Retained Earnings/Total Assets",
    "EBITDA/Total Assets",
];

/// Raw statement items for one company-quarter, in a single currency unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountingFields {
    pub debt: f64,
    pub total_debt: f64,
    pub ebitda: f64,
    pub ffo: f64,
    pub interest: f64,
    pub cfo: f64,
    pub net_profit: f64,
    pub nwc: f64,
    pub revenue: f64,
    pub current_assets: f64,
    pub current_liabilities: f64,
    pub cash: f64,
    pub tangible_net_worth: f64,
    pub capital: f64,
    pub total_assets: f64,
    pub total_fixed_capital: f64,
    pub total_fixed_assets: f64,
    pub equity: f64,
    pub retained_earnings: f64,
}

impl AccountingFields {
    /// Builds from values listed in [`ACCOUNTING_ITEMS`] order.
    pub fn from_slice(v: &[f64; 19]) -> Self {
        Self {
            debt: v[0],
            total_debt: v[1],
            ebitda: v[2],
            ffo: v[3],
            interest: v[4],
            cfo: v[5],
            net_profit: v[6],
            nwc: v[7],
            revenue: v[8],
            current_assets: v[9],
            current_liabilities: v[10],
            cash: v[11],
            tangible_net_worth: v[12],
            capital: v[13],
            total_assets: v[14],
            total_fixed_capital: v[15],
            total_fixed_assets: v[16],
            equity: v[17],
            retained_earnings: v[18],
        }
    }
}

/// `R1..R20`; a ratio whose denominator is zero is stored as 0 with its flag cleared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioVector {
    pub values: [f64; N_RATIOS],
    pub valid: [bool; N_RATIOS],
}

pub fn compute_ratios(f: &AccountingFields) -> RatioVector {
    let pairs: [(f64, f64); N_RATIOS] = [
        (f.debt, f.ebitda),
        (f.ffo, f.total_debt),
        (f.ebitda, f.interest),
        (f.ffo, f.interest),
        (f.cfo, f.debt),
        (f.ffo, f.net_profit),
        (f.nwc, f.revenue),
        (f.current_assets, f.current_liabilities),
        (f.ffo + f.cash, f.current_liabilities),
        (f.ebitda, f.revenue),
        (f.cash, f.total_debt),
        (f.total_debt, f.tangible_net_worth),
        (f.total_debt, f.revenue),
        (f.debt, f.capital),
        (f.cash, f.total_assets),
        (f.total_fixed_capital, f.total_fixed_assets),
        (f.equity, f.total_assets),
        (f.nwc, f.total_assets),
        (f.retained_earnings, f.total_assets),
        (f.ebitda, f.total_assets),
    ];
    let mut values = [0.0; N_RATIOS];
    let mut valid = [false; N_RATIOS];
    for (k, (num, den)) in pairs.into_iter().enumerate() {
        if den != 0.0 {
            values[k] = num / den;
            valid[k] = true;
        }
    }
    RatioVector { values, valid }
}

/// Accounting item name -> panel column name.
pub type FieldMapping = BTreeMap<String, String>;

/// Maps item `i` to column `f{i+1:03}`, matching the synthetic generator's layout.
pub fn default_field_mapping() -> FieldMapping {
    ACCOUNTING_ITEMS
        .iter()
        .enumerate()
        .map(|(i, item)| (item.to_string(), crate::data_panel::feature_column_name(i)))
        .collect()
}

/// Replaces each record's features with its twenty ratios. Missing inputs
/// count as zero.
pub fn ratio_panel(panel: &Panel, mapping: &FieldMapping) -> Result<Panel> {
    if let Some(extra) = mapping
        .keys()
        .find(|k| !ACCOUNTING_ITEMS.contains(&k.as_str()))
    {
        return Err(Error::Config(format!(
            "field_mapping has unknown accounting item '{extra}'"
        )));
    }
    let mut columns = [0usize; 19];
    for (slot, item) in columns.iter_mut().zip(ACCOUNTING_ITEMS) {
        let column = mapping.get(item).ok_or_else(|| {
            Error::Config(format!(
                "field_mapping does not map accounting item '{item}'"
            ))
        })?;
        *slot = panel.column_index(column).ok_or_else(|| {
            Error::Config(format!(
                "field_mapping maps '{item}' to '{column}', which is not a panel column"
            ))
        })?;
    }
    let names = (1..=N_RATIOS).map(|k| format!("R{k}")).collect();
    panel.map_features(names, |r| {
        let mut v = [0.0; 19];
        for (dst, &c) in v.iter_mut().zip(&columns) {
            *dst = r.features[c].unwrap_or(0.0);
        }
        compute_ratios(&AccountingFields::from_slice(&v))
            .values
            .iter()
            .map(|&x| Some(x))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_panel::{feature_column_name, PanelRecord};
    use proptest::prelude::*;

    #[test]
    fn leverage_ratio() {
        let f = AccountingFields {
            debt: 100.0,
            ebitda: 50.0,
            ..Default::default()
        };
        let r = compute_ratios(&f);
        assert_eq!(r.values[0], 2.0);
        assert!(r.valid[0]);
    }

    #[test]
    fn zero_interest_is_flagged() {
        let f = AccountingFields {
            ebitda: 50.0,
            interest: 0.0,
            ..Default::default()
        };
        let r = compute_ratios(&f);
        assert_eq!(r.values[2], 0.0);
        assert!(!r.valid[2]);
    }

    #[test]
    fn all_ones() {
        let r = compute_ratios(&AccountingFields::from_slice(&[1.0; 19]));
        for (k, v) in r.values.iter().enumerate() {
            let expect = if k == 8 { 2.0 } else { 1.0 };
            assert_eq!(*v, expect, "R{}", k + 1);
        }
        assert!(r.valid.iter().all(|&b| b));
    }

    proptest! {
        #[test]
        fn ratios_are_scale_free(vals in prop::array::uniform19(-1e6f64..1e6), c in 1e-3f64..1e3) {
            let f = AccountingFields::from_slice(&vals);
            let scaled = AccountingFields::from_slice(&vals.map(|v| v * c));
            let (a, b) = (compute_ratios(&f), compute_ratios(&scaled));
            prop_assert_eq!(a.valid, b.valid);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    fn panel(values: Vec<Vec<Option<f64>>>) -> Panel {
        let width = values[0].len();
        let recs = values
            .into_iter()
            .enumerate()
            .map(|(i, f)| PanelRecord {
                company_id: format!("C{i}"),
                sector: "energy".into(),
                year: 2010,
                quarter: 1,
                rating: "A".into(),
                features: f,
            })
            .collect();
        Panel::new(
            recs,
            (0..width).map(feature_column_name).collect(),
            "energy",
        )
        .unwrap()
    }

    #[test]
    fn ratio_panel_preserves_records() {
        let p = panel(vec![
            vec![Some(1.0); 25],
            vec![Some(2.0); 25],
            vec![None; 25],
        ]);
        let r = ratio_panel(&p, &default_field_mapping()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.n_features(), 20);
        assert_eq!(r.records()[0].features[8], Some(2.0));
        assert!(r.records()[2].features.iter().all(|v| *v == Some(0.0)));
        assert_eq!(r.records()[1].company_id, "C1");
    }

    #[test]
    fn missing_item_is_named() {
        let p = panel(vec![vec![Some(1.0); 25]]);
        let mut m = default_field_mapping();
        m.remove("cash");
        let err = ratio_panel(&p, &m).unwrap_err();
        assert!(matches!(err, Error::Config(ref msg) if msg.contains("cash")));
    }
}
