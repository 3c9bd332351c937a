//! Socioeconomic classification of census block groups.
//!
//! Three standardized indices are built from five indicators; a block group
//! is lower-SES when it falls in the bottom third of any of them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LoadError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGroup {
    pub bg_id: u64,
    pub median_income: f64,
    pub home_ownership: f64,
    pub educ_attainment: f64,
    pub english_prof: f64,
    pub dual_parent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SesClass {
    Lower,
    Medium,
    Higher,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SesClassification {
    pub bg_id: u64,
    /// Tercile of the five-variable composite index.
    pub tercile: SesClass,
    pub lower_ses: bool,
    pub composite: f64,
    pub income: f64,
    pub income_education: f64,
}

/// Population z-scores; a constant column maps to all zeros.
fn zscore(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / sd).collect()
}

fn mean_columns(cols: &[&[f64]]) -> Vec<f64> {
    let n = cols[0].len();
    (0..n)
        .map(|i| cols.iter().map(|c| c[i]).sum::<f64>() / cols.len() as f64)
        .collect()
}

/// Rank-based terciles with ties broken by id: rank `r` (0-based, ascending)
/// of `n` falls in tercile `floor(3r / n)`.
fn terciles(values: &[f64], ids: &[u64]) -> Vec<SesClass> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(ids[a].cmp(&ids[b])));
    let mut out = vec![SesClass::Higher; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = match 3 * rank / n {
            0 => SesClass::Lower,
            1 => SesClass::Medium,
            _ => SesClass::Higher,
        };
    }
    out
}

pub fn classify_ses(rows: &[BlockGroup]) -> Result<Vec<SesClassification>, LoadError> {
    if rows.len() < 3 {
        return Err(LoadError::Consistency(format!(
            "SES classification needs at least 3 block groups, got {}",
            rows.len()
        )));
    }
    for r in rows {
        let vals = [
            r.median_income,
            r.home_ownership,
            r.educ_attainment,
            r.english_prof,
            r.dual_parent,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(LoadError::Consistency(format!(
                "block group {} has a missing indicator",
                r.bg_id
            )));
        }
    }
    let col = |f: fn(&BlockGroup) -> f64| zscore(&rows.iter().map(f).collect::<Vec<_>>());
    let income = col(|r| r.median_income);
    let owner = col(|r| r.home_ownership);
    let educ = col(|r| r.educ_attainment);
    let english = col(|r| r.english_prof);
    let dual = col(|r| r.dual_parent);

    let composite = zscore(&mean_columns(&[&income, &owner, &educ, &english, &dual]));
    let inc_edu = zscore(&mean_columns(&[&income, &educ]));

    let ids: Vec<u64> = rows.iter().map(|r| r.bg_id).collect();
    let t_comp = terciles(&composite, &ids);
    let t_inc = terciles(&income, &ids);
    let t_ie = terciles(&inc_edu, &ids);

    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, r)| SesClassification {
            bg_id: r.bg_id,
            tercile: t_comp[i],
            lower_ses: [t_comp[i], t_inc[i], t_ie[i]].contains(&SesClass::Lower),
            composite: composite[i],
            income: income[i],
            income_education: inc_edu[i],
        })
        .collect())
}

#[derive(Deserialize)]
struct RawBlockGroup {
    bg_id: u64,
    median_income: Option<f64>,
    home_ownership: Option<f64>,
    educ_attainment: Option<f64>,
    english_prof: Option<f64>,
    dual_parent: Option<f64>,
}

/// Reads `blockgroups.csv`; rows with blank indicators are rejected.
pub fn read_block_groups(path: &Path) -> Result<Vec<BlockGroup>, LoadError> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| LoadError::Format {
        file: file.clone(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut ids = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<RawBlockGroup>().enumerate() {
        let row = i + 2;
        let r = rec.map_err(|e| LoadError::Field {
            file: file.clone(),
            row,
            field: "?".into(),
            message: e.to_string(),
        })?;
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| LoadError::Field {
                file: file.clone(),
                row,
                field: field.into(),
                message: "missing value".into(),
            })
        };
        if ids.insert(r.bg_id, row).is_some() {
            return Err(LoadError::Field {
                file: file.clone(),
                row,
                field: "bg_id".into(),
                message: format!("duplicate id {}", r.bg_id),
            });
        }
        out.push(BlockGroup {
            bg_id: r.bg_id,
            median_income: need(r.median_income, "median_income")?,
            home_ownership: need(r.home_ownership, "home_ownership")?,
            educ_attainment: need(r.educ_attainment, "educ_attainment")?,
            english_prof: need(r.english_prof, "english_prof")?,
            dual_parent: need(r.dual_parent, "dual_parent")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg(id: u64, v: [f64; 5]) -> BlockGroup {
        BlockGroup {
            bg_id: id,
            median_income: v[0],
            home_ownership: v[1],
            educ_attainment: v[2],
            english_prof: v[3],
            dual_parent: v[4],
        }
    }

    fn lower_ids(c: &[SesClassification]) -> Vec<u64> {
        c.iter().filter(|c| c.lower_ses).map(|c| c.bg_id).collect()
    }

    #[test]
    fn identical_rows_pick_lowest_id() {
        let rows: Vec<_> = (1..=3).map(|i| bg(i, [5.0; 5])).collect();
        let c = classify_ses(&rows).unwrap();
        assert_eq!(lower_ids(&c), vec![1]);
        assert!(c.iter().all(|c| c.composite == 0.0));
    }

    #[test]
    fn income_only_index_catches_rural_poverty() {
        // row 6: lowest income but otherwise the most advantaged
        let rows = vec![
            bg(1, [30.0, 0.2, 0.1, 0.6, 0.3]),
            bg(2, [40.0, 0.3, 0.2, 0.7, 0.4]),
            bg(3, [50.0, 0.4, 0.3, 0.8, 0.5]),
            bg(4, [60.0, 0.5, 0.4, 0.85, 0.6]),
            bg(5, [70.0, 0.6, 0.5, 0.9, 0.7]),
            bg(6, [10.0, 0.99, 0.99, 0.99, 0.99]),
        ];
        let c = classify_ses(&rows).unwrap();
        let six = c.iter().find(|c| c.bg_id == 6).unwrap();
        assert_eq!(six.tercile, SesClass::Higher);
        assert!(six.lower_ses);
        // composite bottom third is {1, 2}; income adds 6
        assert_eq!(lower_ids(&c), vec![1, 2, 6]);
    }

    #[test]
    fn monotone_rows_agree_across_indices() {
        let rows: Vec<_> = (1..=9)
            .map(|i| {
                let x = i as f64;
                bg(i, [x * 10.0, x / 10.0, x / 20.0, x / 9.0, x / 11.0])
            })
            .collect();
        let c = classify_ses(&rows).unwrap();
        assert_eq!(lower_ids(&c), vec![1, 2, 3]);
        let terc: Vec<_> = c.iter().map(|c| c.tercile).collect();
        assert_eq!(&terc[3..6], &[SesClass::Medium; 3]);
    }

    #[test]
    fn rejects_short_or_missing() {
        assert!(classify_ses(&[bg(1, [1.0; 5]), bg(2, [2.0; 5])]).is_err());
        let mut rows: Vec<_> = (1..=3).map(|i| bg(i, [i as f64; 5])).collect();
        rows[1].dual_parent = f64::NAN;
        assert!(classify_ses(&rows).is_err());
    }

    #[test]
    fn union_covers_composite_bottom_tercile() {
        let rows: Vec<_> = (1..=12u64)
            .map(|i| {
                let x = (i * 7 % 12) as f64;
                let y = (i * 5 % 12) as f64;
                bg(i, [x, y, x + y, (x - y).abs(), i as f64])
            })
            .collect();
        for c in classify_ses(&rows).unwrap() {
            if c.tercile == SesClass::Lower {
                assert!(c.lower_ses);
            }
        }
    }
}
