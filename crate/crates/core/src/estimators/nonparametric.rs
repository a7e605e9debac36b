//! Exact small-sample estimators over discrete covariate cells.
//!
//! These are the oracles the parametric estimators are tested against:
//! with saturated models and positivity, parametric standardization,
//! nonparametric standardization, and nonparametric IP weighting agree
//! to floating-point precision.

use std::collections::BTreeMap;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Cell key: level codes of the stratifying covariates.
type Cell = Vec<u32>;

fn cells_of(
    d: &Dataset,
    z: &str,
    xs: &[&str],
) -> Result<(Vec<f64>, Vec<Cell>, BTreeMap<Cell, Vec<usize>>)> {
    let zv = d.binary_indicator(z)?;
    let n = d.n_rows();
    let mut cols = Vec::new();
    for x in xs {
        match d.column(x)? {
            Column::Categorical { codes, missing, .. } => {
                if missing.iter().any(|&m| m) {
                    return Err(Error::Estimation(format!(
                        "covariate `{x}` has missing values"
                    )));
                }
                cols.push(codes.clone());
            }
            Column::Continuous { .. } => {
                return Err(Error::Estimation(format!(
                    "covariate `{x}` must be discrete (categorical)"
                )))
            }
        }
    }
    let mut keys = Vec::with_capacity(n);
    let mut groups: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key: Cell = cols.iter().map(|c| c[i]).collect();
        groups.entry(key.clone()).or_default().push(i);
        keys.push(key);
    }
    Ok((zv, keys, groups))
}

fn cell_label(d: &Dataset, xs: &[&str], cell: &Cell) -> String {
    if xs.is_empty() {
        return "(all)".to_string();
    }
    xs.iter()
        .zip(cell)
        .map(|(x, &code)| {
            let lvl = d
                .column(x)
                .ok()
                .and_then(|c| c.levels().map(|l| l[code as usize].clone()))
                .unwrap_or_else(|| code.to_string());
            format!("{x}={lvl}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_positivity(
    d: &Dataset,
    z: &str,
    xs: &[&str],
    zv: &[f64],
    groups: &BTreeMap<Cell, Vec<usize>>,
) -> Result<()> {
    for (cell, rows) in groups {
        let treated = rows.iter().filter(|&&i| zv[i] == 1.0).count();
        if treated == 0 || treated == rows.len() {
            return Err(Error::Estimation(format!(
                "positivity violated: cell [{}] has no {} rows",
                cell_label(d, xs, cell),
                if treated == 0 { "treated" } else { "untreated" },
            )));
        }
    }
    let _ = z;
    Ok(())
}

/// Σ over cells of (mean of Y among Z = z in the cell) × (cell share).
/// Returns (mean_y1, mean_y0).
pub fn nonparametric_standardization(
    d: &Dataset,
    z: &str,
    y: &str,
    xs: &[&str],
) -> Result<(f64, f64)> {
    let yv = d.continuous_values(y)?;
    let (zv, _, groups) = cells_of(d, z, xs)?;
    check_positivity(d, z, xs, &zv, &groups)?;
    let n = d.n_rows() as f64;
    let mut m1 = 0.0;
    let mut m0 = 0.0;
    for rows in groups.values() {
        let share = rows.len() as f64 / n;
        let (mut s1, mut c1, mut s0, mut c0) = (0.0, 0usize, 0.0, 0usize);
        for &i in rows {
            if zv[i] == 1.0 {
                s1 += yv[i];
                c1 += 1;
            } else {
                s0 += yv[i];
                c0 += 1;
            }
        }
        m1 += share * s1 / c1 as f64;
        m0 += share * s0 / c0 as f64;
    }
    Ok((m1, m0))
}

/// Weighted means of Y among Z = z rows with weights 1/PMF(Z = zᵢ | cell).
/// Returns (mean_y1, mean_y0).
pub fn nonparametric_ipw(d: &Dataset, z: &str, y: &str, xs: &[&str]) -> Result<(f64, f64)> {
    let yv = d.continuous_values(y)?;
    let (zv, keys, groups) = cells_of(d, z, xs)?;
    check_positivity(d, z, xs, &zv, &groups)?;
    let n = d.n_rows() as f64;
    let mut m1 = 0.0;
    let mut m0 = 0.0;
    for i in 0..d.n_rows() {
        let rows = &groups[&keys[i]];
        let n_cell = rows.len() as f64;
        let treated = rows.iter().filter(|&&j| zv[j] == 1.0).count() as f64;
        if zv[i] == 1.0 {
            let pmf = treated / n_cell;
            m1 += yv[i] / pmf;
        } else {
            let pmf = (n_cell - treated) / n_cell;
            m0 += yv[i] / pmf;
        }
    }
    Ok((m1 / n, m0 / n))
}

/// Effect on the three scales from counterfactual means/probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimates {
    pub difference: f64,
    pub ratio: Option<f64>,
    pub odds_ratio: Option<f64>,
}

/// Difference uses the counterfactual means; ratio and odds ratio use the
/// counterfactual outcome probabilities, reported absent on division by
/// zero.
pub fn nonparametric_scales(
    mean_y1: f64,
    mean_y0: f64,
    p_y1_1: f64,
    p_y1_0: f64,
) -> ScaleEstimates {
    let ratio = if p_y1_0 > 0.0 {
        Some(p_y1_1 / p_y1_0)
    } else {
        None
    };
    let odds_ratio = if p_y1_0 > 0.0 && p_y1_0 < 1.0 && p_y1_1 < 1.0 {
        Some((p_y1_1 / (1.0 - p_y1_1)) / (p_y1_0 / (1.0 - p_y1_0)))
    } else {
        None
    };
    ScaleEstimates {
        difference: mean_y1 - mean_y0,
        ratio,
        odds_ratio,
    }
}
