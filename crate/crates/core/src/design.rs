//! Numeric expansion of formulas into design matrices.
//!
//! Every design column is a product of primitive factors (a continuous
//! value or a categorical level indicator), so the same column spec can
//! be re-evaluated on new data at prediction time. Categorical variables
//! with k levels expand to k−1 dummy columns against the first
//! (reference) level; interactions are elementwise products of their
//! parents' expansions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::{ModelFormula, Term};

/// One multiplicative factor of a design column.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisFactor {
    /// Raw value of a continuous column.
    Value(String),
    /// 0/1 indicator of `column == level`.
    Indicator(String, String),
}

/// Specification of one design column as a product of factors. An empty
/// factor list is the intercept.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub label: String,
    pub factors: Vec<BasisFactor>,
    /// Index into the formula's term list; `None` for the intercept.
    pub term_index: Option<usize>,
}

/// Everything needed to rebuild the matrix on new data.
#[derive(Debug, Clone)]
pub struct DesignInfo {
    pub formula: ModelFormula,
    pub columns: Vec<ColumnSpec>,
    /// Training-time level lists for every categorical variable used.
    pub cat_levels: BTreeMap<String, Vec<String>>,
}

impl DesignInfo {
    pub fn labels(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.label.as_str()).collect()
    }

    /// Term behind a column label, if any.
    pub fn term_for(&self, label: &str) -> Option<&Term> {
        self.columns
            .iter()
            .find(|c| c.label == label)
            .and_then(|c| c.term_index)
            .map(|i| &self.formula.terms[i])
    }
}

/// Design matrix plus its provenance.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub info: DesignInfo,
    pub values: DMatrix<f64>,
}

fn require_complete(d: &Dataset, var: &str) -> Result<()> {
    let col = d.column(var)?;
    for i in 0..d.n_rows() {
        if col.is_missing(i) {
            return Err(Error::Design(format!(
                "variable `{var}` has missing values; filter to complete cases first"
            )));
        }
    }
    Ok(())
}

/// Expansion of a single variable: one continuous factor or k−1 dummies.
fn variable_expansion(d: &Dataset, var: &str) -> Result<Vec<(String, BasisFactor)>> {
    match d.column(var)? {
        Column::Continuous { .. } => {
            Ok(vec![(var.to_string(), BasisFactor::Value(var.to_string()))])
        }
        Column::Categorical { levels, .. } => Ok(levels
            .iter()
            .skip(1)
            .map(|lvl| {
                (
                    format!("{var}{lvl}"),
                    BasisFactor::Indicator(var.to_string(), lvl.clone()),
                )
            })
            .collect()),
    }
}

/// Build the design matrix and extract the response vector. The dataset
/// must already be complete-case filtered on the formula variables.
pub fn build_design(f: &ModelFormula, d: &Dataset) -> Result<(DesignMatrix, DVector<f64>)> {
    for v in f.variables() {
        require_complete(d, v)?;
    }
    let mut columns = vec![ColumnSpec {
        label: "(Intercept)".to_string(),
        factors: vec![],
        term_index: None,
    }];
    let mut cat_levels = BTreeMap::new();
    let note_levels = |d: &Dataset, var: &str, map: &mut BTreeMap<String, Vec<String>>| {
        if let Ok(col) = d.column(var) {
            if let Some(levels) = col.levels() {
                map.entry(var.to_string()).or_insert_with(|| levels.to_vec());
            }
        }
    };
    for (ti, term) in f.terms.iter().enumerate() {
        match term {
            Term::Main(v) => {
                note_levels(d, v, &mut cat_levels);
                for (label, factor) in variable_expansion(d, v)? {
                    columns.push(ColumnSpec {
                        label,
                        factors: vec![factor],
                        term_index: Some(ti),
                    });
                }
            }
            Term::Square(v) => {
                if !d.column(v)?.is_continuous() {
                    return Err(Error::Design(format!(
                        "square term `{v}^2` requires a continuous variable"
                    )));
                }
                columns.push(ColumnSpec {
                    label: format!("I({v} * {v})"),
                    factors: vec![
                        BasisFactor::Value(v.to_string()),
                        BasisFactor::Value(v.to_string()),
                    ],
                    term_index: Some(ti),
                });
            }
            Term::Interaction(a, b) => {
                note_levels(d, a, &mut cat_levels);
                note_levels(d, b, &mut cat_levels);
                for (la, fa) in variable_expansion(d, a)? {
                    for (lb, fb) in variable_expansion(d, b)? {
                        columns.push(ColumnSpec {
                            label: format!("{la}:{lb}"),
                            factors: vec![fa.clone(), fb.clone()],
                            term_index: Some(ti),
                        });
                    }
                }
            }
        }
    }
    let info = DesignInfo {
        formula: f.clone(),
        columns,
        cat_levels,
    };
    let values = evaluate(&info, d)?;
    let response = extract_response(&f.response, d)?;
    Ok((DesignMatrix { info, values }, response))
}

/// Response as a numeric vector: continuous values directly, or a 0/1
/// coding of a two-level categorical (reference level → 0).
pub fn extract_response(name: &str, d: &Dataset) -> Result<DVector<f64>> {
    match d.column(name)? {
        Column::Continuous { values, .. } => Ok(DVector::from_vec(values.clone())),
        Column::Categorical { levels, codes, .. } => {
            if levels.len() != 2 {
                return Err(Error::Design(format!(
                    "categorical response `{name}` must have exactly 2 levels, found {}",
                    levels.len()
                )));
            }
            Ok(DVector::from_iterator(
                codes.len(),
                codes.iter().map(|&c| if c == 1 { 1.0 } else { 0.0 }),
            ))
        }
    }
}

/// Re-evaluate stored column specs on (possibly new) data, checking that
/// categorical levels are compatible with training.
pub fn evaluate(info: &DesignInfo, d: &Dataset) -> Result<DMatrix<f64>> {
    let n = d.n_rows();
    // Remap each categorical variable's codes onto its training levels.
    let mut remapped: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (var, train_levels) in &info.cat_levels {
        let col = d.column(var)?;
        let (levels, codes) = match col {
            Column::Categorical { levels, codes, .. } => (levels, codes),
            Column::Continuous { .. } => {
                return Err(Error::Design(format!(
                    "variable `{var}` was categorical at fit time"
                )))
            }
        };
        let map: Vec<Option<u32>> = levels
            .iter()
            .map(|lvl| {
                train_levels
                    .iter()
                    .position(|t| t == lvl)
                    .map(|p| p as u32)
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for (i, &c) in codes.iter().enumerate() {
            if col.is_missing(i) {
                return Err(Error::Design(format!(
                    "variable `{var}` has missing values"
                )));
            }
            match map[c as usize] {
                Some(t) => out.push(t),
                None => {
                    return Err(Error::Design(format!(
                        "unseen level `{}` for variable `{var}`",
                        levels[c as usize]
                    )))
                }
            }
        }
        remapped.insert(var.as_str(), out);
    }

    // Resolve each factor to a data view once, then fill column-by-column.
    enum Resolved<'a> {
        Values(&'a [f64]),
        Indicator(&'a [u32], u32),
    }
    let mut m = DMatrix::zeros(n, info.columns.len());
    for (j, spec) in info.columns.iter().enumerate() {
        let mut resolved: Vec<Resolved> = Vec::with_capacity(spec.factors.len());
        for factor in &spec.factors {
            match factor {
                BasisFactor::Value(var) => match d.column(var)? {
                    Column::Continuous { values, missing } => {
                        if missing.iter().any(|&miss| miss) {
                            return Err(Error::Design(format!(
                                "variable `{var}` has missing values"
                            )));
                        }
                        resolved.push(Resolved::Values(values));
                    }
                    Column::Categorical { .. } => {
                        return Err(Error::Design(format!(
                            "variable `{var}` was continuous at fit time"
                        )))
                    }
                },
                BasisFactor::Indicator(var, level) => {
                    let target = info.cat_levels[var]
                        .iter()
                        .position(|l| l == level)
                        .expect("level recorded at fit time") as u32;
                    resolved.push(Resolved::Indicator(&remapped[var.as_str()], target));
                }
            }
        }
        for i in 0..n {
            let mut v = 1.0;
            for r in &resolved {
                v *= match r {
                    Resolved::Values(vals) => vals[i],
                    Resolved::Indicator(codes, target) => {
                        if codes[i] == *target {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
