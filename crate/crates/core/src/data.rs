//! Column-major tabular data with explicit missingness.
//!
//! A [`Dataset`] owns an ordered set of named columns, each either
//! continuous (`f64` values) or categorical (level labels plus per-row
//! level codes). Columns are reference-counted so the counterfactual
//! copies built by the estimators only materialize the one column they
//! overwrite.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Requested type for a column when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// A single column. Missing entries are flagged in the mask; the
/// corresponding value/code slot is unspecified.
#[derive(Debug, Clone)]
pub enum Column {
    Continuous {
        values: Vec<f64>,
        missing: Vec<bool>,
    },
    Categorical {
        /// Stable level order; the first level is the reference level.
        levels: Vec<String>,
        codes: Vec<u32>,
        missing: Vec<bool>,
    },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous { values, .. } => values.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Continuous { missing, .. } => missing[row],
            Column::Categorical { missing, .. } => missing[row],
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Column::Continuous { .. })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Column::Categorical { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            Column::Categorical { levels, .. } => Some(levels),
            Column::Continuous { .. } => None,
        }
    }

    /// Gather rows by index, preserving categorical level lists even when
    /// a level is absent from the selection.
    fn gather(&self, idx: &[usize]) -> Column {
        match self {
            Column::Continuous { values, missing } => Column::Continuous {
                values: idx.iter().map(|&i| values[i]).collect(),
                missing: idx.iter().map(|&i| missing[i]).collect(),
            },
            Column::Categorical {
                levels,
                codes,
                missing,
            } => Column::Categorical {
                levels: levels.clone(),
                codes: idx.iter().map(|&i| codes[i]).collect(),
                missing: idx.iter().map(|&i| missing[i]).collect(),
            },
        }
    }
}

/// Immutable column-major table.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Arc<Column>>,
    index: HashMap<String, usize>,
    n_rows: usize,
}

const MISSING_TOKENS: [&str; 2] = ["", "NA"];

fn is_missing_token(s: &str) -> bool {
    MISSING_TOKENS.contains(&s)
}

/// Order levels: ascending numeric when every label parses as a number,
/// otherwise first-appearance order. Numeric ordering makes "0" the
/// reference level of a 0/1 treatment.
fn order_levels(seen: Vec<String>) -> Vec<String> {
    let nums: Option<Vec<f64>> = seen.iter().map(|s| f64::from_str(s).ok()).collect();
    match nums {
        Some(vals) => {
            let mut pairs: Vec<(f64, String)> = vals.into_iter().zip(seen).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            pairs.into_iter().map(|(_, s)| s).collect()
        }
        None => seen,
    }
}

fn build_categorical(cells: &[Option<String>]) -> Column {
    let mut seen: Vec<String> = Vec::new();
    for cell in cells.iter().flatten() {
        if !seen.contains(cell) {
            seen.push(cell.clone());
        }
    }
    let levels = order_levels(seen);
    let lookup: HashMap<&str, u32> = levels
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let mut codes = Vec::with_capacity(cells.len());
    let mut missing = Vec::with_capacity(cells.len());
    for cell in cells {
        match cell {
            Some(s) => {
                codes.push(lookup[s.as_str()]);
                missing.push(false);
            }
            None => {
                codes.push(0);
                missing.push(true);
            }
        }
    }
    Column::Categorical {
        levels,
        codes,
        missing,
    }
}

fn build_continuous(name: &str, cells: &[Option<String>]) -> Result<Column> {
    let mut values = Vec::with_capacity(cells.len());
    let mut missing = Vec::with_capacity(cells.len());
    for cell in cells {
        match cell {
            Some(s) => {
                let v = f64::from_str(s).map_err(|_| Error::InvalidColumn {
                    name: name.to_string(),
                    message: format!("cannot parse `{s}` as a number"),
                })?;
                values.push(v);
                missing.push(false);
            }
            None => {
                values.push(f64::NAN);
                missing.push(true);
            }
        }
    }
    Ok(Column::Continuous { values, missing })
}

impl Dataset {
    /// Assemble a dataset from named columns. Names must be unique and
    /// non-empty; all columns must share one length.
    pub fn new(cols: Vec<(String, Column)>) -> Result<Self> {
        let mut names = Vec::with_capacity(cols.len());
        let mut columns = Vec::with_capacity(cols.len());
        let mut index = HashMap::new();
        let mut n_rows = None;
        for (name, col) in cols {
            if name.is_empty() {
                return Err(Error::InvalidColumn {
                    name,
                    message: "column name is empty".into(),
                });
            }
            match n_rows {
                None => n_rows = Some(col.len()),
                Some(n) if n != col.len() => {
                    return Err(Error::InvalidColumn {
                        name,
                        message: format!("has {} rows, expected {}", col.len(), n),
                    })
                }
                _ => {}
            }
            if index.insert(name.clone(), columns.len()).is_some() {
                return Err(Error::InvalidColumn {
                    name,
                    message: "duplicate column name".into(),
                });
            }
            names.push(name);
            columns.push(Arc::new(col));
        }
        Ok(Dataset {
            names,
            columns,
            index,
            n_rows: n_rows.unwrap_or(0),
        })
    }

    /// Load an RFC-4180-style CSV with a header row. Empty cells and the
    /// token `NA` are missing. Columns listed in `type_overrides` get the
    /// requested kind; all others are continuous when every non-missing
    /// cell parses as a number, else categorical.
    pub fn load_csv(path: &str, type_overrides: &HashMap<String, ColumnKind>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_csv_reader(file, type_overrides)
    }

    pub fn from_csv_reader<R: std::io::Read>(
        reader: R,
        type_overrides: &HashMap<String, ColumnKind>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(|s| s.to_string())
            .collect();
        for name in type_overrides.keys() {
            if !headers.iter().any(|h| h == name) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            if record.len() != headers.len() {
                return Err(Error::Csv(format!(
                    "ragged row: {} fields, expected {}",
                    record.len(),
                    headers.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                cells[j].push(if is_missing_token(field) {
                    None
                } else {
                    Some(field.to_string())
                });
            }
        }
        let mut cols = Vec::with_capacity(headers.len());
        for (name, col_cells) in headers.into_iter().zip(cells) {
            let kind = type_overrides.get(&name).copied().unwrap_or_else(|| {
                let all_numeric = col_cells
                    .iter()
                    .flatten()
                    .all(|s| f64::from_str(s).is_ok());
                if all_numeric {
                    ColumnKind::Continuous
                } else {
                    ColumnKind::Categorical
                }
            });
            let col = match kind {
                ColumnKind::Continuous => build_continuous(&name, &col_cells)?,
                ColumnKind::Categorical => build_categorical(&col_cells),
            };
            cols.push((name, col));
        }
        Self::new(cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.index
            .get(name)
            .map(|&i| self.columns[i].as_ref())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Rows where none of `vars` is missing, order preserved.
    pub fn complete_cases(&self, vars: &[&str]) -> Result<Dataset> {
        let cols: Vec<&Column> = vars
            .iter()
            .map(|v| self.column(v))
            .collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.n_rows)
            .filter(|&i| cols.iter().all(|c| !c.is_missing(i)))
            .collect();
        Ok(self.select_rows(&keep))
    }

    /// Materialize the given rows (duplicates allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Arc::new(c.gather(idx)))
                .collect(),
            index: self.index.clone(),
            n_rows: idx.len(),
        }
    }

    /// `n_rows` rows drawn uniformly with replacement, deterministic in
    /// `seed`. Categorical level lists are preserved even when a level is
    /// absent from the resample.
    pub fn resample_rows(&self, seed: u64) -> Result<Dataset> {
        if self.n_rows == 0 {
            return Err(Error::EmptyData);
        }
        let mut rng = SplitMix64::new(seed);
        let idx: Vec<usize> = (0..self.n_rows)
            .map(|_| rng.next_index(self.n_rows))
            .collect();
        Ok(self.select_rows(&idx))
    }

    /// New dataset with `name` added or replaced. Cheap for the other
    /// columns (shared `Arc`s).
    pub fn with_column(&self, name: &str, col: Column) -> Result<Dataset> {
        if col.len() != self.n_rows {
            return Err(Error::InvalidColumn {
                name: name.to_string(),
                message: format!("has {} rows, expected {}", col.len(), self.n_rows),
            });
        }
        let mut out = self.clone();
        match out.index.get(name) {
            Some(&i) => out.columns[i] = Arc::new(col),
            None => {
                out.index.insert(name.to_string(), out.columns.len());
                out.names.push(name.to_string());
                out.columns.push(Arc::new(col));
            }
        }
        Ok(out)
    }

    /// Counterfactual copy: every row of categorical column `name` set to
    /// level `level_idx`. Only that one column is materialized.
    pub fn with_level_set(&self, name: &str, level_idx: u32) -> Result<Dataset> {
        let col = self.column(name)?;
        let levels = col
            .levels()
            .ok_or_else(|| Error::InvalidColumn {
                name: name.to_string(),
                message: "not categorical".into(),
            })?
            .to_vec();
        if level_idx as usize >= levels.len() {
            return Err(Error::InvalidColumn {
                name: name.to_string(),
                message: format!("level index {level_idx} out of range"),
            });
        }
        self.with_column(
            name,
            Column::Categorical {
                levels,
                codes: vec![level_idx; self.n_rows],
                missing: vec![false; self.n_rows],
            },
        )
    }

    /// Continuous values of `name`; error if categorical or any row missing.
    pub fn continuous_values(&self, name: &str) -> Result<Vec<f64>> {
        match self.column(name)? {
            Column::Continuous { values, missing } => {
                if missing.iter().any(|&m| m) {
                    return Err(Error::InvalidColumn {
                        name: name.to_string(),
                        message: "contains missing values".into(),
                    });
                }
                Ok(values.clone())
            }
            Column::Categorical { .. } => Err(Error::InvalidColumn {
                name: name.to_string(),
                message: "expected a continuous column".into(),
            }),
        }
    }

    /// 0/1 indicator of the non-reference level of a two-level categorical
    /// column; error on missing rows or wrong arity.
    pub fn binary_indicator(&self, name: &str) -> Result<Vec<f64>> {
        match self.column(name)? {
            Column::Categorical {
                levels,
                codes,
                missing,
            } => {
                if levels.len() != 2 {
                    return Err(Error::InvalidColumn {
                        name: name.to_string(),
                        message: format!("expected 2 levels, found {}", levels.len()),
                    });
                }
                if missing.iter().any(|&m| m) {
                    return Err(Error::InvalidColumn {
                        name: name.to_string(),
                        message: "contains missing values".into(),
                    });
                }
                Ok(codes.iter().map(|&c| if c == 1 { 1.0 } else { 0.0 }).collect())
            }
            Column::Continuous { .. } => Err(Error::InvalidColumn {
                name: name.to_string(),
                message: "expected a categorical column".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(pairs: &[(&str, ColumnKind)]) -> HashMap<String, ColumnKind> {
        pairs
            .iter()
            .map(|(n, k)| (n.to_string(), *k))
            .collect()
    }

    #[test]
    fn minimal_parse_with_override() {
        let csv = "z,y\n1,2.0\n0,1.0\n1,3.0";
        let d = Dataset::from_csv_reader(
            csv.as_bytes(),
            &overrides(&[("z", ColumnKind::Categorical)]),
        )
        .unwrap();
        assert_eq!(d.n_rows(), 3);
        let z = d.column("z").unwrap();
        assert_eq!(z.levels().unwrap(), &["0".to_string(), "1".to_string()]);
        assert!(d.column("y").unwrap().is_continuous());
    }

    #[test]
    fn na_token_sets_missing_mask() {
        let csv = "x,k\n1.5,a\nNA,b\n,c\n2.5,NA";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        let x = d.column("x").unwrap();
        assert!(!x.is_missing(0));
        assert!(x.is_missing(1));
        assert!(x.is_missing(2));
        assert!(!x.is_missing(3));
        assert!(d.column("k").unwrap().is_missing(3));
    }

    #[test]
    fn numeric_levels_sort_ascending() {
        let csv = "g\n10\n2\n10\n1";
        let d = Dataset::from_csv_reader(
            csv.as_bytes(),
            &overrides(&[("g", ColumnKind::Categorical)]),
        )
        .unwrap();
        assert_eq!(
            d.column("g").unwrap().levels().unwrap(),
            &["1".to_string(), "2".to_string(), "10".to_string()]
        );
    }

    #[test]
    fn text_levels_keep_first_appearance_order() {
        let csv = "g\nb\na\nb\nc";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        assert_eq!(
            d.column("g").unwrap().levels().unwrap(),
            &["b".to_string(), "a".to_string(), "c".to_string()]
        );
    }

    #[test]
    fn override_of_absent_column_errors() {
        let csv = "x\n1";
        let err = Dataset::from_csv_reader(
            csv.as_bytes(),
            &overrides(&[("nope", ColumnKind::Categorical)]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(_)));
    }

    #[test]
    fn ragged_rows_error() {
        let csv = "a,b\n1,2\n3";
        assert!(Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).is_err());
    }

    #[test]
    fn complete_cases_counts_and_identity() {
        let csv = "y,x\n1,4\nNA,5\n3,6\nNA,7\n5,8";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        let filtered = d.complete_cases(&["y"]).unwrap();
        assert_eq!(filtered.n_rows(), 3);
        assert_eq!(filtered.continuous_values("x").unwrap(), vec![4.0, 6.0, 8.0]);

        // no-missing dataset is unchanged
        let clean = d.complete_cases(&["x"]).unwrap();
        assert_eq!(clean.n_rows(), 5);

        // idempotence
        let twice = filtered.complete_cases(&["y"]).unwrap();
        assert_eq!(twice.n_rows(), filtered.n_rows());
    }

    #[test]
    fn complete_cases_unknown_var_errors() {
        let csv = "y\n1";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        assert!(d.complete_cases(&["missing_var"]).is_err());
    }

    #[test]
    fn resample_single_row() {
        let csv = "y\n9.5";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        let r = d.resample_rows(3).unwrap();
        assert_eq!(r.n_rows(), 1);
        assert_eq!(r.continuous_values("y").unwrap(), vec![9.5]);
    }

    #[test]
    fn resample_is_deterministic_and_length_preserving() {
        let csv = "y\n1\n2\n3\n4\n5\n6\n7";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        let a = d.resample_rows(99).unwrap();
        let b = d.resample_rows(99).unwrap();
        assert_eq!(a.n_rows(), d.n_rows());
        assert_eq!(
            a.continuous_values("y").unwrap(),
            b.continuous_values("y").unwrap()
        );
    }

    // Independent oracle: SplitMix64 written out from its published
    // constants, indices by modulo reduction over 4 rows.
    #[test]
    fn resample_matches_reference_generator_trace() {
        let csv = "y\n10\n20\n30\n40";
        let d = Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap();
        let seed = 2024u64;
        let expected: Vec<f64> = {
            let mut s = seed;
            let mut out = Vec::new();
            for _ in 0..4 {
                s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = s;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                out.push(((z % 4) as usize * 10 + 10) as f64);
            }
            out
        };
        let got = d
            .resample_rows(seed)
            .unwrap()
            .continuous_values("y")
            .unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn resample_empty_errors() {
        let d = Dataset::new(vec![(
            "y".to_string(),
            Column::Continuous {
                values: vec![],
                missing: vec![],
            },
        )])
        .unwrap();
        assert!(d.resample_rows(1).is_err());
    }

    #[test]
    fn level_list_survives_resample() {
        let csv = "g\n0\n0\n0\n1";
        let d = Dataset::from_csv_reader(
            csv.as_bytes(),
            &overrides(&[("g", ColumnKind::Categorical)]),
        )
        .unwrap();
        // seed chosen arbitrarily; whatever rows are drawn, levels persist
        let r = d.resample_rows(5).unwrap();
        assert_eq!(r.column("g").unwrap().levels().unwrap().len(), 2);
    }

    #[test]
    fn counterfactual_copy_overrides_one_column() {
        let csv = "z,y\n0,1\n1,2\n0,3";
        let d = Dataset::from_csv_reader(
            csv.as_bytes(),
            &overrides(&[("z", ColumnKind::Categorical)]),
        )
        .unwrap();
        let d1 = d.with_level_set("z", 1).unwrap();
        assert_eq!(d1.binary_indicator("z").unwrap(), vec![1.0, 1.0, 1.0]);
        // original untouched
        assert_eq!(d.binary_indicator("z").unwrap(), vec![0.0, 1.0, 0.0]);
        // y shared, not copied
        assert_eq!(d1.continuous_values("y").unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
