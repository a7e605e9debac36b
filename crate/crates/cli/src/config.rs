//! Analysis configuration: TOML file plus command-line flags, with flags
//! taking precedence over the file and the file over built-in defaults.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsSection {
    pub data: Option<String>,
    pub outcome: Option<String>,
    pub treatment: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub categorical: Option<Vec<String>>,
    pub simple: Option<bool>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub derive: Option<Vec<String>>,
    /// Estimators the comparison runs; all of them when absent.
    pub methods: Option<Vec<String>>,
}

/// Per-method options; unused keys for a given method are ignored by the
/// dispatcher but must still be known names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub formula: Option<String>,
    pub p_formula: Option<String>,
    pub simple: Option<bool>,
    pub p_simple: Option<bool>,
    pub n_boot: Option<usize>,
    pub sw: Option<bool>,
    pub weight_form: Option<String>,
    #[serde(rename = "type")]
    pub kind: Option<String>,
    pub grid: Option<String>,
    pub grp_width: Option<f64>,
    pub quant: Option<bool>,
    pub contrasts: Option<String>,
    pub iv: Option<String>,
    pub variant: Option<String>,
    pub p_scores: Option<String>,
    pub predictions: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub defaults: DefaultsSection,
    pub standardization: Option<MethodSection>,
    pub ipweighting: Option<MethodSection>,
    #[serde(rename = "outcome-regression")]
    pub outcome_regression: Option<MethodSection>,
    #[serde(rename = "propensity-matching")]
    pub propensity_matching: Option<MethodSection>,
    pub gestimation: Option<MethodSection>,
    #[serde(rename = "doubly-robust")]
    pub doubly_robust: Option<MethodSection>,
    pub iv: Option<MethodSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config `{}`: {e}", path.display()))
    }

    pub fn section(&self, method: &str) -> MethodSection {
        match method {
            "standardization" => self.standardization.clone(),
            "ipweighting" => self.ipweighting.clone(),
            "outcome-regression" => self.outcome_regression.clone(),
            "propensity-matching" => self.propensity_matching.clone(),
            "gestimation" => self.gestimation.clone(),
            "doubly-robust" => self.doubly_robust.clone(),
            "iv" => self.iv.clone(),
            _ => None,
        }
        .unwrap_or_default()
    }
}

impl MethodSection {
    /// Command-line values take precedence over this section's values.
    pub fn overridden_by(&self, cli: &MethodSection) -> MethodSection {
        MethodSection {
            formula: cli.formula.clone().or_else(|| self.formula.clone()),
            p_formula: cli.p_formula.clone().or_else(|| self.p_formula.clone()),
            simple: cli.simple.or(self.simple),
            p_simple: cli.p_simple.or(self.p_simple),
            n_boot: cli.n_boot.or(self.n_boot),
            sw: cli.sw.or(self.sw),
            weight_form: cli.weight_form.clone().or_else(|| self.weight_form.clone()),
            kind: cli.kind.clone().or_else(|| self.kind.clone()),
            grid: cli.grid.clone().or_else(|| self.grid.clone()),
            grp_width: cli.grp_width.or(self.grp_width),
            quant: cli.quant.or(self.quant),
            contrasts: cli.contrasts.clone().or_else(|| self.contrasts.clone()),
            iv: cli.iv.clone().or_else(|| self.iv.clone()),
            variant: cli.variant.clone().or_else(|| self.variant.clone()),
            p_scores: cli.p_scores.clone().or_else(|| self.p_scores.clone()),
            predictions: cli.predictions.clone().or_else(|| self.predictions.clone()),
        }
    }
}

/// `"age=21,30,40;smokeintensity=5,20"` → ordered (name, values) pairs.
pub fn parse_contrasts(s: &str) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut out = Vec::new();
    for part in s.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| format!("contrast `{part}` must look like `name=v1,v2`"))?;
        let values: Vec<f64> = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad contrast value `{v}`"))
            })
            .collect::<Result<_, _>>()?;
        if values.is_empty() {
            return Err(format!("contrast `{name}` has no values"));
        }
        out.push((name.trim().to_string(), values));
    }
    if out.is_empty() {
        return Err("empty contrast specification".into());
    }
    Ok(out)
}

/// `"2:5:0.05"` → inclusive grid from 2 to 5 in steps of 0.05.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid `{s}` must look like `lo:hi:step`"));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid bound `{}`", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid bound `{}`", parts[1]))?;
    let step: f64 = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid step `{}`", parts[2]))?;
    if step <= 0.0 || hi < lo {
        return Err(format!("grid `{s}` must satisfy lo <= hi and step > 0"));
    }
    let n = ((hi - lo) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - hi).abs() < 1e-9 {
            *last = hi;
        }
    }
    grid.retain(|v| *v <= hi + 1e-12);
    Ok(grid)
}

/// Read a numeric column vector from a single-column CSV (header row).
pub fn read_vector(path: &str) -> Result<Vec<f64>, String> {
    let d = causal_core::Dataset::load_csv(path, &HashMap::new()).map_err(|e| e.to_string())?;
    let name = d
        .names()
        .first()
        .ok_or_else(|| format!("`{path}` has no columns"))?
        .clone();
    d.continuous_values(&name).map_err(|e| e.to_string())
}

/// Read (s1, s0) prediction columns; a single-column file yields `None`
/// for the second vector.
pub fn read_predictions(path: &str) -> Result<(Vec<f64>, Option<Vec<f64>>), String> {
    let d = causal_core::Dataset::load_csv(path, &HashMap::new()).map_err(|e| e.to_string())?;
    let names = d.names().to_vec();
    match names.len() {
        0 => Err(format!("`{path}` has no columns")),
        1 => Ok((
            d.continuous_values(&names[0]).map_err(|e| e.to_string())?,
            None,
        )),
        _ => {
            let pick = |want: &str, fallback: usize| -> Result<Vec<f64>, String> {
                let name = names
                    .iter()
                    .find(|n| n.as_str() == want)
                    .cloned()
                    .unwrap_or_else(|| names[fallback].clone());
                d.continuous_values(&name).map_err(|e| e.to_string())
            };
            Ok((pick("s1", 0)?, Some(pick("s0", 1)?)))
        }
    }
}
