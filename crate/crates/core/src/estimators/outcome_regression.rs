//! Conditional treatment effects from a single outcome regression.
//!
//! Fits the outcome model and reports the treatment effect as a set of
//! linear contrasts: one baseline row (the treatment coefficient), one
//! row per non-reference level of each categorical covariate in the
//! model (treatment coefficient plus that level's main effect), and one
//! row per requested continuous value v (treatment coefficient plus
//! v times the treatment interaction, when the model contains one).

use serde_json::json;

use crate::data::Column;
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula, Term};
use crate::glm::{fit_glm, Family, GlmFit};

use super::{StratifiedEffects, StratumEffect};

#[derive(Debug, Clone, Default)]
pub struct OutcomeRegressionOptions {
    /// Outcome-model formula; defaults to the config's outcome formula.
    pub formula: Option<ModelFormula>,
    /// Continuous covariate values to report, in the given order.
    pub contrasts: Vec<(String, Vec<f64>)>,
}

fn fmt_value(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn outcome_regression(
    cfg: &CausalConfig,
    opts: &OutcomeRegressionOptions,
) -> Result<StratifiedEffects> {
    let default = cfg.default_outcome_formula();
    let f = opts.formula.as_ref().unwrap_or(&default);
    for (name, _) in &opts.contrasts {
        match cfg.data.column(name) {
            Ok(Column::Continuous { .. }) => {}
            Ok(Column::Categorical { .. }) => {
                return Err(Error::Estimation(format!(
                    "contrast variable `{name}` is categorical; contrasts apply to continuous covariates"
                )))
            }
            Err(e) => return Err(e),
        }
        if !f.variables().contains(&name.as_str()) {
            return Err(Error::Estimation(format!(
                "contrast variable `{name}` is not in the model"
            )));
        }
    }

    let fit = fit_glm(f, &cfg.data, Family::Gaussian, None)?;
    let treated = cfg.treated_level();
    let z_label = format!("{}{}", cfg.treatment, treated);
    let z_idx = fit
        .coef_index(&z_label)
        .ok_or_else(|| Error::Estimation(format!("treatment term `{z_label}` not in model")))?;

    let p = fit.n_coefficients();
    let mut rows = Vec::new();
    let mut push_row = |label: String, c: &[f64], fit: &GlmFit| -> Result<()> {
        let (est, se) = fit.contrast(c)?;
        rows.push(StratumEffect::from_contrast(label, est, se));
        Ok(())
    };

    // baseline: the treatment coefficient itself
    let mut c = vec![0.0; p];
    c[z_idx] = 1.0;
    push_row(
        format!("Effect of {} at {}", cfg.treatment, z_label),
        &c,
        &fit,
    )?;

    // one row per non-reference level of each categorical covariate whose
    // main effect is in the model, in term order
    for term in &f.terms {
        if let Term::Main(var) = term {
            if var == &cfg.treatment {
                continue;
            }
            if let Ok(Column::Categorical { levels, .. }) = cfg.data.column(var) {
                for lvl in levels.iter().skip(1) {
                    let dummy = format!("{var}{lvl}");
                    let j = match fit.coef_index(&dummy) {
                        Some(j) => j,
                        None => continue,
                    };
                    let mut c = vec![0.0; p];
                    c[z_idx] = 1.0;
                    c[j] = 1.0;
                    push_row(
                        format!("Effect of {} at {}", cfg.treatment, dummy),
                        &c,
                        &fit,
                    )?;
                }
            }
        }
    }

    // one row per requested continuous value
    for (var, values) in &opts.contrasts {
        let inter_label = format!("{z_label}:{var}");
        let inter_alt = format!("{var}:{z_label}");
        let j = fit
            .coef_index(&inter_label)
            .or_else(|| fit.coef_index(&inter_alt));
        for &v in values {
            let mut c = vec![0.0; p];
            c[z_idx] = 1.0;
            if let Some(j) = j {
                c[j] = v;
            }
            push_row(
                format!("Effect of {} at {} of {}", cfg.treatment, var, fmt_value(v)),
                &c,
                &fit,
            )?;
        }
    }

    let mut diagnostics = super::Diagnostics::new();
    diagnostics.insert("formula".into(), json!(f.render()));
    Ok(StratifiedEffects {
        method: "outcome-regression".to_string(),
        rows,
        underlying_fits: vec![fit],
        diagnostics,
    })
}
