//! Parametric standardization ("mean of means").
//!
//! Fit the outcome model on the observed data, rebuild the dataset twice
//! with treatment forced to each level, and average the predictions.
//! The counterfactual copies share every column except the overwritten
//! treatment, so memory stays flat during the bootstrap.

use serde_json::json;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula};
use crate::glm::{fit_glm, Family, GlmFit};
use crate::inference::{bootstrap, BootstrapSpec};

use super::{mean, EffectEstimate};

#[derive(Debug, Clone)]
pub struct StandardizationOptions {
    /// Outcome-model formula; defaults to the config's outcome formula.
    pub formula: Option<ModelFormula>,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for StandardizationOptions {
    fn default() -> Self {
        StandardizationOptions {
            formula: None,
            n_boot: 50,
            seed: 0,
        }
    }
}

fn counterfactual_means(
    fit: &GlmFit,
    d: &Dataset,
    treatment: &str,
) -> Result<(f64, f64)> {
    let d0 = d.with_level_set(treatment, 0)?;
    let d1 = d.with_level_set(treatment, 1)?;
    let p0 = fit.predict(&d0)?;
    let p1 = fit.predict(&d1)?;
    Ok((mean(p0.as_slice()), mean(p1.as_slice())))
}

pub fn standardization(
    cfg: &CausalConfig,
    opts: &StandardizationOptions,
) -> Result<EffectEstimate> {
    if opts.n_boot < 1 {
        return Err(Error::Estimation(
            "standardization has no analytic standard error; n_boot must be >= 1".into(),
        ));
    }
    let default = cfg.default_outcome_formula();
    let f = opts.formula.as_ref().unwrap_or(&default);
    let fit = fit_glm(f, &cfg.data, Family::Gaussian, None)?;
    let (m0, m1) = counterfactual_means(&fit, &cfg.data, &cfg.treatment)?;
    let ate = m1 - m0;

    let treatment = cfg.treatment.clone();
    let statistic = |resample: &Dataset| -> Result<f64> {
        let rfit = fit_glm(f, resample, Family::Gaussian, None)?;
        let (b0, b1) = counterfactual_means(&rfit, resample, &treatment)?;
        Ok(b1 - b0)
    };
    let summary = bootstrap(
        statistic,
        &cfg.data,
        &BootstrapSpec {
            n_boot: opts.n_boot,
            base_seed: opts.seed,
        },
    )?;

    let mut est = EffectEstimate::new("standardization", ate).with_wald_se(summary.se);
    est.counterfactual_means = Some((m0, m1));
    est.diagnostics
        .insert("n_boot".into(), json!(opts.n_boot));
    est.diagnostics
        .insert("n_boot_failed".into(), json!(summary.n_failed));
    est.underlying_fits.push(fit);
    Ok(est)
}
