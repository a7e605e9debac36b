//! Inverse-probability weighting via a marginal structural model.
//!
//! A weighted least squares of `Y ~ Z` is fit with inverse-probability
//! weights; the treatment coefficient is the ATE. Stabilized weights put
//! the intercept-only treatment probability in the numerator. Both weight
//! forms divide by P(Z = treated | X) on every row (the convention of the
//! reference implementation this crate reproduces), which leaves the WLS
//! coefficient invariant to stabilization.

use serde_json::json;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula};
use crate::glm::{fit_glm, Family};
use crate::inference::{bootstrap, BootstrapSpec};

use super::{clamp_scores, propensity::propensity_scores, EffectEstimate};

/// Which probability sits in the weight denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IpwWeightForm {
    /// P(Z = treated | X) for every row. This is the convention of the
    /// reference implementation this crate reproduces; it is kept as the
    /// default so published outputs match, but it targets the ATE only
    /// under effect homogeneity or no confounding.
    #[default]
    TreatedProbability,
    /// P(Z = zᵢ | Xᵢ): the textbook inverse-probability weight, 1/pᵢ for
    /// treated rows and 1/(1−pᵢ) for untreated rows (stabilized by the
    /// matching marginal probability). Consistent for the ATE when the
    /// propensity model is correct.
    ObservedProbability,
}

#[derive(Debug, Clone)]
pub struct IpwOptions {
    /// Propensity-model formula; defaults to the config's propensity formula.
    pub p_formula: Option<ModelFormula>,
    /// Externally computed scores (P(Z = treated | X) per row).
    pub p_scores: Option<Vec<f64>>,
    /// Stabilized weights (marginal treatment probability in the numerator).
    pub stabilized: bool,
    pub weight_form: IpwWeightForm,
    /// 0 uses the WLS model standard error; otherwise bootstrap.
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for IpwOptions {
    fn default() -> Self {
        IpwOptions {
            p_formula: None,
            p_scores: None,
            stabilized: true,
            weight_form: IpwWeightForm::default(),
            n_boot: 0,
            seed: 0,
        }
    }
}

const EXTERNAL_SCORE_COL: &str = "__ipw_scores__";

fn weights_from_scores(
    z_frac: f64,
    z: &[f64],
    scores: &[f64],
    stabilized: bool,
    form: IpwWeightForm,
) -> Vec<f64> {
    match form {
        IpwWeightForm::TreatedProbability => {
            let numer = if stabilized { z_frac } else { 1.0 };
            scores.iter().map(|&p| numer / p).collect()
        }
        IpwWeightForm::ObservedProbability => scores
            .iter()
            .zip(z)
            .map(|(&p, &zi)| {
                if zi == 1.0 {
                    (if stabilized { z_frac } else { 1.0 }) / p
                } else {
                    (if stabilized { 1.0 - z_frac } else { 1.0 }) / (1.0 - p)
                }
            })
            .collect(),
    }
}

fn wls_ate(
    cfg: &CausalConfig,
    d: &Dataset,
    weights: &[f64],
) -> Result<(f64, f64, crate::glm::GlmFit)> {
    let f = ModelFormula::new(
        cfg.outcome.clone(),
        vec![crate::formula::Term::Main(cfg.treatment.clone())],
    )?;
    let fit = fit_glm(&f, d, Family::Gaussian, Some(weights))?;
    let label = format!("{}{}", cfg.treatment, cfg.treated_level());
    let ate = fit
        .coefficient(&label)
        .ok_or_else(|| Error::Estimation(format!("treatment coefficient `{label}` aliased")))?;
    let se = fit
        .coef_se(&label)
        .ok_or_else(|| Error::Estimation("missing treatment standard error".into()))?;
    Ok((ate, se, fit))
}

pub fn ip_weighting(cfg: &CausalConfig, opts: &IpwOptions) -> Result<EffectEstimate> {
    let n = cfg.data.n_rows();
    let z = cfg.data.binary_indicator(&cfg.treatment)?;
    let z_frac = z.iter().sum::<f64>() / n as f64;

    let (scores, n_clamped, p_fit) = match &opts.p_scores {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Estimation(format!(
                    "p_scores length {} does not match {} rows",
                    s.len(),
                    n
                )));
            }
            let mut vals = s.clone();
            let c = clamp_scores(&mut vals);
            (vals, c, None)
        }
        None => {
            let ps = propensity_scores(cfg, opts.p_formula.as_ref(), None)?;
            let fit = match ps.source {
                super::ScoreSource::Fitted(f) => Some(*f),
                super::ScoreSource::External => None,
            };
            (ps.values, ps.n_clamped, fit)
        }
    };

    let weights = weights_from_scores(z_frac, &z, &scores, opts.stabilized, opts.weight_form);
    let (ate, model_se, fit) = wls_ate(cfg, &cfg.data, &weights)?;
    let max_weight = weights.iter().cloned().fold(f64::MIN, f64::max);

    let mut est = EffectEstimate::new("ipweighting", ate);
    if opts.n_boot == 0 {
        est = est.with_wald_se(model_se);
    } else {
        let spec = BootstrapSpec {
            n_boot: opts.n_boot,
            base_seed: opts.seed,
        };
        let summary = match &opts.p_scores {
            // external scores travel with the rows; the propensity model
            // is not refit
            Some(s) => {
                let with_scores = cfg.data.with_column(
                    EXTERNAL_SCORE_COL,
                    Column::Continuous {
                        values: s.clone(),
                        missing: vec![false; n],
                    },
                )?;
                bootstrap(
                    |resample: &Dataset| -> Result<f64> {
                        let mut sc = resample.continuous_values(EXTERNAL_SCORE_COL)?;
                        clamp_scores(&mut sc);
                        let zr = resample.binary_indicator(&cfg.treatment)?;
                        let zf = zr.iter().sum::<f64>() / zr.len() as f64;
                        let w = weights_from_scores(zf, &zr, &sc, opts.stabilized, opts.weight_form);
                        Ok(wls_ate(cfg, resample, &w)?.0)
                    },
                    &with_scores,
                    &spec,
                )?
            }
            // internal scores: refit the propensity model per replicate
            None => bootstrap(
                |resample: &Dataset| -> Result<f64> {
                    let ps = propensity_scores(cfg, opts.p_formula.as_ref(), Some(resample))?;
                    let zr = resample.binary_indicator(&cfg.treatment)?;
                    let zf = zr.iter().sum::<f64>() / zr.len() as f64;
                    let w = weights_from_scores(zf, &zr, &ps.values, opts.stabilized, opts.weight_form);
                    Ok(wls_ate(cfg, resample, &w)?.0)
                },
                &cfg.data,
                &spec,
            )?,
        };
        est = est.with_wald_se(summary.se);
        est.diagnostics
            .insert("n_boot_failed".into(), json!(summary.n_failed));
    }

    est.diagnostics.insert("max_weight".into(), json!(max_weight));
    est.diagnostics.insert("n_clamped".into(), json!(n_clamped));
    est.diagnostics
        .insert("stabilized".into(), json!(opts.stabilized));
    est.diagnostics.insert("model_se".into(), json!(model_se));
    if let Some(pf) = p_fit {
        est.underlying_fits.push(pf);
    }
    est.underlying_fits.push(fit);
    Ok(est)
}
