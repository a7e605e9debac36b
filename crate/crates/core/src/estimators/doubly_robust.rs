//! Doubly-robust (augmented) estimation combining an outcome model with
//! a propensity model.
//!
//! The default form is the standard AIPW estimator, consistent when
//! either nuisance model is correctly specified:
//!
//! ```text
//! Ê(Y¹) = (1/n) Σ [ ŝ₁(Xᵢ) + Zᵢ (Yᵢ − ŝ₁(Xᵢ)) / ŵᵢ ]
//! Ê(Y⁰) = (1/n) Σ [ ŝ₀(Xᵢ) + (1−Zᵢ)(Yᵢ − ŝ₀(Xᵢ)) / (1−ŵᵢ) ]
//! ```
//!
//! A `TreatedOnly` compatibility variant reproduces the legacy form that
//! augments only the treated arm using observed-treatment fitted values,
//! (1/n) Σ [ ŝ(Xᵢ) − Zᵢ(Yᵢ − ŝ(Xᵢ))/ŵᵢ ]; it is kept for comparison
//! output and is not doubly robust for the ATE.

use serde_json::json;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula};
use crate::glm::{fit_glm, Family};
use crate::inference::{bootstrap, BootstrapSpec};

use super::{clamp_scores, propensity::propensity_scores, EffectEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrVariant {
    #[default]
    Aipw,
    TreatedOnly,
}

/// Externally supplied outcome-model predictions.
#[derive(Debug, Clone)]
pub enum OutcomeOverride {
    /// Predictions with treatment forced to each level (s1, s0).
    Counterfactual { s1: Vec<f64>, s0: Vec<f64> },
    /// Fitted values at the observed treatment; only valid for the
    /// `TreatedOnly` variant, which never needs counterfactual arms.
    Fitted(Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub struct DoublyRobustOptions {
    /// Outcome-model formula; defaults to the config's outcome formula.
    pub formula: Option<ModelFormula>,
    /// Propensity-model formula; defaults to the config's propensity formula.
    pub p_formula: Option<ModelFormula>,
    pub outcome_predictions: Option<OutcomeOverride>,
    pub p_scores: Option<Vec<f64>>,
    pub variant: DrVariant,
    pub n_boot: usize,
    pub seed: u64,
}

impl DoublyRobustOptions {
    pub fn with_boot(n_boot: usize, seed: u64) -> Self {
        DoublyRobustOptions {
            n_boot,
            seed,
            ..Default::default()
        }
    }
}

const S1_COL: &str = "__dr_s1__";
const S0_COL: &str = "__dr_s0__";
const W_COL: &str = "__dr_scores__";

struct Inputs {
    s1: Vec<f64>,
    s0: Vec<f64>,
    scores: Vec<f64>,
}

/// Point estimate given nuisance inputs. Returns (ate, ey0, ey1) for
/// AIPW; the treated-only variant has no counterfactual pair.
fn point_estimate(
    variant: DrVariant,
    z: &[f64],
    y: &[f64],
    inp: &Inputs,
) -> (f64, Option<(f64, f64)>) {
    let n = z.len() as f64;
    match variant {
        DrVariant::Aipw => {
            let mut e1 = 0.0;
            let mut e0 = 0.0;
            for i in 0..z.len() {
                let w = inp.scores[i];
                e1 += inp.s1[i] + z[i] * (y[i] - inp.s1[i]) / w;
                e0 += inp.s0[i] + (1.0 - z[i]) * (y[i] - inp.s0[i]) / (1.0 - w);
            }
            e1 /= n;
            e0 /= n;
            (e1 - e0, Some((e0, e1)))
        }
        DrVariant::TreatedOnly => {
            let mut acc = 0.0;
            for i in 0..z.len() {
                let s_obs = if z[i] == 1.0 { inp.s1[i] } else { inp.s0[i] };
                acc += s_obs - z[i] * (y[i] - s_obs) / inp.scores[i];
            }
            (acc / n, None)
        }
    }
}

/// Fit internal nuisance models on `d` and assemble inputs.
fn fit_inputs(
    cfg: &CausalConfig,
    d: &Dataset,
    out_formula: &ModelFormula,
    p_formula: &ModelFormula,
) -> Result<Inputs> {
    let out_fit = fit_glm(out_formula, d, Family::Gaussian, None)?;
    let d1 = d.with_level_set(&cfg.treatment, 1)?;
    let d0 = d.with_level_set(&cfg.treatment, 0)?;
    let s1: Vec<f64> = out_fit.predict(&d1)?.iter().copied().collect();
    let s0: Vec<f64> = out_fit.predict(&d0)?.iter().copied().collect();
    let ps = propensity_scores(cfg, Some(p_formula), Some(d))?;
    Ok(Inputs {
        s1,
        s0,
        scores: ps.values,
    })
}

pub fn doubly_robust(cfg: &CausalConfig, opts: &DoublyRobustOptions) -> Result<EffectEstimate> {
    let n = cfg.data.n_rows();
    let z = cfg.data.binary_indicator(&cfg.treatment)?;
    let y = cfg.data.continuous_values(&cfg.outcome)?;

    let check_len = |len: usize, what: &str| -> Result<()> {
        if len != n {
            return Err(Error::Estimation(format!(
                "{what} length {len} does not match the {n}-row estimation sample"
            )));
        }
        Ok(())
    };

    // resolve outcome predictions
    let external_outcome: Option<(Vec<f64>, Vec<f64>)> = match &opts.outcome_predictions {
        Some(OutcomeOverride::Counterfactual { s1, s0 }) => {
            check_len(s1.len(), "outcome predictions (treated arm)")?;
            check_len(s0.len(), "outcome predictions (control arm)")?;
            Some((s1.clone(), s0.clone()))
        }
        Some(OutcomeOverride::Fitted(s)) => {
            check_len(s.len(), "outcome predictions")?;
            if opts.variant != DrVariant::TreatedOnly {
                return Err(Error::Estimation(
                    "fitted-value outcome predictions require the treated-only variant; supply counterfactual (s1, s0) predictions for AIPW"
                        .into(),
                ));
            }
            // fitted values serve as both arms; only the observed arm is read
            Some((s.clone(), s.clone()))
        }
        None => None,
    };
    let external_scores: Option<Vec<f64>> = match &opts.p_scores {
        Some(s) => {
            check_len(s.len(), "propensity scores")?;
            let mut v = s.clone();
            clamp_scores(&mut v);
            Some(v)
        }
        None => None,
    };

    let out_default = cfg.default_outcome_formula();
    let out_formula = opts.formula.as_ref().unwrap_or(&out_default);
    let p_default = cfg.default_propensity_formula();
    let p_formula = opts.p_formula.as_ref().unwrap_or(&p_default);

    let internal = fit_inputs(cfg, &cfg.data, out_formula, p_formula)?;
    let inputs = Inputs {
        s1: external_outcome
            .as_ref()
            .map(|(s1, _)| s1.clone())
            .unwrap_or(internal.s1),
        s0: external_outcome
            .as_ref()
            .map(|(_, s0)| s0.clone())
            .unwrap_or(internal.s0),
        scores: external_scores.clone().unwrap_or(internal.scores),
    };
    let (ate, cf) = point_estimate(opts.variant, &z, &y, &inputs);

    let mut est = EffectEstimate::new("doubly-robust", ate);
    est.counterfactual_means = cf;

    if opts.n_boot > 0 {
        // external vectors ride along as columns so resampling keeps rows
        // and their nuisance values aligned; internal models are refit
        let mut boot_data = cfg.data.clone();
        if let Some((s1, s0)) = &external_outcome {
            boot_data = boot_data
                .with_column(
                    S1_COL,
                    Column::Continuous {
                        values: s1.clone(),
                        missing: vec![false; n],
                    },
                )?
                .with_column(
                    S0_COL,
                    Column::Continuous {
                        values: s0.clone(),
                        missing: vec![false; n],
                    },
                )?;
        }
        if let Some(sc) = &external_scores {
            boot_data = boot_data.with_column(
                W_COL,
                Column::Continuous {
                    values: sc.clone(),
                    missing: vec![false; n],
                },
            )?;
        }
        let has_ext_outcome = external_outcome.is_some();
        let has_ext_scores = external_scores.is_some();
        let statistic = |resample: &Dataset| -> Result<f64> {
            let zr = resample.binary_indicator(&cfg.treatment)?;
            let yr = resample.continuous_values(&cfg.outcome)?;
            let fitted = if has_ext_outcome && has_ext_scores {
                None
            } else {
                Some(fit_inputs(cfg, resample, out_formula, p_formula)?)
            };
            let s1 = if has_ext_outcome {
                resample.continuous_values(S1_COL)?
            } else {
                fitted.as_ref().unwrap().s1.clone()
            };
            let s0 = if has_ext_outcome {
                resample.continuous_values(S0_COL)?
            } else {
                fitted.as_ref().unwrap().s0.clone()
            };
            let scores = if has_ext_scores {
                let mut v = resample.continuous_values(W_COL)?;
                clamp_scores(&mut v);
                v
            } else {
                fitted.as_ref().unwrap().scores.clone()
            };
            Ok(point_estimate(opts.variant, &zr, &yr, &Inputs { s1, s0, scores }).0)
        };
        let summary = bootstrap(
            statistic,
            &boot_data,
            &BootstrapSpec {
                n_boot: opts.n_boot,
                base_seed: opts.seed,
            },
        )?;
        est = est.with_wald_se(summary.se);
        est.diagnostics
            .insert("n_boot_failed".into(), json!(summary.n_failed));
    }

    est.diagnostics.insert(
        "variant".into(),
        json!(match opts.variant {
            DrVariant::Aipw => "aipw",
            DrVariant::TreatedOnly => "treated-only",
        }),
    );
    est.diagnostics.insert(
        "external_outcome".into(),
        json!(external_outcome.is_some()),
    );
    est.diagnostics
        .insert("external_scores".into(), json!(external_scores.is_some()));
    Ok(est)
}
