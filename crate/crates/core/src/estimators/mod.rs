//! The causal-effect estimators.
//!
//! Every estimator consumes a [`CausalConfig`](crate::formula::CausalConfig)
//! plus per-call options and returns an [`EffectEstimate`] (a single ATE
//! with inference) or [`StratifiedEffects`] (per-stratum contrasts).
//! Point estimates are deterministic; bootstrap standard errors are
//! deterministic given the seed.

mod doubly_robust;
mod gestimation;
mod ipw;
mod iv;
mod matching;
mod nonparametric;
mod outcome_regression;
mod propensity;
mod standardization;

pub use doubly_robust::{doubly_robust, DoublyRobustOptions, DrVariant, OutcomeOverride};
pub use gestimation::{
    gestimation_grid, gestimation_linear, GestimationOptions, GridOptions, GridSearchResult,
};
pub use ipw::{ip_weighting, IpwOptions, IpwWeightForm};
pub use iv::iv_estimate;
pub use matching::{propensity_matching, MatchingKind, MatchingOptions, MatchingResult};
pub use nonparametric::{
    nonparametric_ipw, nonparametric_scales, nonparametric_standardization, ScaleEstimates,
};
pub use outcome_regression::{outcome_regression, OutcomeRegressionOptions};
pub use propensity::{external_scores, propensity_scores, PropensityScores, ScoreSource};
pub use standardization::{standardization, StandardizationOptions};

use std::collections::BTreeMap;

use serde_json::Value;

use crate::glm::GlmFit;
use crate::inference::{wald_interval, Z_95};

pub type Diagnostics = BTreeMap<String, Value>;

/// A point estimate of the average treatment effect with inference.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub method: String,
    /// ATE in outcome units.
    pub ate: f64,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// (mean_y0, mean_y1) when the estimator produces counterfactual means.
    pub counterfactual_means: Option<(f64, f64)>,
    pub underlying_fits: Vec<GlmFit>,
    pub diagnostics: Diagnostics,
}

impl EffectEstimate {
    pub(crate) fn new(method: &str, ate: f64) -> Self {
        EffectEstimate {
            method: method.to_string(),
            ate,
            se: None,
            ci_low: None,
            ci_high: None,
            counterfactual_means: None,
            underlying_fits: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Attach a Wald interval from `se`.
    pub(crate) fn with_wald_se(mut self, se: f64) -> Self {
        let (lo, hi) = wald_interval(self.ate, se, 0.95);
        self.se = Some(se);
        self.ci_low = Some(lo);
        self.ci_high = Some(hi);
        self
    }
}

/// One stratum/contrast row: estimate, Wald interval, two-sided p-value.
#[derive(Debug, Clone)]
pub struct StratumEffect {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

impl StratumEffect {
    pub(crate) fn from_contrast(label: String, estimate: f64, se: f64) -> Self {
        let (ci_low, ci_high) = wald_interval(estimate, se, 0.95);
        let p_value = crate::inference::p_value_two_sided(estimate, se);
        StratumEffect {
            label,
            estimate,
            se,
            ci_low,
            ci_high,
            p_value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StratifiedEffects {
    pub method: String,
    pub rows: Vec<StratumEffect>,
    pub underlying_fits: Vec<GlmFit>,
    pub diagnostics: Diagnostics,
}

impl StratifiedEffects {
    /// Precision-weighted (1/se²) mean across rows, with the pooled SE.
    /// Used by comparison reports to summarize a stratified table.
    pub fn pooled(&self) -> Option<(f64, f64)> {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in &self.rows {
            if r.se > 0.0 && r.se.is_finite() {
                let w = 1.0 / (r.se * r.se);
                num += w * r.estimate;
                den += w;
            }
        }
        if den > 0.0 {
            Some((num / den, (1.0 / den).sqrt()))
        } else {
            None
        }
    }
}

/// Score clamping bound: keeps IP weights finite while leaving positivity
/// problems visible in diagnostics.
pub(crate) const SCORE_CLAMP: f64 = 1e-12;

pub(crate) fn clamp_scores(scores: &mut [f64]) -> usize {
    let mut clamped = 0;
    for s in scores.iter_mut() {
        if *s < SCORE_CLAMP {
            *s = SCORE_CLAMP;
            clamped += 1;
        } else if *s > 1.0 - SCORE_CLAMP {
            *s = 1.0 - SCORE_CLAMP;
            clamped += 1;
        }
    }
    clamped
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sanity check used by tests: Wald identity between ate/se and bounds.
pub fn wald_identity_holds(e: &EffectEstimate, tol: f64) -> bool {
    match (e.se, e.ci_low, e.ci_high) {
        (Some(se), Some(lo), Some(hi)) => {
            (lo - (e.ate - Z_95 * se)).abs() <= tol && (hi - (e.ate + Z_95 * se)).abs() <= tol
        }
        (None, None, None) => true,
        _ => false,
    }
}
