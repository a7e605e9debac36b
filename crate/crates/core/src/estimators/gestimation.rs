//! Single-parameter g-estimation of a structural nested mean model.
//!
//! The closed form solves Σ wᵢ(Yᵢ − βZᵢ)(Zᵢ − p̂ᵢ) = 0 directly, with p̂
//! taken from a weighted refit of the propensity model. The grid search
//! scans candidate β values, regressing treatment on the residualized
//! outcome H(β) = Y − βZ alongside the propensity covariates; the
//! estimate is the β whose H coefficient is closest to zero, and the
//! confidence interval is the set of β not rejected at the 5% level
//! (robust sandwich standard errors).

use serde_json::json;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula, Term};
use crate::glm::{fit_glm, Family};
use crate::inference::{bootstrap, p_value_two_sided, BootstrapSpec, Z_95};

use super::{clamp_scores, EffectEstimate};

#[derive(Debug, Clone)]
pub struct GestimationOptions {
    /// Propensity formula; defaults to the config's propensity formula.
    pub p_formula: Option<ModelFormula>,
    /// Stabilized IP weights (treated fraction over score).
    pub stabilized: bool,
    /// Bootstrap iterations for the closed form; 0 skips inference.
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for GestimationOptions {
    fn default() -> Self {
        GestimationOptions {
            p_formula: None,
            stabilized: true,
            n_boot: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub p_formula: Option<ModelFormula>,
    pub stabilized: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            p_formula: None,
            stabilized: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub grid: Vec<f64>,
    /// H-coefficient per grid point; `None` marks a failed fit.
    pub alpha1: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub best_beta: f64,
    /// Bounds of the non-rejected set; ±∞ when the set touches the grid edge.
    pub ci_low: f64,
    pub ci_high: f64,
}

const H_COL: &str = "h_beta";

/// Closed-form estimate on one dataset. Returns (beta, residual, scale).
fn closed_form(
    cfg: &CausalConfig,
    d: &Dataset,
    p_formula: &ModelFormula,
    stabilized: bool,
) -> Result<(f64, f64, f64)> {
    let y = d.continuous_values(&cfg.outcome)?;
    let z = d.binary_indicator(&cfg.treatment)?;
    let n = d.n_rows();
    let z_frac = z.iter().sum::<f64>() / n as f64;

    let first = fit_glm(p_formula, d, Family::Binomial, None)?;
    let mut scores: Vec<f64> = first.fitted_values.iter().copied().collect();
    clamp_scores(&mut scores);
    let numer = if stabilized { z_frac } else { 1.0 };
    let w: Vec<f64> = scores.iter().map(|&p| numer / p).collect();

    let refit = fit_glm(p_formula, d, Family::Binomial, Some(&w))?;
    let phat = &refit.fitted_values;

    let mut num = 0.0;
    let mut den = 0.0;
    let mut den_scale = 0.0;
    for i in 0..n {
        num += w[i] * y[i] * (z[i] - phat[i]);
        den += w[i] * z[i] * (z[i] - phat[i]);
        den_scale += w[i] * z[i];
    }
    if den.abs() < 1e-10 * den_scale.max(1.0) {
        return Err(Error::Estimation(
            "treatment is fully predicted by the covariates; the estimating equation is degenerate"
                .into(),
        ));
    }
    let beta = num / den;
    // residual of the estimating equation at the solution
    let mut resid = 0.0;
    let mut scale = 0.0;
    for i in 0..n {
        resid += w[i] * (y[i] - beta * z[i]) * (z[i] - phat[i]);
        scale += (w[i] * y[i] * (z[i] - phat[i])).abs();
    }
    Ok((beta, resid.abs(), scale))
}

/// Closed-form g-estimation with bootstrap inference.
pub fn gestimation_linear(
    cfg: &CausalConfig,
    opts: &GestimationOptions,
) -> Result<EffectEstimate> {
    let default = cfg.default_propensity_formula();
    let p_formula = opts.p_formula.as_ref().unwrap_or(&default);
    let (beta, resid, scale) = closed_form(cfg, &cfg.data, p_formula, opts.stabilized)?;

    let mut est = EffectEstimate::new("gestimation", beta);
    if opts.n_boot > 0 {
        let summary = bootstrap(
            |resample: &Dataset| -> Result<f64> {
                Ok(closed_form(cfg, resample, p_formula, opts.stabilized)?.0)
            },
            &cfg.data,
            &BootstrapSpec {
                n_boot: opts.n_boot,
                base_seed: opts.seed,
            },
        )?;
        est = est.with_wald_se(summary.se);
        est.diagnostics
            .insert("n_boot_failed".into(), json!(summary.n_failed));
    }
    est.diagnostics
        .insert("estimating_equation_residual".into(), json!(resid));
    est.diagnostics
        .insert("estimating_equation_scale".into(), json!(scale));
    est.diagnostics
        .insert("stabilized".into(), json!(opts.stabilized));
    Ok(est)
}

/// Grid-search g-estimation. The grid must be non-empty and sorted.
pub fn gestimation_grid(
    cfg: &CausalConfig,
    grid: &[f64],
    opts: &GridOptions,
) -> Result<(EffectEstimate, GridSearchResult)> {
    if grid.is_empty() {
        return Err(Error::Estimation("grid must be non-empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Estimation("grid must be strictly increasing".into()));
    }
    if cfg.data.has_column(H_COL) {
        return Err(Error::Estimation(format!(
            "column name `{H_COL}` is reserved by g-estimation"
        )));
    }
    let default = cfg.default_propensity_formula();
    let p_formula = opts.p_formula.as_ref().unwrap_or(&default);
    let y = cfg.data.continuous_values(&cfg.outcome)?;
    let z = cfg.data.binary_indicator(&cfg.treatment)?;
    let n = cfg.data.n_rows();

    let weights: Option<Vec<f64>> = if opts.stabilized {
        let first = fit_glm(p_formula, &cfg.data, Family::Binomial, None)?;
        let mut scores: Vec<f64> = first.fitted_values.iter().copied().collect();
        clamp_scores(&mut scores);
        let z_frac = z.iter().sum::<f64>() / n as f64;
        Some(scores.iter().map(|&p| z_frac / p).collect())
    } else {
        None
    };

    let mut terms = vec![Term::Main(H_COL.to_string())];
    terms.extend(p_formula.terms.iter().cloned());
    let grid_formula = ModelFormula::new(cfg.treatment.clone(), terms)?;
    let h_label = H_COL.to_string();

    let mut alpha1: Vec<Option<f64>> = Vec::with_capacity(grid.len());
    let mut p_values: Vec<Option<f64>> = Vec::with_capacity(grid.len());
    for &beta in grid {
        let h: Vec<f64> = (0..n).map(|i| y[i] - beta * z[i]).collect();
        let d_h = cfg.data.with_column(
            H_COL,
            Column::Continuous {
                values: h,
                missing: vec![false; n],
            },
        )?;
        let fit = fit_glm(&grid_formula, &d_h, Family::Binomial, weights.as_deref());
        match fit {
            Ok(fit) if fit.converged => {
                let j = match fit.coef_index(&h_label) {
                    Some(j) if fit.coefficient(&h_label).is_some() => j,
                    _ => {
                        alpha1.push(None);
                        p_values.push(None);
                        continue;
                    }
                };
                let a = fit.coefficient(&h_label).unwrap();
                let sand = fit.sandwich_covariance(&d_h)?;
                let se = sand[(j, j)].max(0.0).sqrt();
                alpha1.push(Some(a));
                p_values.push(Some(p_value_two_sided(a, se)));
            }
            _ => {
                alpha1.push(None);
                p_values.push(None);
            }
        }
    }

    // argmin |alpha/se|: p = 2*Phi(-|alpha/se|) is strictly decreasing in
    // |alpha/se|, so the largest p wins
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in p_values.iter().enumerate() {
        if let Some(p) = p {
            match best {
                Some((_, bp)) if *p <= bp => {}
                _ => best = Some((i, *p)),
            }
        }
    }
    let (best_idx, _) = best.ok_or_else(|| {
        Error::Estimation("every grid point failed to fit; widen or shift the grid".into())
    })?;
    let best_beta = grid[best_idx];

    let accepted: Vec<usize> = p_values
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.and_then(|p| if p >= 0.05 { Some(i) } else { None }))
        .collect();
    if accepted.is_empty() {
        return Err(Error::Estimation(
            "all grid values rejected at the 5% level; widen the grid".into(),
        ));
    }
    let lo_idx = *accepted.first().unwrap();
    let hi_idx = *accepted.last().unwrap();
    let ci_low = if lo_idx == 0 {
        f64::NEG_INFINITY
    } else {
        grid[lo_idx]
    };
    let ci_high = if hi_idx == grid.len() - 1 {
        f64::INFINITY
    } else {
        grid[hi_idx]
    };

    let result = GridSearchResult {
        grid: grid.to_vec(),
        alpha1,
        p_values,
        best_beta,
        ci_low,
        ci_high,
    };

    let mut est = EffectEstimate::new("gestimation", best_beta);
    est.ci_low = Some(ci_low);
    est.ci_high = Some(ci_high);
    if ci_low.is_finite() && ci_high.is_finite() {
        est.se = Some((ci_high - ci_low) / (2.0 * Z_95));
    }
    est.diagnostics.insert("type".into(), json!("grid"));
    est.diagnostics
        .insert("n_invalid_grid_points".into(), json!(
            result.alpha1.iter().filter(|a| a.is_none()).count()
        ));
    est.diagnostics
        .insert("stabilized".into(), json!(opts.stabilized));
    Ok((est, result))
}
