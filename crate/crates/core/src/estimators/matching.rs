//! Propensity-score matching by stratification or score-standardization.
//!
//! Strata are quantile groups (type-7 quantiles, leftmost interval
//! closed) or fixed-width bins over [0, 1]. The stratified estimate fits
//! `Y ~ Z * stratum` and reports per-stratum treatment contrasts; the
//! standardization variant conditions on the continuous score with an
//! interaction and a square.

use serde_json::json;

use crate::data::Column;
use crate::error::{Error, Result};
use crate::formula::{CausalConfig, ModelFormula, Term};
use crate::glm::{fit_glm, Family};
use crate::report::fmt_signif;

use super::{
    propensity::propensity_scores, standardization, EffectEstimate, StandardizationOptions,
    StratifiedEffects, StratumEffect,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingKind {
    /// Per-stratum contrasts from `Y ~ Z * stratum`.
    Strata,
    /// Standardization on `Y ~ Z + s + Z:s + s^2` with the score s.
    Std,
}

#[derive(Debug, Clone)]
pub struct MatchingOptions {
    pub kind: MatchingKind,
    pub p_scores: Option<Vec<f64>>,
    pub p_formula: Option<ModelFormula>,
    /// Quantile step when `quant`, else fixed bin width over [0, 1].
    pub grp_width: f64,
    pub quant: bool,
    /// Outcome-model override for the `Std` variant.
    pub formula: Option<ModelFormula>,
    /// Bootstrap iterations for the `Std` variant.
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        MatchingOptions {
            kind: MatchingKind::Strata,
            p_scores: None,
            p_formula: None,
            grp_width: 0.1,
            quant: true,
            formula: None,
            n_boot: 50,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub enum MatchingResult {
    Strata(StratifiedEffects),
    Std(EffectEstimate),
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub(crate) fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn interval_label(lo: f64, hi: f64, first: bool) -> String {
    format!(
        "{}{},{}]",
        if first { "[" } else { "(" },
        fmt_signif(lo, 3),
        fmt_signif(hi, 3)
    )
}

/// Stratum index per score given ascending breaks; first interval closed
/// on both ends, the rest left-open.
fn assign(breaks: &[f64], s: f64) -> Option<usize> {
    if s < breaks[0] || s > *breaks.last().unwrap() {
        return None;
    }
    if s <= breaks[1] {
        return Some(0);
    }
    for k in 1..breaks.len() - 1 {
        if s > breaks[k] && s <= breaks[k + 1] {
            return Some(k);
        }
    }
    None
}

pub fn propensity_matching(cfg: &CausalConfig, opts: &MatchingOptions) -> Result<MatchingResult> {
    if opts.grp_width <= 0.0 || opts.grp_width >= 1.0 {
        return Err(Error::Estimation("grp_width must lie in (0, 1)".into()));
    }
    let n = cfg.data.n_rows();
    let (scores, score_fit) = match &opts.p_scores {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Estimation(format!(
                    "p_scores length {} does not match {} rows",
                    s.len(),
                    n
                )));
            }
            let mut v = s.clone();
            super::clamp_scores(&mut v);
            (v, None)
        }
        None => {
            let ps = propensity_scores(cfg, opts.p_formula.as_ref(), None)?;
            let fit = match ps.source {
                super::ScoreSource::Fitted(f) => Some(*f),
                super::ScoreSource::External => None,
            };
            (ps.values, fit)
        }
    };

    match opts.kind {
        MatchingKind::Std => {
            let score_col = "p_score";
            if cfg.data.has_column(score_col) {
                return Err(Error::Estimation(format!(
                    "column name `{score_col}` is reserved by propensity matching"
                )));
            }
            let augmented = cfg.data.with_column(
                score_col,
                Column::Continuous {
                    values: scores,
                    missing: vec![false; n],
                },
            )?;
            let formula = match &opts.formula {
                Some(f) => f.clone(),
                None => ModelFormula::new(
                    cfg.outcome.clone(),
                    vec![
                        Term::Main(cfg.treatment.clone()),
                        Term::Main(score_col.to_string()),
                        Term::Interaction(cfg.treatment.clone(), score_col.to_string()),
                        Term::Square(score_col.to_string()),
                    ],
                )?,
            };
            let sub_cfg = CausalConfig {
                data: augmented,
                ..cfg.clone()
            };
            let mut est = standardization(
                &sub_cfg,
                &StandardizationOptions {
                    formula: Some(formula),
                    n_boot: opts.n_boot,
                    seed: opts.seed,
                },
            )?;
            est.method = "propensity-matching".to_string();
            est.diagnostics.insert("type".into(), json!("std"));
            if let Some(f) = score_fit {
                est.underlying_fits.push(f);
            }
            Ok(MatchingResult::Std(est))
        }
        MatchingKind::Strata => {
            // raw bin edges: score quantiles or a fixed grid over [0, 1]
            let raw_breaks: Vec<f64> = if opts.quant {
                let mut sorted = scores.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let k = (1.0 / opts.grp_width).round() as usize;
                let mut b: Vec<f64> = (0..=k)
                    .map(|i| quantile_type7(&sorted, (i as f64 * opts.grp_width).min(1.0)))
                    .collect();
                b.dedup();
                if b.len() < 2 {
                    return Err(Error::Estimation(
                        "propensity scores are too concentrated to stratify".into(),
                    ));
                }
                b
            } else {
                let k = (1.0 / opts.grp_width).ceil() as usize;
                (0..=k).map(|i| (i as f64 * opts.grp_width).min(1.0)).collect()
            };

            // assign rows to raw bins, then drop bins nothing landed in
            let n_bins = raw_breaks.len() - 1;
            let mut raw_grp = vec![0usize; n];
            for (i, &s) in scores.iter().enumerate() {
                raw_grp[i] = assign(&raw_breaks, s).ok_or_else(|| {
                    Error::Estimation(format!("score {s} falls outside the strata breaks"))
                })?;
            }
            let mut counts = vec![0usize; n_bins];
            for &g in &raw_grp {
                counts[g] += 1;
            }
            let occupied: Vec<usize> = (0..n_bins).filter(|&b| counts[b] > 0).collect();
            let dropped_empty = n_bins - occupied.len();
            let rank: Vec<Option<usize>> = {
                let mut r = vec![None; n_bins];
                for (new, &old) in occupied.iter().enumerate() {
                    r[old] = Some(new);
                }
                r
            };
            let k = occupied.len();
            let grp: Vec<u32> = raw_grp
                .iter()
                .map(|&g| rank[g].expect("occupied bin") as u32)
                .collect();
            let labels: Vec<String> = occupied
                .iter()
                .map(|&b| interval_label(raw_breaks[b], raw_breaks[b + 1], b == 0))
                .collect();
            let breaks = raw_breaks;

            // positivity within every stratum
            let z = cfg.data.binary_indicator(&cfg.treatment)?;
            for (s, label) in labels.iter().enumerate() {
                let treated = grp
                    .iter()
                    .zip(&z)
                    .filter(|(&g, &zi)| g as usize == s && zi == 1.0)
                    .count();
                let untreated = grp
                    .iter()
                    .zip(&z)
                    .filter(|(&g, &zi)| g as usize == s && zi == 0.0)
                    .count();
                if treated == 0 || untreated == 0 {
                    return Err(Error::Estimation(format!(
                        "All strata of propensity scores must have a non-zero number of samples: stratum {label} has {treated} treated and {untreated} untreated rows"
                    )));
                }
            }

            let grp_col = "p_grp";
            if cfg.data.has_column(grp_col) {
                return Err(Error::Estimation(format!(
                    "column name `{grp_col}` is reserved by propensity matching"
                )));
            }
            let levels: Vec<String> = (1..=k).map(|i| i.to_string()).collect();
            let augmented = cfg.data.with_column(
                grp_col,
                Column::Categorical {
                    levels,
                    codes: grp,
                    missing: vec![false; n],
                },
            )?;
            let formula = ModelFormula::new(
                cfg.outcome.clone(),
                vec![
                    Term::Main(cfg.treatment.clone()),
                    Term::Main(grp_col.to_string()),
                    Term::Interaction(cfg.treatment.clone(), grp_col.to_string()),
                ],
            )?;
            let fit = fit_glm(&formula, &augmented, Family::Gaussian, None)?;
            let z_label = format!("{}{}", cfg.treatment, cfg.treated_level());
            let z_idx = fit.coef_index(&z_label).ok_or_else(|| {
                Error::Estimation(format!("treatment term `{z_label}` not in model"))
            })?;
            let p = fit.n_coefficients();
            let mut rows = Vec::with_capacity(k);
            for (s, label) in labels.iter().enumerate() {
                let mut c = vec![0.0; p];
                c[z_idx] = 1.0;
                if s > 0 {
                    let inter = format!("{}:{}{}", z_label, grp_col, s + 1);
                    let j = fit.coef_index(&inter).ok_or_else(|| {
                        Error::Estimation(format!("missing interaction `{inter}`"))
                    })?;
                    c[j] = 1.0;
                }
                let (est, se) = fit.contrast(&c)?;
                rows.push(StratumEffect::from_contrast(
                    format!("Effect of {} for p.score in {label}", cfg.treatment),
                    est,
                    se,
                ));
            }
            let mut diagnostics = super::Diagnostics::new();
            diagnostics.insert("type".into(), json!("strata"));
            diagnostics.insert("n_strata".into(), json!(k));
            diagnostics.insert(
                "breaks".into(),
                json!(breaks.to_vec()),
            );
            if dropped_empty > 0 {
                diagnostics.insert("n_empty_bins_dropped".into(), json!(dropped_empty));
            }
            let mut fits = vec![fit];
            if let Some(f) = score_fit {
                fits.push(f);
            }
            Ok(MatchingResult::Strata(StratifiedEffects {
                method: "propensity-matching".to_string(),
                rows,
                underlying_fits: fits,
                diagnostics,
            }))
        }
    }
}
