//! Propensity-score estimation: P(Z = treated level | X) by logistic
//! regression on the propensity formula.

use crate::data::Dataset;
use crate::error::Result;
use crate::formula::{CausalConfig, ModelFormula};
use crate::glm::{fit_glm, Family, GlmFit};

use super::clamp_scores;

#[derive(Debug, Clone)]
pub enum ScoreSource {
    Fitted(Box<GlmFit>),
    External,
}

#[derive(Debug, Clone)]
pub struct PropensityScores {
    /// Estimated P(Z = treated | X), strictly inside (0, 1).
    pub values: Vec<f64>,
    pub source: ScoreSource,
    /// Rows clamped away from 0/1; nonzero values flag positivity trouble.
    pub n_clamped: usize,
}

/// Fit the propensity model and predict on the estimation sample.
/// `formula` overrides the default propensity formula; `data` overrides
/// the config's estimation sample (used by bootstrap replicates).
pub fn propensity_scores(
    cfg: &CausalConfig,
    formula: Option<&ModelFormula>,
    data: Option<&Dataset>,
) -> Result<PropensityScores> {
    let d = data.unwrap_or(&cfg.data);
    let default = cfg.default_propensity_formula();
    let f = formula.unwrap_or(&default);
    let fit = fit_glm(f, d, Family::Binomial, None)?;
    let mut values: Vec<f64> = fit.fitted_values.iter().copied().collect();
    let n_clamped = clamp_scores(&mut values);
    Ok(PropensityScores {
        values,
        source: ScoreSource::Fitted(Box::new(fit)),
        n_clamped,
    })
}

/// Wrap externally supplied scores, clamping into (0, 1).
pub fn external_scores(values: &[f64]) -> PropensityScores {
    let mut values = values.to_vec();
    let n_clamped = clamp_scores(&mut values);
    PropensityScores {
        values,
        source: ScoreSource::External,
        n_clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, Dataset};
    use crate::formula::init_config;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    #[test]
    fn intercept_only_scores_equal_treated_fraction() {
        let csv = "y,z\n1,0\n2,1\n3,0\n4,0\n5,1";
        let mut ov = HashMap::new();
        ov.insert("z".to_string(), ColumnKind::Categorical);
        let d = Dataset::from_csv_reader(csv.as_bytes(), &ov).unwrap();
        let cfg = init_config("y", "z", &[], d, false).unwrap();
        let ps = propensity_scores(&cfg, None, None).unwrap();
        for v in &ps.values {
            assert_abs_diff_eq!(*v, 0.4, epsilon = 1e-8);
        }
    }

    #[test]
    fn external_scores_are_clamped() {
        let ps = external_scores(&[0.5, 0.0, 1.0]);
        assert_eq!(ps.n_clamped, 2);
        assert!(ps.values.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}
