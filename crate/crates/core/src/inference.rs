//! Bootstrap engine and Wald intervals.
//!
//! Replicates resample the estimation sample with replacement using
//! seeds derived from `(base_seed, index)`, so results are independent
//! of execution order and thread count. Statistic failures (for
//! example, positivity loss in a resample) are tolerated up to 20% of
//! replicates and surfaced in the summary.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// z for a central 95% interval; pinned so Wald bounds are stable.
pub const Z_95: f64 = 1.959964;

/// Maximum fraction of failed replicates before the bootstrap errors.
const FAILURE_BUDGET: f64 = 0.20;

#[derive(Debug, Clone)]
pub struct BootstrapSpec {
    pub n_boot: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    /// Estimates of the successful replicates, in replicate order.
    pub replicate_estimates: Vec<f64>,
    /// Sample standard deviation of the successful replicates (n−1).
    pub se: f64,
    pub n_failed: usize,
}

/// Run `statistic` on `n_boot` resamples of `d`.
pub fn bootstrap<F>(statistic: F, d: &Dataset, spec: &BootstrapSpec) -> Result<BootstrapSummary>
where
    F: Fn(&Dataset) -> Result<f64> + Sync,
{
    if spec.n_boot == 0 {
        return Err(Error::Estimation("bootstrap requires n_boot >= 1".into()));
    }
    let results: Vec<Result<f64>> = (0..spec.n_boot)
        .into_par_iter()
        .map(|i| {
            let resample = d.resample_rows(derive_seed(spec.base_seed, i as u64))?;
            statistic(&resample)
        })
        .collect();
    let mut estimates = Vec::with_capacity(spec.n_boot);
    let mut n_failed = 0usize;
    for r in results {
        match r {
            Ok(v) if v.is_finite() => estimates.push(v),
            _ => n_failed += 1,
        }
    }
    if (n_failed as f64) > FAILURE_BUDGET * spec.n_boot as f64 {
        return Err(Error::BootstrapUnstable {
            failed: n_failed,
            total: spec.n_boot,
        });
    }
    if estimates.len() < 2 {
        return Err(Error::Estimation(
            "too few successful bootstrap replicates to estimate a standard error".into(),
        ));
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let var = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (estimates.len() - 1) as f64;
    Ok(BootstrapSummary {
        replicate_estimates: estimates,
        se: var.sqrt(),
        n_failed,
    })
}

/// `estimate ± z(level)·se`.
pub fn wald_interval(estimate: f64, se: f64, level: f64) -> (f64, f64) {
    let z = z_value(level);
    (estimate - z * se, estimate + z * se)
}

/// Normal quantile for a central interval at `level`; the 95% value is
/// the pinned constant.
pub fn z_value(level: f64) -> f64 {
    if (level - 0.95).abs() < 1e-12 {
        Z_95
    } else {
        Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.5 + level / 2.0)
    }
}

/// Two-sided normal p-value for the statistic `estimate / se`.
pub fn p_value_two_sided(estimate: f64, se: f64) -> f64 {
    if se == 0.0 {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * n.cdf(-(estimate / se).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn ydata(values: &[f64]) -> Dataset {
        let body: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let csv = format!("y\n{}", body.join("\n"));
        Dataset::from_csv_reader(csv.as_bytes(), &HashMap::new()).unwrap()
    }

    #[test]
    fn wald_trivials() {
        let (lo, hi) = wald_interval(0.0, 1.0, 0.95);
        assert_abs_diff_eq!(lo, -1.959964, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.959964, epsilon = 1e-12);
        let (lo, hi) = wald_interval(3.5, 0.0, 0.95);
        assert_eq!((lo, hi), (3.5, 3.5));
    }

    #[test]
    fn wald_from_reported_values() {
        let (lo, hi) = wald_interval(2.56858, 0.4779627, 0.95);
        assert_abs_diff_eq!(lo, 1.632, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 3.505, epsilon = 1e-3);
    }

    #[test]
    fn constant_statistic_zero_se() {
        let d = ydata(&[1.0, 2.0, 3.0, 4.0]);
        let s = bootstrap(
            |_| Ok(7.25),
            &d,
            &BootstrapSpec {
                n_boot: 25,
                base_seed: 1,
            },
        )
        .unwrap();
        assert_eq!(s.se, 0.0);
        assert_eq!(s.n_failed, 0);
    }

    #[test]
    fn deterministic_across_runs() {
        let d = ydata(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let spec = BootstrapSpec {
            n_boot: 40,
            base_seed: 7,
        };
        let stat = |dd: &Dataset| {
            let v = dd.continuous_values("y")?;
            Ok(v.iter().sum::<f64>() / v.len() as f64)
        };
        let a = bootstrap(stat, &d, &spec).unwrap();
        let b = bootstrap(stat, &d, &spec).unwrap();
        assert_eq!(a.replicate_estimates, b.replicate_estimates);
        assert_eq!(a.se, b.se);
    }

    // CLT: bootstrap SE of the sample mean approaches sd(y)/sqrt(n).
    #[test]
    fn clt_check_on_sample_mean() {
        let mut rng = crate::rng::SplitMix64::new(11);
        let values: Vec<f64> = (0..400).map(|_| rng.next_f64() * 10.0).collect();
        let d = ydata(&values);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let expected = sd / n.sqrt();
        let s = bootstrap(
            |dd: &Dataset| {
                let v = dd.continuous_values("y")?;
                Ok(v.iter().sum::<f64>() / v.len() as f64)
            },
            &d,
            &BootstrapSpec {
                n_boot: 2000,
                base_seed: 5,
            },
        )
        .unwrap();
        assert!(
            (s.se - expected).abs() < 0.1 * expected,
            "se={} expected={}",
            s.se,
            expected
        );
    }

    #[test]
    fn failure_budget_enforced() {
        let d = ydata(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        // fail whenever the first resampled row is 1.0 (~1/8 of draws: ok)
        let flaky = |dd: &Dataset| {
            let v = dd.continuous_values("y")?;
            if v[0] == 1.0 {
                Err(Error::Estimation("boom".into()))
            } else {
                Ok(v.iter().sum::<f64>())
            }
        };
        let res = bootstrap(
            flaky,
            &d,
            &BootstrapSpec {
                n_boot: 200,
                base_seed: 3,
            },
        );
        let summary = res.unwrap();
        assert!(summary.n_failed > 0);
        assert_eq!(
            summary.replicate_estimates.len() + summary.n_failed,
            200
        );

        // always failing exceeds the budget
        let res = bootstrap(
            |_: &Dataset| -> Result<f64> { Err(Error::Estimation("boom".into())) },
            &d,
            &BootstrapSpec {
                n_boot: 20,
                base_seed: 3,
            },
        );
        assert!(matches!(res, Err(Error::BootstrapUnstable { .. })));
    }

    #[test]
    fn p_value_symmetry() {
        assert_abs_diff_eq!(p_value_two_sided(0.0, 1.0), 1.0, epsilon = 1e-12);
        let p = p_value_two_sided(1.959964, 1.0);
        assert_abs_diff_eq!(p, 0.05, epsilon = 1e-6);
        assert_abs_diff_eq!(
            p_value_two_sided(-2.5, 1.0),
            p_value_two_sided(2.5, 1.0),
            epsilon = 1e-15
        );
    }
}
