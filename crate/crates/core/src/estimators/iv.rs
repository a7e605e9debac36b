//! Standard (Wald) instrumental-variable estimator.
//!
//! Binary instrument: ratio of the outcome-mean difference to the
//! treated-fraction difference across instrument levels. Continuous
//! instrument: ratio of the OLS slopes of Y-on-V and Z-on-V, which
//! coincides with the binary formula for a 0/1-coded instrument.

use serde_json::json;

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::formula::CausalConfig;
use crate::inference::{bootstrap, BootstrapSpec};

use super::EffectEstimate;

const WEAK_DENOM: f64 = 1e-10;

fn wald_ratio(cfg: &CausalConfig, iv: &str, d: &Dataset) -> Result<f64> {
    let y = d.continuous_values(&cfg.outcome)?;
    let z = d.binary_indicator(&cfg.treatment)?;
    let n = d.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    match d.column(iv)? {
        Column::Categorical {
            levels,
            codes,
            missing,
        } => {
            if levels.len() != 2 {
                return Err(Error::Estimation(format!(
                    "instrument `{iv}` must be binary; found {} levels",
                    levels.len()
                )));
            }
            if missing.iter().any(|&m| m) {
                return Err(Error::Estimation(format!(
                    "instrument `{iv}` has missing values"
                )));
            }
            let mut sums = [[0.0f64; 2]; 2]; // [level][y,z]
            let mut counts = [0usize; 2];
            for i in 0..n {
                let g = codes[i] as usize;
                sums[g][0] += y[i];
                sums[g][1] += z[i];
                counts[g] += 1;
            }
            if counts[0] == 0 || counts[1] == 0 {
                return Err(Error::Estimation(format!(
                    "instrument `{iv}` has an empty level"
                )));
            }
            let y1 = sums[1][0] / counts[1] as f64;
            let y0 = sums[0][0] / counts[0] as f64;
            let z1 = sums[1][1] / counts[1] as f64;
            let z0 = sums[0][1] / counts[0] as f64;
            let den = z1 - z0;
            if den.abs() < WEAK_DENOM {
                return Err(Error::Estimation(format!(
                    "instrument `{iv}` is weak or null: treated fractions differ by {den:e}"
                )));
            }
            Ok((y1 - y0) / den)
        }
        Column::Continuous { .. } => {
            let v = d.continuous_values(iv)?;
            let vbar = v.iter().sum::<f64>() / n as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let c = v[i] - vbar;
                num += c * y[i];
                den += c * z[i];
            }
            if den.abs() < WEAK_DENOM * n as f64 {
                return Err(Error::Estimation(format!(
                    "instrument `{iv}` is weak or null"
                )));
            }
            Ok(num / den)
        }
    }
}

/// Wald IV estimate on `d` (callers choose the sample, typically complete
/// cases on outcome, treatment, and instrument). `n_boot = 0` reports the
/// point estimate with SE and CI absent.
pub fn iv_estimate(
    iv: &str,
    d: &Dataset,
    cfg: &CausalConfig,
    n_boot: usize,
    seed: u64,
) -> Result<EffectEstimate> {
    let ate = wald_ratio(cfg, iv, d)?;
    let mut est = EffectEstimate::new("iv", ate);
    if n_boot > 0 {
        let summary = bootstrap(
            |resample: &Dataset| wald_ratio(cfg, iv, resample),
            d,
            &BootstrapSpec {
                n_boot,
                base_seed: seed,
            },
        )?;
        est = est.with_wald_se(summary.se);
        est.diagnostics
            .insert("n_boot_failed".into(), json!(summary.n_failed));
    }
    est.diagnostics.insert("instrument".into(), json!(iv));
    Ok(est)
}
