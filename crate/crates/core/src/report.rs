//! Text and JSON rendering of estimator output.

use serde_json::{json, Value};

use crate::estimators::{EffectEstimate, StratifiedEffects};

/// Format with at most `digits` significant digits, trailing zeros
/// trimmed (R's default `print` convention for summary numbers).
pub fn fmt_signif(x: f64, digits: i32) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "Inf".to_string()
        } else {
            "-Inf".to_string()
        };
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - e);
    let rounded = (x * scale).round() / scale;
    format!("{rounded}")
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => fmt_signif(x, 7),
        Some(x) if x.is_infinite() => {
            if x > 0.0 { "Inf".into() } else { "-Inf".into() }
        }
        _ => "NA".to_string(),
    }
}

/// Paper-style average-treatment-effect block.
pub fn render_effect(e: &EffectEstimate, treatment: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("Average treatment effect of {treatment}:\n"));
    s.push_str(&format!("Estimate -  {}\n", fmt_signif(e.ate, 7)));
    s.push_str(&format!("SE       -  {}\n", opt(e.se)));
    s.push_str(&format!(
        "95% CI   -  ({}, {})\n",
        opt(e.ci_low),
        opt(e.ci_high)
    ));
    s
}

/// Per-stratum table with Wald intervals and p-values.
pub fn render_stratified(t: &StratifiedEffects, treatment: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("Average treatment effect of {treatment}:\n\n"));
    let label_w = t
        .rows
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max(8);
    s.push_str(&format!(
        "{:<label_w$} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "", "Estimate", "Std. Error", "2.5 %", "97.5 %", "Pr(>|z|)"
    ));
    for r in &t.rows {
        s.push_str(&format!(
            "{:<label_w$} {:>12.7} {:>12.6} {:>12.6} {:>12.6} {:>12.6}\n",
            r.label, r.estimate, r.se, r.ci_low, r.ci_high, r.p_value
        ));
    }
    s
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn opt_num(v: Option<f64>) -> Value {
    match v {
        Some(x) => num(x),
        None => Value::Null,
    }
}

/// Machine-readable form: method, ate, se, ci, counterfactual means,
/// strata, diagnostics.
pub fn effect_json(e: &EffectEstimate) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("method".into(), json!(e.method));
    obj.insert("ate".into(), num(e.ate));
    obj.insert("se".into(), opt_num(e.se));
    obj.insert(
        "ci".into(),
        json!([opt_num(e.ci_low), opt_num(e.ci_high)]),
    );
    if let Some((y0, y1)) = e.counterfactual_means {
        obj.insert(
            "counterfactual_means".into(),
            json!({"mean_y0": num(y0), "mean_y1": num(y1)}),
        );
    }
    obj.insert(
        "diagnostics".into(),
        Value::Object(e.diagnostics.clone().into_iter().collect()),
    );
    Value::Object(obj)
}

pub fn stratified_json(t: &StratifiedEffects) -> Value {
    json!({
        "method": t.method,
        "strata": t.rows.iter().map(|r| json!({
            "label": r.label,
            "estimate": num(r.estimate),
            "se": num(r.se),
            "ci": [num(r.ci_low), num(r.ci_high)],
            "p_value": num(r.p_value),
        })).collect::<Vec<_>>(),
        "diagnostics": Value::Object(t.diagnostics.clone().into_iter().collect()),
    })
}
