//! `causal` — configure a causal analysis, run one or all estimators,
//! and emit paper-style text reports or JSON.
//!
//! Exit codes: 0 success, 2 configuration error, 3 estimation error.

mod config;
mod derive;

use std::collections::HashMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use causal_core::data::{ColumnKind, Dataset};
use causal_core::estimators::*;
use causal_core::formula::{init_config, CausalConfig, ModelFormula};
use causal_core::report;

use config::{parse_contrasts, parse_grid, FileConfig, MethodSection};

#[derive(Parser)]
#[command(
    name = "causal",
    about = "Average-treatment-effect estimators for observational tabular data",
    version
)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// CSV data file (header row required).
    #[arg(long, value_name = "PATH")]
    data: Option<String>,

    /// Continuous outcome column.
    #[arg(long)]
    outcome: Option<String>,

    /// Binary treatment column (coerced to categorical).
    #[arg(long)]
    treatment: Option<String>,

    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,

    /// Comma-separated columns to load as categorical.
    #[arg(long, value_delimiter = ',')]
    categorical: Option<Vec<String>>,

    /// Use main-effects-only default formulas.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    simple: Option<bool>,

    /// Base seed for bootstrap resampling.
    #[arg(long)]
    seed: Option<u64>,

    /// Output format: text or json.
    #[arg(long)]
    format: Option<String>,

    /// Derived column, e.g. "highprice := price82 >= 1.5" (repeatable).
    #[arg(long = "derive", value_name = "NAME := EXPR")]
    derives: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the configuration and print the summary block.
    Init,
    /// Run one estimator.
    Fit {
        /// standardization | ipweighting | outcome-regression |
        /// propensity-matching | gestimation | doubly-robust | iv
        method: String,
        #[command(flatten)]
        opts: MethodArgs,
    },
    /// Run every configured estimator and print a comparison table.
    Compare {
        /// Write a plot-ready CSV (method, ate, ci_low, ci_high).
        #[arg(long, value_name = "PATH")]
        out_csv: Option<PathBuf>,

        /// Comma-separated subset of estimators to run.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

#[derive(Args, Default)]
struct MethodArgs {
    /// Outcome-model formula, e.g. "y ~ z + x + z:x + x^2".
    #[arg(long)]
    formula: Option<String>,

    /// Propensity-model formula.
    #[arg(long = "p-formula")]
    p_formula: Option<String>,

    /// Main-effects-only default formula for this fit.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    simple: Option<bool>,

    /// Main-effects-only default propensity formula for this fit.
    #[arg(long = "p-simple", num_args = 0..=1, default_missing_value = "true")]
    p_simple: Option<bool>,

    /// Bootstrap iterations.
    #[arg(long = "n-boot")]
    n_boot: Option<usize>,

    /// Stabilized IP weights.
    #[arg(long)]
    sw: Option<bool>,

    /// IP-weight denominator: treated-probability | observed-probability.
    #[arg(long = "weight-form")]
    weight_form: Option<String>,

    /// Method variant: matching strata|std, g-estimation one.linear|one.grid.
    #[arg(long = "type")]
    kind: Option<String>,

    /// Grid as lo:hi:step for grid-search g-estimation.
    #[arg(long)]
    grid: Option<String>,

    /// Stratum width (quantile step or fixed bin width).
    #[arg(long = "grp-width")]
    grp_width: Option<f64>,

    /// Quantile strata (true) or fixed-width bins (false).
    #[arg(long)]
    quant: Option<bool>,

    /// Continuous contrasts, e.g. "age=21,30,40;smokeintensity=5,20".
    #[arg(long)]
    contrasts: Option<String>,

    /// Instrumental variable column.
    #[arg(long)]
    iv: Option<String>,

    /// Doubly-robust variant: aipw | treated-only.
    #[arg(long)]
    variant: Option<String>,

    /// CSV file of externally computed propensity scores (one column).
    #[arg(long = "p-scores")]
    p_scores: Option<String>,

    /// CSV file of outcome predictions (columns s1,s0; or one column for
    /// the treated-only doubly-robust variant).
    #[arg(long)]
    predictions: Option<String>,
}

impl MethodArgs {
    fn to_section(&self) -> MethodSection {
        MethodSection {
            formula: self.formula.clone(),
            p_formula: self.p_formula.clone(),
            simple: self.simple,
            p_simple: self.p_simple,
            n_boot: self.n_boot,
            sw: self.sw,
            weight_form: self.weight_form.clone(),
            kind: self.kind.clone(),
            grid: self.grid.clone(),
            grp_width: self.grp_width,
            quant: self.quant,
            contrasts: self.contrasts.clone(),
            iv: self.iv.clone(),
            variant: self.variant.clone(),
            p_scores: self.p_scores.clone(),
            predictions: self.predictions.clone(),
        }
    }
}

enum CliError {
    Config(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Estimation(m) => m,
        }
    }
}

fn cfg_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

fn est_err(e: causal_core::Error) -> CliError {
    CliError::Estimation(e.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

struct Session {
    /// Loaded data after derives, before complete-case filtering.
    raw: Dataset,
    cfg: CausalConfig,
    seed: u64,
    format: Format,
    file: FileConfig,
}

const METHODS: [&str; 7] = [
    "standardization",
    "ipweighting",
    "outcome-regression",
    "propensity-matching",
    "gestimation",
    "doubly-robust",
    "iv",
];

fn build_session(cli: &Cli) -> Result<Session, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(cfg_err)?,
        None => FileConfig::default(),
    };
    let d = &file.defaults;
    let data_path = cli
        .data
        .clone()
        .or_else(|| d.data.clone())
        .ok_or_else(|| cfg_err("no data file given (--data or [defaults].data)"))?;
    let outcome = cli
        .outcome
        .clone()
        .or_else(|| d.outcome.clone())
        .ok_or_else(|| cfg_err("no outcome column given"))?;
    let treatment = cli
        .treatment
        .clone()
        .or_else(|| d.treatment.clone())
        .ok_or_else(|| cfg_err("no treatment column given"))?;
    let covariates = cli
        .covariates
        .clone()
        .or_else(|| d.covariates.clone())
        .unwrap_or_default();
    let mut categorical = cli
        .categorical
        .clone()
        .or_else(|| d.categorical.clone())
        .unwrap_or_default();
    // the treatment is always loaded as categorical
    if !categorical.contains(&treatment) {
        categorical.push(treatment.clone());
    }
    let simple = cli.simple.or(d.simple).unwrap_or(false);
    let seed = cli.seed.or(d.seed).unwrap_or(0);
    let format = match cli
        .format
        .clone()
        .or_else(|| d.format.clone())
        .unwrap_or_else(|| "text".to_string())
        .as_str()
    {
        "text" => Format::Text,
        "json" => Format::Json,
        other => return Err(cfg_err(format!("unknown format `{other}`"))),
    };

    let overrides: HashMap<String, ColumnKind> = categorical
        .iter()
        .map(|c| (c.clone(), ColumnKind::Categorical))
        .collect();
    let mut raw = Dataset::load_csv(&data_path, &overrides)
        .map_err(|e| cfg_err(format!("loading `{data_path}`: {e}")))?;
    let mut derives: Vec<String> = d.derive.clone().unwrap_or_default();
    derives.extend(cli.derives.iter().cloned());
    for directive in &derives {
        raw = derive::apply_derive(&raw, directive).map_err(cfg_err)?;
    }
    let cfg = init_config(&outcome, &treatment, &covariates, raw.clone(), simple)
        .map_err(|e| cfg_err(e.to_string()))?;
    Ok(Session {
        raw,
        cfg,
        seed,
        format,
        file,
    })
}

fn parse_formula(s: &Option<String>) -> Result<Option<ModelFormula>, CliError> {
    match s {
        Some(text) => Ok(Some(
            ModelFormula::parse(text).map_err(|e| cfg_err(e.to_string()))?,
        )),
        None => Ok(None),
    }
}

/// Outcome formula: explicit string, else the default at the requested
/// simplicity (falling back to the session-wide setting).
fn outcome_formula(
    s: &Session,
    section: &MethodSection,
) -> Result<Option<ModelFormula>, CliError> {
    if let Some(f) = parse_formula(&section.formula)? {
        return Ok(Some(f));
    }
    Ok(section
        .simple
        .map(|simple| s.cfg.default_outcome_formula_with(simple)))
}

fn propensity_formula(
    s: &Session,
    section: &MethodSection,
) -> Result<Option<ModelFormula>, CliError> {
    if let Some(f) = parse_formula(&section.p_formula)? {
        return Ok(Some(f));
    }
    Ok(section
        .p_simple
        .map(|simple| s.cfg.default_propensity_formula_with(simple)))
}

fn load_scores(section: &MethodSection) -> Result<Option<Vec<f64>>, CliError> {
    match &section.p_scores {
        Some(path) => Ok(Some(config::read_vector(path).map_err(cfg_err)?)),
        None => Ok(None),
    }
}

fn weight_form(section: &MethodSection) -> Result<IpwWeightForm, CliError> {
    match section.weight_form.as_deref() {
        None | Some("treated-probability") => Ok(IpwWeightForm::TreatedProbability),
        Some("observed-probability") => Ok(IpwWeightForm::ObservedProbability),
        Some(other) => Err(cfg_err(format!(
            "unknown weight form `{other}` (expected treated-probability or observed-probability)"
        ))),
    }
}

enum MethodOutput {
    Effect(EffectEstimate),
    Table(StratifiedEffects),
}

fn run_method(s: &Session, method: &str, section: &MethodSection) -> Result<MethodOutput, CliError> {
    match method {
        "standardization" => {
            let est = standardization(
                &s.cfg,
                &StandardizationOptions {
                    formula: outcome_formula(s, section)?,
                    n_boot: section.n_boot.unwrap_or(50),
                    seed: s.seed,
                },
            )
            .map_err(est_err)?;
            Ok(MethodOutput::Effect(est))
        }
        "ipweighting" => {
            let est = ip_weighting(
                &s.cfg,
                &IpwOptions {
                    p_formula: propensity_formula(s, section)?,
                    p_scores: load_scores(section)?,
                    stabilized: section.sw.unwrap_or(true),
                    weight_form: weight_form(section)?,
                    n_boot: section.n_boot.unwrap_or(0),
                    seed: s.seed,
                },
            )
            .map_err(est_err)?;
            Ok(MethodOutput::Effect(est))
        }
        "outcome-regression" => {
            let contrasts = match &section.contrasts {
                Some(text) => parse_contrasts(text).map_err(cfg_err)?,
                None => Vec::new(),
            };
            let table = outcome_regression(
                &s.cfg,
                &OutcomeRegressionOptions {
                    formula: outcome_formula(s, section)?,
                    contrasts,
                },
            )
            .map_err(est_err)?;
            Ok(MethodOutput::Table(table))
        }
        "propensity-matching" => {
            let kind = match section.kind.as_deref() {
                None | Some("strata") => MatchingKind::Strata,
                Some("std") => MatchingKind::Std,
                Some(other) => {
                    return Err(cfg_err(format!(
                        "unknown matching type `{other}` (expected strata or std)"
                    )))
                }
            };
            let result = propensity_matching(
                &s.cfg,
                &MatchingOptions {
                    kind,
                    p_scores: load_scores(section)?,
                    p_formula: propensity_formula(s, section)?,
                    grp_width: section.grp_width.unwrap_or(0.1),
                    quant: section.quant.unwrap_or(true),
                    formula: parse_formula(&section.formula)?,
                    n_boot: section.n_boot.unwrap_or(50),
                    seed: s.seed,
                },
            )
            .map_err(est_err)?;
            Ok(match result {
                MatchingResult::Strata(t) => MethodOutput::Table(t),
                MatchingResult::Std(e) => MethodOutput::Effect(e),
            })
        }
        "gestimation" => {
            let kind = match (section.kind.as_deref(), &section.grid) {
                (Some("one.linear"), _) => "linear",
                (Some("one.grid"), _) => "grid",
                (Some(other), _) => {
                    return Err(cfg_err(format!(
                        "unknown g-estimation type `{other}` (expected one.linear or one.grid)"
                    )))
                }
                (None, Some(_)) => "grid",
                (None, None) => "linear",
            };
            if kind == "grid" {
                let grid_text = section
                    .grid
                    .as_ref()
                    .ok_or_else(|| cfg_err("grid g-estimation requires --grid lo:hi:step"))?;
                let grid = parse_grid(grid_text).map_err(cfg_err)?;
                let (est, _) = gestimation_grid(
                    &s.cfg,
                    &grid,
                    &GridOptions {
                        p_formula: propensity_formula(s, section)?,
                        stabilized: section.sw.unwrap_or(true),
                    },
                )
                .map_err(est_err)?;
                Ok(MethodOutput::Effect(est))
            } else {
                let est = gestimation_linear(
                    &s.cfg,
                    &GestimationOptions {
                        p_formula: propensity_formula(s, section)?,
                        stabilized: section.sw.unwrap_or(true),
                        n_boot: section.n_boot.unwrap_or(100),
                        seed: s.seed,
                    },
                )
                .map_err(est_err)?;
                Ok(MethodOutput::Effect(est))
            }
        }
        "doubly-robust" => {
            let variant = match section.variant.as_deref() {
                None | Some("aipw") => DrVariant::Aipw,
                Some("treated-only") => DrVariant::TreatedOnly,
                Some(other) => {
                    return Err(cfg_err(format!(
                        "unknown doubly-robust variant `{other}` (expected aipw or treated-only)"
                    )))
                }
            };
            let outcome_predictions = match &section.predictions {
                Some(path) => {
                    let (first, second) = config::read_predictions(path).map_err(cfg_err)?;
                    Some(match second {
                        Some(s0) => OutcomeOverride::Counterfactual { s1: first, s0 },
                        None => OutcomeOverride::Fitted(first),
                    })
                }
                None => None,
            };
            let est = doubly_robust(
                &s.cfg,
                &DoublyRobustOptions {
                    formula: outcome_formula(s, section)?,
                    p_formula: propensity_formula(s, section)?,
                    outcome_predictions,
                    p_scores: load_scores(section)?,
                    variant,
                    n_boot: section.n_boot.unwrap_or(50),
                    seed: s.seed,
                },
            )
            .map_err(est_err)?;
            Ok(MethodOutput::Effect(est))
        }
        "iv" => {
            let iv_name = section
                .iv
                .clone()
                .ok_or_else(|| cfg_err("iv requires an instrument column (--iv NAME)"))?;
            if !s.raw.has_column(&iv_name) {
                return Err(cfg_err(format!("unknown instrument column `{iv_name}`")));
            }
            // the instrument defines its own complete-case sample over the
            // raw data; covariate missingness is irrelevant here
            let sample = s
                .raw
                .complete_cases(&[
                    s.cfg.outcome.as_str(),
                    s.cfg.treatment.as_str(),
                    iv_name.as_str(),
                ])
                .map_err(est_err)?;
            let est = iv_estimate(
                &iv_name,
                &sample,
                &s.cfg,
                section.n_boot.unwrap_or(50),
                s.seed,
            )
            .map_err(est_err)?;
            Ok(MethodOutput::Effect(est))
        }
        other => Err(cfg_err(format!(
            "unknown method `{other}` (expected one of {})",
            METHODS.join(", ")
        ))),
    }
}

fn print_fit(s: &Session, out: &MethodOutput) {
    match s.format {
        Format::Json => {
            let v = match out {
                MethodOutput::Effect(e) => report::effect_json(e),
                MethodOutput::Table(t) => report::stratified_json(t),
            };
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
        }
        Format::Text => match out {
            MethodOutput::Effect(e) => {
                if let Some(fit) = e.underlying_fits.last() {
                    println!("{}", fit.report());
                }
                print!("{}", report::render_effect(e, &s.cfg.treatment));
                for fit in &e.underlying_fits {
                    for w in &fit.warnings {
                        eprintln!("warning: {w}");
                    }
                }
            }
            MethodOutput::Table(t) => {
                print!("{}", report::render_stratified(t, &s.cfg.treatment));
            }
        },
    }
}

/// One comparison row: the method's single representative estimate.
/// Stratified methods are pooled by precision; outcome regression is
/// represented by its first (baseline) contrast.
fn representative(method: &str, out: &MethodOutput) -> Option<(f64, Option<f64>, Option<f64>)> {
    match out {
        MethodOutput::Effect(e) => Some((e.ate, e.ci_low, e.ci_high)),
        MethodOutput::Table(t) => {
            if method == "outcome-regression" {
                t.rows
                    .first()
                    .map(|r| (r.estimate, Some(r.ci_low), Some(r.ci_high)))
            } else {
                t.pooled().map(|(est, se)| {
                    let (lo, hi) = causal_core::inference::wald_interval(est, se, 0.95);
                    (est, Some(lo), Some(hi))
                })
            }
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => report::fmt_signif(x, 7),
        _ => "NA".to_string(),
    }
}

fn run_compare(
    s: &Session,
    out_csv: &Option<PathBuf>,
    methods: &Option<Vec<String>>,
) -> Result<(), CliError> {
    let selected: Vec<String> = match methods.clone().or_else(|| s.file.defaults.methods.clone()) {
        Some(list) => {
            for m in &list {
                if !METHODS.contains(&m.as_str()) {
                    return Err(cfg_err(format!(
                        "unknown method `{m}` (expected one of {})",
                        METHODS.join(", ")
                    )));
                }
            }
            list
        }
        None => METHODS.iter().map(|m| m.to_string()).collect(),
    };
    let mut rows = Vec::new();
    let mut n_ok = 0;
    for method in selected.iter().map(|m| m.as_str()) {
        let section = s.file.section(method);
        if method == "iv" && section.iv.is_none() {
            rows.push((method, None, "skipped (no instrument configured)".to_string()));
            continue;
        }
        match run_method(s, method, &section) {
            Ok(out) => {
                let rep = representative(method, &out);
                match rep {
                    Some(r) => {
                        n_ok += 1;
                        rows.push((method, Some(r), "ok".to_string()));
                    }
                    None => rows.push((method, None, "no representative estimate".to_string())),
                }
            }
            Err(e) => rows.push((method, None, format!("error: {}", e.message()))),
        }
    }

    match s.format {
        Format::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|(m, r, status)| match r {
                    Some((ate, lo, hi)) => json!({
                        "method": m, "ate": ate, "ci": [lo, hi], "status": status,
                    }),
                    None => json!({"method": m, "status": status}),
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&json!({"methods": arr})).unwrap());
        }
        Format::Text => {
            println!(
                "{:<22} {:>10} {:>10} {:>10}  status",
                "method", "ate", "2.5 %", "97.5 %"
            );
            for (m, r, status) in &rows {
                match r {
                    Some((ate, lo, hi)) => println!(
                        "{:<22} {:>10} {:>10} {:>10}  {}",
                        m,
                        report::fmt_signif(*ate, 7),
                        fmt_opt(*lo),
                        fmt_opt(*hi),
                        status
                    ),
                    None => println!("{:<22} {:>10} {:>10} {:>10}  {}", m, "-", "-", "-", status),
                }
            }
        }
    }

    if let Some(path) = out_csv {
        let mut text = String::from("method,ate,ci_low,ci_high\n");
        for (m, r, _) in &rows {
            if let Some((ate, lo, hi)) = r {
                text.push_str(&format!(
                    "{m},{ate},{},{}\n",
                    lo.map(|v| v.to_string()).unwrap_or_default(),
                    hi.map(|v| v.to_string()).unwrap_or_default()
                ));
            }
        }
        std::fs::write(path, text)
            .map_err(|e| cfg_err(format!("cannot write `{}`: {e}", path.display())))?;
    }

    if n_ok == 0 {
        return Err(CliError::Estimation(
            "every estimator failed; see the comparison table".into(),
        ));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let session = build_session(cli)?;
    match &cli.command {
        Command::Init => {
            println!("Successfully initialized!\n");
            print!("{}", session.cfg.summary());
            Ok(())
        }
        Command::Fit { method, opts } => {
            let section = session.file.section(method).overridden_by(&opts.to_section());
            let out = run_method(&session, method, &section)?;
            print_fit(&session, &out);
            Ok(())
        }
        Command::Compare { out_csv, methods } => run_compare(&session, out_csv, methods),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
