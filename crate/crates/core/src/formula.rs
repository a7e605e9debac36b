//! Model formulas and the global causal configuration.
//!
//! The formula grammar is deliberately small:
//!
//! ```text
//! RESPONSE ~ TERM (+ TERM)*
//! TERM := NAME | NAME:NAME | NAME^2
//! ```
//!
//! `:` is an interaction-only term and `^2` an explicit square column; an
//! empty right-hand side renders as `1` (intercept only).

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Main(String),
    Interaction(String, String),
    Square(String),
}

impl Term {
    pub fn render(&self) -> String {
        match self {
            Term::Main(v) => v.clone(),
            Term::Interaction(a, b) => format!("{a}:{b}"),
            Term::Square(v) => format!("{v}^2"),
        }
    }

    /// Variables this term reads.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Term::Main(v) | Term::Square(v) => vec![v],
            Term::Interaction(a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFormula {
    pub response: String,
    pub terms: Vec<Term>,
}

impl ModelFormula {
    pub fn new(response: impl Into<String>, terms: Vec<Term>) -> Result<Self> {
        let response = response.into();
        if response.is_empty() {
            return Err(Error::Formula("empty response".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) {
                return Err(Error::Formula(format!("duplicate term `{}`", t.render())));
            }
        }
        Ok(ModelFormula { response, terms })
    }

    /// Parse `RESPONSE ~ TERM (+ TERM)*`.
    pub fn parse(s: &str) -> Result<Self> {
        let (lhs, rhs) = s
            .split_once('~')
            .ok_or_else(|| Error::Formula(format!("missing `~` in `{s}`")))?;
        let response = lhs.trim().to_string();
        let rhs = rhs.trim();
        let mut terms = Vec::new();
        if rhs != "1" && !rhs.is_empty() {
            for raw in rhs.split('+') {
                let tok = raw.trim();
                if tok.is_empty() {
                    return Err(Error::Formula(format!("empty term in `{s}`")));
                }
                if tok == "1" {
                    continue; // explicit intercept; always present
                }
                let term = if let Some(name) = tok.strip_suffix("^2") {
                    Term::Square(valid_name(name.trim())?)
                } else if let Some((a, b)) = tok.split_once(':') {
                    Term::Interaction(valid_name(a.trim())?, valid_name(b.trim())?)
                } else {
                    Term::Main(valid_name(tok)?)
                };
                terms.push(term);
            }
        }
        ModelFormula::new(response, terms)
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return format!("{} ~ 1", self.response);
        }
        let rhs: Vec<String> = self.terms.iter().map(|t| t.render()).collect();
        format!("{} ~ {}", self.response, rhs.join(" + "))
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut vars: Vec<&str> = vec![self.response.as_str()];
        for t in &self.terms {
            for v in t.variables() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        vars
    }
}

fn valid_name(s: &str) -> Result<String> {
    if s.is_empty() || s.contains(['+', '~', ':', '^', ' ']) {
        return Err(Error::Formula(format!("invalid variable name `{s}`")));
    }
    Ok(s.to_string())
}

/// Global analysis configuration: outcome, treatment, covariates, and the
/// complete-case estimation sample they define.
#[derive(Debug, Clone)]
pub struct CausalConfig {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub simple: bool,
    /// Estimation sample: rows complete on outcome, treatment, covariates.
    pub data: Dataset,
}

/// Validate kinds, filter to complete cases, and return the configuration.
pub fn init_config(
    outcome: &str,
    treatment: &str,
    covariates: &[String],
    data: Dataset,
    simple: bool,
) -> Result<CausalConfig> {
    let out_col = data.column(outcome)?;
    if !out_col.is_continuous() {
        return Err(Error::InvalidColumn {
            name: outcome.to_string(),
            message: "outcome must be continuous".into(),
        });
    }
    let tr_col = data.column(treatment)?;
    match tr_col.levels() {
        Some(levels) if levels.len() == 2 => {}
        Some(levels) => {
            return Err(Error::InvalidColumn {
                name: treatment.to_string(),
                message: format!("treatment must have exactly 2 levels, found {}", levels.len()),
            })
        }
        None => {
            return Err(Error::InvalidColumn {
                name: treatment.to_string(),
                message: "treatment must be categorical".into(),
            })
        }
    }
    for c in covariates {
        if c == outcome || c == treatment {
            return Err(Error::InvalidColumn {
                name: c.clone(),
                message: "covariates must exclude the outcome and treatment".into(),
            });
        }
        data.column(c)?;
    }
    let mut vars: Vec<&str> = vec![outcome, treatment];
    vars.extend(covariates.iter().map(|s| s.as_str()));
    let filtered = data.complete_cases(&vars)?;
    Ok(CausalConfig {
        outcome: outcome.to_string(),
        treatment: treatment.to_string(),
        covariates: covariates.to_vec(),
        simple,
        data: filtered,
    })
}

impl CausalConfig {
    /// Covariates split by kind, declared order preserved within each group.
    pub fn split_covariates(&self) -> (Vec<&str>, Vec<&str>) {
        let mut cats = Vec::new();
        let mut conts = Vec::new();
        for c in &self.covariates {
            // init_config validated existence
            if self.data.column(c).map(|col| col.is_categorical()).unwrap_or(false) {
                cats.push(c.as_str());
            } else {
                conts.push(c.as_str());
            }
        }
        (cats, conts)
    }

    pub fn default_outcome_formula(&self) -> ModelFormula {
        self.default_outcome_formula_with(self.simple)
    }

    /// Outcome-model formula. Non-simple: treatment, categorical main
    /// effects, then per continuous covariate a main effect, a
    /// treatment interaction, and a square. Simple: main effects only.
    pub fn default_outcome_formula_with(&self, simple: bool) -> ModelFormula {
        let (cats, conts) = self.split_covariates();
        let mut terms = vec![Term::Main(self.treatment.clone())];
        for c in &cats {
            terms.push(Term::Main((*c).to_string()));
        }
        for x in &conts {
            terms.push(Term::Main((*x).to_string()));
            if !simple {
                terms.push(Term::Interaction(self.treatment.clone(), (*x).to_string()));
                terms.push(Term::Square((*x).to_string()));
            }
        }
        ModelFormula {
            response: self.outcome.clone(),
            terms,
        }
    }

    pub fn default_propensity_formula(&self) -> ModelFormula {
        self.default_propensity_formula_with(self.simple)
    }

    /// Propensity-model formula: categorical main effects, continuous main
    /// effects plus squares; no treatment term, no interactions. Simple
    /// drops the squares.
    pub fn default_propensity_formula_with(&self, simple: bool) -> ModelFormula {
        let (cats, conts) = self.split_covariates();
        let mut terms = Vec::new();
        for c in &cats {
            terms.push(Term::Main((*c).to_string()));
        }
        for x in &conts {
            terms.push(Term::Main((*x).to_string()));
            if !simple {
                terms.push(Term::Square((*x).to_string()));
            }
        }
        ModelFormula {
            response: self.treatment.clone(),
            terms,
        }
    }

    /// Non-reference level label of the treatment (the "treated" arm).
    pub fn treated_level(&self) -> String {
        self.data
            .column(&self.treatment)
            .ok()
            .and_then(|c| c.levels().map(|l| l[1].clone()))
            .unwrap_or_else(|| "1".to_string())
    }

    /// Human-readable summary block: variables, size, default formulas.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str("Summary:\n\n");
        s.push_str(&format!("Outcome - {}\n", self.outcome));
        s.push_str(&format!("Treatment - {}\n", self.treatment));
        s.push_str(&format!(
            "Covariates - [ {} ]\n\n",
            self.covariates.join(", ")
        ));
        s.push_str(&format!(
            "Size - {} x {}\n\n",
            self.data.n_rows(),
            self.data.n_cols()
        ));
        s.push_str("Default formula for outcome models:\n");
        s.push_str(&self.default_outcome_formula().render());
        s.push_str("\n\n");
        s.push_str("Default formula for propensity models:\n");
        s.push_str(&self.default_propensity_formula().render());
        s.push('\n');
        s
    }
}
