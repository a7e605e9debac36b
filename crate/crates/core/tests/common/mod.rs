//! Shared fixtures: NHEFS loading and synthetic data generators.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use causal_core::data::{Column, ColumnKind, Dataset};
use causal_core::formula::{init_config, CausalConfig};
use causal_core::rng::SplitMix64;

pub const NHEFS_COVARIATES: [&str; 9] = [
    "sex",
    "race",
    "age",
    "education",
    "smokeintensity",
    "smokeyrs",
    "exercise",
    "active",
    "wt71",
];

pub const NHEFS_CATEGORICAL: [&str; 6] = ["qsmk", "sex", "race", "education", "exercise", "active"];

pub fn nhefs_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/nhefs.csv")
}

/// Full NHEFS table (1629 rows) with the analysis columns typed.
pub fn load_nhefs() -> Dataset {
    let overrides: HashMap<String, ColumnKind> = NHEFS_CATEGORICAL
        .iter()
        .map(|c| (c.to_string(), ColumnKind::Categorical))
        .collect();
    Dataset::load_csv(nhefs_path().to_str().unwrap(), &overrides)
        .expect("vendored NHEFS data loads")
}

/// The standard analysis configuration (complete-case sample, 1566 rows).
pub fn nhefs_config(simple: bool) -> CausalConfig {
    let covs: Vec<String> = NHEFS_COVARIATES.iter().map(|s| s.to_string()).collect();
    init_config("wt82_71", "qsmk", &covs, load_nhefs(), simple).expect("NHEFS config")
}

/// Standard-normal sampler (Box–Muller over SplitMix64).
pub struct GaussianRng {
    rng: SplitMix64,
    cache: Option<f64>,
}

impl GaussianRng {
    pub fn new(seed: u64) -> Self {
        GaussianRng {
            rng: SplitMix64::new(seed),
            cache: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.cache.take() {
            return v;
        }
        let u1 = self.rng.next_f64().max(1e-300);
        let u2 = self.rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cache = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> f64 {
        if self.rng.next_f64() < p {
            1.0
        } else {
            0.0
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Confounded linear-Gaussian data: two standard-normal covariates drive
/// both treatment and outcome; the treatment effect is constant.
pub struct LinearDgp {
    pub ate: f64,
    pub treat_x1: f64,
    pub treat_x2: f64,
    pub out_x1: f64,
    pub out_x2: f64,
}

impl Default for LinearDgp {
    fn default() -> Self {
        LinearDgp {
            ate: 2.0,
            treat_x1: 0.8,
            treat_x2: -0.6,
            out_x1: 1.5,
            out_x2: 1.0,
        }
    }
}

impl LinearDgp {
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = GaussianRng::new(seed);
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.normal();
            let b = rng.normal();
            let pz = logistic(0.3 + self.treat_x1 * a + self.treat_x2 * b);
            let zi = rng.bernoulli(pz);
            let yi = self.ate * zi + self.out_x1 * a + self.out_x2 * b + rng.normal();
            x1.push(a);
            x2.push(b);
            z.push(zi);
            y.push(yi);
        }
        dataset_from_columns(y, z, vec![("x1", x1), ("x2", x2)])
    }
}

/// Assemble a dataset with a continuous outcome `y`, a 0/1 categorical
/// treatment `z`, and continuous covariates.
pub fn dataset_from_columns(
    y: Vec<f64>,
    z: Vec<f64>,
    covs: Vec<(&str, Vec<f64>)>,
) -> Dataset {
    let n = y.len();
    let mut cols: Vec<(String, Column)> = Vec::new();
    cols.push((
        "y".to_string(),
        Column::Continuous {
            values: y,
            missing: vec![false; n],
        },
    ));
    cols.push((
        "z".to_string(),
        Column::Categorical {
            levels: vec!["0".to_string(), "1".to_string()],
            codes: z.iter().map(|&v| if v == 1.0 { 1 } else { 0 }).collect(),
            missing: vec![false; n],
        },
    ));
    for (name, values) in covs {
        cols.push((
            name.to_string(),
            Column::Continuous {
                values,
                missing: vec![false; n],
            },
        ));
    }
    Dataset::new(cols).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
