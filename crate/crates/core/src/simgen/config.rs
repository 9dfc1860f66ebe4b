//! Line-oriented `key = value` experiment files.
//!
//! ```text
//! # null battery
//! design = null_battery
//! m = 1000
//! n = 50
//! methods = uncorrected, holm, permmax, dcal
//! repetitions = 50
//! seed = 1
//! ```
//!
//! List values are comma separated. `n`, `rho`, `fraction` and `outlier`
//! lists expand into one design per combination (the effect grid keeps its
//! `rho` and `n` lists inside a single design).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{DesignKind, Method, RunOptions, SimDesign};
use super::OutlierKind;
use crate::dcal::OosScheme;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

const KNOWN_KEYS: &[&str] = &[
    "design",
    "m",
    "m_true",
    "m_null",
    "rho",
    "n",
    "outlier",
    "outlier_sd",
    "outlier_shift",
    "fraction",
    "methods",
    "schemes",
    "alpha",
    "repetitions",
    "permutations",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamily {
    NullBattery,
    CorrelatedBattery,
    EffectGrid,
    Contaminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: DesignFamily,
    pub m: usize,
    pub m_true: usize,
    pub m_null: usize,
    pub rhos: Vec<f64>,
    pub ns: Vec<usize>,
    /// Outlier model names: high_variance, univariate, bivariate.
    pub outliers: Vec<String>,
    pub outlier_sd: f64,
    pub outlier_shift: f64,
    pub fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub options: RunOptions,
    pub seed: u64,
}

impl SimConfig {
    fn new(family: DesignFamily) -> Self {
        Self {
            family,
            m: 1000,
            m_true: 100,
            m_null: 900,
            rhos: vec![0.5],
            ns: vec![50],
            outliers: vec!["univariate".into()],
            outlier_sd: 3.0,
            outlier_shift: super::DEFAULT_OUTLIER_SHIFT,
            fractions: vec![0.1],
            methods: vec![Method::Uncorrected, Method::dcal()],
            options: RunOptions::default(),
            seed: 0,
        }
    }

    fn outlier_kind(&self, name: &str) -> Result<OutlierKind> {
        match name {
            "high_variance" => Ok(OutlierKind::HighVariance {
                sd: self.outlier_sd,
            }),
            "univariate" => Ok(OutlierKind::Univariate {
                shift: self.outlier_shift,
            }),
            "bivariate" => Ok(OutlierKind::Bivariate {
                shift: self.outlier_shift,
            }),
            other => Err(Error::Config {
                key: "outlier".into(),
                message: format!("unknown outlier model '{other}'"),
            }),
        }
    }

    /// Expanded designs; design `i` is seeded with `derive(seed, [i])`.
    pub fn designs(&self) -> Result<Vec<SimDesign>> {
        let kinds: Vec<(DesignKind, usize)> = match self.family {
            DesignFamily::NullBattery => self
                .ns
                .iter()
                .map(|&n| (DesignKind::NullBattery { m: self.m }, n))
                .collect(),
            DesignFamily::CorrelatedBattery => self
                .ns
                .iter()
                .flat_map(|&n| {
                    self.rhos.iter().map(move |&rho| {
                        (
                            DesignKind::CorrelatedBattery {
                                m_true: self.m_true,
                                m_null: self.m_null,
                                rho,
                            },
                            n,
                        )
                    })
                })
                .collect(),
            DesignFamily::EffectGrid => vec![(
                DesignKind::EffectGrid {
                    rhos: self.rhos.clone(),
                    ns: self.ns.clone(),
                },
                0,
            )],
            DesignFamily::Contaminated => {
                let mut out = Vec::new();
                for name in &self.outliers {
                    let outlier = self.outlier_kind(name)?;
                    for &n in &self.ns {
                        for &rho in &self.rhos {
                            for &fraction in &self.fractions {
                                out.push((
                                    DesignKind::Contaminated {
                                        rho,
                                        outlier,
                                        fraction,
                                    },
                                    n,
                                ));
                            }
                        }
                    }
                }
                out
            }
        };
        Ok(kinds
            .into_iter()
            .enumerate()
            .map(|(i, (kind, n))| SimDesign::new(kind, n, derive_seed(self.seed, &[i as u64])))
            .collect())
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse '{}'", value.trim())))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = list(value)
        .map(|v| parse_one(key, v))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(config_err(key, "empty list"));
    }
    Ok(items)
}

/// Parse an experiment file. Unknown keys are rejected by name.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: lineno as u64 + 1,
                column: 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim().to_ascii_lowercase();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(config_err(&key, "unknown key"));
        }
        if entries.iter().any(|(k, _): &(String, String)| *k == key) {
            return Err(config_err(&key, "given more than once"));
        }
        entries.push((key, value.trim().to_string()));
    }

    let family = match entries.iter().find(|(k, _)| k == "design") {
        None => return Err(config_err("design", "missing")),
        Some((_, v)) => match v.as_str() {
            "null_battery" => DesignFamily::NullBattery,
            "correlated_battery" => DesignFamily::CorrelatedBattery,
            "effect_grid" => DesignFamily::EffectGrid,
            "contaminated" => DesignFamily::Contaminated,
            other => return Err(config_err("design", format!("unknown design '{other}'"))),
        },
    };
    let mut cfg = SimConfig::new(family);
    let mut schemes: Vec<OosScheme> = Vec::new();
    let mut methods_given = false;
    for (key, value) in &entries {
        match key.as_str() {
            "design" => {}
            "m" => cfg.m = parse_one(key, value)?,
            "m_true" => cfg.m_true = parse_one(key, value)?,
            "m_null" => cfg.m_null = parse_one(key, value)?,
            "rho" => cfg.rhos = parse_list(key, value)?,
            "n" => cfg.ns = parse_list(key, value)?,
            "outlier" => {
                cfg.outliers = list(value).map(str::to_string).collect();
                if cfg.outliers.is_empty() {
                    return Err(config_err(key, "empty list"));
                }
            }
            "outlier_sd" => cfg.outlier_sd = parse_one(key, value)?,
            "outlier_shift" => cfg.outlier_shift = parse_one(key, value)?,
            "fraction" => cfg.fractions = parse_list(key, value)?,
            "methods" => {
                cfg.methods = list(value)
                    .map(|m| m.parse().map_err(|_| config_err(key, format!("unknown method '{m}'"))))
                    .collect::<Result<_>>()?;
                methods_given = true;
            }
            "schemes" => {
                schemes = list(value)
                    .map(|s| s.parse().map_err(|_| config_err(key, format!("unknown scheme '{s}'"))))
                    .collect::<Result<_>>()?;
            }
            "alpha" => cfg.options.alpha = parse_one(key, value)?,
            "repetitions" => cfg.options.repetitions = parse_one(key, value)?,
            "permutations" => cfg.options.permutations = parse_one(key, value)?,
            "seed" => cfg.seed = parse_one(key, value)?,
            _ => unreachable!("key checked against KNOWN_KEYS"),
        }
    }
    if !schemes.is_empty() {
        if !methods_given {
            cfg.methods = vec![Method::Uncorrected];
        }
        for s in schemes {
            let m = Method::Dcal(s);
            if !cfg.methods.contains(&m) {
                cfg.methods.push(m);
            }
        }
    }
    if cfg.methods.is_empty() {
        return Err(config_err("methods", "empty list"));
    }
    // surface invalid values now rather than at run time
    for name in &cfg.outliers {
        cfg.outlier_kind(name)?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
