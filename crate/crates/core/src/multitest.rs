//! Holm, Benjamini–Hochberg and permutation-based corrections.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::is_constant;

pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const MIN_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    Uncorrected,
    Holm,
    Bh,
    Perm,
    PermMax,
}

impl Correction {
    pub fn needs_data(self) -> bool {
        matches!(self, Correction::Perm | Correction::PermMax)
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::Uncorrected => "uncorrected",
            Correction::Holm => "holm",
            Correction::Bh => "bh",
            Correction::Perm => "perm",
            Correction::PermMax => "permmax",
        })
    }
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uncorrected" | "uncorr" | "none" => Ok(Correction::Uncorrected),
            "holm" => Ok(Correction::Holm),
            "bh" | "fdr" => Ok(Correction::Bh),
            "perm" => Ok(Correction::Perm),
            "permmax" | "perm_max" => Ok(Correction::PermMax),
            other => Err(Error::Config {
                key: other.to_string(),
                message: "unknown correction".into(),
            }),
        }
    }
}

fn validate(raw: &[f64]) -> Result<()> {
    for &p in raw {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain {
                what: "p-value",
                value: p,
            });
        }
    }
    Ok(())
}

/// Indices sorted by p-value, ties broken by original index.
fn ascending_order(raw: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        raw[a]
            .partial_cmp(&raw[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_adjust(raw: &[f64]) -> Result<Vec<f64>> {
    validate(raw)?;
    let m = raw.len();
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in ascending_order(raw).iter().enumerate() {
        let candidate = ((m - rank) as f64 * raw[idx]).min(1.0);
        running = running.max(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(raw: &[f64]) -> Result<Vec<f64>> {
    validate(raw)?;
    let m = raw.len();
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &idx) in ascending_order(raw).iter().enumerate().rev() {
        // m/k first: exact at k = 1 and k = m, so Holm ≥ BH survives rounding
        let candidate = (m as f64 / (rank + 1) as f64 * raw[idx]).min(1.0);
        running = running.min(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

/// Adjust `raw` with a p-value-only correction.
pub fn adjust(raw: &[f64], correction: Correction) -> Result<Vec<f64>> {
    match correction {
        Correction::Uncorrected => {
            validate(raw)?;
            Ok(raw.to_vec())
        }
        Correction::Holm => holm_adjust(raw),
        Correction::Bh => bh_adjust(raw),
        Correction::Perm | Correction::PermMax => Err(Error::Config {
            key: correction.to_string(),
            message: "permutation corrections need the raw data".into(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for PermutationPlan {
    fn default() -> Self {
        Self {
            n_permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

impl PermutationPlan {
    pub fn new(n_permutations: usize, seed: u64) -> Result<Self> {
        if n_permutations < MIN_PERMUTATIONS {
            return Err(Error::Config {
                key: "permutations".into(),
                message: format!("need at least {MIN_PERMUTATIONS}, got {n_permutations}"),
            });
        }
        Ok(Self {
            n_permutations,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermMode {
    PerTest,
    MaxStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPValues {
    pub per_test: Vec<f64>,
    pub max_stat: Vec<f64>,
}

/// Centred and scaled to unit norm, so a correlation is a dot product.
fn standardize(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|a| a - m).collect();
    let norm = c.iter().map(|a| a * a).sum::<f64>().sqrt();
    c.into_iter().map(|a| a / norm).collect()
}

/// Per-test and max-statistic permutation p-values from one shared stream
/// of shuffles of `y`.
///
/// Permutation `b` shuffles with the stream derived from `(seed, b)`, so the
/// output does not depend on the number of threads.
pub fn perm_test_both(
    columns: &[Vec<f64>],
    y: &[f64],
    plan: &PermutationPlan,
) -> Result<PermutationPValues> {
    if plan.n_permutations < MIN_PERMUTATIONS {
        return Err(Error::Config {
            key: "permutations".into(),
            message: format!("need at least {MIN_PERMUTATIONS}"),
        });
    }
    let n = y.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    if is_constant(y) {
        return Err(Error::DegenerateVariance("y"));
    }
    for (index, col) in columns.iter().enumerate() {
        if col.len() != n {
            return Err(Error::LengthMismatch {
                x: col.len(),
                y: n,
            });
        }
        if is_constant(col) {
            return Err(Error::DegenerateColumn { index });
        }
    }
    let zs: Vec<Vec<f64>> = columns.iter().map(|c| standardize(c)).collect();
    let zy = standardize(y);
    let abs_corr = |perm: Option<&[usize]>| -> Vec<f64> {
        zs.iter()
            .map(|z| {
                let dot: f64 = match perm {
                    None => z.iter().zip(&zy).map(|(a, b)| a * b).sum(),
                    Some(p) => z.iter().zip(p).map(|(a, &j)| a * zy[j]).sum(),
                };
                dot.abs()
            })
            .collect()
    };
    let observed = abs_corr(None);
    let m = columns.len();

    let (exceed, maxima) = (0..plan.n_permutations)
        .into_par_iter()
        .map(|b| {
            let perm = SplitMix64::derived(plan.seed, &[b as u64]).permutation(n);
            let stats = abs_corr(Some(&perm));
            let max = stats.iter().copied().fold(0.0f64, f64::max);
            let hits: Vec<u32> = stats
                .iter()
                .zip(&observed)
                .map(|(s, o)| u32::from(s >= o))
                .collect();
            (hits, vec![max])
        })
        .reduce(
            || (vec![0u32; m], Vec::new()),
            |(mut ha, mut ma), (hb, mb)| {
                ha.iter_mut().zip(&hb).for_each(|(a, b)| *a += b);
                ma.extend(mb);
                (ha, ma)
            },
        );

    let denom = (plan.n_permutations + 1) as f64;
    let per_test = exceed.iter().map(|&c| (1.0 + c as f64) / denom).collect();
    let max_stat = observed
        .iter()
        .map(|o| {
            let c = maxima.iter().filter(|&&mx| mx >= *o).count();
            (1.0 + c as f64) / denom
        })
        .collect();
    Ok(PermutationPValues { per_test, max_stat })
}

/// Permutation p-values for a battery of columns sharing the target `y`.
pub fn perm_test(
    columns: &[Vec<f64>],
    y: &[f64],
    plan: &PermutationPlan,
    mode: PermMode,
) -> Result<Vec<f64>> {
    let both = perm_test_both(columns, y, plan)?;
    Ok(match mode {
        PermMode::PerTest => both.per_test,
        PermMode::MaxStat => both.max_stat,
    })
}
