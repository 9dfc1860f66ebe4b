//! Seeded data generators and the experiment harness.

mod config;
mod experiment;

pub use config::{load_config, parse_config, DesignFamily, SimConfig};
pub use experiment::{
    run_battery_experiment, run_designs, run_oos_comparison, save_reports, write_reports_csv,
    write_reports_json, CellReport, DesignKind, ExperimentReport, Method, MethodStats,
    RunOptions, SimDesign,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::DataPair;

/// Displacement, in population sd, used by the default outlier models.
pub const DEFAULT_OUTLIER_SHIFT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierKind {
    /// Both coordinates redrawn at a larger sd, keeping the correlation.
    HighVariance { sd: f64 },
    /// x shifted by `shift`, y untouched.
    Univariate { shift: f64 },
    /// Both coordinates shifted by `shift`.
    Bivariate { shift: f64 },
}

impl OutlierKind {
    pub fn high_variance(sd: f64) -> Self {
        OutlierKind::HighVariance { sd }
    }

    pub fn univariate() -> Self {
        OutlierKind::Univariate {
            shift: DEFAULT_OUTLIER_SHIFT,
        }
    }

    pub fn bivariate() -> Self {
        OutlierKind::Bivariate {
            shift: DEFAULT_OUTLIER_SHIFT,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutlierKind::HighVariance { .. } => "high_variance",
            OutlierKind::Univariate { .. } => "univariate",
            OutlierKind::Bivariate { .. } => "bivariate",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, value: f64| Err(Error::Domain { what, value });
        match *self {
            OutlierKind::HighVariance { sd } if !(sd > 1.0 && sd.is_finite()) => {
                bad("outlier sd (must exceed 1)", sd)
            }
            OutlierKind::Univariate { shift } | OutlierKind::Bivariate { shift }
                if !shift.is_finite() =>
            {
                bad("outlier shift", shift)
            }
            _ => Ok(()),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
        });
    }
    Ok(())
}

/// Correlated Gaussian column: `rho·base + sqrt(1 − rho²)·noise`.
pub(crate) fn mix(base: &[f64], noise: &[f64], rho: f64) -> Vec<f64> {
    let s = (1.0 - rho * rho).sqrt();
    base.iter().zip(noise).map(|(b, z)| rho * b + s * z).collect()
}

/// Bivariate normal sample with unit variances and correlation `rho`.
///
/// Draws all n x values, then all n noise values, from one stream.
pub fn gen_pair(n: usize, rho: f64, seed: u64) -> Result<DataPair> {
    check_rho(rho)?;
    let mut rng = SplitMix64::new(seed);
    let x = rng.normals(n);
    let z = rng.normals(n);
    let y = mix(&x, &z, rho);
    DataPair::new(x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContaminatedPair {
    pub pair: DataPair,
    /// Sorted indices of the replaced samples.
    pub outliers: Vec<usize>,
}

/// [`gen_pair`] with `floor(fraction·n)` samples replaced by outliers.
pub fn gen_contaminated(
    n: usize,
    rho: f64,
    kind: OutlierKind,
    fraction: f64,
    seed: u64,
) -> Result<ContaminatedPair> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::Domain {
            what: "contamination fraction",
            value: fraction,
        });
    }
    kind.validate()?;
    let base = gen_pair(n, rho, seed)?;
    let k = (fraction * n as f64).floor() as usize;
    if k == 0 {
        return Ok(ContaminatedPair {
            pair: base,
            outliers: Vec::new(),
        });
    }
    let mut rng = SplitMix64::derived(seed, &[1]);
    let mut outliers = rng.permutation(n);
    outliers.truncate(k);
    outliers.sort_unstable();
    let (mut x, mut y) = base.into_parts();
    for &i in &outliers {
        match kind {
            OutlierKind::HighVariance { sd } => {
                let a = rng.normal();
                let b = rng.normal();
                x[i] = sd * a;
                y[i] = sd * (rho * a + (1.0 - rho * rho).sqrt() * b);
            }
            OutlierKind::Univariate { shift } => x[i] += shift,
            OutlierKind::Bivariate { shift } => {
                x[i] += shift;
                y[i] += shift;
            }
        }
    }
    Ok(ContaminatedPair {
        pair: DataPair::new(x, y)?,
        outliers,
    })
}
