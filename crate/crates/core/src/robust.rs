//! Skipped correlation: Pearson's r after removing bivariate outliers found
//! by projection.
//!
//! The centre is the coordinate-wise median. Every sample (other than one
//! sitting on the centre) defines a direction from the centre; all samples
//! are projected onto it and a sample is flagged when its distance along
//! the direction exceeds `median + c · MAD` of those distances, with
//! `c = sqrt(χ²₂(0.975))`. A sample flagged in any direction is removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{pearson_slices, DataPair, MIN_SAMPLES};

/// Fewest samples for which projection screening is attempted.
pub const MIN_SAMPLES_FOR_PROJECTION: usize = 10;

/// Scale making the MAD consistent for the normal standard deviation.
const MAD_TO_SD: f64 = 1.482_602_218_505_602;
/// Scale making the interquartile range consistent for the normal sd.
const IQR_TO_SD: f64 = 0.741_301_109_252_801;

/// sqrt of the 0.975 quantile of χ² with 2 df; that quantile is 2·ln 40.
pub fn projection_cutoff() -> f64 {
    (2.0 * 40f64.ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedResult {
    pub r: f64,
    pub p: f64,
    pub n_used: usize,
    pub outlier_indices: Vec<usize>,
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorted, unique indices of projection outliers.
pub fn detect_bivariate_outliers(pair: &DataPair) -> Result<Vec<usize>> {
    let n = pair.len();
    if n < MIN_SAMPLES_FOR_PROJECTION {
        return Err(Error::InsufficientData {
            required: MIN_SAMPLES_FOR_PROJECTION,
            actual: n,
        });
    }
    let (x, y) = (pair.x(), pair.y());
    let cx = median_in_place(&mut x.to_vec());
    let cy = median_in_place(&mut y.to_vec());
    let dx: Vec<f64> = x.iter().map(|v| v - cx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - cy).collect();
    let cutoff = projection_cutoff();

    let mut flagged = vec![false; n];
    let mut dist = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for anchor in 0..n {
        let norm = dx[anchor].hypot(dy[anchor]);
        if norm == 0.0 {
            continue;
        }
        let (ux, uy) = (dx[anchor] / norm, dy[anchor] / norm);
        for i in 0..n {
            dist[i] = (dx[i] * ux + dy[i] * uy).abs();
        }
        scratch.copy_from_slice(&dist);
        let med = median_in_place(&mut scratch);
        scratch.iter_mut().zip(&dist).for_each(|(s, d)| *s = (d - med).abs());
        let mut spread = MAD_TO_SD * median_in_place(&mut scratch);
        if spread == 0.0 {
            scratch.copy_from_slice(&dist);
            scratch.sort_unstable_by(f64::total_cmp);
            spread = IQR_TO_SD * (quantile_sorted(&scratch, 0.75) - quantile_sorted(&scratch, 0.25));
        }
        if spread == 0.0 {
            return Err(Error::DegenerateGeometry { anchor });
        }
        let limit = med + cutoff * spread;
        for (f, &d) in flagged.iter_mut().zip(&dist) {
            if d > limit {
                *f = true;
            }
        }
    }
    Ok((0..n).filter(|&i| flagged[i]).collect())
}

/// Pearson correlation and t-test on the samples that survive outlier removal.
pub fn skipped_correlation(pair: &DataPair) -> Result<SkippedResult> {
    let outliers = detect_bivariate_outliers(pair)?;
    let n_used = pair.len() - outliers.len();
    if n_used < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            required: MIN_SAMPLES,
            actual: n_used,
        });
    }
    let mut keep = vec![true; pair.len()];
    outliers.iter().for_each(|&i| keep[i] = false);
    let pick = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&a, _)| a)
            .collect()
    };
    let res = pearson_slices(&pick(pair.x()), &pick(pair.y()))?;
    Ok(SkippedResult {
        r: res.r,
        p: res.p,
        n_used,
        outlier_indices: outliers,
    })
}
