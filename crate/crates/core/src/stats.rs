//! Pearson correlation, simple linear regression and leave-one-out algebra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::student_t_two_sided;

/// Smallest sample size accepted for a correlation test.
pub const MIN_SAMPLES: usize = 4;

/// Two equal-length, finite, non-constant samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPair {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl DataPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        if x.len() < MIN_SAMPLES {
            return Err(Error::InsufficientData {
                required: MIN_SAMPLES,
                actual: x.len(),
            });
        }
        for (index, (a, b)) in x.iter().zip(&y).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        if is_constant(&x) {
            return Err(Error::DegenerateVariance("x"));
        }
        if is_constant(&y) {
            return Err(Error::DegenerateVariance("y"));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The same samples with the roles of x and y exchanged.
    pub fn swapped(&self) -> DataPair {
        DataPair {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub df: usize,
}

pub(crate) fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered cross products (S_xx, S_xy, S_yy) and the means.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    (mx, my, sxx, sxy, syy)
}

/// Two-sided t-test p-value of a correlation coefficient.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    let df = n - 2;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return Ok(0.0);
    }
    let t = r * (df as f64 / one_minus).sqrt();
    student_t_two_sided(t, df as u32)
}

/// Pearson correlation with its exact two-sided t-test p-value.
pub fn pearson(pair: &DataPair) -> CorrelationResult {
    pearson_slices(&pair.x, &pair.y)
        .expect("DataPair invariants guarantee a defined correlation")
}

/// Pearson correlation of raw slices; rejects constant inputs.
pub fn pearson_slices(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    if is_constant(x) {
        return Err(Error::DegenerateVariance("x"));
    }
    if is_constant(y) {
        return Err(Error::DegenerateVariance("y"));
    }
    let (_, _, sxx, sxy, syy) = moments(x, y);
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = correlation_p_value(r, n)?;
    Ok(CorrelationResult { r, p, n, df: n - 2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
    pub leverages: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, predictor: f64) -> f64 {
        self.intercept + self.slope * predictor
    }
}

/// Least-squares line of `response` on `predictor`.
pub fn ols_fit(predictor: &[f64], response: &[f64]) -> Result<OlsFit> {
    if predictor.len() != response.len() {
        return Err(Error::LengthMismatch {
            x: predictor.len(),
            y: response.len(),
        });
    }
    let n = predictor.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    if is_constant(predictor) {
        return Err(Error::DegenerateVariance("predictor"));
    }
    let (mx, my, sxx, sxy, _) = moments(predictor, response);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let inv_n = 1.0 / n as f64;
    let residuals = predictor
        .iter()
        .zip(response)
        .map(|(&a, &b)| b - (intercept + slope * a))
        .collect();
    let leverages = predictor
        .iter()
        .map(|&a| inv_n + (a - mx) * (a - mx) / sxx)
        .collect();
    Ok(OlsFit {
        intercept,
        slope,
        residuals,
        leverages,
    })
}

/// If removing exactly one sample leaves `v` constant, that sample's index.
pub(crate) fn sole_distinct_index(v: &[f64]) -> Option<usize> {
    if v.len() < 3 {
        return None;
    }
    let first_matches = v.iter().filter(|&&a| a == v[0]).count();
    if first_matches == v.len() - 1 {
        v.iter().position(|&a| a != v[0])
    } else if first_matches == 1 && is_constant(&v[1..]) {
        Some(0)
    } else {
        None
    }
}

/// Leave-one-out OLS predictions via the hat-matrix identity
/// `ŷ_i = y_i − e_i / (1 − h_ii)`, in O(n).
pub fn loo_predictions(predictor: &[f64], response: &[f64]) -> Result<Vec<f64>> {
    if predictor.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            required: MIN_SAMPLES,
            actual: predictor.len(),
        });
    }
    if sole_distinct_index(predictor).is_some() {
        return Err(Error::DegenerateVariance("leave-one-out predictor subset"));
    }
    let fit = ols_fit(predictor, response)?;
    Ok(hat_shortcut(response, &fit))
}

pub(crate) fn hat_shortcut(response: &[f64], fit: &OlsFit) -> Vec<f64> {
    response
        .iter()
        .zip(fit.residuals.iter().zip(&fit.leverages))
        .map(|(&y, (&e, &h))| y - e / (1.0 - h))
        .collect()
}
