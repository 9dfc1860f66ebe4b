//! The data-calibrated (dcal) correlation test.
//!
//! Each observation is replaced by its out-of-sample prediction from a
//! least-squares line fitted in the opposite direction (x̂ from y, ŷ from
//! x), and the classical Pearson test is applied to the predictions. A
//! calibrated correlation whose sign disagrees with the classical one is
//! reset to `(0, 0.5)`: under weak dependence, leave-one-out prediction
//! manufactures a correlation of the opposite sign.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::{self, pearson, pearson_slices, DataPair};

/// Calibrated values reported when the test is skipped or reset.
pub const NEUTRAL_R: f64 = 0.0;
pub const NEUTRAL_P: f64 = 0.5;

/// Weight of the in-sample fit in the .632 blend.
const BOOT632_IN_SAMPLE_WEIGHT: f64 = 0.368;
const BOOT632_OOB_WEIGHT: f64 = 0.632;
/// Extra replicates drawn when some sample was never out-of-bag.
const BOOT632_EXTRA_REPLICATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    Loo,
    RepeatedKFold { folds: usize, repeats: usize },
    Boot632 { replicates: usize },
}

/// How out-of-sample predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OosScheme {
    pub kind: SchemeKind,
    /// Ignored by leave-one-out.
    pub seed: u64,
}

impl Default for OosScheme {
    fn default() -> Self {
        Self::loo()
    }
}

impl OosScheme {
    pub fn loo() -> Self {
        Self {
            kind: SchemeKind::Loo,
            seed: 0,
        }
    }

    pub fn repeated_kfold(folds: usize, repeats: usize) -> Self {
        Self {
            kind: SchemeKind::RepeatedKFold { folds, repeats },
            seed: 0,
        }
    }

    pub fn boot632(replicates: usize) -> Self {
        Self {
            kind: SchemeKind::Boot632 { replicates },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            SchemeKind::Loo => Ok(()),
            SchemeKind::RepeatedKFold { folds, repeats } => {
                if folds < 2 || folds > n {
                    return Err(Error::InvalidScheme(format!(
                        "folds must lie in [2, {n}], got {folds}"
                    )));
                }
                if repeats == 0 {
                    return Err(Error::InvalidScheme("repeats must be positive".into()));
                }
                Ok(())
            }
            SchemeKind::Boot632 { replicates } => {
                if replicates == 0 {
                    return Err(Error::InvalidScheme("replicates must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for OosScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::Loo => write!(f, "loo"),
            SchemeKind::RepeatedKFold { folds, repeats } => write!(f, "cv{folds}x{repeats}"),
            SchemeKind::Boot632 { replicates: 100 } => write!(f, "boot632"),
            SchemeKind::Boot632 { replicates } => write!(f, "boot632x{replicates}"),
        }
    }
}

impl FromStr for OosScheme {
    type Err = Error;

    /// Accepts `loo`, `cv<folds>x<repeats>` and `boot632[x<replicates>]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidScheme(format!("unrecognised scheme `{s}`"));
        if s == "loo" {
            return Ok(Self::loo());
        }
        if let Some(rest) = s.strip_prefix("boot632") {
            if rest.is_empty() {
                return Ok(Self::boot632(100));
            }
            let reps = rest.strip_prefix('x').ok_or_else(bad)?;
            return Ok(Self::boot632(reps.parse().map_err(|_| bad())?));
        }
        if let Some(rest) = s.strip_prefix("cv") {
            let (folds, repeats) = rest.split_once('x').ok_or_else(bad)?;
            return Ok(Self::repeated_kfold(
                folds.parse().map_err(|_| bad())?,
                repeats.parse().map_err(|_| bad())?,
            ));
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Predict y from x.
    YFromX,
    /// Predict x from y.
    XFromY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcalResult {
    pub n: usize,
    pub r: f64,
    pub p: f64,
    pub r_dcal: f64,
    pub p_dcal: f64,
    pub sign_flip_triggered: bool,
    pub skipped_by_fast_flag: bool,
    /// Correlation of the predictions before the sign rule; `None` when the
    /// predictions were not computed or were constant.
    pub raw_r_dcal: Option<f64>,
    pub scheme: OosScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcalOptions {
    pub alpha: f64,
    pub fast: bool,
    pub scheme: OosScheme,
}

impl Default for DcalOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            fast: false,
            scheme: OosScheme::loo(),
        }
    }
}

/// Least-squares line; a constant predictor yields the intercept-only fit,
/// matching what rank-deficient regression returns.
fn fit_line(predictor: impl Iterator<Item = (f64, f64, f64)> + Clone) -> (f64, f64) {
    // items are (predictor, response, weight)
    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (a, b, k) in predictor.clone() {
        w += k;
        sx += k * a;
        sy += k * b;
    }
    let mx = sx / w;
    let my = sy / w;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    let mut first = None;
    let mut constant = true;
    for (a, b, k) in predictor {
        match first {
            None => first = Some(a),
            Some(f) if f != a => constant = false,
            _ => {}
        }
        sxx += k * (a - mx) * (a - mx);
        sxy += k * (a - mx) * (b - my);
    }
    if constant || sxx == 0.0 {
        return (my, 0.0);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn loo(predictor: &[f64], response: &[f64]) -> Result<Vec<f64>> {
    match stats::sole_distinct_index(predictor) {
        None => stats::loo_predictions(predictor, response),
        Some(k) => {
            let fit = stats::ols_fit(predictor, response)?;
            let mut out = stats::hat_shortcut(response, &fit);
            let rest: f64 = response
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, v)| v)
                .sum();
            out[k] = rest / (response.len() - 1) as f64;
            Ok(out)
        }
    }
}

/// Fold label of every sample for one repeat: a seeded shuffle dealt
/// round-robin into `folds` groups.
pub fn fold_assignment(n: usize, folds: usize, seed: u64, repeat: usize) -> Vec<usize> {
    let mut rng = SplitMix64::derived(seed, &[repeat as u64]);
    let order = rng.permutation(n);
    let mut label = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        label[idx] = pos % folds;
    }
    label
}

fn repeated_kfold(
    predictor: &[f64],
    response: &[f64],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Vec<f64> {
    let n = predictor.len();
    let mut acc = vec![0.0; n];
    for repeat in 0..repeats {
        let label = fold_assignment(n, folds, seed, repeat);
        for fold in 0..folds {
            let train = (0..n)
                .filter(|&i| label[i] != fold)
                .map(|i| (predictor[i], response[i], 1.0));
            let (a, b) = fit_line(train);
            for i in (0..n).filter(|&i| label[i] == fold) {
                acc[i] += a + b * predictor[i];
            }
        }
    }
    acc.iter().map(|s| s / repeats as f64).collect()
}

fn boot632(predictor: &[f64], response: &[f64], replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let n = predictor.len();
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    let mut weight = vec![0.0; n];
    let mut run = |b: usize, oob_sum: &mut [f64], oob_count: &mut [usize]| {
        let mut rng = SplitMix64::derived(seed, &[b as u64]);
        weight.iter_mut().for_each(|w| *w = 0.0);
        for _ in 0..n {
            weight[rng.below(n)] += 1.0;
        }
        let bag = (0..n)
            .filter(|&i| weight[i] > 0.0)
            .map(|i| (predictor[i], response[i], weight[i]));
        let (a, s) = fit_line(bag);
        for i in 0..n {
            if weight[i] == 0.0 {
                oob_sum[i] += a + s * predictor[i];
                oob_count[i] += 1;
            }
        }
    };
    for b in 0..replicates {
        run(b, &mut oob_sum, &mut oob_count);
    }
    let mut extra = 0;
    while oob_count.contains(&0) && extra < BOOT632_EXTRA_REPLICATES {
        run(replicates + extra, &mut oob_sum, &mut oob_count);
        extra += 1;
    }
    if let Some(index) = oob_count.iter().position(|&c| c == 0) {
        return Err(Error::ResampleCoverage {
            index,
            replicates: replicates + extra,
        });
    }
    let (a, s) = fit_line(
        predictor
            .iter()
            .zip(response)
            .map(|(&p, &r)| (p, r, 1.0)),
    );
    Ok((0..n)
        .map(|i| {
            let in_sample = a + s * predictor[i];
            let oob = oob_sum[i] / oob_count[i] as f64;
            BOOT632_IN_SAMPLE_WEIGHT * in_sample + BOOT632_OOB_WEIGHT * oob
        })
        .collect())
}

/// One out-of-sample prediction per sample.
pub fn oos_predict(pair: &DataPair, direction: Direction, scheme: &OosScheme) -> Result<Vec<f64>> {
    scheme.validate(pair.len())?;
    let (predictor, response) = match direction {
        Direction::YFromX => (pair.x(), pair.y()),
        Direction::XFromY => (pair.y(), pair.x()),
    };
    match scheme.kind {
        SchemeKind::Loo => loo(predictor, response),
        SchemeKind::RepeatedKFold { folds, repeats } => Ok(repeated_kfold(
            predictor,
            response,
            folds,
            repeats,
            scheme.seed,
        )),
        SchemeKind::Boot632 { replicates } => boot632(predictor, response, replicates, scheme.seed),
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// The dcal correlation test.
///
/// With `fast` set, the out-of-sample work is only done when the classical
/// test is significant at `alpha`; otherwise the neutral `(0, 0.5)` is
/// reported.
pub fn dcal_test(pair: &DataPair, alpha: f64, fast: bool, scheme: &OosScheme) -> Result<DcalResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain {
            what: "alpha",
            value: alpha,
        });
    }
    scheme.validate(pair.len())?;
    let classical = pearson(pair);
    let mut result = DcalResult {
        n: pair.len(),
        r: classical.r,
        p: classical.p,
        r_dcal: NEUTRAL_R,
        p_dcal: NEUTRAL_P,
        sign_flip_triggered: false,
        skipped_by_fast_flag: false,
        raw_r_dcal: None,
        scheme: *scheme,
    };
    if fast && classical.p >= alpha {
        result.skipped_by_fast_flag = true;
        return Ok(result);
    }
    let y_hat = oos_predict(pair, Direction::YFromX, scheme)?;
    let x_hat = oos_predict(pair, Direction::XFromY, scheme)?;
    match pearson_slices(&x_hat, &y_hat) {
        Ok(cal) => {
            result.raw_r_dcal = Some(cal.r);
            if cal.r == 0.0 || sign(cal.r) != sign(classical.r) {
                result.sign_flip_triggered = true;
            } else {
                result.r_dcal = cal.r;
                result.p_dcal = cal.p;
            }
        }
        Err(Error::DegenerateVariance(_)) => result.sign_flip_triggered = true,
        Err(e) => return Err(e),
    }
    Ok(result)
}

pub fn dcal_test_with(pair: &DataPair, options: &DcalOptions) -> Result<DcalResult> {
    dcal_test(pair, options.alpha, options.fast, &options.scheme)
}

/// Correlation of the full-sample (in-sample) mutual predictions.
///
/// Both prediction maps are affine with slopes of the same sign as r, so
/// this reproduces the classical r; only out-of-sample prediction makes
/// the calibration informative.
pub fn dcal_in_sample_check(pair: &DataPair) -> Result<f64> {
    let r = pearson(pair).r;
    if r == 0.0 {
        return Err(Error::UndefinedSign);
    }
    let y_fit = stats::ols_fit(pair.x(), pair.y())?;
    let x_fit = stats::ols_fit(pair.y(), pair.x())?;
    let y_hat: Vec<f64> = pair.x().iter().map(|&v| y_fit.predict(v)).collect();
    let x_hat: Vec<f64> = pair.y().iter().map(|&v| x_fit.predict(v)).collect();
    Ok(pearson_slices(&x_hat, &y_hat)?.r)
}
