//! p-value calibrations and the Bayes-factor posterior probability.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{pearson, DataPair};

/// Constant printed in Bickel's calibration formula (kept literal, not e).
pub const BICKEL_CONSTANT: f64 = 2.7;

const BF_REL_TOLERANCE: f64 = 1e-6;
const BF_INITIAL_INTERVALS: usize = 256;
const BF_MAX_INTERVALS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibrationMethod {
    SellkeSbb,
    Bickel,
    PpBf,
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationMethod::SellkeSbb => "sellke",
            CalibrationMethod::Bickel => "bickel",
            CalibrationMethod::PpBf => "ppbf",
        })
    }
}

impl FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sellke" | "pcalsbb" | "sbb" => Ok(CalibrationMethod::SellkeSbb),
            "bickel" | "pcalbickel" => Ok(CalibrationMethod::Bickel),
            "ppbf" | "bf" => Ok(CalibrationMethod::PpBf),
            other => Err(Error::Config {
                key: other.to_string(),
                message: "unknown calibration method".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedP {
    pub method: CalibrationMethod,
    pub value: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "p-value",
            value: p,
        });
    }
    Ok(())
}

/// Sellke–Bayarri–Berger lower bound on P(H0 | data) with equal prior odds:
/// `(1 + (−e·p·ln p)^−1)^−1` for p < 1/e, and 0.5 beyond.
pub fn pcal_sellke(p: f64) -> Result<f64> {
    check_p(p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    if p >= (-1.0f64).exp() {
        return Ok(0.5);
    }
    let bound = -std::f64::consts::E * p * p.ln();
    Ok(1.0 / (1.0 + 1.0 / bound))
}

/// `(1 − |2.7·p·ln p|)·p + 2·|2.7·p·ln p|`, clamped to [0, 1].
pub fn pcal_bickel(p: f64) -> Result<f64> {
    check_p(p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let q = (BICKEL_CONSTANT * p * p.ln()).abs();
    Ok(((1.0 - q) * p + 2.0 * q).clamp(0.0, 1.0))
}

/// Posterior P(H1 | data) from a Bayes factor and a prior P(H1).
pub fn bf_to_posterior(bf10: f64, prior_h1: f64) -> Result<f64> {
    if !(bf10 > 0.0) {
        return Err(Error::Domain {
            what: "Bayes factor",
            value: bf10,
        });
    }
    if !(prior_h1 > 0.0 && prior_h1 < 1.0) {
        return Err(Error::Domain {
            what: "prior probability",
            value: prior_h1,
        });
    }
    if bf10.is_infinite() {
        return Ok(1.0);
    }
    Ok(bf10 * prior_h1 / (bf10 * prior_h1 + (1.0 - prior_h1)))
}

/// Log of the approximate likelihood of rho given a sample correlation r,
/// normalised so that rho = 0 gives 0.
fn log_likelihood(rho: f64, r: f64, n: usize) -> f64 {
    let n = n as f64;
    0.5 * (n - 1.0) * (1.0 - rho * rho).ln() - (n - 1.5) * (1.0 - rho * r).ln()
}

struct Trapezoid {
    r: f64,
    n: usize,
    offset: f64,
    intervals: usize,
    /// Sum of scaled integrand values at all current nodes (interior weight 1).
    interior: f64,
}

impl Trapezoid {
    fn new(r: f64, n: usize, intervals: usize) -> Self {
        // scale by the (near-)peak value so exp() stays finite
        let offset = log_likelihood(r, r, n).max(0.0);
        let mut t = Trapezoid {
            r,
            n,
            offset,
            intervals,
            interior: 0.0,
        };
        let h = 2.0 / intervals as f64;
        t.interior = (1..intervals).map(|k| t.f(-1.0 + k as f64 * h)).sum();
        t
    }

    fn f(&self, rho: f64) -> f64 {
        (log_likelihood(rho, self.r, self.n) - self.offset).exp()
    }

    /// Integral over (−1, 1); the integrand vanishes at both ends.
    fn estimate(&self) -> f64 {
        self.interior * 2.0 / self.intervals as f64
    }

    fn refine(&mut self) {
        let h = 2.0 / self.intervals as f64;
        let added: f64 = (0..self.intervals)
            .map(|k| self.f(-1.0 + (k as f64 + 0.5) * h))
            .sum();
        self.interior += added;
        self.intervals *= 2;
    }

    fn bf10(&self) -> f64 {
        // uniform prior density on (−1, 1) is 1/2
        ((0.5 * self.estimate()).ln() + self.offset).exp()
    }
}

/// BF10 at a fixed trapezoid resolution.
pub fn correlation_bf_at_resolution(r: f64, n: usize, intervals: usize) -> f64 {
    Trapezoid::new(r, n, intervals.max(2)).bf10()
}

/// Bayes factor for a nonzero correlation against rho = 0, from a sample
/// correlation `r` on `n` pairs, with a uniform prior on rho.
pub fn correlation_bf_from_r(r: f64, n: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Domain {
            what: "correlation",
            value: r,
        });
    }
    if n < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: n,
        });
    }
    if r.abs() == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut t = Trapezoid::new(r, n, BF_INITIAL_INTERVALS);
    let mut previous = t.estimate();
    while t.intervals < BF_MAX_INTERVALS {
        t.refine();
        let current = t.estimate();
        if (current - previous).abs() <= BF_REL_TOLERANCE * current.abs() {
            return Ok(t.bf10());
        }
        previous = current;
    }
    Err(Error::Numeric(format!(
        "Bayes factor integration did not converge (r={r}, n={n})"
    )))
}

pub fn correlation_bf(pair: &DataPair) -> Result<f64> {
    correlation_bf_from_r(pearson(pair).r, pair.len())
}

/// Calibrated p-value of a pair under `method`.
///
/// For [`CalibrationMethod::PpBf`] the value is the posterior probability
/// of the null at prior 0.5, so that small values favour an association
/// like the other two.
pub fn calibrate(method: CalibrationMethod, pair: &DataPair) -> Result<CalibratedP> {
    let value = match method {
        CalibrationMethod::SellkeSbb => pcal_sellke(pearson(pair).p)?,
        CalibrationMethod::Bickel => pcal_bickel(pearson(pair).p)?,
        CalibrationMethod::PpBf => 1.0 - bf_to_posterior(correlation_bf(pair)?, 0.5)?,
    };
    Ok(CalibratedP { method, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sellke_reference_values() {
        // 40-digit evaluation of the closed form
        assert!((pcal_sellke(0.0022).unwrap() - 0.035_302_849_073_907_793).abs() < 1e-14);
        assert!((pcal_sellke(0.05).unwrap() - 0.289_349_885_461_101_62).abs() < 1e-14);
        assert!((pcal_sellke(0.01).unwrap() - 0.111_254_498_810_194_77).abs() < 1e-14);
        assert!((pcal_sellke(0.2).unwrap() - 0.466_661_309_465_985_42).abs() < 1e-14);
    }

    #[test]
    fn sellke_clamps_at_inverse_e() {
        assert_eq!(pcal_sellke((-1.0f64).exp()).unwrap(), 0.5);
        assert!((pcal_sellke((-1.0f64).exp() * (1.0 - 1e-12)).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(pcal_sellke(0.9).unwrap(), 0.5);
        assert_eq!(pcal_sellke(0.0).unwrap(), 0.0);
        assert!(pcal_sellke(1.2).is_err());
    }

    #[test]
    fn bickel_reference_values() {
        assert!((pcal_bickel(0.0022).unwrap() - 0.074_817_292_287_979_76).abs() < 1e-14);
        assert!((pcal_bickel(0.05).unwrap() - 0.838_626_521_013_088_13).abs() < 1e-14);
        assert_eq!(pcal_bickel(1.0).unwrap(), 1.0);
        assert_eq!(pcal_bickel(0.2).unwrap(), 1.0);
        assert_eq!(pcal_bickel(0.0).unwrap(), 0.0);
    }

    #[test]
    fn posterior_closed_forms() {
        assert_eq!(bf_to_posterior(1.0, 0.5).unwrap(), 0.5);
        assert_eq!(bf_to_posterior(3.0, 0.5).unwrap(), 0.75);
        assert!((bf_to_posterior(10.0, 0.5).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        assert!((bf_to_posterior(1.0, 0.2).unwrap() - 0.2).abs() < 1e-15);
        assert!(bf_to_posterior(0.0, 0.5).is_err());
        assert!(bf_to_posterior(2.0, 1.0).is_err());
    }

    #[test]
    fn bf_against_adaptive_quadrature_reference() {
        // 40-digit adaptive quadrature of the same integrand
        let cases = [
            (0.816, 11, 22.554_695_437_202_431),
            (0.0, 20, 0.276_769_682_076_757_35),
            (0.5, 30, 9.894_011_520_741_351_9),
            (0.3, 50, 1.555_112_557_767_49),
            (0.2, 100, 0.888_589_720_269_925_63),
            (-0.4, 25, 1.589_727_395_146_206_6),
        ];
        for (r, n, expected) in cases {
            let got = correlation_bf_from_r(r, n).unwrap();
            assert!(
                ((got - expected) / expected).abs() < 1e-5,
                "r={r} n={n}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn bf_zero_r_favours_null_and_unit_r_is_infinite() {
        for n in [5, 10, 50, 500] {
            assert!(correlation_bf_from_r(0.0, n).unwrap() <= 1.0);
        }
        assert!(correlation_bf_from_r(1.0, 10).unwrap().is_infinite());
        assert!(correlation_bf_from_r(-1.0, 10).unwrap().is_infinite());
    }

    #[test]
    fn bf_self_convergence() {
        let pair = crate::simgen::gen_pair(40, 0.35, 77).unwrap();
        let r = pearson(&pair).r;
        let coarse = correlation_bf_at_resolution(r, 40, 4096);
        let fine = correlation_bf_at_resolution(r, 40, 8192);
        assert!(((fine - coarse) / fine).abs() < 1e-4);
        let adaptive = correlation_bf(&pair).unwrap();
        assert!(((adaptive - fine) / fine).abs() < 1e-5);
    }

    #[test]
    fn bf_monotone_in_r_and_n() {
        let mut prev = 0.0;
        for k in 0..20 {
            let bf = correlation_bf_from_r(k as f64 * 0.045, 30).unwrap();
            assert!(bf > prev);
            prev = bf;
        }
        let mut prev = 0.0;
        for n in (10..200).step_by(10) {
            let bf = correlation_bf_from_r(0.5, n).unwrap();
            assert!(bf > prev, "n={n}");
            prev = bf;
        }
    }

    #[test]
    fn calibrate_dispatch() {
        let pair = crate::simgen::gen_pair(30, 0.6, 2).unwrap();
        let p = pearson(&pair).p;
        assert_eq!(
            calibrate(CalibrationMethod::SellkeSbb, &pair).unwrap().value,
            pcal_sellke(p).unwrap()
        );
        let pp = calibrate(CalibrationMethod::PpBf, &pair).unwrap().value;
        assert!((0.0..=1.0).contains(&pp));
        assert_eq!("pcalSBB".parse::<CalibrationMethod>().unwrap(), CalibrationMethod::SellkeSbb);
    }
}
