use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gen_contaminated, gen_pair, mix, OutlierKind};
use crate::calibration::{bf_to_posterior, correlation_bf_from_r, pcal_bickel, pcal_sellke};
use crate::dcal::{dcal_test, OosScheme};
use crate::error::{Error, Result};
use crate::multitest::{bh_adjust, holm_adjust, perm_test_both, PermutationPlan};
use crate::rng::{derive_seed, SplitMix64};
use crate::robust::skipped_correlation;
use crate::stats::{pearson, CorrelationResult, DataPair};

// stream tags under (seed, repetition)
const TAG_PERMUTATION: u64 = 0x7065_726d;
const TAG_SCHEME: u64 = 0x6463_616c;

/// A testing method compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Uncorrected,
    Holm,
    Bh,
    Perm,
    PermMax,
    Dcal(OosScheme),
    Sellke,
    Bickel,
    PpBf,
    Skipped,
}

impl Method {
    pub fn dcal() -> Self {
        Method::Dcal(OosScheme::loo())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Uncorrected => f.write_str("uncorrected"),
            Method::Holm => f.write_str("holm"),
            Method::Bh => f.write_str("bh"),
            Method::Perm => f.write_str("perm"),
            Method::PermMax => f.write_str("permmax"),
            Method::Dcal(s) if *s == OosScheme::loo() => f.write_str("dcal"),
            Method::Dcal(s) => write!(f, "dcal-{s}"),
            Method::Sellke => f.write_str("sellke"),
            Method::Bickel => f.write_str("bickel"),
            Method::PpBf => f.write_str("ppbf"),
            Method::Skipped => f.write_str("skipped"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "uncorrected" | "uncorr" => Method::Uncorrected,
            "holm" => Method::Holm,
            "bh" | "fdr" => Method::Bh,
            "perm" => Method::Perm,
            "permmax" | "perm_max" => Method::PermMax,
            "dcal" => Method::dcal(),
            "sellke" | "pcalsbb" => Method::Sellke,
            "bickel" | "pcalbickel" => Method::Bickel,
            "ppbf" => Method::PpBf,
            "skipped" => Method::Skipped,
            other => match other.strip_prefix("dcal-") {
                Some(scheme) => Method::Dcal(scheme.parse()?),
                None => {
                    return Err(Error::Config {
                        key: other.to_string(),
                        message: "unknown method".into(),
                    })
                }
            },
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DesignKind {
    /// m independent columns against one target.
    NullBattery { m: usize },
    /// m_true columns correlated at rho with the target, plus m_null independent ones.
    CorrelatedBattery {
        m_true: usize,
        m_null: usize,
        rho: f64,
    },
    /// One pair per repetition for every (rho, n) cell.
    EffectGrid { rhos: Vec<f64>, ns: Vec<usize> },
    /// One contaminated pair per repetition.
    Contaminated {
        rho: f64,
        outlier: OutlierKind,
        fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub kind: DesignKind,
    /// Samples per variable (EffectGrid uses its own list).
    pub n: usize,
    pub seed: u64,
}

impl SimDesign {
    pub fn new(kind: DesignKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DesignKind::NullBattery { m } => format!("null_m{m}_n{}", self.n),
            DesignKind::CorrelatedBattery { m_true, m_null, rho } => {
                format!("correlated_t{m_true}_m{m_null}_rho{rho}_n{}", self.n)
            }
            DesignKind::EffectGrid { .. } => "effect_grid".to_string(),
            DesignKind::Contaminated {
                rho,
                outlier,
                fraction,
            } => {
                let extra = match outlier {
                    OutlierKind::HighVariance { sd } => format!("_sd{sd}"),
                    _ => String::new(),
                };
                format!(
                    "{}{extra}_rho{rho}_f{fraction}_n{}",
                    outlier.name(),
                    self.n
                )
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let rho_ok = |rho: f64| (0.0..1.0).contains(&rho);
        let bad_rho = |rho: f64| Error::Domain { what: "rho", value: rho };
        let n_ok = |n: usize| -> Result<()> {
            if n < crate::stats::MIN_SAMPLES {
                return Err(Error::InsufficientData {
                    required: crate::stats::MIN_SAMPLES,
                    actual: n,
                });
            }
            Ok(())
        };
        match &self.kind {
            DesignKind::NullBattery { m } => {
                n_ok(self.n)?;
                if *m == 0 {
                    return Err(Error::Config {
                        key: "m".into(),
                        message: "must be positive".into(),
                    });
                }
            }
            DesignKind::CorrelatedBattery { m_true, m_null, rho } => {
                n_ok(self.n)?;
                if !rho_ok(*rho) {
                    return Err(bad_rho(*rho));
                }
                if m_true + m_null == 0 {
                    return Err(Error::Config {
                        key: "m_true".into(),
                        message: "battery is empty".into(),
                    });
                }
            }
            DesignKind::EffectGrid { rhos, ns } => {
                if rhos.is_empty() || ns.is_empty() {
                    return Err(Error::Config {
                        key: "rho".into(),
                        message: "effect grid needs rho and n lists".into(),
                    });
                }
                for &rho in rhos {
                    if !rho_ok(rho) {
                        return Err(bad_rho(rho));
                    }
                }
                for &n in ns {
                    n_ok(n)?;
                }
            }
            DesignKind::Contaminated { rho, fraction, .. } => {
                n_ok(self.n)?;
                if !rho_ok(*rho) {
                    return Err(bad_rho(*rho));
                }
                if !(0.0..=0.5).contains(fraction) {
                    return Err(Error::Domain {
                        what: "contamination fraction",
                        value: *fraction,
                    });
                }
            }
        }
        Ok(())
    }

    /// (label, rho, n) of every cell.
    fn cells(&self) -> Vec<(String, Option<f64>, usize)> {
        match &self.kind {
            DesignKind::EffectGrid { rhos, ns } => ns
                .iter()
                .flat_map(|&n| rhos.iter().map(move |&rho| (format!("rho{rho}_n{n}"), Some(rho), n)))
                .collect(),
            DesignKind::NullBattery { .. } => vec![("all".into(), Some(0.0), self.n)],
            DesignKind::CorrelatedBattery { rho, .. } | DesignKind::Contaminated { rho, .. } => {
                vec![("all".into(), Some(*rho), self.n)]
            }
        }
    }

    /// The tests of one repetition: pairs, whether each carries a true
    /// effect, and whether they share the target (battery).
    fn generate(&self, cell: usize, rep: usize) -> Result<Battery> {
        match &self.kind {
            DesignKind::NullBattery { m } => self.battery(rep, 0, *m, 0.0),
            DesignKind::CorrelatedBattery { m_true, m_null, rho } => {
                self.battery(rep, *m_true, *m_null, *rho)
            }
            DesignKind::EffectGrid { .. } => {
                let (_, rho, n) = self.cells()[cell].clone();
                let rho = rho.unwrap_or(0.0);
                let pair = gen_pair(n, rho, derive_seed(self.seed, &[cell as u64, rep as u64]))?;
                Ok(Battery::single(pair, rho != 0.0))
            }
            DesignKind::Contaminated {
                rho,
                outlier,
                fraction,
            } => {
                let c = gen_contaminated(
                    self.n,
                    *rho,
                    *outlier,
                    *fraction,
                    derive_seed(self.seed, &[rep as u64]),
                )?;
                Ok(Battery::single(c.pair, *rho != 0.0))
            }
        }
    }

    fn battery(&self, rep: usize, m_true: usize, m_null: usize, rho: f64) -> Result<Battery> {
        let n = self.n;
        let y = SplitMix64::derived(self.seed, &[rep as u64, 0]).normals(n);
        let pairs = (0..m_true + m_null)
            .map(|j| {
                let z = SplitMix64::derived(self.seed, &[rep as u64, j as u64 + 1]).normals(n);
                let x = if j < m_true { mix(&y, &z, rho) } else { z };
                DataPair::new(x, y.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let is_true = (0..m_true + m_null).map(|j| j < m_true).collect();
        Ok(Battery {
            pairs,
            is_true,
            shared_target: true,
        })
    }
}

struct Battery {
    pairs: Vec<DataPair>,
    is_true: Vec<bool>,
    shared_target: bool,
}

impl Battery {
    fn single(pair: DataPair, is_true: bool) -> Self {
        Battery {
            pairs: vec![pair],
            is_true: vec![is_true],
            shared_target: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub alpha: f64,
    pub repetitions: usize,
    pub permutations: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            repetitions: 100,
            permutations: crate::multitest::DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub tests: usize,
    pub true_tests: usize,
    pub null_tests: usize,
    pub rejections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    /// False positives over null tests.
    pub fpr: Option<f64>,
    /// True positives over true-effect tests.
    pub sensitivity: Option<f64>,
    /// Share of repetitions with at least one false positive.
    pub fwer: Option<f64>,
    pub mean_true_rejections: f64,
    pub mean_false_rejections: f64,
    pub mean_estimate: Option<f64>,
    pub mean_abs_estimate: Option<f64>,
    pub mean_estimate_significant: Option<f64>,
    pub mean_p: Option<f64>,
    /// dcal only: tests whose calibrated sign disagreed with r.
    pub sign_flips: Option<usize>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub rho: Option<f64>,
    pub n: usize,
    pub repetitions: usize,
    pub aborted_repetitions: usize,
    pub methods: Vec<MethodStats>,
}

impl CellReport {
    pub fn method(&self, method: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub design: String,
    pub spec: SimDesign,
    pub options: RunOptions,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, label: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// The single cell of battery and contamination designs.
    pub fn only_cell(&self) -> &CellReport {
        &self.cells[0]
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    tests: usize,
    true_tests: usize,
    null_tests: usize,
    tp: usize,
    fp: usize,
    sum_est: f64,
    sum_abs_est: f64,
    n_est: usize,
    sum_est_sig: f64,
    n_est_sig: usize,
    sum_p: f64,
    families_with_fp: usize,
    flips: usize,
    errors: usize,
}

impl Tally {
    fn absorb(&mut self, o: &Tally) {
        self.tests += o.tests;
        self.true_tests += o.true_tests;
        self.null_tests += o.null_tests;
        self.tp += o.tp;
        self.fp += o.fp;
        self.sum_est += o.sum_est;
        self.sum_abs_est += o.sum_abs_est;
        self.n_est += o.n_est;
        self.sum_est_sig += o.sum_est_sig;
        self.n_est_sig += o.n_est_sig;
        self.sum_p += o.sum_p;
        self.families_with_fp += o.families_with_fp;
        self.flips += o.flips;
        self.errors += o.errors;
    }
}

/// Per-test (p-like value, estimate) of one method, or an error.
type Outcome = std::result::Result<(f64, f64), ()>;

fn evaluate(
    method: Method,
    battery: &Battery,
    classical: &[CorrelationResult],
    design: &SimDesign,
    cell: usize,
    rep: usize,
    opts: &RunOptions,
    perm: &mut Option<crate::multitest::PermutationPValues>,
    flips: &mut usize,
) -> Vec<Outcome> {
    let ps: Vec<f64> = classical.iter().map(|c| c.p).collect();
    let with_r = |vals: Vec<f64>| -> Vec<Outcome> {
        vals.into_iter()
            .zip(classical)
            .map(|(v, c)| Ok((v, c.r)))
            .collect()
    };
    let all_err = || vec![Err(()); classical.len()];
    match method {
        Method::Uncorrected => with_r(ps),
        Method::Holm => holm_adjust(&ps).map(with_r).unwrap_or_else(|_| all_err()),
        Method::Bh => bh_adjust(&ps).map(with_r).unwrap_or_else(|_| all_err()),
        Method::Perm | Method::PermMax => {
            if perm.is_none() && battery.shared_target {
                let plan = PermutationPlan {
                    n_permutations: opts.permutations,
                    seed: derive_seed(design.seed, &[cell as u64, rep as u64, TAG_PERMUTATION]),
                };
                let columns: Vec<Vec<f64>> = battery.pairs.iter().map(|p| p.x().to_vec()).collect();
                *perm = perm_test_both(&columns, battery.pairs[0].y(), &plan).ok();
            }
            match perm {
                Some(res) if method == Method::Perm => with_r(res.per_test.clone()),
                Some(res) => with_r(res.max_stat.clone()),
                None => all_err(),
            }
        }
        Method::Dcal(scheme) => battery
            .pairs
            .iter()
            .enumerate()
            .map(|(j, pair)| {
                let seeded = scheme.with_seed(derive_seed(
                    design.seed,
                    &[cell as u64, rep as u64, j as u64, TAG_SCHEME],
                ));
                dcal_test(pair, opts.alpha, false, &seeded)
                    .map(|d| {
                        if d.sign_flip_triggered {
                            *flips += 1;
                        }
                        (d.p_dcal, d.r_dcal)
                    })
                    .map_err(|_| ())
            })
            .collect(),
        Method::Sellke => classical
            .iter()
            .map(|c| pcal_sellke(c.p).map(|v| (v, c.r)).map_err(|_| ()))
            .collect(),
        Method::Bickel => classical
            .iter()
            .map(|c| pcal_bickel(c.p).map(|v| (v, c.r)).map_err(|_| ()))
            .collect(),
        Method::PpBf => classical
            .iter()
            .map(|c| {
                correlation_bf_from_r(c.r, c.n)
                    .and_then(|bf| bf_to_posterior(bf, 0.5))
                    .map(|post| (1.0 - post, c.r))
                    .map_err(|_| ())
            })
            .collect(),
        Method::Skipped => battery
            .pairs
            .iter()
            .map(|pair| skipped_correlation(pair).map(|s| (s.p, s.r)).map_err(|_| ()))
            .collect(),
    }
}

fn run_repetition(
    design: &SimDesign,
    methods: &[Method],
    opts: &RunOptions,
    cell: usize,
    rep: usize,
) -> Result<Vec<Tally>> {
    let battery = design.generate(cell, rep)?;
    let classical: Vec<CorrelationResult> = battery.pairs.iter().map(pearson).collect();
    let mut perm = None;
    Ok(methods
        .iter()
        .map(|&method| {
            let mut flips = 0;
            let outcomes = evaluate(
                method, &battery, &classical, design, cell, rep, opts, &mut perm, &mut flips,
            );
            let mut t = Tally {
                flips,
                ..Tally::default()
            };
            for (outcome, &is_true) in outcomes.iter().zip(&battery.is_true) {
                let Ok((value, estimate)) = *outcome else {
                    t.errors += 1;
                    continue;
                };
                t.tests += 1;
                let significant = value < opts.alpha;
                if is_true {
                    t.true_tests += 1;
                    t.tp += usize::from(significant);
                } else {
                    t.null_tests += 1;
                    t.fp += usize::from(significant);
                }
                t.sum_p += value;
                t.sum_est += estimate;
                t.sum_abs_est += estimate.abs();
                t.n_est += 1;
                if significant {
                    t.sum_est_sig += estimate;
                    t.n_est_sig += 1;
                }
            }
            t.families_with_fp = usize::from(t.fp > 0);
            t
        })
        .collect())
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Run every method on `repetitions` generated batteries (or pairs) per cell.
///
/// Repetitions run in parallel; each draws from streams derived from the
/// design seed and its own index, and tallies are combined in index order,
/// so the report is identical for any thread count.
pub fn run_battery_experiment(
    design: &SimDesign,
    methods: &[Method],
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    if methods.is_empty() {
        return Err(Error::Config {
            key: "methods".into(),
            message: "no methods requested".into(),
        });
    }
    if opts.repetitions == 0 {
        return Err(Error::Config {
            key: "repetitions".into(),
            message: "must be positive".into(),
        });
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Domain {
            what: "alpha",
            value: opts.alpha,
        });
    }
    if methods.iter().any(|m| matches!(m, Method::Perm | Method::PermMax)) {
        PermutationPlan::new(opts.permutations, 0)?;
    }
    design.validate()?;

    let cells = design.cells();
    let mut reports = Vec::with_capacity(cells.len());
    for (ci, (label, rho, n)) in cells.into_iter().enumerate() {
        let per_rep: Vec<Result<Vec<Tally>>> = (0..opts.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(design, methods, opts, ci, rep))
            .collect();
        let mut totals = vec![Tally::default(); methods.len()];
        let mut completed = 0;
        let mut aborted = 0;
        for r in &per_rep {
            match r {
                Ok(tallies) => {
                    completed += 1;
                    totals.iter_mut().zip(tallies).for_each(|(a, b)| a.absorb(b));
                }
                Err(_) => aborted += 1,
            }
        }
        let methods = methods
            .iter()
            .zip(&totals)
            .map(|(&method, t)| MethodStats {
                method,
                tests: t.tests,
                true_tests: t.true_tests,
                null_tests: t.null_tests,
                rejections: t.tp + t.fp,
                true_positives: t.tp,
                false_positives: t.fp,
                fpr: ratio(t.fp as f64, t.null_tests),
                sensitivity: ratio(t.tp as f64, t.true_tests),
                fwer: if t.null_tests > 0 {
                    ratio(t.families_with_fp as f64, completed)
                } else {
                    None
                },
                mean_true_rejections: ratio(t.tp as f64, completed).unwrap_or(0.0),
                mean_false_rejections: ratio(t.fp as f64, completed).unwrap_or(0.0),
                mean_estimate: ratio(t.sum_est, t.n_est),
                mean_abs_estimate: ratio(t.sum_abs_est, t.n_est),
                mean_estimate_significant: ratio(t.sum_est_sig, t.n_est_sig),
                mean_p: ratio(t.sum_p, t.tests),
                sign_flips: matches!(method, Method::Dcal(_)).then_some(t.flips),
                errors: t.errors,
            })
            .collect();
        reports.push(CellReport {
            label,
            rho,
            n,
            repetitions: completed,
            aborted_repetitions: aborted,
            methods,
        });
    }
    Ok(ExperimentReport {
        design: design.label(),
        spec: design.clone(),
        options: *opts,
        cells: reports,
    })
}

/// dcal under each scheme, with the uncorrected test as reference.
pub fn run_oos_comparison(
    design: &SimDesign,
    schemes: &[OosScheme],
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let mut methods = vec![Method::Uncorrected];
    methods.extend(schemes.iter().map(|&s| Method::Dcal(s)));
    run_battery_experiment(design, &methods, opts)
}

pub fn run_designs(
    designs: &[SimDesign],
    methods: &[Method],
    opts: &RunOptions,
) -> Result<Vec<ExperimentReport>> {
    designs
        .iter()
        .map(|d| run_battery_experiment(d, methods, opts))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.16e}"))
}

/// Tidy long-format table: one row per design cell, method and metric.
pub fn write_reports_csv(reports: &[ExperimentReport], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "design,cell,rho,n,method,metric,value")?;
    for report in reports {
        for cell in &report.cells {
            let prefix = format!(
                "{},{},{},{}",
                report.design,
                cell.label,
                fmt_opt(cell.rho),
                cell.n
            );
            for m in &cell.methods {
                let ints = [
                    ("tests", m.tests),
                    ("true_tests", m.true_tests),
                    ("null_tests", m.null_tests),
                    ("rejections", m.rejections),
                    ("true_positives", m.true_positives),
                    ("false_positives", m.false_positives),
                    ("errors", m.errors),
                ];
                for (name, v) in ints {
                    writeln!(out, "{prefix},{},{name},{v}", m.method)?;
                }
                let reals = [
                    ("fpr", m.fpr),
                    ("sensitivity", m.sensitivity),
                    ("fwer", m.fwer),
                    ("mean_true_rejections", Some(m.mean_true_rejections)),
                    ("mean_false_rejections", Some(m.mean_false_rejections)),
                    ("mean_estimate", m.mean_estimate),
                    ("mean_abs_estimate", m.mean_abs_estimate),
                    ("mean_estimate_significant", m.mean_estimate_significant),
                    ("mean_p", m.mean_p),
                ];
                for (name, v) in reals {
                    writeln!(out, "{prefix},{},{name},{}", m.method, fmt_opt(v))?;
                }
                if let Some(f) = m.sign_flips {
                    writeln!(out, "{prefix},{},sign_flips,{f}", m.method)?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_reports_json(reports: &[ExperimentReport], out: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, reports).map_err(|e| Error::Serialize(e.to_string()))?;
    writeln!(out).map_err(|e| Error::Serialize(e.to_string()))
}

/// Convenience for writing both report formats next to each other.
pub fn save_reports(reports: &[ExperimentReport], csv: &Path, json: &Path) -> Result<()> {
    let mut f = std::fs::File::create(csv).map_err(|e| Error::io(csv, e))?;
    write_reports_csv(reports, &mut f).map_err(|e| Error::io(csv, e))?;
    let mut f = std::fs::File::create(json).map_err(|e| Error::io(json, e))?;
    write_reports_json(reports, &mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_opts(reps: usize) -> RunOptions {
        RunOptions {
            alpha: 0.05,
            repetitions: reps,
            permutations: 199,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for name in [
            "uncorrected", "holm", "bh", "perm", "permmax", "dcal", "dcal-cv10x10",
            "dcal-boot632", "sellke", "bickel", "ppbf", "skipped",
        ] {
            assert_eq!(name.parse::<Method>().unwrap().to_string(), name);
        }
        assert!("dcal-foo".parse::<Method>().is_err());
        assert!("bonferroni".parse::<Method>().is_err());
    }

    #[test]
    fn battery_composition() {
        let d = SimDesign::new(
            DesignKind::CorrelatedBattery {
                m_true: 7,
                m_null: 13,
                rho: 0.5,
            },
            30,
            4,
        );
        let b = d.generate(0, 0).unwrap();
        assert_eq!(b.pairs.len(), 20);
        assert_eq!(b.is_true.iter().filter(|&&t| t).count(), 7);
        assert!(b.pairs.iter().all(|p| p.y() == b.pairs[0].y()));
        let report = run_battery_experiment(&d, &[Method::Uncorrected], &small_opts(3)).unwrap();
        let s = report.only_cell().method(Method::Uncorrected).unwrap();
        assert_eq!((s.tests, s.true_tests, s.null_tests), (60, 21, 39));
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let d = SimDesign::new(DesignKind::NullBattery { m: 30 }, 20, 11);
        let methods: Vec<Method> = ["uncorrected", "holm", "bh", "perm", "permmax", "dcal", "sellke"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let a = run_battery_experiment(&d, &methods, &small_opts(4)).unwrap();
        let b = run_battery_experiment(&d, &methods, &small_opts(4)).unwrap();
        assert_eq!(a, b);
        for m in &a.only_cell().methods {
            assert!(m.rejections <= m.tests);
            assert_eq!(m.true_positives, 0);
            let fpr = m.fpr.unwrap();
            assert!((0.0..=1.0).contains(&fpr));
        }
    }

    #[test]
    fn effect_grid_cells() {
        let d = SimDesign::new(
            DesignKind::EffectGrid {
                rhos: vec![0.2, 0.5],
                ns: vec![20, 40],
            },
            0,
            3,
        );
        let r = run_battery_experiment(&d, &[Method::Uncorrected, Method::dcal()], &small_opts(5))
            .unwrap();
        assert_eq!(r.cells.len(), 4);
        assert!(r.cell("rho0.5_n40").is_some());
        assert!(r.cells.iter().all(|c| c.repetitions == 5));
    }

    #[test]
    fn invalid_designs_rejected() {
        let opts = small_opts(1);
        let bad = SimDesign::new(DesignKind::NullBattery { m: 0 }, 20, 0);
        assert!(run_battery_experiment(&bad, &[Method::Uncorrected], &opts).is_err());
        let bad = SimDesign::new(
            DesignKind::CorrelatedBattery {
                m_true: 1,
                m_null: 1,
                rho: 1.0,
            },
            20,
            0,
        );
        assert!(run_battery_experiment(&bad, &[Method::Uncorrected], &opts).is_err());
        let ok = SimDesign::new(DesignKind::NullBattery { m: 2 }, 20, 0);
        assert!(run_battery_experiment(&ok, &[], &opts).is_err());
        let few_perms = RunOptions {
            permutations: 10,
            ..opts
        };
        assert!(run_battery_experiment(&ok, &[Method::Perm], &few_perms).is_err());
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let d = SimDesign::new(DesignKind::NullBattery { m: 5 }, 12, 1);
        let r = run_battery_experiment(&d, &[Method::Uncorrected, Method::dcal()], &small_opts(2))
            .unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // 16 metrics for uncorrected, 17 for dcal (sign flips), plus header
        assert_eq!(text.lines().count(), 1 + 16 + 17);
        assert!(text.lines().all(|l| l.split(',').count() == 7));
    }
}
