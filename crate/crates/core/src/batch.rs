//! Feature-matrix ingestion, battery screening against one target, and
//! screening reports.
//!
//! Input files are delimited text with a header row. With the default
//! orientation each row is a feature (first cell the name, the rest one value
//! per sample); `SamplesAsRows` reads the transposed layout. Empty cells and
//! `NA`/`NaN` are missing values.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcal::{dcal_test, OosScheme};
use crate::error::{Error, Result};
use crate::multitest::{adjust, perm_test_both, Correction, PermutationPlan};
use crate::rng::{derive_seed, SplitMix64};
use crate::simgen::mix;
use crate::stats::{is_constant, DataPair, MIN_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    FeaturesAsRows,
    SamplesAsRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingPolicy {
    /// Features with any missing value are dropped with a warning.
    DropFeature,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub orientation: Orientation,
    pub missing_policy: MissingPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            orientation: Orientation::FeaturesAsRows,
            missing_policy: MissingPolicy::DropFeature,
        }
    }
}

/// Dense feature-major matrix with unique feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    sample_ids: Vec<String>,
    excluded: Vec<String>,
    warnings: Vec<String>,
}

impl FeatureMatrix {
    /// Build from feature rows. Constant features are excluded and reported
    /// in [`warnings`](Self::warnings).
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let samples = values.first().map_or(0, Vec::len);
        let sample_ids = (1..=samples).map(|i| format!("s{i}")).collect();
        Self::with_samples(names, values, sample_ids)
    }

    pub fn with_samples(
        names: Vec<String>,
        values: Vec<Vec<f64>>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Ingestion(format!(
                "{} names for {} feature rows",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(Error::Ingestion("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Ingestion(format!("duplicate feature name '{name}'")));
            }
        }
        for (name, row) in names.iter().zip(&values) {
            if row.len() != sample_ids.len() {
                return Err(Error::Ingestion(format!(
                    "feature '{name}' has {} values, expected {}",
                    row.len(),
                    sample_ids.len()
                )));
            }
            if let Some(index) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Ingestion(format!(
                    "feature '{name}' has a non-finite value at sample {}",
                    index + 1
                )));
            }
        }
        let mut matrix = FeatureMatrix {
            names: Vec::new(),
            values: Vec::new(),
            sample_ids,
            excluded: Vec::new(),
            warnings: Vec::new(),
        };
        for (name, row) in names.into_iter().zip(values) {
            if row.len() > 1 && is_constant(&row) {
                matrix.warnings.push(format!("constant feature '{name}' excluded"));
                matrix.excluded.push(name);
            } else {
                matrix.names.push(name);
                matrix.values.push(row);
            }
        }
        Ok(matrix)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_count(&self) -> usize {
        self.names.len()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn feature(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.values[i].as_slice())
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Names of features dropped at ingestion (constant or missing values).
    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "N/A")
}

/// Raw cells of one data record: the leading label and the numeric cells
/// (`None` when missing).
struct Record {
    label: String,
    cells: Vec<Option<f64>>,
    line: u64,
}

pub fn load_matrix(path: &Path, options: &LoadOptions) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(std::io::BufReader::new(file), options)
}

/// [`load_matrix`] over any reader.
pub fn read_matrix(reader: impl std::io::Read, options: &LoadOptions) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(Error::Ingestion("empty input".into())),
        Some(r) => r.map_err(csv_error)?,
    };
    let width = header.len();
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header needs a corner cell and at least one column name".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();

    let mut records = Vec::new();
    for rec in rows {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut cells = Vec::with_capacity(width - 1);
        for (j, raw) in rec.iter().enumerate().skip(1) {
            let cell = raw.trim();
            if is_missing(cell) {
                cells.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => cells.push(Some(v)),
                _ => {
                    return Err(Error::Parse {
                        line,
                        column: j + 1,
                        message: format!("non-numeric value '{cell}'"),
                    })
                }
            }
        }
        records.push(Record {
            label: rec[0].trim().to_string(),
            cells,
            line,
        });
    }

    // feature-major view: (name, line of each cell's record, values)
    let (names, sample_ids, lines, grid): (Vec<String>, Vec<String>, Vec<Vec<u64>>, Vec<Vec<Option<f64>>>) =
        match options.orientation {
            Orientation::FeaturesAsRows => {
                let names = records.iter().map(|r| r.label.clone()).collect();
                let lines = records.iter().map(|r| vec![r.line; r.cells.len()]).collect();
                let grid = records.into_iter().map(|r| r.cells).collect();
                (names, columns, lines, grid)
            }
            Orientation::SamplesAsRows => {
                let samples = records.iter().map(|r| r.label.clone()).collect();
                let lines = (0..columns.len())
                    .map(|_| records.iter().map(|r| r.line).collect())
                    .collect();
                let grid = (0..columns.len())
                    .map(|j| records.iter().map(|r| r.cells[j]).collect())
                    .collect();
                (columns, samples, lines, grid)
            }
        };

    let mut kept_names = Vec::with_capacity(names.len());
    let mut kept_values = Vec::with_capacity(names.len());
    let mut dropped = Vec::new();
    for (fi, (name, cells)) in names.into_iter().zip(grid).enumerate() {
        if let Some(pos) = cells.iter().position(Option::is_none) {
            match options.missing_policy {
                MissingPolicy::Fail => {
                    let (line, column) = match options.orientation {
                        Orientation::FeaturesAsRows => (lines[fi][pos], pos + 2),
                        Orientation::SamplesAsRows => (lines[fi][pos], fi + 2),
                    };
                    return Err(Error::Parse {
                        line,
                        column,
                        message: format!("missing value for feature '{name}'"),
                    });
                }
                MissingPolicy::DropFeature => {
                    dropped.push(name);
                    continue;
                }
            }
        }
        kept_names.push(name);
        kept_values.push(cells.into_iter().map(|c| c.unwrap_or(f64::NAN)).collect());
    }
    // duplicates among dropped features are still an ingestion error
    let mut seen: HashSet<&str> = kept_names.iter().map(String::as_str).collect();
    for name in &dropped {
        if !seen.insert(name.as_str()) {
            return Err(Error::Ingestion(format!("duplicate feature name '{name}'")));
        }
    }
    let mut matrix = FeatureMatrix::with_samples(kept_names, kept_values, sample_ids)?;
    for name in dropped {
        matrix
            .warnings
            .push(format!("feature '{name}' has missing values and was excluded"));
        matrix.excluded.push(name);
    }
    Ok(matrix)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOptions {
    pub alpha: f64,
    /// Its seed is combined with each feature's name.
    pub scheme: OosScheme,
    pub corrections: Vec<Correction>,
    /// Skip out-of-sample work for features with p ≥ alpha.
    pub fast: bool,
    /// Used only by the permutation corrections.
    pub permutations: PermutationPlan,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            scheme: OosScheme::loo(),
            corrections: vec![Correction::Holm, Correction::Bh],
            fast: true,
            permutations: PermutationPlan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub name: String,
    pub r: f64,
    pub p: f64,
    pub r_dcal: f64,
    pub p_dcal: f64,
    pub flip: bool,
    /// Adjusted p-values, one per requested correction.
    pub adjusted: Vec<f64>,
    #[serde(skip)]
    pub oos_evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFailure {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCount {
    pub method: String,
    pub significant: usize,
}

/// Features significant under both methods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub first: String,
    pub second: String,
    pub both: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSummary {
    pub target: String,
    pub tested: usize,
    pub failed: usize,
    pub oos_evaluations: usize,
    pub significant: Vec<MethodCount>,
    pub overlaps: Vec<Overlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub alpha: f64,
    pub corrections: Vec<Correction>,
    pub rows: Vec<ScreenRow>,
    pub failures: Vec<FeatureFailure>,
    pub summary: ScreenSummary,
}

impl ScreenReport {
    /// Method names in summary order: uncorrected, dcal, then each correction.
    pub fn methods(&self) -> Vec<String> {
        let mut names = vec!["uncorrected".to_string(), "dcal".to_string()];
        names.extend(
            self.corrections
                .iter()
                .filter(|c| **c != Correction::Uncorrected)
                .map(|c| c.to_string()),
        );
        names
    }

    /// Per-row significance for a method named as in [`methods`](Self::methods).
    pub fn significant(&self, method: &str) -> Option<Vec<bool>> {
        let alpha = self.alpha;
        match method {
            "uncorrected" => Some(self.rows.iter().map(|r| r.p < alpha).collect()),
            "dcal" => Some(self.rows.iter().map(|r| r.p_dcal < alpha).collect()),
            other => {
                let k = self.corrections.iter().position(|c| c.to_string() == other)?;
                Some(self.rows.iter().map(|r| r.adjusted[k] < alpha).collect())
            }
        }
    }

    pub fn significant_names(&self, method: &str) -> Option<Vec<&str>> {
        let flags = self.significant(method)?;
        Some(
            self.rows
                .iter()
                .zip(flags)
                .filter(|(_, s)| *s)
                .map(|(r, _)| r.name.as_str())
                .collect(),
        )
    }

    pub fn count(&self, method: &str) -> Option<usize> {
        self.summary
            .significant
            .iter()
            .find(|m| m.method == method)
            .map(|m| m.significant)
    }

    pub fn overlap(&self, first: &str, second: &str) -> Option<usize> {
        self.summary
            .overlaps
            .iter()
            .find(|o| (o.first == first && o.second == second) || (o.first == second && o.second == first))
            .map(|o| o.both)
    }
}

/// FNV-1a; keys each feature's resampling stream by name so results do not
/// depend on row order.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Test every feature except `target` against the target.
///
/// Features run in parallel; rows keep matrix order. Corrections are applied
/// to the classical p-values of the features that were tested successfully.
pub fn screen(matrix: &FeatureMatrix, target: &str, options: &ScreenOptions) -> Result<ScreenReport> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Domain {
            what: "alpha",
            value: options.alpha,
        });
    }
    let t = match matrix.index_of(target) {
        Some(t) => t,
        None if matrix.excluded.iter().any(|n| n == target) => {
            return Err(Error::DegenerateVariance("target feature"))
        }
        None => return Err(Error::UnknownFeature(target.to_string())),
    };
    if matrix.sample_count() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            required: MIN_SAMPLES,
            actual: matrix.sample_count(),
        });
    }
    if options.corrections.iter().any(|c| c.needs_data()) {
        PermutationPlan::new(options.permutations.n_permutations, 0)?;
    }
    let y = matrix.row(t);

    let outcomes: Vec<(usize, Result<crate::dcal::DcalResult>)> = (0..matrix.feature_count())
        .into_par_iter()
        .filter(|&i| i != t)
        .map(|i| {
            let scheme = options
                .scheme
                .with_seed(derive_seed(options.scheme.seed, &[name_hash(&matrix.names[i])]));
            let res = DataPair::new(matrix.row(i).to_vec(), y.to_vec())
                .and_then(|pair| dcal_test(&pair, options.alpha, options.fast, &scheme));
            (i, res)
        })
        .collect();

    let mut rows = Vec::new();
    let mut tested = Vec::new();
    let mut failures = Vec::new();
    for (i, res) in outcomes {
        let name = matrix.names[i].clone();
        match res {
            Ok(d) => {
                tested.push(i);
                rows.push(ScreenRow {
                    name,
                    r: d.r,
                    p: d.p,
                    r_dcal: d.r_dcal,
                    p_dcal: d.p_dcal,
                    flip: d.sign_flip_triggered,
                    adjusted: Vec::new(),
                    oos_evaluated: !d.skipped_by_fast_flag,
                });
            }
            Err(e) => failures.push(FeatureFailure {
                name,
                message: e.to_string(),
            }),
        }
    }

    let raw: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let mut perm = None;
    let mut columns_adjusted = Vec::with_capacity(options.corrections.len());
    for &c in &options.corrections {
        let adj = if c.needs_data() {
            if rows.is_empty() {
                Vec::new()
            } else {
                if perm.is_none() {
                    let columns: Vec<Vec<f64>> = tested.iter().map(|&i| matrix.row(i).to_vec()).collect();
                    perm = Some(perm_test_both(&columns, y, &options.permutations)?);
                }
                let p = perm.as_ref().expect("computed above");
                if c == Correction::Perm {
                    p.per_test.clone()
                } else {
                    p.max_stat.clone()
                }
            }
        } else {
            adjust(&raw, c)?
        };
        columns_adjusted.push(adj);
    }
    for (k, row) in rows.iter_mut().enumerate() {
        row.adjusted = columns_adjusted.iter().map(|col| col[k]).collect();
    }

    let mut report = ScreenReport {
        alpha: options.alpha,
        corrections: options.corrections.clone(),
        rows,
        failures,
        summary: ScreenSummary {
            target: target.to_string(),
            tested: 0,
            failed: 0,
            oos_evaluations: 0,
            significant: Vec::new(),
            overlaps: Vec::new(),
        },
    };
    report.summary = summarize(&report);
    Ok(report)
}

fn summarize(report: &ScreenReport) -> ScreenSummary {
    let methods = report.methods();
    let flags: Vec<Vec<bool>> = methods
        .iter()
        .map(|m| report.significant(m).expect("listed method"))
        .collect();
    let significant = methods
        .iter()
        .zip(&flags)
        .map(|(m, f)| MethodCount {
            method: m.clone(),
            significant: f.iter().filter(|&&s| s).count(),
        })
        .collect();
    let mut overlaps = Vec::new();
    for a in 0..methods.len() {
        for b in a + 1..methods.len() {
            overlaps.push(Overlap {
                first: methods[a].clone(),
                second: methods[b].clone(),
                both: flags[a].iter().zip(&flags[b]).filter(|(x, y)| **x && **y).count(),
            });
        }
    }
    ScreenSummary {
        target: report.summary.target.clone(),
        tested: report.rows.len(),
        failed: report.failures.len(),
        oos_evaluations: report.rows.iter().filter(|r| r.oos_evaluated).count(),
        significant,
        overlaps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config {
                key: "format".into(),
                message: format!("unknown report format '{other}'"),
            }),
        }
    }
}

/// Column names of the CSV report.
pub fn csv_header(corrections: &[Correction]) -> Vec<String> {
    let mut cols: Vec<String> = ["name", "r", "p", "r_dcal", "p_dcal", "flip"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(corrections.iter().map(|c| format!("p_{c}")));
    cols
}

pub fn write_report_to(report: &ScreenReport, out: &mut impl Write, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let ser = |e: csv::Error| Error::Serialize(e.to_string());
            w.write_record(csv_header(&report.corrections)).map_err(ser)?;
            for row in &report.rows {
                let mut rec = vec![
                    row.name.clone(),
                    format!("{:.16e}", row.r),
                    format!("{:.16e}", row.p),
                    format!("{:.16e}", row.r_dcal),
                    format!("{:.16e}", row.p_dcal),
                    row.flip.to_string(),
                ];
                rec.extend(row.adjusted.iter().map(|v| format!("{v:.16e}")));
                w.write_record(&rec).map_err(ser)?;
            }
            w.flush().map_err(|e| Error::Serialize(e.to_string()))
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report).map_err(|e| Error::Serialize(e.to_string()))?;
            writeln!(out).map_err(|e| Error::Serialize(e.to_string()))
        }
    }
}

pub fn write_report(report: &ScreenReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_report_to(report, &mut out, format)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a CSV report written by [`write_report`].
pub fn read_report_csv(path: &Path) -> Result<Vec<ScreenRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 6 {
        return Err(Error::Parse {
            line: 1,
            column: header.len() + 1,
            message: "report header is too short".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("non-numeric value '{}'", &rec[j]),
            })
        };
        rows.push(ScreenRow {
            name: rec[0].to_string(),
            r: num(1)?,
            p: num(2)?,
            r_dcal: num(3)?,
            p_dcal: num(4)?,
            flip: rec[5].parse().map_err(|_| Error::Parse {
                line,
                column: 6,
                message: format!("expected true/false, got '{}'", &rec[5]),
            })?,
            adjusted: (6..rec.len()).map(num).collect::<Result<_>>()?,
            oos_evaluated: false,
        });
    }
    Ok(rows)
}

/// Synthetic screening matrix: a `target` row, `m_true` features correlated
/// with it at `rho` (named `true_0001`, …) and `m_null` independent ones
/// (`null_0001`, …), all standard normal over `samples` columns.
///
/// Row `j` draws from the stream derived from `(seed, [j])`; the target uses `j = 0`.
pub fn synthetic_matrix(
    samples: usize,
    m_true: usize,
    m_null: usize,
    rho: f64,
    seed: u64,
) -> Result<FeatureMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain { what: "rho", value: rho });
    }
    let target = SplitMix64::derived(seed, &[0]).normals(samples);
    let mut names = vec!["target".to_string()];
    let mut values = vec![target.clone()];
    for j in 0..m_true + m_null {
        let z = SplitMix64::derived(seed, &[j as u64 + 1]).normals(samples);
        if j < m_true {
            names.push(format!("true_{:04}", j + 1));
            values.push(mix(&target, &z, rho));
        } else {
            names.push(format!("null_{:04}", j - m_true + 1));
            values.push(z);
        }
    }
    FeatureMatrix::new(names, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, options: &LoadOptions) -> Result<FeatureMatrix> {
        read_matrix(text.as_bytes(), options)
    }

    #[test]
    fn well_formed_round_trip() {
        let m = read(
            "gene,s1,s2,s3,s4,s5\na,1,2,3,4,5\nb,2,1,4,3,5\nc,0.5,0.25,1e-3,-2,7\n",
            &LoadOptions::default(),
        )
        .unwrap();
        assert_eq!((m.feature_count(), m.sample_count()), (3, 5));
        assert!(m.warnings().is_empty());
        assert_eq!(m.feature("c").unwrap(), &[0.5, 0.25, 1e-3, -2.0, 7.0]);
        assert_eq!(m.sample_ids()[4], "s5");
    }

    #[test]
    fn samples_as_rows() {
        let opts = LoadOptions {
            orientation: Orientation::SamplesAsRows,
            ..LoadOptions::default()
        };
        let m = read("id,a,b\ns1,1,4\ns2,2,3\ns3,3,9\ns4,5,1\n", &opts).unwrap();
        assert_eq!(m.feature_names(), ["a", "b"]);
        assert_eq!(m.feature("b").unwrap(), &[4.0, 3.0, 9.0, 1.0]);
    }

    #[test]
    fn constant_feature_excluded_with_warning() {
        let m = read("g,s1,s2,s3,s4\na,1,2,3,4\nflat,2,2,2,2\n", &LoadOptions::default()).unwrap();
        assert_eq!(m.feature_names(), ["a"]);
        assert_eq!(m.excluded(), ["flat"]);
        assert!(m.warnings()[0].contains("flat"));
    }

    #[test]
    fn parse_errors_cite_position() {
        let err = read("g,s1,s2,s3\na,1,2,3\nb,1,x,3\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 3, .. }), "{err:?}");
        let err = read("g,s1,s2,s3\na,1,2,3\nb,1,2\n", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn duplicates_named() {
        let err = read("g,s1,s2,s3,s4\na,1,2,3,4\na,4,3,2,1\n", &LoadOptions::default()).unwrap_err();
        match err {
            Error::Ingestion(msg) => assert!(msg.contains("'a'")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_value_policies() {
        let text = "g,s1,s2,s3,s4\na,1,2,3,4\nb,1,NA,3,4\nc,4,1,,2\n";
        let m = read(text, &LoadOptions::default()).unwrap();
        assert_eq!(m.feature_names(), ["a"]);
        assert_eq!(m.excluded(), ["b", "c"]);
        let fail = LoadOptions {
            missing_policy: MissingPolicy::Fail,
            ..LoadOptions::default()
        };
        assert!(matches!(read(text, &fail), Err(Error::Parse { line: 3, column: 3, .. })));
    }

    fn small_matrix() -> FeatureMatrix {
        let t: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).sin()).collect();
        let close: Vec<f64> = t.iter().enumerate().map(|(i, v)| v + 0.05 * (i % 3) as f64).collect();
        let noise: Vec<f64> = (0..12).map(|i| ((i * 7 % 11) as f64).cos()).collect();
        FeatureMatrix::new(
            vec!["target".into(), "close".into(), "noise".into()],
            vec![t, close, noise],
        )
        .unwrap()
    }

    #[test]
    fn screen_excludes_target_and_counts() {
        let m = small_matrix();
        let report = screen(&m, "target", &ScreenOptions::default()).unwrap();
        let names: Vec<&str> = report.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["close", "noise"]);
        assert_eq!(report.count("uncorrected"), Some(1));
        assert_eq!(report.count("dcal"), Some(1));
        assert!(report.overlap("holm", "bh").unwrap() <= report.count("holm").unwrap());
    }

    #[test]
    fn unknown_and_degenerate_targets() {
        let m = small_matrix();
        assert!(matches!(
            screen(&m, "nope", &ScreenOptions::default()),
            Err(Error::UnknownFeature(_))
        ));
        let m = FeatureMatrix::new(
            vec!["a".into(), "flat".into()],
            vec![vec![1., 2., 3., 5.], vec![1.; 4]],
        )
        .unwrap();
        assert!(matches!(
            screen(&m, "flat", &ScreenOptions::default()),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn empty_battery_report() {
        let m = FeatureMatrix::new(vec!["t".into()], vec![vec![1., 2., 4., 3.]]).unwrap();
        let report = screen(&m, "t", &ScreenOptions::default()).unwrap();
        assert!(report.rows.is_empty());
        assert!(report.summary.significant.iter().all(|c| c.significant == 0));
        let mut buf = Vec::new();
        write_report_to(&report, &mut buf, ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "name,r,p,r_dcal,p_dcal,flip,p_holm,p_bh\n");
    }
}
