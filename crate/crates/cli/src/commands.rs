use std::io::Write;
use std::time::Instant;

use anyhow::{anyhow, Context};
use dcal_core::anscombe::{quartet, LABELS};
use dcal_core::batch::{
    load_matrix, screen as run_screen, write_report, write_report_to, LoadOptions, MissingPolicy,
    Orientation, ReportFormat, ScreenOptions,
};
use dcal_core::calibration::{calibrate, correlation_bf, bf_to_posterior, pcal_bickel, pcal_sellke, CalibrationMethod};
use dcal_core::dcal::{dcal_test, OosScheme};
use dcal_core::error::Error;
use dcal_core::multitest::{Correction, PermutationPlan};
use dcal_core::robust::skipped_correlation;
use dcal_core::simgen::{load_config, run_battery_experiment, save_reports, write_reports_csv, write_reports_json, ExperimentReport, Method};
use dcal_core::stats::{pearson, DataPair};
use serde::Serialize;

use crate::{pairfile, Failure, FormatArg, Global, MissingArg, ScreenArgs, SimulateArgs, TestArgs};

type CmdResult = Result<(), Failure>;

/// Shortest round-trip form, in scientific notation outside [1e-4, 1e6).
fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::input(anyhow!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn print_json(value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(Failure::other)?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct SkippedOut {
    r: f64,
    p: f64,
    n_used: usize,
    outliers: Vec<usize>,
}

#[derive(Serialize)]
struct CalibrationOut {
    method: String,
    value: f64,
}

#[derive(Serialize)]
struct TestOut {
    n: usize,
    alpha: f64,
    scheme: String,
    r: f64,
    p: f64,
    r_dcal: f64,
    p_dcal: f64,
    sign_flip: bool,
    skipped_by_fast_flag: bool,
    calibrations: Vec<CalibrationOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<SkippedOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped_error: Option<String>,
}

pub fn test(global: &Global, args: &TestArgs) -> CmdResult {
    let alpha = global.alpha();
    check_alpha(alpha)?;
    let (x, y) = match (&args.input, &args.x, &args.y) {
        (Some(path), None, None) => {
            pairfile::read_pair(path, args.columns.as_deref()).map_err(Failure::input)?
        }
        (None, Some(x), Some(y)) => (x.clone(), y.clone()),
        _ => {
            return Err(Failure::input(anyhow!(
                "give an input file, or both --x and --y"
            )))
        }
    };
    let pair = DataPair::new(x, y).map_err(Failure::input)?;

    let mut extras: Vec<String> = Vec::new();
    for m in &args.methods {
        match m.trim().to_ascii_lowercase().as_str() {
            "all" => extras.extend(["sellke", "bickel", "ppbf", "skipped"].map(String::from)),
            "" => {}
            other => extras.push(other.to_string()),
        }
    }
    extras.dedup();

    let scheme = global.scheme();
    let d = dcal_test(&pair, alpha, args.fast, &scheme).map_err(Failure::input)?;
    let mut out = TestOut {
        n: d.n,
        alpha,
        scheme: scheme.to_string(),
        r: d.r,
        p: d.p,
        r_dcal: d.r_dcal,
        p_dcal: d.p_dcal,
        sign_flip: d.sign_flip_triggered,
        skipped_by_fast_flag: d.skipped_by_fast_flag,
        calibrations: Vec::new(),
        skipped: None,
        skipped_error: None,
    };
    for name in &extras {
        if name == "skipped" {
            match skipped_correlation(&pair) {
                Ok(s) => {
                    out.skipped = Some(SkippedOut {
                        r: s.r,
                        p: s.p,
                        n_used: s.n_used,
                        outliers: s.outlier_indices,
                    })
                }
                Err(e) => out.skipped_error = Some(e.to_string()),
            }
            continue;
        }
        let method: CalibrationMethod = name
            .parse()
            .map_err(|_| Failure::input(anyhow!("unknown method `{name}`")))?;
        let c = calibrate(method, &pair).map_err(Failure::input)?;
        out.calibrations.push(CalibrationOut {
            method: method.to_string(),
            value: c.value,
        });
    }

    if global.json {
        return print_json(&out);
    }
    println!("n          {}", out.n);
    println!("scheme     {}", out.scheme);
    println!("r          {}", num(out.r));
    println!("p          {}", num(out.p));
    println!("r_dcal     {}", num(out.r_dcal));
    println!("p_dcal     {}", num(out.p_dcal));
    println!("sign_flip  {}", out.sign_flip);
    if out.skipped_by_fast_flag {
        println!("note       out-of-sample step skipped (p >= alpha)");
    }
    for c in &out.calibrations {
        println!("{:<10} {}", c.method, num(c.value));
    }
    if let Some(s) = &out.skipped {
        println!("skipped_r  {}", num(s.r));
        println!("skipped_p  {}", num(s.p));
        println!("skipped_n  {}", s.n_used);
        println!("outliers   {:?}", s.outliers);
    }
    if let Some(e) = &out.skipped_error {
        println!("skipped    unavailable: {e}");
    }
    let verdict = if out.p_dcal < alpha { "significant" } else { "not significant" };
    println!("dcal       {verdict} at alpha = {alpha}");
    Ok(())
}

fn screen_failure(e: Error) -> Failure {
    match e {
        Error::UnknownFeature(_) | Error::DegenerateVariance(_) => Failure::target(e),
        other => Failure::input(other),
    }
}

#[derive(Serialize)]
struct ScreenSummaryOut<'a> {
    seconds: f64,
    features: usize,
    samples: usize,
    #[serde(flatten)]
    summary: &'a dcal_core::batch::ScreenSummary,
}

pub fn screen(global: &Global, args: &ScreenArgs) -> CmdResult {
    let alpha = global.alpha();
    check_alpha(alpha)?;
    let start = Instant::now();
    let delimiter = u8::try_from(args.delimiter)
        .map_err(|_| Failure::input(anyhow!("delimiter must be a single-byte character")))?;
    let load = LoadOptions {
        delimiter,
        orientation: if args.samples_as_rows {
            Orientation::SamplesAsRows
        } else {
            Orientation::FeaturesAsRows
        },
        missing_policy: match args.missing {
            MissingArg::Drop => MissingPolicy::DropFeature,
            MissingArg::Fail => MissingPolicy::Fail,
        },
    };
    let matrix = load_matrix(&args.matrix, &load).map_err(Failure::input)?;
    eprintln!(
        "loaded {} features x {} samples from {}",
        matrix.feature_count(),
        matrix.sample_count(),
        args.matrix.display()
    );
    for w in matrix.warnings() {
        eprintln!("warning: {w}");
    }

    let corrections = args
        .corrections
        .iter()
        .map(|c| c.parse::<Correction>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::input)?;
    let permutations = if corrections.iter().any(|c| c.needs_data()) {
        PermutationPlan::new(args.permutations, global.seed.unwrap_or(0)).map_err(Failure::input)?
    } else {
        PermutationPlan::default()
    };
    let options = ScreenOptions {
        alpha,
        scheme: global.scheme(),
        corrections,
        fast: !args.no_fast,
        permutations,
    };
    eprintln!(
        "screening against `{}` ({} scheme, fast {})",
        args.target,
        options.scheme,
        if options.fast { "on" } else { "off" }
    );
    let report = run_screen(&matrix, &args.target, &options).map_err(screen_failure)?;
    for f in &report.failures {
        eprintln!("warning: feature `{}` not tested: {}", f.name, f.message);
    }

    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    match &args.output {
        Some(path) => write_report(&report, path, format).map_err(Failure::other)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_report_to(&report, &mut lock, format).map_err(Failure::other)?;
            lock.flush().map_err(Failure::other)?;
        }
    }

    let seconds = start.elapsed().as_secs_f64();
    let summary = ScreenSummaryOut {
        seconds,
        features: matrix.feature_count(),
        samples: matrix.sample_count(),
        summary: &report.summary,
    };
    // keep standard output clean when it carries the report
    let to_stdout = args.output.is_some();
    let text = if global.json {
        serde_json::to_string_pretty(&summary).map_err(Failure::other)?
    } else {
        let mut s = format!(
            "screened {} features in {seconds:.2}s ({} failed, {} out-of-sample evaluations)\n",
            report.summary.tested, report.summary.failed, report.summary.oos_evaluations
        );
        for c in &report.summary.significant {
            s.push_str(&format!("  {:<12} {} significant\n", c.method, c.significant));
        }
        s.trim_end().to_string()
    };
    if to_stdout {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn print_sim_table(reports: &[ExperimentReport]) {
    println!(
        "{:<40} {:<14} {:<16} {:>9} {:>11} {:>9} {:>10} {:>10}",
        "design", "cell", "method", "fpr", "sensitivity", "fwer", "true/rep", "mean_r"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    for r in reports {
        for c in &r.cells {
            for m in &c.methods {
                println!(
                    "{:<40} {:<14} {:<16} {:>9} {:>11} {:>9} {:>10.2} {:>10}",
                    r.design,
                    c.label,
                    m.method.to_string(),
                    opt(m.fpr),
                    opt(m.sensitivity),
                    opt(m.fwer),
                    m.mean_true_rejections,
                    opt(m.mean_estimate)
                );
            }
        }
    }
}

pub fn simulate(global: &Global, args: &SimulateArgs) -> CmdResult {
    let mut cfg = load_config(&args.config).map_err(Failure::input)?;
    if let Some(methods) = &args.methods {
        cfg.methods = methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_, _>>()
            .map_err(Failure::input)?;
    }
    if let Some(scheme) = global.scheme {
        let chosen = scheme.scheme();
        for m in &mut cfg.methods {
            if *m == Method::Dcal(OosScheme::loo()) {
                *m = Method::Dcal(chosen);
            }
        }
    }
    if let Some(r) = args.repetitions {
        cfg.options.repetitions = r;
    }
    if let Some(p) = args.permutations {
        cfg.options.permutations = p;
    }
    if let Some(a) = global.alpha {
        cfg.options.alpha = a;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    check_alpha(cfg.options.alpha)?;
    let designs = cfg.designs().map_err(Failure::input)?;

    let mut reports = Vec::with_capacity(designs.len());
    for d in &designs {
        let start = Instant::now();
        let report = run_battery_experiment(d, &cfg.methods, &cfg.options).map_err(Failure::input)?;
        eprintln!("{}: {} cells in {:.2?}", report.design, report.cells.len(), start.elapsed());
        reports.push(report);
    }

    match &args.output {
        Some(prefix) => {
            let csv = prefix.with_extension("csv");
            let json = prefix.with_extension("json");
            if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))
                    .map_err(Failure::other)?;
            }
            save_reports(&reports, &csv, &json).map_err(Failure::other)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
            if global.json {
                print_json(&reports)?;
            } else {
                print_sim_table(&reports);
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if global.json {
                write_reports_json(&reports, &mut lock).map_err(Failure::other)?;
            } else {
                write_reports_csv(&reports, &mut lock).map_err(Failure::other)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MethodResult {
    method: &'static str,
    r: Option<f64>,
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct DatasetResult {
    dataset: &'static str,
    methods: Vec<MethodResult>,
}

pub fn anscombe(global: &Global) -> CmdResult {
    let alpha = global.alpha();
    check_alpha(alpha)?;
    let scheme = global.scheme();
    let mut table = Vec::new();
    for (pair, label) in quartet().iter().zip(LABELS) {
        let c = pearson(pair);
        let d = dcal_test(pair, alpha, false, &scheme).map_err(Failure::other)?;
        let some = |method, r, p| MethodResult {
            method,
            r: Some(r),
            p: Some(p),
            note: None,
        };
        let ppbf = correlation_bf(pair)
            .and_then(|bf| bf_to_posterior(bf, 0.5))
            .map(|post| 1.0 - post)
            .map_err(Failure::other)?;
        let mut methods = vec![
            some("classical", c.r, c.p),
            MethodResult {
                note: d.sign_flip_triggered.then(|| "sign flip".to_string()),
                ..some("dcal", d.r_dcal, d.p_dcal)
            },
            some("sellke", c.r, pcal_sellke(c.p).map_err(Failure::other)?),
            some("bickel", c.r, pcal_bickel(c.p).map_err(Failure::other)?),
            some("ppbf", c.r, ppbf),
        ];
        methods.push(match skipped_correlation(pair) {
            Ok(s) => MethodResult {
                note: Some(format!("{} outliers removed", s.outlier_indices.len())),
                ..some("skipped", s.r, s.p)
            },
            Err(e) => MethodResult {
                method: "skipped",
                r: None,
                p: None,
                note: Some(e.to_string()),
            },
        });
        table.push(DatasetResult {
            dataset: label,
            methods,
        });
    }
    if global.json {
        return print_json(&table);
    }
    let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    let method_names: Vec<&str> = table[0].methods.iter().map(|m| m.method).collect();
    for (title, pick) in [
        ("r-values", (|m: &MethodResult| m.r) as fn(&MethodResult) -> Option<f64>),
        ("p-values", |m: &MethodResult| m.p),
    ] {
        println!("{title}");
        println!("{:<10} {:>9} {:>9} {:>9} {:>9}", "method", "A", "B", "C", "D");
        for (k, name) in method_names.iter().enumerate() {
            let vals: Vec<String> = table.iter().map(|d| cell(pick(&d.methods[k]))).collect();
            println!("{:<10} {:>9} {:>9} {:>9} {:>9}", name, vals[0], vals[1], vals[2], vals[3]);
        }
        println!();
    }
    for d in &table {
        for m in &d.methods {
            if let Some(note) = &m.note {
                println!("{} {}: {note}", d.dataset, m.method);
            }
        }
    }
    println!("ppbf is the posterior probability of no correlation (equal prior odds)");
    Ok(())
}
