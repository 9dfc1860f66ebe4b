//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and exits non-zero if any fails.
//!
//! Simulation sizes are the ones the thresholds were calibrated for; reducing
//! them makes the Monte-Carlo comparisons unreliable.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dcal_core::anscombe::{quartet, LABELS};
use dcal_core::batch::{screen, synthetic_matrix, write_report, ReportFormat, ScreenOptions};
use dcal_core::calibration::pcal_sellke;
use dcal_core::dcal::{dcal_in_sample_check, dcal_test, OosScheme};
use dcal_core::multitest::{bh_adjust, holm_adjust};
use dcal_core::rng::SplitMix64;
use dcal_core::simgen::{
    gen_pair, run_battery_experiment, run_oos_comparison, save_reports, DesignKind, Method,
    OutlierKind, RunOptions, SimDesign,
};
use dcal_core::stats::{loo_predictions, ols_fit, pearson};

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Check {
            pass: true,
            detail: String::new(),
        }
    }

    /// Record one condition with its measured context.
    fn expect(&mut self, ok: bool, what: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        if !ok {
            self.pass = false;
            self.detail.push_str("FAILED ");
        }
        self.detail.push_str(what.as_ref());
    }
}

fn opts(repetitions: usize) -> RunOptions {
    RunOptions {
        alpha: 0.05,
        repetitions,
        permutations: 999,
    }
}

fn methods(names: &[&str]) -> Vec<Method> {
    names.iter().map(|s| s.parse().unwrap()).collect()
}

/// Wilson 95% interval for a binomial proportion.
fn wilson(successes: f64, trials: f64) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let p = successes / trials;
    let denom = 1.0 + z * z / trials;
    let centre = (p + z * z / (2.0 * trials)) / denom;
    let half = z * (p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)).sqrt() / denom;
    (centre - half, centre + half)
}

fn within_time(c: &mut Check, start: Instant, limit: Duration) {
    let took = start.elapsed();
    c.expect(took < limit, format!("runtime {took:.2?} < {limit:?}"));
}

fn anscombe_classical() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    for (pair, label) in quartet().iter().zip(LABELS) {
        let res = pearson(pair);
        c.expect(
            (res.r - 0.816).abs() <= 0.002 && (res.p - 0.0022).abs() <= 0.0002,
            format!("{label}: r={:.5} p={:.6}", res.r, res.p),
        );
    }
    within_time(&mut c, start, Duration::from_secs(1));
    c
}

fn sellke_reproduction() -> Check {
    let mut c = Check::new();
    let v = pcal_sellke(0.00217).unwrap();
    c.expect((v - 0.035).abs() <= 0.002, format!("pcal(0.00217)={v:.5}"));
    c
}

fn anscombe_dcal_pattern() -> Check {
    // (r_dcal, p_dcal) from refitting every leave-one-out line explicitly
    const GOLDEN: [(f64, f64); 3] = [
        (0.6264058017192461, 0.0391970944652286),
        (0.5889080820685663, 0.056618299218967195),
        (0.40314503925340783, 0.21891156088566258),
    ];
    let mut c = Check::new();
    let res: Vec<_> = quartet()
        .iter()
        .map(|p| dcal_test(p, 0.05, false, &OosScheme::loo()).unwrap())
        .collect();
    let (a, b, cc, d) = (&res[0], &res[1], &res[2], &res[3]);
    c.expect(a.p_dcal < 0.05, format!("A p_dcal={:.4}", a.p_dcal));
    c.expect((0.05..0.1).contains(&b.p_dcal), format!("B p_dcal={:.4}", b.p_dcal));
    c.expect(cc.p_dcal >= 0.1, format!("C p_dcal={:.4}", cc.p_dcal));
    c.expect(
        a.r_dcal > b.r_dcal && b.r_dcal > cc.r_dcal && cc.r_dcal >= 0.0,
        format!("r_dcal A>B>C>=0 ({:.4}, {:.4}, {:.4})", a.r_dcal, b.r_dcal, cc.r_dcal),
    );
    c.expect(
        d.sign_flip_triggered && d.r_dcal == 0.0 && d.p_dcal == 0.5,
        format!("D flip={} ({}, {})", d.sign_flip_triggered, d.r_dcal, d.p_dcal),
    );
    let golden_ok = res.iter().zip(GOLDEN).all(|(r, (gr, gp))| {
        (r.r_dcal - gr).abs() <= 1e-9 && (r.p_dcal - gp).abs() <= 1e-9 * gp.max(1e-300) + 1e-15
    });
    c.expect(golden_ok, "A-C match refit goldens to 1e-9");
    c
}

fn naive_loo(pred: &[f64], resp: &[f64]) -> Vec<f64> {
    (0..pred.len())
        .map(|i| {
            let p: Vec<f64> = pred.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            let r: Vec<f64> = resp.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            ols_fit(&p, &r).unwrap().predict(pred[i])
        })
        .collect()
}

fn loo_oracle() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for n in [10, 50, 200] {
        for seed in 0..100u64 {
            let rho = (seed % 9) as f64 / 10.0;
            let pair = gen_pair(n, rho, 1000 * n as u64 + seed).unwrap();
            for (pred, resp) in [(pair.x(), pair.y()), (pair.y(), pair.x())] {
                let fast = loo_predictions(pred, resp).unwrap();
                let slow = naive_loo(pred, resp);
                for (f, s) in fast.iter().zip(&slow) {
                    worst = worst.max((f - s).abs() / s.abs().max(1e-300));
                }
            }
            pairs += 1;
        }
    }
    c.expect(worst <= 1e-9, format!("{pairs} pairs, max rel diff {worst:.2e}"));
    within_time(&mut c, start, Duration::from_secs(5));
    c
}

fn null_battery() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let reps = 2000;
    let design = SimDesign::new(DesignKind::NullBattery { m: 1000 }, 50, 5);
    let report = run_battery_experiment(
        &design,
        &methods(&["uncorrected", "holm", "permmax", "dcal"]),
        &opts(reps),
    )
    .unwrap();
    let cell = report.only_cell();
    let stat = |name: &str| cell.method(name.parse().unwrap()).unwrap();
    let unc = stat("uncorrected").fpr.unwrap();
    c.expect((unc - 0.05).abs() <= 0.01, format!("uncorrected FPR {unc:.4}"));
    let dcal = stat("dcal").fpr.unwrap();
    c.expect(dcal < 0.02, format!("dcal FPR {dcal:.4}"));
    for name in ["holm", "permmax"] {
        let fwer = stat(name).fwer.unwrap();
        let (lo, hi) = wilson(fwer * reps as f64, reps as f64);
        c.expect(fwer <= 0.05, format!("{name} FWER {fwer:.4} [{lo:.3}, {hi:.3}] over {reps} reps"));
    }
    within_time(&mut c, start, Duration::from_secs(300));
    c
}

fn power_battery() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let names = ["holm", "bh", "permmax", "dcal", "sellke"];
    let run = |n: usize| {
        let design = SimDesign::new(
            DesignKind::CorrelatedBattery {
                m_true: 100,
                m_null: 900,
                rho: 0.5,
            },
            n,
            6,
        );
        run_battery_experiment(&design, &methods(&names), &opts(20)).unwrap()
    };
    let large = run(200);
    for name in ["dcal", "sellke", "bh"] {
        let tp = large.only_cell().method(name.parse().unwrap()).unwrap().mean_true_rejections;
        c.expect(tp >= 95.0, format!("n=200 {name} {tp:.2}/100"));
    }
    let small = run(50);
    let tp = |name: &str| small.only_cell().method(name.parse().unwrap()).unwrap().mean_true_rejections;
    let bh = tp("bh");
    for name in ["holm", "permmax"] {
        c.expect(tp(name) < bh, format!("n=50 {name} {:.2} < bh {bh:.2}", tp(name)));
    }
    within_time(&mut c, start, Duration::from_secs(600));
    c
}

fn scheme_ranking() -> Check {
    let mut c = Check::new();
    let design = SimDesign::new(DesignKind::NullBattery { m: 1000 }, 50, 2);
    let report = run_oos_comparison(
        &design,
        &[OosScheme::loo(), OosScheme::repeated_kfold(10, 10), OosScheme::boot632(100)],
        &opts(100),
    )
    .unwrap();
    let fpr = |name: &str| report.only_cell().method(name.parse().unwrap()).unwrap().fpr.unwrap();
    let (loo, cv, boot) = (fpr("dcal"), fpr("dcal-cv10x10"), fpr("dcal-boot632"));
    c.expect(cv > loo, format!("cv10x10 FPR {cv:.5} > loo {loo:.5}"));
    c.expect((boot - loo).abs() <= 0.02, format!("boot632 FPR {boot:.5} within 0.02 of loo"));
    c
}

fn conservatism() -> Check {
    let mut c = Check::new();
    let grid = |rho: f64, n: usize| {
        let design = SimDesign::new(
            DesignKind::EffectGrid {
                rhos: vec![rho],
                ns: vec![n],
            },
            n,
            8,
        );
        run_battery_experiment(&design, &methods(&["uncorrected", "dcal", "sellke"]), &opts(500)).unwrap()
    };
    let weak = grid(0.2, 50);
    let mean_p = |r: &dcal_core::simgen::ExperimentReport, name: &str| {
        r.only_cell().method(name.parse().unwrap()).unwrap().mean_p.unwrap()
    };
    let (pd, ps, pr) = (mean_p(&weak, "dcal"), mean_p(&weak, "sellke"), mean_p(&weak, "uncorrected"));
    c.expect(pd > ps && ps > pr, format!("rho=0.2: p_dcal {pd:.4} > sellke {ps:.4} > p {pr:.4}"));
    let strong = grid(0.8, 200);
    let (pd, pr) = (mean_p(&strong, "dcal"), mean_p(&strong, "uncorrected"));
    c.expect((pd - pr).abs() <= 0.01, format!("rho=0.8: |p_dcal - p| = {:.2e}", (pd - pr).abs()));
    let abs_r = strong
        .only_cell()
        .method(Method::dcal())
        .unwrap()
        .mean_abs_estimate
        .unwrap();
    c.expect((abs_r - 0.8).abs() <= 0.05, format!("mean |r_dcal| {abs_r:.4}"));
    c
}

fn outlier_suite() -> Check {
    let mut c = Check::new();
    let names = ["uncorrected", "dcal", "skipped"];
    for rho in [0.3, 0.5] {
        let run = |outlier: OutlierKind| {
            let design = SimDesign::new(
                DesignKind::Contaminated {
                    rho,
                    outlier,
                    fraction: 0.1,
                },
                50,
                9,
            );
            let report = run_battery_experiment(&design, &methods(&names), &opts(200)).unwrap();
            let cell = report.only_cell();
            names.map(|n| {
                let s = cell.method(n.parse().unwrap()).unwrap();
                (s.mean_estimate.unwrap(), s.sensitivity.unwrap(), s.errors)
            })
        };
        let [cl, dc, sk] = run(OutlierKind::univariate());
        c.expect(
            sk.0 > cl.0 && cl.0 > dc.0 && sk.0 < rho,
            format!("rho={rho} univariate r: skipped {:.3} > classical {:.3} > dcal {:.3}, all < rho", sk.0, cl.0, dc.0),
        );
        c.expect(
            sk.1 > cl.1 && cl.1 > dc.1,
            format!("sensitivity {:.3} > {:.3} > {:.3}", sk.1, cl.1, dc.1),
        );
        let [cl, dc, sk] = run(OutlierKind::bivariate());
        c.expect(
            cl.0 > rho && dc.0 > rho && (sk.0 - rho).abs() <= 0.05,
            format!("bivariate r: classical {:.3}, dcal {:.3} > rho; skipped {:.3}", cl.0, dc.0, sk.0),
        );
        c.expect(
            sk.1 < cl.1 && sk.1 < dc.1,
            format!("sensitivity skipped {:.3} < classical {:.3}, dcal {:.3}", sk.1, cl.1, dc.1),
        );
        c.expect(sk.2 == 0, format!("skipped errors {}", sk.2));
    }
    c
}

fn brute_holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    for (k, &i) in order.iter().enumerate() {
        out[i] = (0..=k)
            .map(|j| ((m - j) as f64 * p[order[j]]).min(1.0))
            .fold(0.0, f64::max);
    }
    out
}

fn brute_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    for (k, &i) in order.iter().enumerate() {
        out[i] = (k..m)
            .map(|j| (m as f64 / (j + 1) as f64 * p[order[j]]).min(1.0))
            .fold(1.0, f64::min);
    }
    out
}

fn correction_oracles() -> Check {
    let mut c = Check::new();
    let mut rng = SplitMix64::new(10);
    let (mut exact, mut dominated, mut ordered) = (0, 0, 0);
    let vectors = 1000;
    for v in 0..vectors {
        let m = 1 + rng.below(60);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let u = rng.next_f64();
                // every third vector has heavy ties
                if v % 3 == 0 { (u * 20.0).round() / 20.0 } else { u.powi(3) }
            })
            .collect();
        let (h, b) = (holm_adjust(&p).unwrap(), bh_adjust(&p).unwrap());
        exact += usize::from(h == brute_holm(&p) && b == brute_bh(&p));
        dominated += usize::from(h.iter().zip(&b).all(|(x, y)| x >= y));
        let preserves = |adj: &[f64]| {
            (0..m).all(|i| (0..m).all(|j| p[i] > p[j] || adj[i] <= adj[j]))
        };
        ordered += usize::from(preserves(&h) && preserves(&b));
    }
    c.expect(exact == vectors, format!("exact match {exact}/{vectors}"));
    c.expect(dominated == vectors, format!("holm >= bh {dominated}/{vectors}"));
    c.expect(ordered == vectors, format!("order preserved {ordered}/{vectors}"));
    c
}

fn screening_nesting() -> Check {
    let mut c = Check::new();
    let runs = 20;
    let (mut sizes, mut sets) = (0, 0);
    for run in 0..runs {
        let matrix = synthetic_matrix(200, 100, 900, 0.5, run).unwrap();
        let report = screen(&matrix, "target", &ScreenOptions::default()).unwrap();
        let count = |m: &str| report.count(m).unwrap();
        let (h, d, b) = (count("holm"), count("dcal"), count("bh"));
        sizes += usize::from(h <= d && d <= b);
        sets += usize::from(
            report.overlap("holm", "dcal").unwrap() == h && report.overlap("dcal", "bh").unwrap() == d,
        );
    }
    c.expect(
        sizes as f64 >= 0.9 * runs as f64,
        format!("|holm|<=|dcal|<=|bh| in {sizes}/{runs} runs"),
    );
    c.detail.push_str(&format!("; full set nesting in {sets}/{runs} runs"));
    c
}

fn in_sample_degeneracy() -> Check {
    let mut c = Check::new();
    let mut rng = SplitMix64::new(12);
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let n = 5 + rng.below(200);
        let rho = 1.8 * rng.next_f64() - 0.9;
        let pair = gen_pair(n, rho, seed).unwrap();
        let r = pearson(&pair).r;
        if r == 0.0 {
            continue;
        }
        worst = worst.max((dcal_in_sample_check(&pair).unwrap() - r).abs());
    }
    c.expect(worst <= 1e-10, format!("max |r_in_sample - r| = {worst:.2e}"));
    c
}

fn determinism() -> Check {
    let mut c = Check::new();
    let dir = tempfile::tempdir().unwrap();
    let design = SimDesign::new(
        DesignKind::CorrelatedBattery {
            m_true: 10,
            m_null: 90,
            rho: 0.4,
        },
        40,
        13,
    );
    let methods = methods(&[
        "uncorrected", "holm", "bh", "perm", "permmax", "dcal", "dcal-cv10x10", "dcal-boot632",
        "sellke", "bickel", "ppbf", "skipped",
    ]);
    let matrix = synthetic_matrix(60, 20, 80, 0.4, 13).unwrap();
    let screen_opts = ScreenOptions {
        scheme: OosScheme::repeated_kfold(10, 10).with_seed(3),
        ..ScreenOptions::default()
    };
    let mut files: Vec<Vec<Vec<u8>>> = Vec::new();
    for (k, threads) in [1, 1, 4].into_iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let paths: Vec<_> = ["sim.csv", "sim.json", "screen.csv", "screen.json"]
            .iter()
            .map(|f| dir.path().join(format!("{k}_{f}")))
            .collect();
        pool.install(|| {
            let report = run_battery_experiment(&design, &methods, &opts(6)).unwrap();
            save_reports(&[report], &paths[0], &paths[1]).unwrap();
            let screened = screen(&matrix, "target", &screen_opts).unwrap();
            write_report(&screened, &paths[2], ReportFormat::Csv).unwrap();
            write_report(&screened, &paths[3], ReportFormat::Json).unwrap();
        });
        files.push(paths.iter().map(|p| std::fs::read(p).unwrap()).collect());
    }
    c.expect(files[0] == files[1], "repeat run byte-identical");
    c.expect(files[0] == files[2], "1 vs 4 threads byte-identical");
    c
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("anscombe classical r and p", anscombe_classical),
        ("sellke calibration of p=0.00217", sellke_reproduction),
        ("anscombe dcal pattern and goldens", anscombe_dcal_pattern),
        ("leverage LOO equals refit LOO", loo_oracle),
        ("null battery error rates", null_battery),
        ("power battery detections", power_battery),
        ("out-of-sample scheme ranking", scheme_ranking),
        ("conservatism ordering", conservatism),
        ("outlier suite", outlier_suite),
        ("holm and bh oracles", correction_oracles),
        ("screening nesting", screening_nesting),
        ("in-sample calibration equals r", in_sample_degeneracy),
        ("determinism across runs and threads", determinism),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Check {
                pass: false,
                detail: format!("panicked: {msg}"),
            }
        });
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {:>2} {} {title} [{:.1?}] {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
