//! End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero exit
//! if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nonlocal_core::mollifiers::{make_family, Generator, Ladder};
use nonlocal_core::spaces::{make_heisenberg, mc_ball_volume, HEISENBERG_UNIT_BALL_EXACT};
use nonlocal_core::volume_profiles::log_grid;
use nonlocal_core::{make_hyperbolic_profile, make_power_profile};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

struct Run {
    code: i32,
    elapsed: Duration,
    dir: PathBuf,
}

impl Run {
    fn report(&self) -> Value {
        let text = std::fs::read_to_string(self.dir.join("report.json")).expect("report.json");
        serde_json::from_str(&text).expect("valid json")
    }

    fn report_bytes(&self) -> Vec<u8> {
        std::fs::read(self.dir.join("report.json")).expect("report.json")
    }
}

fn nonlocal(root: &Path, label: &str, cmd: &str, cfg: &str, extra: &[&str]) -> Run {
    let dir = root.join(label);
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_nonlocal"))
        .arg(cmd)
        .arg("--config")
        .arg(config(cfg))
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .output()
        .expect("spawn nonlocal");
    Run {
        code: out.status.code().unwrap_or(-1),
        elapsed: start.elapsed(),
        dir,
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn ladder(report: &Value) -> Vec<(f64, f64, f64)> {
    report["ladder"].as_array().map(|l| l.iter().map(|p| (f(&p["a_n"]), f(&p["e_n"]), f(&p["stderr"]))).collect()).unwrap_or_default()
}

fn limit(report: &Value) -> (f64, f64) {
    let l = &report["extrapolation"]["limit"];
    (f(&l["value"]), f(&l["uncertainty"]))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Line scenario: each level against `closed(a)` within 0.5%, the limit
/// against `target` within 1%, the grid oracle against the closed form.
fn line_scenario(run: &Run, closed: impl Fn(f64) -> f64, target: f64, p: f64) -> Outcome {
    let r = run.report();
    let lad = ladder(&r);
    let checked: Vec<&(f64, f64, f64)> = lad.iter().filter(|(a, _, _)| *a >= 0.025 * p * (1.0 - 1e-12)).collect();
    let worst = checked.iter().map(|(a, e, _)| (e / closed(*a) - 1.0).abs()).fold(0.0, f64::max);
    let (l, _) = limit(&r);
    let dev = (l / target - 1.0).abs();

    let space = nonlocal_core::spaces::make_euclidean(1).unwrap();
    let u = nonlocal_core::energy::TestFunction::new(nonlocal_core::energy::TestKind::BallIndicator, vec![0.5], 0.5, p).unwrap();
    let fam = nonlocal_core::MollifierFamily::standard(1, p, vec![0.2, 0.1, 0.05, 0.025]).unwrap();
    let grid_worst = (0..fam.len())
        .map(|n| {
            let m = fam.level(n);
            let g = support::grid_energy_1d(&space, &u, &m, -0.5, 1.5, 10_000, 4, false);
            (g / (4.0 / (1.0 - m.a())) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let pass = run.code == 0 && checked.len() == 4 && worst < 5e-3 && dev < 1e-2 && grid_worst < 5e-3 && run.elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!("ladder max rel {worst:.1e}, limit {l:.5} (dev {:.3}%), grid oracle max rel {grid_worst:.1e}, {:.1}s", 100.0 * dev, run.elapsed.as_secs_f64()),
    )
}

fn criterion7() -> Outcome {
    let v2 = make_power_profile(2).unwrap();
    let hyp = make_hyperbolic_profile(-1.0, 3).unwrap();
    // ten combinations per generator
    let cases = vec![
        (Generator::power(0.5).unwrap(), v2.clone(), vec![1.0, 0.1, 0.01], vec![1e-2, 1.0, 1e2]),
        (Generator::power(1.0).unwrap(), hyp.clone(), vec![0.1], vec![2.0]),
        (Generator::Exp, v2.clone(), vec![1.0, 0.1, 0.01], vec![1e-2, 1.0, 1e2]),
        (Generator::Exp, hyp, vec![0.1], vec![0.5]),
        (Generator::Log, v2.clone(), vec![2.0, 1.0, 0.75], vec![1.5, 10.0, 1e3]),
        (Generator::Log, v2, vec![0.75], vec![1.01]),
    ];
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for (g, profile, a, deltas) in cases {
        let fam = make_family(g, profile, Ladder::explicit(a)).unwrap();
        for n in 0..fam.len() {
            let m = fam.level(n);
            for &d in &deltas {
                let q = support::tail_by_quadrature(&m, d);
                worst = worst.max((q - m.tail_mass(d).unwrap()).abs());
                count += 1;
            }
        }
    }
    outcome(count == 30 && worst < 1e-8, format!("{count} combinations, max |quadrature − closed form| {worst:.1e}"))
}

fn criterion8(run: &Run) -> Outcome {
    let mut rdr = csv::Reader::from_path(run.dir.join("decomposition.csv")).expect("decomposition.csv");
    let rows: Vec<(usize, f64, f64, f64, f64)> = rdr
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|row| {
            let row = row.expect("row");
            let g = |k: &str| row[k].parse::<f64>().expect("number");
            (g("n") as usize, g("r"), g("i"), g("ii"), g("partition_residual"))
        })
        .collect();
    let max_residual = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    let at10: Vec<f64> = rows.iter().filter(|r| r.1 == 10.0).map(|r| r.2).collect();
    let i_decreasing = at10.len() >= 2 && at10.windows(2).all(|w| w[1] < w[0]);
    // 2 L ‖u‖₁ with L = 𝔪(B_r)/r = 2 on the line
    let scale = 2.0 * 2.0 * 1.0;
    let finest = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let ratios: Vec<(f64, f64)> = rows.iter().filter(|r| r.0 == finest).map(|r| (r.1, r.3 / scale)).collect();
    let in_band = !ratios.is_empty() && ratios.iter().all(|(_, q)| (0.9..=1.1).contains(q));

    // Monte Carlo batches on ℝ²
    let space = nonlocal_core::spaces::make_euclidean(2).unwrap();
    let u = nonlocal_core::energy::TestFunction::new(nonlocal_core::energy::TestKind::SmoothBump, vec![0.0, 0.0], 1.0, 2.0).unwrap();
    let fam = nonlocal_core::MollifierFamily::standard(2, 2.0, vec![0.1]).unwrap();
    let opts = nonlocal_core::energy::EnergyOptions {
        method: nonlocal_core::energy::Method::MonteCarlo,
        samples: 200_000,
        seed: Some(3),
        ..Default::default()
    };
    let d = nonlocal_core::energy::decompose_energy(&space, &u, &fam, 0, 2.0, &[0.0, 0.0], &opts).expect("decomposition");
    let pass = run.code == 0 && max_residual <= 1e-12 && d.partition_residual <= 1e-12 && i_decreasing && in_band;
    outcome(
        pass,
        format!(
            "residual {max_residual:.1e} (quadrature) {:.1e} (MC), I at R=10 {at10:.3?}, II/(2L‖u‖) at finest n {ratios:.3?}",
            d.partition_residual
        ),
    )
}

fn criterion6(run: &Run) -> Outcome {
    let h = make_heisenberg();
    let radii = log_grid(1.0, 10.0, 5);
    let centers = [vec![0.0, 0.0, 0.0], vec![1.5, -2.0, 0.7], vec![-3.0, 0.5, -4.0]];
    let mut ratios = Vec::new();
    for (i, x) in centers.iter().enumerate() {
        for (j, &r) in radii.iter().enumerate() {
            let m = mc_ball_volume(&h, x, r, 4_000_000, 1000 + (i * 10 + j) as u64, None);
            ratios.push(m.value / r.powi(4));
        }
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = hi / lo - 1.0;
    let c_k = HEISENBERG_UNIT_BALL_EXACT;
    let r = run.report();
    let (l, _) = limit(&r);
    let target = 2.0 * c_k * c_k;
    let dev = (l / target - 1.0).abs();
    let pass = spread <= 0.02 && run.code == 0 && dev <= 0.10 && run.elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "𝔪(B_r)/r⁴ in [{lo:.4}, {hi:.4}] (spread {:.2}%, c_K = {c_k:.4}), limit {l:.4} vs 2c_K² = {target:.4} (dev {:.2}%), {:.1}s",
            100.0 * spread,
            100.0 * dev,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = tmp.path();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    // (label, limit, uncertainty, rcd bound, tolerance, euclidean)
    let mut rcd: Vec<(String, f64, f64, Option<f64>, f64, bool)> = Vec::new();
    let mut collect_rcd = |label: &str, run: &Run, euclidean: bool| {
        let r = run.report();
        if r["verdict"]["pass"].as_bool() == Some(true) {
            let (l, u) = limit(&r);
            let bound = r["prediction"]["rcd_bound"]["value"].as_f64();
            rcd.push((label.to_string(), l, u, bound, f(&r["verdict"]["tolerance"]), euclidean));
        }
    };

    let c1 = nonlocal(root, "c1", "ms-limit", "euclidean1_p1", &[]);
    results.push((1, line_scenario(&c1, |a| 4.0 / (1.0 - a), 4.0, 1.0)));
    collect_rcd("line p=1", &c1, true);

    let c2 = nonlocal(root, "c2", "ms-limit", "euclidean1_p2", &[]);
    results.push((2, line_scenario(&c2, |a| 2.0 / (1.0 - a), 2.0, 2.0)));
    collect_rcd("line p=2", &c2, true);

    let c3 = nonlocal(root, "c3", "ms-limit", "warped_t2", &[]);
    let c3avr = nonlocal(root, "c3avr", "avr", "warped_t2", &[]);
    {
        let (l, _) = limit(&c3.report());
        let a = c3avr.report();
        let exact2 = |v: &Value| f(&v["value"]) == 2.0 && v["provenance"] == "exact";
        let pass = c3.code == 0 && (l / 4.0 - 1.0).abs() < 0.02 && c3avr.code == 0 && exact2(&a["avr"]) && exact2(&a["density"]);
        results.push((3, outcome(pass, format!("limit {l:.5}, AVR {} density {}", a["avr"]["value"], a["density"]["value"]))));
    }
    collect_rcd("warped t²", &c3, false);

    let c4 = nonlocal(root, "c4", "ms-limit", "circle_arc", &[]);
    {
        let r = c4.report();
        let lad = ladder(&r);
        let decreasing = lad.windows(2).all(|w| w[1].1 < w[0].1);
        let (l, _) = limit(&r);
        results.push((4, outcome(c4.code == 0 && decreasing && l.abs() <= 0.05, format!("ladder strictly decreasing: {decreasing}, limit {l:.4}"))));
    }

    let c5 = nonlocal(root, "c5", "ms-limit", "euclidean2_bump_mc", &[]);
    {
        let r = c5.report();
        let (l, _) = limit(&r);
        let pred = f(&r["prediction"]["value"]["value"]);
        let norm2 = support::bump_norm2();
        let pred_ok = (pred / (2.0 * std::f64::consts::PI * norm2) - 1.0).abs() < 1e-6;
        let dev = (l / pred - 1.0).abs();
        let (a0, e0, se0) = ladder(&r)[0];
        let oracle = support::bump_energy_2d(a0);
        let sigmas = (e0 - oracle).abs() / se0;
        let pass = c5.code == 0 && pred_ok && dev <= 0.05 && sigmas <= 3.0 && c5.elapsed < Duration::from_secs(300);
        results.push((
            5,
            outcome(
                pass,
                format!(
                    "limit {l:.4} vs predicted {pred:.4} (dev {:.2}%), coarsest {e0:.4} ± {se0:.4} vs oracle {oracle:.4} ({sigmas:.2}σ), {:.1}s",
                    100.0 * dev,
                    c5.elapsed.as_secs_f64()
                ),
            ),
        ));
    }
    collect_rcd("ℝ² bump", &c5, true);

    let c6 = nonlocal(root, "c6", "ms-limit", "heisenberg_indicator", &[]);
    results.push((6, criterion6(&c6)));
    collect_rcd("Heisenberg", &c6, false);

    results.push((7, criterion7()));

    let c8 = nonlocal(root, "c8", "decompose", "euclidean1_p1", &[]);
    results.push((8, criterion8(&c8)));

    let c9 = nonlocal(root, "c9", "verify", "euclidean2_standard", &[]);
    {
        let a = &c9.report()["validators"]["assumption1"]["report"];
        let it = f(&a["n_then_r"]);
        let sup: Vec<f64> = a["sup_over_centers"].as_array().map(|v| v.iter().map(|c| f(&c[1])).collect()).unwrap_or_default();
        let finite = !sup.is_empty() && sup.iter().all(|c| c.is_finite());
        let non_increasing = sup.windows(2).all(|w| w[1] <= w[0]);
        let dev = (it / std::f64::consts::PI - 1.0).abs();
        let pass = c9.code == 0 && dev <= 0.01 && finite && non_increasing;
        results.push((9, outcome(pass, format!("iterated limit {it:.6} (dev {dev:.1e}), C(R) {sup:.4?}"))));
    }

    {
        let mut lines = Vec::new();
        let mut pass = !rcd.is_empty();
        for (label, l, u, bound, tol, euclidean) in &rcd {
            match bound {
                Some(b) => {
                    let below = *l <= b + u;
                    let equal = !euclidean || (l - b).abs() <= tol * b + u;
                    pass &= below && equal;
                    lines.push(format!("{label}: {l:.4} ≤ {b:.4} + {u:.1e}{}", if *euclidean { " (equality)" } else { "" }));
                }
                None => lines.push(format!("{label}: no bound")),
            }
        }
        pass &= rcd.iter().filter(|r| r.3.is_some()).count() >= 4;
        results.push((10, outcome(pass, lines.join("; "))));
    }

    {
        let mut same = true;
        let mut checked = Vec::new();
        for (cmd, cfg, samples) in [("ms-limit", "euclidean2_bump_mc", "100000"), ("ms-limit", "heisenberg_indicator", "200000"), ("verify", "euclidean2_standard", "100000")] {
            let one = nonlocal(root, &format!("c11-{cfg}-1"), cmd, cfg, &["--samples", samples, "--workers", "1"]);
            let three = nonlocal(root, &format!("c11-{cfg}-3"), cmd, cfg, &["--samples", samples, "--workers", "3"]);
            let again = nonlocal(root, &format!("c11-{cfg}-1b"), cmd, cfg, &["--samples", samples, "--workers", "1"]);
            same &= one.report_bytes() == three.report_bytes() && one.report_bytes() == again.report_bytes();
            checked.push(format!("{cmd} {cfg} exit {}/{}", one.code, three.code));
        }
        results.push((11, outcome(same, format!("report.json byte-identical across --workers 1/3 and reruns: {}", checked.join(", ")))));
    }

    let mut failed = 0;
    for (id, o) in &results {
        println!("criterion {id:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
