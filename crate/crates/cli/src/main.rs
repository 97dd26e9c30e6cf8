mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonlocal_core::asymptotics::{check_ms, decomposition_table, validate_assumption1, Assumption1Report, RegionACheck};
use nonlocal_core::mollifiers::{all_pairs, verify_family, MollifierFamily, MollifierReport};
use nonlocal_core::rng;
use nonlocal_core::spaces::{check_bgi, check_volume_bound, estimate_avr, estimate_density, BgiReport, MetricMeasureSpace, VolumeBoundReport};
use nonlocal_core::volume_profiles::{check_profile, log_grid, ProfileDiagnostics, VolumeProfile};
use nonlocal_core::{Error, Measured, Provenance};
use serde::Serialize;

use config::ExperimentConfig;
use report::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Core(Error::InvalidParameter(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "nonlocal", about = "Limits of nonlocal energies on metric measure spaces", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// overrides estimator.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// overrides estimator.samples
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// worker threads (results do not depend on it)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// run ms-limit without the validator chain
    #[arg(long, global = true)]
    skip_validate: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// profile, family, volume and Assumption-1 validators
    Verify,
    /// energy ladder, extrapolated limit and predicted constant
    MsLimit,
    /// split of the energy into the regions I, II, III over (n, R)
    Decompose,
    /// volume ratios, AVR and density
    Avr,
    /// tail masses of the mollifiers over (R, n) and centres
    TailTable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = config::load(path)?;
    if let Some(s) = cli.seed {
        cfg.estimator.seed = Some(s);
    }
    if let Some(n) = cli.samples {
        cfg.estimator.samples = n;
    }
    if cfg.uses_monte_carlo() {
        cfg.require_seed()?;
    }
    let space = cfg.space.build()?;
    let out = Output::new(&cli.out)?;
    match cli.command {
        Command::Verify => verify(&cfg, space.as_ref(), cli, &out),
        Command::MsLimit => ms_limit(&cfg, space.as_ref(), cli, &out),
        Command::Decompose => decompose(&cfg, space.as_ref(), cli, &out),
        Command::Avr => avr(&cfg, space.as_ref(), &out),
        Command::TailTable => tail_table(&cfg, space.as_ref(), cli, &out),
    }
}

#[derive(Serialize)]
struct Verdict {
    pass: bool,
    line: String,
}

fn verdict(pass: bool, line: String) -> Verdict {
    println!("{line}");
    Verdict { pass, line }
}

#[derive(Serialize)]
struct TailCsvRow {
    r: f64,
    n: usize,
    a_n: f64,
    center: usize,
    tail: f64,
    uncertainty: f64,
    provenance: Provenance,
}

#[derive(Serialize)]
struct Assumption1Section {
    report: Assumption1Report,
    centers: Vec<Vec<f64>>,
    limit_tolerance: f64,
    pass: bool,
}

fn centers(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace) -> Vec<Vec<f64>> {
    let seed = cfg.estimator.seed.unwrap_or(0);
    let mut out = vec![space.base_point()];
    for i in 1..cfg.tails.centers.max(1) {
        let mut s = rng::stream(seed, rng::tags::CENTERS, i as u64);
        let mut x = vec![0.0; space.chart_dim()];
        space.random_point(&mut s, &mut x);
        out.push(x);
    }
    out
}

fn assumption1(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, family: &MollifierFamily, cli: &Cli) -> Result<Assumption1Section, CliError> {
    let centers = centers(cfg, space);
    let levels: Vec<usize> = (0..family.len()).collect();
    let u = match (&cfg.test_function, cfg.tails.region_a_r) {
        (Some(_), Some(_)) => Some(cfg.test_function()?),
        _ => None,
    };
    let region_a = match (&u, cfg.tails.region_a_r) {
        (Some(u), Some(r)) => Some(RegionACheck { u, r, opts: cfg.energy_options(cli.workers) }),
        _ => None,
    };
    let report = validate_assumption1(space, family, &centers, &cfg.tails.r, &levels, region_a)?;
    let tol = cfg.tails.limit_tolerance;
    let limit_ok = report.deviation_from_avr.is_some_and(|d| d <= tol);
    let pass = limit_ok && report.c_bounded && report.c_non_increasing && report.center_spread <= 3.0 && report.region_a_decays != Some(false);
    Ok(Assumption1Section { report, centers, limit_tolerance: tol, pass })
}

fn tail_rows(a: &Assumption1Report) -> Vec<TailCsvRow> {
    a.tails
        .iter()
        .map(|t| TailCsvRow { r: t.r, n: t.n, a_n: t.a_n, center: t.center, tail: t.tail.value, uncertainty: t.tail.uncertainty, provenance: t.tail.provenance })
        .collect()
}

fn profile_grid(v: &VolumeProfile) -> Vec<f64> {
    let lo = (v.domain_floor() * 10.0).max(1e-3);
    log_grid(lo, lo * 1e6, 25)
}

fn bgi(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, v: &VolumeProfile) -> Result<Option<BgiReport>, CliError> {
    if space.diameter().is_finite() {
        return Ok(None);
    }
    Ok(Some(check_bgi(space, v, &log_grid(cfg.avr.r_min, cfg.avr.r_max, cfg.avr.points))?))
}

fn volume_bound(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, v: &VolumeProfile) -> Result<VolumeBoundReport, CliError> {
    let lo = cfg.avr.r_min.max(1.0);
    let hi = cfg.avr.r_max.max(lo * 1e3);
    Ok(check_volume_bound(space, v, &log_grid(lo, hi, 10), cfg.avr.centers, cfg.estimator.seed.unwrap_or(0))?)
}

#[derive(Serialize)]
struct VerifyValidators {
    profile: ProfileDiagnostics,
    family: MollifierReport,
    /// `null` when waived for a finite-diameter space
    bgi: Option<BgiReport>,
    volume_bound: VolumeBoundReport,
    assumption1: Assumption1Section,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    scenario: &'a ExperimentConfig,
    validators: VerifyValidators,
    verdict: Verdict,
}

fn verify(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, cli: &Cli, out: &Output) -> Result<bool, CliError> {
    let v = cfg.profile()?;
    let family = cfg.family_unchecked()?;
    let profile = check_profile(&v, &profile_grid(&v))?;
    let t_lo = (family.domain_floor() * 1.01).max(1e-3);
    let fam = verify_family(&family, &log_grid(t_lo, t_lo * 1e9, 40), &all_pairs(family.len()), &[1.0, 10.0, 100.0, 1000.0]);
    let bgi = bgi(cfg, space, &v)?;
    let vb = volume_bound(cfg, space, &v)?;
    let a1 = assumption1(cfg, space, &family, cli)?;
    let checks = [
        ("profile", profile.pass),
        ("family", fam.pass),
        ("bgi", bgi.as_ref().is_none_or(|b| b.pass)),
        ("volume bound", vb.bounded),
        ("assumption 1", a1.pass),
    ];
    let pass = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let line = if pass { "verify PASS".to_string() } else { format!("verify FAIL: {}", failed.join(", ")) };
    out.csv("tails.csv", &tail_rows(&a1.report))?;
    let verdict = verdict(pass, line);
    out.json("report.json", &VerifyReport { scenario: cfg, validators: VerifyValidators { profile, family: fam, bgi, volume_bound: vb, assumption1: a1 }, verdict })?;
    Ok(pass)
}

#[derive(Serialize)]
struct LadderCsvRow {
    a_n: f64,
    #[serde(rename = "E_n")]
    e_n: f64,
    stderr: f64,
    quad_error: f64,
    near_bias: f64,
    r0: f64,
    provenance: Provenance,
    predicted: f64,
}

#[derive(Serialize)]
struct MsReport<'a> {
    scenario: &'a ExperimentConfig,
    validators: Option<nonlocal_core::asymptotics::ValidatorSummary>,
    ladder: Vec<nonlocal_core::asymptotics::LadderPoint>,
    r0: Vec<f64>,
    extrapolation: nonlocal_core::asymptotics::Extrapolation,
    prediction: nonlocal_core::asymptotics::Prediction,
    verdict: MsVerdict,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct MsVerdict {
    pass: bool,
    line: String,
    relative_deviation: Option<f64>,
    tolerance: f64,
    absolute_floor: f64,
    within_rcd_bound: Option<bool>,
}

fn ms_limit(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, cli: &Cli, out: &Output) -> Result<bool, CliError> {
    let family = cfg.family()?;
    let u = cfg.test_function()?;
    let rep = check_ms(space, &u, &family, &cfg.ms_options(cli.workers, !cli.skip_validate))?;
    let predicted = rep.prediction.value.value;
    let rows: Vec<LadderCsvRow> = rep
        .ladder
        .iter()
        .zip(&rep.r0)
        .map(|(p, r0)| LadderCsvRow { a_n: p.a_n, e_n: p.e_n, stderr: p.stderr, quad_error: p.quad_error, near_bias: p.near_bias, r0: *r0, provenance: p.provenance, predicted })
        .collect();
    out.csv("ladder.csv", &rows)?;
    let line = rep.verdict_line();
    println!("{line}");
    let pass = rep.pass;
    out.json(
        "report.json",
        &MsReport {
            scenario: cfg,
            validators: rep.validators,
            ladder: rep.ladder,
            r0: rep.r0,
            extrapolation: rep.extrapolation,
            prediction: rep.prediction,
            verdict: MsVerdict {
                pass,
                line,
                relative_deviation: rep.relative_deviation,
                tolerance: rep.tolerance,
                absolute_floor: rep.absolute_floor,
                within_rcd_bound: rep.within_rcd_bound,
            },
            notes: rep.notes,
        },
    )?;
    Ok(pass)
}

#[derive(Serialize)]
struct DecompositionCsvRow {
    n: usize,
    a_n: f64,
    r: f64,
    i: f64,
    ii: f64,
    iii: f64,
    total: f64,
    total_uncertainty: f64,
    partition_residual: f64,
    provenance: Provenance,
}

#[derive(Serialize)]
struct DecomposeReport<'a> {
    scenario: &'a ExperimentConfig,
    rows: Vec<nonlocal_core::asymptotics::DecompositionRow>,
    verdict: Verdict,
}

fn decompose(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, cli: &Cli, out: &Output) -> Result<bool, CliError> {
    let family = cfg.family()?;
    let u = cfg.test_function()?;
    let rows = decomposition_table(space, &u, &family, &cfg.decompose.r, &cfg.energy_options(cli.workers))?;
    let csv: Vec<DecompositionCsvRow> = rows
        .iter()
        .map(|d| DecompositionCsvRow {
            n: d.n,
            a_n: d.a_n,
            r: d.r,
            i: d.i.value,
            ii: d.ii.value,
            iii: d.iii.value,
            total: d.total.value,
            total_uncertainty: d.total.uncertainty,
            partition_residual: d.partition_residual,
            provenance: d.total.provenance,
        })
        .collect();
    out.csv("decomposition.csv", &csv)?;
    let worst = rows.iter().map(|d| d.partition_residual).fold(0.0, f64::max);
    let pass = worst <= 1e-12;
    let verdict = verdict(pass, format!("decompose: {} cells, max partition residual {worst:.1e} {}", rows.len(), if pass { "PASS" } else { "FAIL" }));
    out.json("report.json", &DecomposeReport { scenario: cfg, rows, verdict })?;
    Ok(pass)
}

#[derive(Serialize)]
struct VolumeCsvRow {
    r: f64,
    volume: f64,
    uncertainty: f64,
    provenance: Provenance,
    v: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct AvrReport<'a> {
    scenario: &'a ExperimentConfig,
    avr: Measured,
    density: Measured,
    bgi: Option<BgiReport>,
    volume_bound: VolumeBoundReport,
    verdict: Verdict,
}

fn avr(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, out: &Output) -> Result<bool, CliError> {
    let v = cfg.profile()?;
    let grid = log_grid(cfg.avr.r_min, cfg.avr.r_max, cfg.avr.points);
    let x0 = space.base_point();
    let rows: Vec<VolumeCsvRow> = grid
        .iter()
        .map(|&r| {
            let m = space.ball_volume(&x0, r);
            VolumeCsvRow { r, volume: m.value, uncertainty: m.uncertainty, provenance: m.provenance, v: v.eval(r), ratio: m.value / v.eval(r) }
        })
        .collect();
    out.csv("volumes.csv", &rows)?;
    let avr = estimate_avr(space, &v, &grid)?;
    let down: Vec<f64> = log_grid(cfg.avr.r_min * 1e-3, cfg.avr.r_min, 5).into_iter().rev().collect();
    let density = estimate_density(space, &v, &x0, &down)?;
    let bgi = bgi(cfg, space, &v)?;
    let vb = volume_bound(cfg, space, &v)?;
    let pass = bgi.as_ref().is_none_or(|b| b.pass) && vb.bounded;
    let verdict = verdict(
        pass,
        format!("AVR {:.6} ± {:.1e} density {:.6} {}", avr.value, avr.uncertainty, density.value, if pass { "PASS" } else { "FAIL" }),
    );
    out.json("report.json", &AvrReport { scenario: cfg, avr, density, bgi, volume_bound: vb, verdict })?;
    Ok(pass)
}

#[derive(Serialize)]
struct TailReport<'a> {
    scenario: &'a ExperimentConfig,
    assumption1: Assumption1Section,
    verdict: Verdict,
}

fn tail_table(cfg: &ExperimentConfig, space: &dyn MetricMeasureSpace, cli: &Cli, out: &Output) -> Result<bool, CliError> {
    let family = cfg.family()?;
    let a1 = assumption1(cfg, space, &family, cli)?;
    out.csv("tails.csv", &tail_rows(&a1.report))?;
    let pass = a1.pass;
    let verdict = verdict(
        pass,
        format!(
            "tail limit {:.6} (AVR {}) C(R) bounded {} non-increasing {} {}",
            a1.report.n_then_r,
            a1.report.avr.map_or("n/a".to_string(), |a| format!("{:.6}", a.value)),
            a1.report.c_bounded,
            a1.report.c_non_increasing,
            if pass { "PASS" } else { "FAIL" }
        ),
    );
    out.json("report.json", &TailReport { scenario: cfg, assumption1: a1, verdict })?;
    Ok(pass)
}
