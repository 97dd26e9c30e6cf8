//! The `a_n`-ladder driver: energies along the ladder, extrapolation to
//! `a → 0`, the predicted constant `2L‖u‖_p^p`, and the Assumption-1 tables.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{decompose_energy, estimate_energy, norm_p_pow, EnergyEstimate, EnergyOptions, Method, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::measured::{Measured, Provenance};
use crate::mollifiers::{all_pairs, log_affine_limit, verify_family, Generator, MollifierFamily};
use crate::spaces::{check_bgi, check_volume_bound, estimate_avr, tail_mollifier_mass, unit_ball_volume, MetricMeasureSpace};
use crate::volume_profiles::{check_profile, log_grid};

/// Relative agreement required between the coarsest-level estimate and its
/// rerun at reduced resolution, in units of the combined uncertainty.
const STABILITY_SIGMAS: f64 = 5.0;

/// Energies for every ladder level. The coarsest level is computed first and
/// must be finite and stable; a divergent coarsest level is reported as a
/// hypothesis violation.
pub fn run_ladder(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, opts: &EnergyOptions) -> Result<Vec<EnergyEstimate>> {
    if family.is_empty() {
        return invalid("empty ladder");
    }
    if !family.ladder().is_valid() {
        return invalid("a_n ladder must be positive and strictly decreasing");
    }
    let coarse = estimate_energy(space, u, family, 0, opts).map_err(coarsest_error)?;
    check_stability(space, u, family, opts, &coarse)?;

    let levels: Vec<usize> = (1..family.len()).collect();
    let rest: Vec<Result<EnergyEstimate>> = if opts.workers == Some(1) {
        levels.iter().map(|&n| estimate_energy(space, u, family, n, opts)).collect()
    } else {
        levels.par_iter().map(|&n| estimate_energy(space, u, family, n, opts)).collect()
    };
    let mut out = vec![coarse];
    for r in rest {
        out.push(r?);
    }
    Ok(out)
}

fn coarsest_error(e: Error) -> Error {
    match e {
        Error::Divergent(msg) | Error::NonFinite(msg) => {
            Error::HypothesisViolation(format!("energy at the coarsest level is not finite ({msg}); u lies outside the finite-energy class"))
        }
        other => other,
    }
}

/// Reruns the coarsest level at a quarter of the samples (Monte Carlo) or a
/// hundredfold looser tolerance (quadrature) and compares.
fn check_stability(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, opts: &EnergyOptions, coarse: &EnergyEstimate) -> Result<()> {
    if !coarse.value.is_finite() {
        return Err(coarsest_error(Error::NonFinite("coarsest level".into())));
    }
    let rerun_opts = match coarse.provenance {
        Provenance::MonteCarlo => EnergyOptions { samples: (opts.samples / 4).max(1024), seed: opts.seed.map(|s| s ^ 0x5354_4142), ..*opts },
        _ => EnergyOptions { method: Method::Quadrature, tol: (opts.tol * 100.0).min(1e-3), ..*opts },
    };
    let rerun = estimate_energy(space, u, family, 0, &rerun_opts).map_err(coarsest_error)?;
    let spread = coarse.uncertainty() + rerun.uncertainty();
    let diff = (coarse.value - rerun.value).abs();
    let tol = if coarse.provenance == Provenance::MonteCarlo { STABILITY_SIGMAS * spread } else { spread + 1e-6 * coarse.value.abs() };
    if diff > tol {
        return Err(Error::HypothesisViolation(format!(
            "coarsest-level energy is unstable under refinement: {} vs {} (allowed {tol:.3e})",
            coarse.value, rerun.value
        )));
    }
    if coarse.provenance == Provenance::Quadrature && !coarse.params.converged {
        return Err(Error::HypothesisViolation("coarsest-level quadrature did not converge; the energy may be infinite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Affine,
    Quadratic,
    /// quadratic with at least five points, affine otherwise
    Auto,
}

impl Model {
    fn resolve(self, points: usize) -> Model {
        match self {
            Model::Auto if points >= 5 => Model::Quadratic,
            Model::Auto => Model::Affine,
            m => m,
        }
    }

    fn degree(self) -> usize {
        match self {
            Model::Affine => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub a_n: f64,
    pub e_n: f64,
    /// statistical standard error (0 for quadrature)
    pub stderr: f64,
    /// quadrature error estimate
    pub quad_error: f64,
    pub near_bias: f64,
    pub provenance: Provenance,
}

impl LadderPoint {
    pub fn from_estimate(e: &EnergyEstimate) -> Self {
        Self {
            a_n: e.params.a_n,
            e_n: e.value,
            stderr: e.stat_stderr,
            quad_error: e.quad_error,
            near_bias: e.deterministic_bias_bound,
            provenance: e.provenance,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self { e_n: self.e_n * k, stderr: self.stderr * k, quad_error: self.quad_error * k, near_bias: self.near_bias * k, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolation {
    pub model: Model,
    /// polynomial coefficients in `a`, constant term first
    pub coefficients: Vec<f64>,
    pub limit: Measured,
    pub fit_stderr: f64,
    /// `|intercept − intercept without the coarsest level|`
    pub truncation: f64,
    pub weighted: bool,
    pub chi2_per_dof: Option<f64>,
}

/// Weighted least-squares polynomial fit of `E_n` against `a_n`; the limit is
/// the intercept.
pub fn extrapolate(ladder: &[LadderPoint], model: Model) -> Result<Extrapolation> {
    if ladder.len() < 3 {
        return invalid(format!("extrapolation needs at least 3 ladder points, got {}", ladder.len()));
    }
    if ladder.windows(2).any(|w| !(w[1].a_n < w[0].a_n)) || ladder.iter().any(|p| !(p.a_n > 0.0)) {
        return invalid("ladder must be positive and strictly decreasing in a_n");
    }
    if ladder.iter().any(|p| !p.e_n.is_finite()) {
        return Err(Error::NonFinite("ladder energy".into()));
    }
    let model = model.resolve(ladder.len());
    let k = model.degree() + 1;
    let fit = fit(ladder, k)?;
    // intercept shift when the coarsest level is dropped, while a degree of
    // freedom remains
    let truncation = if ladder.len() > k + 1 { (fit.beta[0] - self::fit(&ladder[1..], k)?.beta[0]).abs() } else { 0.0 };
    let bias = ladder.iter().map(|p| p.near_bias + p.quad_error).fold(0.0, f64::max);
    Ok(Extrapolation {
        model,
        limit: Measured::extrapolated(fit.beta[0], fit.stderr + truncation + bias),
        coefficients: fit.beta,
        fit_stderr: fit.stderr,
        truncation,
        weighted: fit.weighted,
        chi2_per_dof: fit.chi2_per_dof,
    })
}

struct Fit {
    beta: Vec<f64>,
    stderr: f64,
    weighted: bool,
    chi2_per_dof: Option<f64>,
}

fn fit(ladder: &[LadderPoint], k: usize) -> Result<Fit> {
    let n = ladder.len();
    let weighted = ladder.iter().all(|p| p.stderr > 0.0);
    let w: Vec<f64> = ladder.iter().map(|p| if weighted { 1.0 / (p.stderr * p.stderr) } else { 1.0 }).collect();
    let x = DMatrix::from_fn(n, k, |i, j| ladder[i].a_n.powi(j as i32));
    let y = DVector::from_iterator(n, ladder.iter().map(|p| p.e_n));
    let wm = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
    let xtw = x.transpose() * &wm;
    let normal = &xtw * &x;
    let inv = match normal.try_inverse() {
        Some(m) => m,
        None => return invalid("ill-conditioned extrapolation design"),
    };
    let beta = &inv * (&xtw * &y);
    let resid = &y - &x * &beta;
    let chi2: f64 = resid.iter().zip(&w).map(|(r, w)| r * r * w).sum();
    let dof = n - k;
    let chi2_per_dof = (dof > 0).then(|| chi2 / dof as f64);
    let var0 = if weighted {
        inv[(0, 0)] * chi2_per_dof.unwrap_or(1.0).max(1.0)
    } else {
        inv[(0, 0)] * chi2_per_dof.unwrap_or(0.0)
    };
    Ok(Fit { beta: beta.iter().copied().collect(), stderr: var0.max(0.0).sqrt(), weighted, chi2_per_dof })
}

/// How `E_n` carries the ladder parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `a_n` inside the mollifier, as in `E_n`
    Mollifier,
    /// power family with the factor `s` outside the kernel: `E_n/(αp)`
    SOutside,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub normalization: Normalization,
    pub avr: Measured,
    pub norm_p_pow: Measured,
    /// factor converting `E_n` into the requested normalization
    pub scale: f64,
    pub value: Measured,
    /// `(2Nω_N/p)‖u‖_p^p` in the requested normalization, for non-collapsed
    /// `N`-homogeneous spaces and the matching power family
    pub rcd_bound: Option<Measured>,
}

/// `1/(αp)` for the power family, the factor taking `E_n` to the s-outside
/// normalization.
pub fn s_outside_scale(family: &MollifierFamily, p: f64) -> Result<f64> {
    match family.generator() {
        Generator::Power { alpha } => Ok(1.0 / (alpha * p)),
        g => invalid(format!("s-outside normalization needs a power generator, got {g:?}")),
    }
}

/// `2·AVR^V·‖u‖_p^p`, converted to the requested normalization.
pub fn predict_limit(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, normalization: Normalization) -> Result<Prediction> {
    let v = family.profile();
    let avr = match space.exact_avr() {
        Some(a) if v.same_function(&space.natural_profile()) => a,
        _ => estimate_avr(space, v, &log_grid(1.0, 1e6, 13)).map_err(|e| Error::Unavailable(format!("asymptotic volume ratio: {e}")))?,
    };
    if !avr.value.is_finite() {
        return Err(Error::Unavailable("asymptotic volume ratio is not finite".into()));
    }
    let norm = norm_p_pow(space, u);
    let scale = match normalization {
        Normalization::Mollifier => 1.0,
        Normalization::SOutside => s_outside_scale(family, u.p)?,
    };
    let value = 2.0 * avr.value * norm.value * scale;
    let unc = 2.0 * scale * (avr.uncertainty * norm.value + avr.value * norm.uncertainty);
    let provenance = if avr.is_exact() && norm.is_exact() { Provenance::Exact } else { worst(avr.provenance, norm.provenance) };
    let rcd_bound = rcd_bound(space, u, family, norm, normalization)?;
    Ok(Prediction { normalization, avr, norm_p_pow: norm, scale, value: Measured { value, uncertainty: unc, provenance }, rcd_bound })
}

fn worst(a: Provenance, b: Provenance) -> Provenance {
    let rank = |p: Provenance| match p {
        Provenance::Exact => 0,
        Provenance::Quadrature => 1,
        Provenance::Extrapolated => 2,
        Provenance::MonteCarlo => 3,
    };
    if rank(a) >= rank(b) {
        a
    } else {
        b
    }
}

fn rcd_bound(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, norm: Measured, normalization: Normalization) -> Result<Option<Measured>> {
    let Some(n) = space.rcd_dimension() else { return Ok(None) };
    let alpha = match family.generator() {
        Generator::Power { alpha } => alpha,
        _ => return Ok(None),
    };
    if family.profile().power_exponent() != Some(n) {
        return Ok(None);
    }
    let s_bound = 2.0 * n as f64 * unit_ball_volume(n) / u.p;
    let factor = match normalization {
        Normalization::SOutside => s_bound,
        Normalization::Mollifier => s_bound * alpha * u.p,
    };
    Ok(Some(norm.scale(factor)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidatorSummary {
    pub profile_pass: bool,
    pub family_pass: bool,
    /// `None` when waived for a finite-diameter space
    pub bgi_pass: Option<bool>,
    pub volume_bound_k: f64,
    pub volume_bounded: bool,
    pub pass: bool,
}

/// Profile, family, BGI and volume-bound checks on default grids.
pub fn validator_chain(space: &dyn MetricMeasureSpace, family: &MollifierFamily, seed: u64) -> Result<ValidatorSummary> {
    let v = family.profile();
    let lo = (v.domain_floor() * 10.0).max(1e-3);
    let profile = check_profile(v, &log_grid(lo, lo * 1e6, 25))?;
    let t_lo = (family.domain_floor() * 1.01).max(1e-3);
    let fam = verify_family(family, &log_grid(t_lo, t_lo * 1e9, 40), &all_pairs(family.len()), &[1.0, 10.0, 100.0, 1000.0]);
    let bgi_pass = if space.diameter().is_finite() { None } else { Some(check_bgi(space, v, &log_grid(1e-2, 1e3, 16))?.pass) };
    let vb = check_volume_bound(space, v, &log_grid(1.0, 1e3, 10), 16, seed)?;
    let pass = profile.pass && fam.pass && bgi_pass.unwrap_or(true) && vb.bounded;
    Ok(ValidatorSummary { profile_pass: profile.pass, family_pass: fam.pass, bgi_pass, volume_bound_k: vb.k, volume_bounded: vb.bounded, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsOptions {
    pub energy: EnergyOptions,
    pub model: Model,
    /// relative tolerance of the verdict
    pub tolerance: f64,
    /// verdict bound on `|limit|` when the prediction is 0
    pub absolute_floor: f64,
    pub normalization: Normalization,
    pub validate: bool,
}

impl Default for MsOptions {
    fn default() -> Self {
        Self {
            energy: EnergyOptions::default(),
            model: Model::Auto,
            tolerance: 0.05,
            absolute_floor: 0.05,
            normalization: Normalization::Mollifier,
            validate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub validators: Option<ValidatorSummary>,
    pub normalization: Normalization,
    pub ladder: Vec<LadderPoint>,
    pub r0: Vec<f64>,
    pub extrapolation: Extrapolation,
    pub prediction: Prediction,
    /// `|limit − predicted| / predicted`; `None` when the prediction is 0
    pub relative_deviation: Option<f64>,
    pub tolerance: f64,
    pub absolute_floor: f64,
    /// `limit ≤ rcd_bound + uncertainty`, when the bound applies
    pub within_rcd_bound: Option<bool>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl AsymptoticReport {
    pub fn verdict_line(&self) -> String {
        let dev = match self.relative_deviation {
            Some(d) => format!("dev {:.1}%", 100.0 * d),
            None => format!("|limit| {:.3} floor {}", self.extrapolation.limit.value.abs(), self.absolute_floor),
        };
        format!(
            "limit {:.2} predicted {:.2} {dev} {}",
            self.extrapolation.limit.value,
            self.prediction.value.value,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// `run_ladder` + `extrapolate` + `predict_limit` with the verdict.
pub fn check_ms(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, opts: &MsOptions) -> Result<AsymptoticReport> {
    if !(opts.tolerance >= 0.0 && opts.absolute_floor >= 0.0) {
        return invalid("tolerances must be non-negative");
    }
    let validators = if opts.validate {
        let v = validator_chain(space, family, opts.energy.seed.unwrap_or(0))?;
        if !v.pass {
            return Err(Error::HypothesisViolation(format!("validator chain failed: {v:?}")));
        }
        Some(v)
    } else {
        None
    };
    let prediction = predict_limit(space, u, family, opts.normalization)?;
    let energies = run_ladder(space, u, family, &opts.energy)?;
    let ladder: Vec<LadderPoint> = energies.iter().map(|e| LadderPoint::from_estimate(e).scale(prediction.scale)).collect();
    let extrapolation = extrapolate(&ladder, opts.model)?;
    let limit = extrapolation.limit;
    let pred = prediction.value;
    let (relative_deviation, pass) = if pred.value == 0.0 {
        (None, limit.value.abs() <= opts.absolute_floor)
    } else {
        let diff = (limit.value - pred.value).abs();
        (Some(diff / pred.value.abs()), diff <= opts.tolerance * pred.value.abs() + limit.uncertainty + pred.uncertainty)
    };
    let within_rcd_bound = prediction.rcd_bound.map(|b| limit.value <= b.value + b.uncertainty + limit.uncertainty);
    let mut notes = vec!["finiteness is checked at the coarsest ladder level only".to_string()];
    if family.generator() == Generator::Log {
        notes.push("log generator: pairs with V(d) <= 1 carry no weight".into());
    }
    notes.extend(space.notes());
    Ok(AsymptoticReport {
        validators,
        normalization: opts.normalization,
        r0: energies.iter().map(|e| e.params.r0).collect(),
        ladder,
        extrapolation,
        prediction,
        relative_deviation,
        tolerance: opts.tolerance,
        absolute_floor: opts.absolute_floor,
        within_rcd_bound,
        pass,
        notes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCell {
    pub r: f64,
    pub n: usize,
    pub a_n: f64,
    pub center: usize,
    pub tail: Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionARow {
    pub n: usize,
    pub a_n: f64,
    pub region_a: Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assumption1Report {
    pub tails: Vec<TailCell>,
    /// `(R, lim_n T_n(R))` at the first centre
    pub limit_in_n: Vec<(f64, f64)>,
    /// `lim_R lim_n`, read at the largest `R`
    pub n_then_r: f64,
    /// `lim_n lim_R`, read at the finest level and largest `R`
    pub r_then_n: f64,
    pub avr: Option<Measured>,
    pub deviation_from_avr: Option<f64>,
    /// largest spread of a tail value across centres, in units of its uncertainty
    pub center_spread: f64,
    /// `(R, sup_{x, n} T_n(R, x))`
    pub sup_over_centers: Vec<(f64, f64)>,
    pub c_bounded: bool,
    pub c_non_increasing: bool,
    pub region_a_r: Option<f64>,
    pub region_a: Vec<RegionARow>,
    pub region_a_decays: Option<bool>,
}

/// A fixed-`R` region-A check for [`validate_assumption1`].
#[derive(Debug, Clone)]
pub struct RegionACheck<'a> {
    pub u: &'a TestFunction,
    pub r: f64,
    pub opts: EnergyOptions,
}

/// Tabulates the tail masses over `(R, n)` and centres, both iterated limits,
/// `C(R)`, and optionally the decay of the region-A energy at fixed `R`.
pub fn validate_assumption1(
    space: &dyn MetricMeasureSpace,
    family: &MollifierFamily,
    centers: &[Vec<f64>],
    r_ladder: &[f64],
    n_ladder: &[usize],
    region_a: Option<RegionACheck<'_>>,
) -> Result<Assumption1Report> {
    if centers.is_empty() || r_ladder.len() < 2 || n_ladder.len() < 2 {
        return invalid("need at least one centre, two radii and two levels");
    }
    if r_ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("R ladder must be strictly increasing");
    }
    if n_ladder.windows(2).any(|w| !(w[1] > w[0])) || n_ladder.iter().any(|&n| n >= family.len()) {
        return invalid("level ladder must be strictly increasing and within the family");
    }
    let mut tails = Vec::new();
    for &r in r_ladder {
        for &n in n_ladder {
            for (c, x) in centers.iter().enumerate() {
                let tail = tail_mollifier_mass(space, family, n, x, r)?;
                tails.push(TailCell { r, n, a_n: family.level(n).a(), center: c, tail });
            }
        }
    }
    let cell = |r: f64, n: usize, c: usize| tails.iter().find(|t| t.r == r && t.n == n && t.center == c).map(|t| t.tail).expect("tabulated");
    let a: Vec<f64> = n_ladder.iter().map(|&n| family.level(n).a()).collect();
    let limit_in_n: Vec<(f64, f64)> = r_ladder
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = n_ladder.iter().map(|&n| cell(r, n, 0).value).collect();
            (r, log_affine_limit(&a, &vals))
        })
        .collect();
    let n_then_r = limit_in_n.last().expect("non-empty").1;
    let r_then_n = cell(*r_ladder.last().expect("non-empty"), *n_ladder.last().expect("non-empty"), 0).value;

    let avr = match space.exact_avr() {
        Some(a) if family.profile().same_function(&space.natural_profile()) => Some(a),
        _ => estimate_avr(space, family.profile(), &log_grid(1.0, 1e6, 13)).ok(),
    };
    let deviation_from_avr = avr.map(|a| if a.value == 0.0 { n_then_r.abs() } else { (n_then_r - a.value).abs() / a.value });

    let mut center_spread: f64 = 0.0;
    for &r in r_ladder {
        for &n in n_ladder {
            let base = cell(r, n, 0);
            for c in 1..centers.len() {
                let t = cell(r, n, c);
                let scale = base.uncertainty + t.uncertainty;
                let d = (t.value - base.value).abs();
                let s = if d == 0.0 { 0.0 } else if scale > 0.0 { d / scale } else { f64::INFINITY };
                center_spread = center_spread.max(s);
            }
        }
    }
    let sup_over_centers: Vec<(f64, f64)> = r_ladder
        .iter()
        .map(|&r| (r, tails.iter().filter(|t| t.r == r).map(|t| t.tail.value).fold(0.0, f64::max)))
        .collect();
    let c_bounded = sup_over_centers.iter().all(|(_, c)| c.is_finite());
    let c_non_increasing = sup_over_centers.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12));

    let (region_a_r, rows, region_a_decays) = match region_a {
        None => (None, Vec::new(), None),
        Some(chk) => {
            let x0 = space.base_point();
            let mut rows = Vec::new();
            for &n in n_ladder {
                let d = decompose_energy(space, chk.u, family, n, chk.r, &x0, &chk.opts)?;
                rows.push(RegionARow { n, a_n: family.level(n).a(), region_a: d.i });
            }
            let decays = rows.windows(2).all(|w| w[1].region_a.value <= w[0].region_a.value + w[0].region_a.uncertainty + w[1].region_a.uncertainty);
            (Some(chk.r), rows, Some(decays))
        }
    };

    Ok(Assumption1Report {
        tails,
        limit_in_n,
        n_then_r,
        r_then_n,
        avr,
        deviation_from_avr,
        center_spread,
        sup_over_centers,
        c_bounded,
        c_non_increasing,
        region_a_r,
        region_a: rows,
        region_a_decays,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionRow {
    pub n: usize,
    pub a_n: f64,
    pub r: f64,
    pub i: Measured,
    pub ii: Measured,
    pub iii: Measured,
    pub total: Measured,
    pub partition_residual: f64,
}

/// `I`, `II`, `III` over the `(n, R)` grid at the base point.
pub fn decomposition_table(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, r_ladder: &[f64], opts: &EnergyOptions) -> Result<Vec<DecompositionRow>> {
    let x0 = space.base_point();
    let cells: Vec<(usize, f64)> = (0..family.len()).flat_map(|n| r_ladder.iter().map(move |&r| (n, r))).collect();
    let run = |&(n, r): &(usize, f64)| -> Result<DecompositionRow> {
        let d = decompose_energy(space, u, family, n, r, &x0, opts)?;
        Ok(DecompositionRow { n, a_n: family.level(n).a(), r, i: d.i, ii: d.ii, iii: d.iii, total: d.total, partition_residual: d.partition_residual })
    };
    let rows: Vec<Result<DecompositionRow>> = if opts.workers == Some(1) { cells.iter().map(run).collect() } else { cells.par_iter().map(run).collect() };
    rows.into_iter().collect()
}
