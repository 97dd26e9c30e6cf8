//! Radial mollifier families built from a generator `f` and a volume profile `V`:
//!
//! ```text
//! ρ̃_n(t) = a_n f'(V(t)) / f(V(t))^{a_n + 1}
//! ```
//!
//! with the closed-form tail mass `∫_δ^∞ S(t) ρ̃_n(t) dt = f(V(δ))^{-a_n}`, which
//! also gives an exact inverse-CDF sampler for the radial law `S ρ̃_n`.
//! All evaluation happens in log space, in terms of `ln V`, so that heavy tails
//! at small `a_n` stay representable.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::volume_profiles::{log_grid, VolumeProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `f(s) = s^α`
    Power { alpha: f64 },
    /// `f(s) = e^s`
    Exp,
    /// `f(s) = ln s`, defined for `s > 1`
    Log,
}

impl Generator {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return invalid(format!("power generator needs alpha > 0, got {alpha}"));
        }
        Ok(Generator::Power { alpha })
    }

    /// Lower end of the generator domain, as a value of `V`.
    pub fn domain_floor_in_v(&self) -> f64 {
        match self {
            Generator::Log => 1.0,
            _ => 0.0,
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => s.powf(alpha),
            Generator::Exp => s.exp(),
            Generator::Log => s.ln(),
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => alpha * s.powf(alpha - 1.0),
            Generator::Exp => s.exp(),
            Generator::Log => 1.0 / s,
        }
    }

    pub fn f_inverse(&self, y: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => y.powf(1.0 / alpha),
            Generator::Exp => y.ln(),
            Generator::Log => y.exp(),
        }
    }

    /// `ln f(e^w)`; NaN or `-inf` outside the domain.
    pub fn ln_f_of_ln(&self, w: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => alpha * w,
            Generator::Exp => w.exp(),
            Generator::Log => w.ln(),
        }
    }

    /// `ln f'(e^w)`.
    pub fn ln_fprime_of_ln(&self, w: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => alpha.ln() + (alpha - 1.0) * w,
            Generator::Exp => w.exp(),
            Generator::Log => -w,
        }
    }

    /// `f''/f'` at `s`.
    pub fn psi(&self, s: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => (alpha - 1.0) / s,
            Generator::Exp => 1.0,
            Generator::Log => -1.0 / s,
        }
    }

    /// `ln s` for the `s` with `ln f(s) = l`.
    pub fn ln_inverse_of_ln_f(&self, l: f64) -> f64 {
        match *self {
            Generator::Power { alpha } => l / alpha,
            Generator::Exp => l.ln(),
            Generator::Log => l.exp(),
        }
    }

    fn check_grid(&self) -> Vec<f64> {
        let base = log_grid(1e-6, 1e6, 121);
        match self {
            Generator::Log => base.into_iter().map(|s| 1.0 + s).collect(),
            _ => base,
        }
    }

    fn ln_s(&self, s: f64) -> f64 {
        match self {
            Generator::Log => (s - 1.0).ln_1p(),
            _ => s.ln(),
        }
    }
}

/// How the sequence `a_n` was specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LadderMode {
    Explicit,
    /// `a_n = s_n · p`
    STimesP { p: f64, s: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    pub a: Vec<f64>,
    pub mode: LadderMode,
}

/// Default `s` ladder, geometric with ratio 1/2.
pub const DEFAULT_S_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

impl Ladder {
    pub fn explicit(a: Vec<f64>) -> Self {
        Self { a, mode: LadderMode::Explicit }
    }

    pub fn s_times_p(s: Vec<f64>, p: f64) -> Self {
        let a = s.iter().map(|s| s * p).collect();
        Self { a, mode: LadderMode::STimesP { p, s } }
    }

    pub fn default_for(p: f64) -> Self {
        Self::s_times_p(DEFAULT_S_LADDER.to_vec(), p)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Positive and strictly decreasing.
    pub fn is_valid(&self) -> bool {
        !self.a.is_empty() && self.a.iter().all(|&a| a > 0.0 && a.is_finite()) && self.a.windows(2).all(|w| w[1] < w[0])
    }
}

/// Generator + profile + ladder.
#[derive(Debug, Clone)]
pub struct MollifierFamily {
    generator: Generator,
    profile: VolumeProfile,
    ladder: Ladder,
    floor_t: f64,
}

/// Builds a family after checking the ladder and the generator/profile domains.
pub fn make_family(generator: Generator, profile: VolumeProfile, ladder: Ladder) -> Result<MollifierFamily> {
    if !ladder.is_valid() {
        return invalid("a_n ladder must be positive and strictly decreasing");
    }
    if generator == Generator::Log {
        let reach = [1e3, 1e6, 1e12].iter().map(|&t| profile.eval(t)).fold(0.0f64, f64::max);
        if !(reach > 1.0) {
            return invalid("log generator needs a profile whose range exceeds 1");
        }
    }
    Ok(MollifierFamily::unchecked(generator, profile, ladder))
}

impl MollifierFamily {
    /// Builds a family without validating the ladder; used to report on
    /// deliberately broken ladders.
    pub fn unchecked(generator: Generator, profile: VolumeProfile, ladder: Ladder) -> Self {
        let floor_v = generator.domain_floor_in_v();
        let floor_t = if floor_v > 0.0 { profile.inverse(floor_v) } else { profile.domain_floor() };
        Self { generator, profile, ladder, floor_t }
    }

    /// The standard fractional family on `ℝ^N`: `f(s) = s^{1/N}`, `V = t^N`,
    /// `a = s·p`, i.e. `ρ̃(t) = s p / (N t^{N + s p})`.
    pub fn standard(n: u32, p: f64, s: Vec<f64>) -> Result<Self> {
        let profile = crate::volume_profiles::make_power_profile(n)?;
        make_family(Generator::power(1.0 / n as f64)?, profile, Ladder::s_times_p(s, p))
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn profile(&self) -> &VolumeProfile {
        &self.profile
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn len(&self) -> usize {
        self.ladder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ladder.is_empty()
    }

    /// Distances below this carry no mass (`V^{-1}(1)` for the log generator).
    pub fn domain_floor(&self) -> f64 {
        self.floor_t
    }

    pub fn level(&self, n: usize) -> Mollifier<'_> {
        Mollifier { family: self, a: self.ladder.a[n] }
    }

    /// A single mollifier at an arbitrary `a > 0`.
    pub fn at(&self, a: f64) -> Mollifier<'_> {
        Mollifier { family: self, a }
    }
}

/// One member `ρ̃_n` of a family.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier<'a> {
    family: &'a MollifierFamily,
    a: f64,
}

impl<'a> Mollifier<'a> {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn family(&self) -> &'a MollifierFamily {
        self.family
    }

    /// `ln ρ̃` as a function of `w = ln V`.
    pub fn ln_rho_from_ln_v(&self, w: f64) -> f64 {
        let g = self.family.generator;
        let a = self.a;
        match g {
            Generator::Power { alpha } => a.ln() + alpha.ln() - (alpha * a + 1.0) * w,
            Generator::Exp => a.ln() - a * w.exp(),
            Generator::Log => {
                if w <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    a.ln() - w - (a + 1.0) * w.ln()
                }
            }
        }
    }

    pub fn ln_rho(&self, t: f64) -> f64 {
        if t <= self.family.floor_t {
            return f64::NEG_INFINITY;
        }
        self.ln_rho_from_ln_v(self.family.profile.ln_eval(t))
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.ln_rho(t).exp()
    }

    /// `dρ̃/dt`.
    pub fn rho_deriv(&self, t: f64) -> f64 {
        let rho = self.rho(t);
        if rho == 0.0 {
            return 0.0;
        }
        let g = self.family.generator;
        let profile = &self.family.profile;
        let w = profile.ln_eval(t);
        let v = w.exp();
        let fp_over_f = (g.ln_fprime_of_ln(w) - g.ln_f_of_ln(w)).exp();
        rho * profile.deriv(t) * (g.psi(v) - (self.a + 1.0) * fp_over_f)
    }

    /// `ln f(V(t))`.
    fn ln_f_at(&self, t: f64) -> f64 {
        self.family.generator.ln_f_of_ln(self.family.profile.ln_eval(t))
    }

    /// `ln T(δ)`, `+inf` in the degenerate region.
    pub fn ln_tail(&self, delta: f64) -> f64 {
        let l = self.ln_f_at(delta);
        if l.is_nan() || l == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            -self.a * l
        }
    }

    /// `T(δ) = ∫_δ^∞ S ρ̃ = f(V(δ))^{-a}`.
    pub fn tail_mass(&self, delta: f64) -> Result<f64> {
        let l = self.ln_f_at(delta);
        if l.is_nan() || l == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("f(V({delta})) <= 0")));
        }
        Ok((-self.a * l).exp())
    }

    /// Like [`tail_mass`](Self::tail_mass) but `+inf` where the tail diverges.
    pub fn tail_or_inf(&self, delta: f64) -> f64 {
        self.ln_tail(delta).exp()
    }

    /// The radius `r` with `ln T(r) = ln_y`.
    pub fn radius_from_ln_tail(&self, ln_y: f64) -> f64 {
        let l = -ln_y / self.a;
        let g = self.family.generator;
        if g == Generator::Exp && l <= 0.0 {
            return 0.0;
        }
        let w = g.ln_inverse_of_ln_f(l);
        self.family.profile.inverse_from_ln(w)
    }

    /// Inverse-CDF draw from the law `S ρ̃ / T(δ_min)` on `[δ_min, ∞)`.
    pub fn sample_radius(&self, delta_min: f64, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return invalid(format!("uniform variate must lie in (0,1), got {q}"));
        }
        let lt = self.ln_tail(delta_min);
        if !lt.is_finite() {
            return Err(Error::Domain(format!("tail mass at {delta_min} is not finite")));
        }
        Ok(self.radius_from_ln_tail(q.ln() + lt).max(delta_min))
    }

    /// Draw from `S ρ̃` restricted to `[lo, hi]` (both with finite tail mass).
    pub fn sample_radius_in_band(&self, lo: f64, hi: f64, q: f64) -> f64 {
        let t_lo = self.tail_or_inf(lo);
        let t_hi = self.tail_or_inf(hi);
        let y = t_hi + q * (t_lo - t_hi);
        self.radius_from_ln_tail(y.ln()).clamp(lo, hi)
    }
}

/// Grid checks of the generator conditions.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorDiagnostics {
    pub generator: Generator,
    pub positive_increasing: bool,
    pub unbounded: bool,
    /// `(r, s f'(s)/f(s)^r` at the grid end, decaying)
    pub decay: Vec<(f64, f64, bool)>,
    /// `(r, f'/f^r strictly decreasing)`
    pub ratio_decreasing: Vec<(f64, bool)>,
    pub pass: bool,
}

pub const SAMPLED_R: [f64; 3] = [1.1, 1.5, 2.0];

/// `ln g` decays: strictly decreasing over the last quarter of the grid, and
/// either negligible or with a negative log-log slope at the end.
fn decays(ln_s: &[f64], ln_g: &[f64]) -> bool {
    let n = ln_g.len();
    if n < 4 || ln_g.iter().any(|v| v.is_nan()) {
        return false;
    }
    let tail = &ln_g[3 * n / 4..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0] || w[1] == f64::NEG_INFINITY);
    let last = ln_g[n - 1];
    let slope = (ln_g[n - 1] - ln_g[n - 2]) / (ln_s[n - 1] - ln_s[n - 2]);
    decreasing && (last < (1e-12f64).ln() || slope < 0.0)
}

pub fn check_generator(generator: Generator) -> GeneratorDiagnostics {
    let grid = generator.check_grid();
    let ln_s: Vec<f64> = grid.iter().map(|&s| generator.ln_s(s)).collect();
    let ln_f: Vec<f64> = ln_s.iter().map(|&w| generator.ln_f_of_ln(w)).collect();
    let ln_fp: Vec<f64> = ln_s.iter().map(|&w| generator.ln_fprime_of_ln(w)).collect();
    let positive_increasing = ln_f.iter().all(|v| v.is_finite()) && ln_f.windows(2).all(|w| w[1] > w[0]);
    let unbounded = positive_increasing && *ln_f.last().unwrap() > 10f64.ln();
    let mut decay = Vec::new();
    let mut ratio_decreasing = Vec::new();
    for r in SAMPLED_R {
        let ln_ratio: Vec<f64> = ln_fp.iter().zip(&ln_f).map(|(fp, f)| fp - r * f).collect();
        let ln_g: Vec<f64> = ln_ratio.iter().zip(&ln_s).map(|(q, s)| q + s).collect();
        decay.push((r, ln_g.last().unwrap().exp(), decays(&ln_s, &ln_g)));
        ratio_decreasing.push((r, ln_ratio.windows(2).all(|w| w[1] < w[0])));
    }
    let pass = positive_increasing && unbounded && decay.iter().all(|d| d.2) && ratio_decreasing.iter().all(|d| d.1);
    GeneratorDiagnostics { generator, positive_increasing, unbounded, decay, ratio_decreasing, pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub a_n: f64,
    pub r: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailLimit {
    pub r: f64,
    /// `lim_n T_n(R)` from a log-affine fit in `a_n`.
    pub limit_n: f64,
    pub finest: f64,
    pub sup_n: f64,
    pub inf_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifierReport {
    pub generator: GeneratorDiagnostics,
    pub ladder_valid: bool,
    /// levels `n` whose `ρ̃_n` fails to decrease on the grid
    pub non_decreasing_levels: Vec<usize>,
    /// pairs `(n, m)`, `n > m`, whose ratio fails to be non-decreasing
    pub monotonicity_failures: Vec<(usize, usize)>,
    pub max_ratio_identity_residual: f64,
    /// levels where `ρ̃_n V` does not decay along the grid
    pub radial_decay_failures: Vec<usize>,
    pub pointwise_limit_ok: bool,
    pub tails: Vec<TailRow>,
    pub tail_limits: Vec<TailLimit>,
    pub iterated_tail_limit: f64,
    pub approximation_of_identity_ok: bool,
    pub pass: bool,
}

pub const TAIL_LIMIT_TOL: f64 = 1e-3;
const SHAPE_TOL: f64 = 1e-12;

/// Least-squares intercept and slope of `y` against `x`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// `lim_{a→0}` of a positive quantity that is log-affine in `a`.
pub fn log_affine_limit(a: &[f64], values: &[f64]) -> f64 {
    if values.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    if values.iter().any(|&v| !(v > 0.0)) || a.len() < 2 {
        return *values.last().unwrap_or(&f64::NAN);
    }
    let ln: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    affine_fit(a, &ln).0.exp()
}

/// Grid verification of the radial-type conditions for a family.
pub fn verify_family(family: &MollifierFamily, t_grid: &[f64], n_pairs: &[(usize, usize)], r_ladder: &[f64]) -> MollifierReport {
    let generator = check_generator(family.generator());
    let ladder_valid = family.ladder().is_valid();
    let floor = family.domain_floor();
    let grid: Vec<f64> = t_grid.iter().copied().filter(|&t| t > floor).collect();
    let profile = family.profile();
    let ln_v: Vec<f64> = grid.iter().map(|&t| profile.ln_eval(t)).collect();
    let ln_rho: Vec<Vec<f64>> = (0..family.len()).map(|n| ln_v.iter().map(|&w| family.level(n).ln_rho_from_ln_v(w)).collect()).collect();

    let non_decreasing_levels: Vec<usize> = (0..family.len())
        .filter(|&n| ln_rho[n].windows(2).any(|w| !(w[1] <= w[0] + SHAPE_TOL * w[0].abs().max(1.0)) || w[1] == w[0] && w[0].is_infinite()))
        .collect();

    let mut monotonicity_failures = Vec::new();
    let mut max_ratio_identity_residual = 0.0f64;
    let g = family.generator();
    for &(n, m) in n_pairs {
        if n >= family.len() || m >= family.len() || n <= m {
            continue;
        }
        let (an, am) = (family.ladder().a[n], family.ladder().a[m]);
        let ratio: Vec<f64> = ln_rho[n].iter().zip(&ln_rho[m]).map(|(x, y)| x - y).collect();
        if ratio.windows(2).any(|w| w[1] < w[0] - SHAPE_TOL * w[0].abs().max(1.0)) {
            monotonicity_failures.push((n, m));
        }
        for (i, &w) in ln_v.iter().enumerate() {
            let expected = (an / am).ln() + (am - an) * g.ln_f_of_ln(w);
            let resid = (ratio[i] - expected).exp_m1().abs();
            if resid.is_finite() {
                max_ratio_identity_residual = max_ratio_identity_residual.max(resid);
            }
        }
    }

    let ln_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let radial_decay_failures: Vec<usize> = (0..family.len())
        .filter(|&n| {
            let ln_rv: Vec<f64> = ln_rho[n].iter().zip(&ln_v).map(|(r, v)| r + v).collect();
            !decays(&ln_t, &ln_rv)
        })
        .collect();

    // ρ̃_n(t) = a_n · f'/f^{a_n+1}, and the second factor has a finite a→0 limit
    let a = &family.ladder().a;
    let pointwise_limit_ok = ladder_valid
        && (0..grid.len()).all(|i| {
            let scaled: Vec<f64> = (0..family.len()).map(|n| (ln_rho[n][i] - a[n].ln()).exp()).collect();
            log_affine_limit(a, &scaled).is_finite()
        });

    let mut tails = Vec::new();
    let mut tail_limits = Vec::new();
    for &r in r_ladder {
        let ln_values: Vec<f64> = (0..family.len()).map(|n| family.level(n).ln_tail(r)).collect();
        let values: Vec<f64> = ln_values.iter().map(|v| v.exp()).collect();
        for (n, &tail) in values.iter().enumerate() {
            tails.push(TailRow { n, a_n: a[n], r, tail });
        }
        let limit_n = if ln_values.iter().all(|v| v.is_finite()) && a.len() >= 2 {
            affine_fit(a, &ln_values).0.exp()
        } else {
            f64::NAN
        };
        let sup_n = values.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(limit_n);
        let inf_n = values.iter().copied().fold(f64::INFINITY, f64::min).min(limit_n);
        tail_limits.push(TailLimit { r, limit_n, finest: *values.last().unwrap_or(&f64::NAN), sup_n, inf_n });
    }
    let iterated_tail_limit = tail_limits.last().map(|t| t.limit_n).unwrap_or(f64::NAN);
    let approximation_of_identity_ok = (iterated_tail_limit - 1.0).abs() <= TAIL_LIMIT_TOL;

    let pass = generator.pass
        && ladder_valid
        && non_decreasing_levels.is_empty()
        && monotonicity_failures.is_empty()
        && radial_decay_failures.is_empty()
        && pointwise_limit_ok
        && approximation_of_identity_ok;
    MollifierReport {
        generator,
        ladder_valid,
        non_decreasing_levels,
        monotonicity_failures,
        max_ratio_identity_residual,
        radial_decay_failures,
        pointwise_limit_ok,
        tails,
        tail_limits,
        iterated_tail_limit,
        approximation_of_identity_ok,
        pass,
    }
}

/// All ordered pairs `(n, m)` with `n > m`.
pub fn all_pairs(len: usize) -> Vec<(usize, usize)> {
    (0..len).flat_map(|n| (0..n).map(move |m| (n, m))).collect()
}
