//! Nonlocal energies `E_n(u) = ∬ |u(x) − u(y)|^p ρ̃_n(d(x, y)) d𝔪(x) d𝔪(y)`.
//!
//! The integrand vanishes unless `x` or `y` lies in the support `S` of `u`,
//! and the kernel is symmetric, so
//!
//! ```text
//! E = ∫_{x∈S} ∫_X (1 + 1_{y∉S}) |u(x) − u(y)|^p ρ̃(d(x, y)) d𝔪(y) d𝔪(x).
//! ```
//!
//! The same identity holds on each of the proof regions A, B, C, which are
//! symmetric in `(x, y)`. Both estimators parametrize `y` by `r = d(x, y)`.

mod monte_carlo;
mod quadrature;

pub use monte_carlo::energy_mc;
pub use quadrature::energy_quadrature_1d;

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measured::{Measured, Provenance};
use crate::mollifiers::{Mollifier, MollifierFamily};
use crate::quad::{integrate_scalar, QuadOptions};
use crate::radial::radial_integral;
use crate::spaces::MetricMeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    BallIndicator,
    Tent,
    SmoothBump,
}

/// `u(y) = φ(d(y, c)/ρ)` for a radial shape `φ` supported in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub center: Vec<f64>,
    pub radius: f64,
    pub p: f64,
}

fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// `max |φ'|` for the smooth bump, from a dense grid refined by golden search.
fn bump_lipschitz() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let d = |t: f64| {
            let s = 1.0 - t * t;
            bump(t) * 2.0 * t / (s * s)
        };
        let n = 20_000;
        let (mut best, mut arg) = (0.0, 0.0);
        for i in 1..n {
            let t = i as f64 / n as f64;
            if d(t) > best {
                best = d(t);
                arg = t;
            }
        }
        let (mut a, mut b) = (arg - 1.0 / n as f64, arg + 1.0 / n as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if d(c) > d(e) {
                b = e;
            } else {
                a = c;
            }
        }
        d(0.5 * (a + b)) * (1.0 + 1e-9)
    })
}

impl TestFunction {
    pub fn new(kind: TestKind, center: Vec<f64>, radius: f64, p: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("support radius must be positive and finite, got {radius}"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return invalid(format!("p must be >= 1, got {p}"));
        }
        Ok(Self { kind, center, radius, p })
    }

    /// Radial shape `φ(t)`.
    pub fn shape(&self, t: f64) -> f64 {
        match self.kind {
            TestKind::BallIndicator => {
                if t < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestKind::Tent => (1.0 - t).max(0.0),
            TestKind::SmoothBump => bump(t),
        }
    }

    pub fn eval(&self, space: &dyn MetricMeasureSpace, y: &[f64]) -> f64 {
        if y.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        self.shape(space.distance(y, &self.center) / self.radius)
    }

    pub fn in_support(&self, space: &dyn MetricMeasureSpace, y: &[f64]) -> bool {
        y.iter().all(|v| v.is_finite()) && space.distance(y, &self.center) < self.radius
    }

    /// Lipschitz constant of `u` with respect to `d`, if continuous.
    pub fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            TestKind::BallIndicator => None,
            TestKind::Tent => Some(1.0 / self.radius),
            TestKind::SmoothBump => Some(bump_lipschitz() / self.radius),
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// `‖u‖_p^p`: the ball volume for indicators, otherwise `∫_0^ρ φ(r/ρ)^p 𝔪'(B_r) dr`.
pub fn norm_p_pow(space: &dyn MetricMeasureSpace, u: &TestFunction) -> Measured {
    if u.kind == TestKind::BallIndicator {
        return space.ball_volume(&u.center, u.radius);
    }
    let mut pts = vec![0.0, u.radius];
    if space.diameter() < u.radius {
        pts = vec![0.0, space.diameter(), u.radius];
    }
    let res = integrate_scalar(|r| u.shape(r / u.radius).powf(u.p) * space.shell_density(r), &pts, QuadOptions::new(1e-15, 1e-13, 1000));
    let v = res.scalar();
    let rel = space.volume_rel_stderr();
    if rel > 0.0 {
        Measured::monte_carlo(v, v * rel + res.error)
    } else {
        Measured::quadrature(v, res.error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Auto,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyOptions {
    pub method: Method,
    /// near/far cutoff; defaults to the 0.99 tail-mass rule
    pub r0: Option<f64>,
    /// relative tolerance of the quadrature engine
    pub tol: f64,
    pub samples: u64,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { method: Method::Auto, r0: None, tol: 1e-8, samples: 1_000_000, seed: None, workers: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyParams {
    pub n: usize,
    pub a_n: f64,
    pub r0: f64,
    pub samples: u64,
    pub seed: Option<u64>,
    pub method: Method,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub stat_stderr: f64,
    pub quad_error: f64,
    pub near_part: f64,
    pub far_part: f64,
    pub deterministic_bias_bound: f64,
    pub provenance: Provenance,
    pub params: EnergyParams,
}

impl EnergyEstimate {
    /// Total one-sided uncertainty: statistical, numerical and truncation.
    pub fn uncertainty(&self) -> f64 {
        self.stat_stderr + self.quad_error + self.deterministic_bias_bound
    }

    pub fn measured(&self) -> Measured {
        Measured { value: self.value, uncertainty: self.uncertainty(), provenance: self.provenance }
    }
}

/// How each contribution is split into reported components.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Split {
    /// `[d < r0, d ≥ r0, 0]`
    NearFar { r0: f64 },
    /// `[A, B, C]`
    Regions { r: f64, x0: Vec<f64> },
}

impl Split {
    /// Component index of a pair at distance `r` from each other, where
    /// `dx0 = d(x, x₀)` and `dy0 = d(y, x₀)`.
    pub(crate) fn component(&self, r: f64, dx0: f64, dy0: f64) -> usize {
        match self {
            Split::NearFar { r0 } => usize::from(r >= *r0),
            Split::Regions { r: big_r, .. } => {
                if r < *big_r {
                    0
                } else if dy0 > 2.0 * dx0 || dy0 < 0.5 * dx0 {
                    1
                } else {
                    2
                }
            }
        }
    }

    pub(crate) fn anchor(&self) -> Option<&[f64]> {
        match self {
            Split::NearFar { .. } => None,
            Split::Regions { x0, .. } => Some(x0),
        }
    }
}

/// `ln` of the shell-density ratio `𝔪'(B_r)/S(r)` between space and family.
pub(crate) fn ln_shell_ratio<'a>(space: &'a dyn MetricMeasureSpace, family: &'a MollifierFamily) -> impl Fn(f64) -> f64 + 'a {
    let reach = space.diameter();
    move |r: f64| {
        if r >= reach {
            f64::NEG_INFINITY
        } else {
            space.ln_shell_density(r) - family.profile().ln_deriv(r)
        }
    }
}

/// The default near/far cutoff: `T(r0) = 0.99 T(δ_ref)` with `δ_ref` the
/// support radius times 1e-3 (kept above the family's domain floor).
pub fn default_r0(m: &Mollifier<'_>, u: &TestFunction) -> f64 {
    let floor = m.family().domain_floor();
    let delta_ref = (u.radius * 1e-3).max(floor * 1.001);
    let ln_t = m.ln_tail(delta_ref);
    m.radius_from_ln_tail(0.99f64.ln() + ln_t).max(delta_ref)
}

/// Upper bound for the part of the energy from pairs closer than `delta`.
pub(crate) fn near_bias_bound(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, m: &Mollifier<'_>, delta: f64) -> Result<f64> {
    let floor = family.domain_floor();
    if delta <= floor {
        return Ok(0.0);
    }
    let ms = space.ball_volume(&u.center, u.radius).value;
    let g: Box<dyn Fn(f64) -> f64> = match u.lipschitz() {
        Some(l) => Box::new(move |r: f64| 2.0 * ms * (l * r).min(1.0).powf(u.p)),
        None => Box::new(move |r: f64| 2.0 * (ms - space.ball_volume(&u.center, (u.radius - r).max(0.0)).value)),
    };
    if floor > 0.0 && g(floor * (1.0 + 1e-9)) > 0.0 {
        return Err(Error::Divergent("pairs at the domain floor carry infinite energy".into()));
    }
    let res = radial_integral(
        m,
        |r| [if r < delta { g(r) } else { 0.0 }],
        ln_shell_ratio(space, family),
        &[floor, delta],
        QuadOptions::new(1e-300, 1e-8, 400),
    )?;
    Ok(res.value[0] * (1.0 + 1e-6) + res.error)
}

/// Energy by the method requested in `opts` (`Auto`: quadrature on 1-D
/// charts, Monte Carlo otherwise).
pub fn estimate_energy(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, n: usize, opts: &EnergyOptions) -> Result<EnergyEstimate> {
    let quadrature = match opts.method {
        Method::Quadrature => true,
        Method::MonteCarlo => false,
        Method::Auto => space.line_chart().is_some(),
    };
    if quadrature {
        energy_quadrature_1d(space, u, family, n, opts)
    } else {
        energy_mc(space, u, family, n, opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub r: f64,
    pub x0: Vec<f64>,
    /// region A: `d(x, y) < R`
    pub i: Measured,
    /// region B: far pairs with `d(y, x₀)` outside `[d(x, x₀)/2, 2 d(x, x₀)]`
    pub ii: Measured,
    /// region C: the remaining far pairs
    pub iii: Measured,
    pub total: Measured,
    /// largest per-batch `|I + II + III − total| / |total|`
    pub partition_residual: f64,
}

/// Splits `E_n` into the proof regions A, B, C using the same evaluations (or
/// the same sample stream) for all three.
pub fn decompose_energy(
    space: &dyn MetricMeasureSpace,
    u: &TestFunction,
    family: &MollifierFamily,
    n: usize,
    r: f64,
    x0: &[f64],
    opts: &EnergyOptions,
) -> Result<Decomposition> {
    if !(r > 0.0) {
        return invalid(format!("R must be positive, got {r}"));
    }
    let split = Split::Regions { r, x0: x0.to_vec() };
    let quadrature = match opts.method {
        Method::Quadrature => true,
        Method::MonteCarlo => false,
        Method::Auto => space.line_chart().is_some(),
    };
    let parts = if quadrature {
        quadrature::run(space, u, family, n, opts, &split)?
    } else {
        monte_carlo::run(space, u, family, n, opts, &split)?
    };
    Ok(parts.into_decomposition(r, x0))
}

/// Raw component output of either engine.
#[derive(Debug, Clone)]
pub(crate) struct Components {
    pub value: [f64; 3],
    pub stderr: [f64; 3],
    pub total: f64,
    pub total_stderr: f64,
    pub error: f64,
    pub bias: f64,
    pub residual: f64,
    pub provenance: Provenance,
    pub converged: bool,
    pub r0: f64,
    pub samples: u64,
}

impl Components {
    fn into_decomposition(self, r: f64, x0: &[f64]) -> Decomposition {
        let m = |v: f64, s: f64, extra: f64| Measured { value: v, uncertainty: s + extra, provenance: self.provenance };
        Decomposition {
            r,
            x0: x0.to_vec(),
            i: m(self.value[0], self.stderr[0], self.bias + self.error),
            ii: m(self.value[1], self.stderr[1], self.error),
            iii: m(self.value[2], self.stderr[2], self.error),
            total: m(self.total, self.total_stderr, self.bias + self.error),
            partition_residual: self.residual,
        }
    }

    fn into_estimate(self, n: usize, a_n: f64, opts: &EnergyOptions, method: Method) -> EnergyEstimate {
        EnergyEstimate {
            value: self.total,
            stat_stderr: self.total_stderr,
            quad_error: self.error,
            near_part: self.value[0],
            far_part: self.value[1],
            deterministic_bias_bound: self.bias,
            provenance: self.provenance,
            params: EnergyParams { n, a_n, r0: self.r0, samples: self.samples, seed: opts.seed, method, converged: self.converged },
        }
    }
}
