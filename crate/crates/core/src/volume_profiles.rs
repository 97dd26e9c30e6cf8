//! Reference volume functions `V` with their derivative `S = V'` and inverse.
//!
//! Model profiles are `t^N` and the hyperbolic space-form volume
//! `∫_0^t sinh^{N-1}(r·√(−K/(N−1))) dr`. Custom profiles wrap user closures.
//! Every profile also exposes log-space evaluation so that callers can work
//! with volumes far beyond the `f64` range.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quad::{integrate_scalar, GaussLegendre, QuadOptions};

/// Serializable description of a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Power { n: u32 },
    Hyperbolic { k: f64, n: u32 },
    Custom { name: String },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

struct CustomFns {
    eval: ScalarFn,
    deriv: ScalarFn,
    inverse: ScalarFn,
    ln_eval: Option<ScalarFn>,
    ln_deriv: Option<ScalarFn>,
    inverse_from_ln: Option<ScalarFn>,
}

#[derive(Clone)]
enum Repr {
    Power(u32),
    Hyperbolic(Arc<HyperbolicTable>),
    Custom(Arc<CustomFns>),
}

/// A `C¹` strictly increasing volume function.
#[derive(Clone)]
pub struct VolumeProfile {
    kind: ProfileKind,
    repr: Repr,
    domain_floor: f64,
}

impl fmt::Debug for VolumeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VolumeProfile")
            .field("kind", &self.kind)
            .field("domain_floor", &self.domain_floor)
            .finish()
    }
}

/// `V(t) = t^N`.
pub fn make_power_profile(n: u32) -> Result<VolumeProfile> {
    if n == 0 {
        return invalid("power profile needs N >= 1");
    }
    Ok(VolumeProfile { kind: ProfileKind::Power { n }, repr: Repr::Power(n), domain_floor: 0.0 })
}

/// Volume of geodesic balls in the `N`-dimensional space form of curvature `K < 0`.
pub fn make_hyperbolic_profile(k: f64, n: u32) -> Result<VolumeProfile> {
    if !(k < 0.0) || !k.is_finite() {
        return invalid(format!("hyperbolic profile needs K < 0, got {k}"));
    }
    if n < 2 {
        return invalid(format!("hyperbolic profile needs N >= 2, got {n}"));
    }
    let table = HyperbolicTable::new(k, n);
    Ok(VolumeProfile {
        kind: ProfileKind::Hyperbolic { k, n },
        repr: Repr::Hyperbolic(Arc::new(table)),
        domain_floor: 0.0,
    })
}

impl VolumeProfile {
    /// Profile from user closures. `eval` must be strictly increasing with
    /// derivative `deriv` and inverse `inverse`; nothing is checked here, see
    /// [`check_profile`].
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: ProfileKind::Custom { name: name.into() },
            repr: Repr::Custom(Arc::new(CustomFns {
                eval: Arc::new(eval),
                deriv: Arc::new(deriv),
                inverse: Arc::new(inverse),
                ln_eval: None,
                ln_deriv: None,
                inverse_from_ln: None,
            })),
            domain_floor: 0.0,
        }
    }

    /// `V(t) = e^t − 1`, whose inverse `ln(1 + v)` is subadditive.
    pub fn exp_minus_one() -> Self {
        let fns = CustomFns {
            eval: Arc::new(f64::exp_m1),
            deriv: Arc::new(f64::exp),
            inverse: Arc::new(f64::ln_1p),
            ln_eval: Some(Arc::new(|t: f64| {
                if t > 1.0 {
                    t + (-(-t).exp()).ln_1p()
                } else {
                    t.exp_m1().ln()
                }
            })),
            ln_deriv: Some(Arc::new(|t| t)),
            inverse_from_ln: Some(Arc::new(|lv: f64| {
                if lv > 30.0 {
                    lv + (-lv).exp().ln_1p()
                } else {
                    lv.exp().ln_1p()
                }
            })),
        };
        Self {
            kind: ProfileKind::Custom { name: "exp_minus_one".into() },
            repr: Repr::Custom(Arc::new(fns)),
            domain_floor: 0.0,
        }
    }

    /// Restricts the profile to `t >= floor`.
    pub fn with_domain_floor(mut self, floor: f64) -> Self {
        self.domain_floor = floor.max(0.0);
        self
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    /// Power exponent when this is `t^N`.
    pub fn power_exponent(&self) -> Option<u32> {
        match self.repr {
            Repr::Power(n) => Some(n),
            _ => None,
        }
    }

    /// Same underlying function (ignores the domain floor).
    pub fn same_function(&self, other: &VolumeProfile) -> bool {
        self.kind == other.kind
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Power(n) => t.powi(*n as i32),
            Repr::Hyperbolic(h) => h.eval(t),
            Repr::Custom(c) => (c.eval)(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Power(1) => 1.0,
            Repr::Power(n) => *n as f64 * t.powi(*n as i32 - 1),
            Repr::Hyperbolic(h) => h.deriv(t),
            Repr::Custom(c) => (c.deriv)(t),
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Power(1) => v,
            Repr::Power(2) => v.sqrt(),
            Repr::Power(n) => v.powf(1.0 / *n as f64),
            Repr::Hyperbolic(h) => h.inverse(v),
            Repr::Custom(c) => (c.inverse)(v),
        }
    }

    /// `ln V(t)`, finite even where `V(t)` overflows.
    pub fn ln_eval(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Power(n) => *n as f64 * t.ln(),
            Repr::Hyperbolic(h) => h.ln_eval(t),
            Repr::Custom(c) => match &c.ln_eval {
                Some(g) => g(t),
                None => (c.eval)(t).ln(),
            },
        }
    }

    /// `ln S(t)`.
    pub fn ln_deriv(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Power(n) => (*n as f64).ln() + (*n as f64 - 1.0) * t.ln(),
            Repr::Hyperbolic(h) => h.ln_deriv(t),
            Repr::Custom(c) => match &c.ln_deriv {
                Some(g) => g(t),
                None => (c.deriv)(t).ln(),
            },
        }
    }

    /// `V^{-1}(e^{lv})`.
    pub fn inverse_from_ln(&self, lv: f64) -> f64 {
        match &self.repr {
            Repr::Power(n) => (lv / *n as f64).exp(),
            Repr::Hyperbolic(h) => h.inverse_from_ln(lv),
            Repr::Custom(c) => match &c.inverse_from_ln {
                Some(g) => g(lv),
                None => (c.inverse)(lv.exp()),
            },
        }
    }
}

/// Node table for the hyperbolic profile: cumulative integrals of
/// `S(r) = sinh^{m}(c r)` at equally spaced nodes, refined locally with a
/// 10-point Gauss–Legendre rule.
struct HyperbolicTable {
    c: f64,
    m: f64,
    step: f64,
    cum: Vec<f64>,
    gl: GaussLegendre,
}

impl HyperbolicTable {
    /// `m·c·t` at the end of the table; beyond it the asymptotic form is exact
    /// to double precision.
    const TABLE_END_EXPONENT: f64 = 600.0;

    fn new(k: f64, n: u32) -> Self {
        let m = (n - 1) as f64;
        let c = (-k / m).sqrt();
        let step = 0.25 / (m * c);
        let cells = (Self::TABLE_END_EXPONENT / 0.25).ceil() as usize;
        let s = |r: f64| (c * r).sinh().powf(m);
        let opts = QuadOptions::new(1e-300, 1e-15, 200);
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = i as f64 * step;
            let r = integrate_scalar(s, &[a, a + step], opts);
            acc += r.scalar();
            cum.push(acc);
        }
        Self { c, m, step, cum, gl: GaussLegendre::new(10) }
    }

    fn t_end(&self) -> f64 {
        (self.cum.len() - 1) as f64 * self.step
    }

    fn deriv(&self, t: f64) -> f64 {
        if t * self.c * self.m < 600.0 {
            (self.c * t).sinh().powf(self.m)
        } else {
            self.ln_deriv(t).exp()
        }
    }

    fn ln_deriv(&self, t: f64) -> f64 {
        let x = self.c * t;
        let ln_sinh = if x > 20.0 { x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p() } else { x.sinh().ln() };
        self.m * ln_sinh
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_end() {
            return self.ln_eval(t).exp();
        }
        let k = ((t / self.step) as usize).min(self.cum.len() - 2);
        let a = k as f64 * self.step;
        let c = self.c;
        let m = self.m;
        self.cum[k] + self.gl.integrate(|r| (c * r).sinh().powf(m), a, t)
    }

    fn asymptotic_ln(&self, t: f64) -> f64 {
        self.m * (self.c * t - std::f64::consts::LN_2) - (self.m * self.c).ln()
    }

    fn ln_eval(&self, t: f64) -> f64 {
        if t >= self.t_end() {
            self.asymptotic_ln(t)
        } else {
            self.eval(t).ln()
        }
    }

    fn inverse(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let last = *self.cum.last().expect("table");
        if v >= last {
            return self.inverse_from_ln(v.ln());
        }
        // bracket from the node table
        let k = self.cum.partition_point(|&c| c <= v).saturating_sub(1);
        let mut lo = k as f64 * self.step;
        let mut hi = lo + self.step;
        let width = 1e-14 * (1.0 + hi);
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..2 {
            let d = self.deriv(t);
            if d > 0.0 {
                let next = t - (self.eval(t) - v) / d;
                if next.is_finite() && next >= lo - width && next <= hi + width {
                    t = next;
                }
            }
        }
        t
    }

    fn inverse_from_ln(&self, lv: f64) -> f64 {
        let t_end = self.t_end();
        if lv >= self.asymptotic_ln(t_end) {
            (lv + self.m * std::f64::consts::LN_2 + (self.m * self.c).ln()) / (self.m * self.c)
        } else {
            self.inverse(lv.exp())
        }
    }
}

/// Per-point diagnostics from [`check_profile`].
#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub value: f64,
    pub monotone: bool,
    pub deriv_residual: f64,
    pub inverse_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileDiagnostics {
    pub profile: ProfileKind,
    pub points: Vec<ProfilePoint>,
    /// Indices `i` with `V(t_i) >= V(t_{i+1})`.
    pub monotonicity_violations: Vec<usize>,
    pub non_positive_derivative: Vec<usize>,
    pub max_deriv_residual: f64,
    pub max_inverse_residual: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

pub const DERIV_TOL: f64 = 1e-6;
pub const INVERSE_TOL: f64 = 1e-10;

/// Checks monotonicity, `S ≈ V'` by central differences and `V^{-1}∘V ≈ id`
/// on a strictly increasing grid.
pub fn check_profile(profile: &VolumeProfile, grid: &[f64]) -> Result<ProfileDiagnostics> {
    if grid.is_empty() {
        return invalid("empty grid");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("grid must be strictly increasing");
    }
    if grid[0] <= profile.domain_floor() || !grid[0].is_finite() {
        return invalid("grid must lie strictly inside the profile domain");
    }
    let values: Vec<f64> = grid.iter().map(|&t| profile.eval(t)).collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    let mut non_positive = Vec::new();
    for (i, &t) in grid.iter().enumerate() {
        let v = values[i];
        let monotone = i + 1 == grid.len() || values[i + 1] > v;
        if !monotone {
            violations.push(i);
        }
        let h = 1e-5 * t;
        let fd = (profile.eval(t + h) - profile.eval(t - h)) / (2.0 * h);
        let s = profile.deriv(t);
        if !(s > 0.0) {
            non_positive.push(i);
        }
        let deriv_residual = ((fd - s) / s).abs();
        let inverse_residual = ((profile.inverse(v) - t) / t).abs();
        points.push(ProfilePoint { t, value: v, monotone, deriv_residual, inverse_residual });
    }
    let finite_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let max_deriv_residual = finite_max(&mut points.iter().map(|p| p.deriv_residual));
    let max_inverse_residual = finite_max(&mut points.iter().map(|p| p.inverse_residual));
    let pass = violations.is_empty()
        && non_positive.is_empty()
        && max_deriv_residual <= DERIV_TOL
        && max_inverse_residual <= INVERSE_TOL;
    Ok(ProfileDiagnostics {
        profile: profile.kind().clone(),
        points,
        monotonicity_violations: violations,
        non_positive_derivative: non_positive,
        max_deriv_residual,
        max_inverse_residual,
        pass,
        notes: vec!["derivative checked by central differences; piecewise-C1 S is assumed sufficient for quadrature".into()],
    })
}

/// `count` points log-spaced between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if count == 1 {
                lo
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_examples() {
        let p2 = make_power_profile(2).unwrap();
        assert_eq!(p2.eval(3.0), 9.0);
        assert_eq!(p2.deriv(3.0), 6.0);
        let p1 = make_power_profile(1).unwrap();
        assert_eq!(p1.eval(5.0), 5.0);
        assert_eq!(p1.deriv(5.0), 1.0);
        let p4 = make_power_profile(4).unwrap();
        assert!((p4.inverse(16.0) - 2.0).abs() < 1e-15);
        assert!(make_power_profile(0).is_err());
    }

    #[test]
    fn hyperbolic_rejects_bad_parameters() {
        assert!(make_hyperbolic_profile(0.0, 3).is_err());
        assert!(make_hyperbolic_profile(1.0, 3).is_err());
        assert!(make_hyperbolic_profile(-1.0, 1).is_err());
    }

    #[test]
    fn hyperbolic_n2_matches_cosh() {
        // K=-1, N=2: V(t) = cosh(t) - 1
        let h = make_hyperbolic_profile(-1.0, 2).unwrap();
        assert!((h.eval(1.0) - (1f64.cosh() - 1.0)).abs() < 1e-13);
        assert!((h.eval(1.0) - 0.543_080_634_815_243_7).abs() < 1e-12);
        for t in log_grid(1e-3, 30.0, 200) {
            let exact = t.cosh() - 1.0;
            assert!(((h.eval(t) - exact) / exact).abs() < 1e-8, "t={t}");
        }
        let t = 1e-3;
        assert!((h.eval(t) / (t * t) - 0.5).abs() < 1e-6);
        assert!((h.inverse(h.eval(2.5)) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_asymptotic_region() {
        let h = make_hyperbolic_profile(-1.0, 2).unwrap();
        let t = 700.0;
        assert!((h.ln_eval(t) - (t - std::f64::consts::LN_2)).abs() < 1e-9);
        let lv = 2000.0;
        let back = h.ln_eval(h.inverse_from_ln(lv));
        assert!((back - lv).abs() < 1e-9);
    }

    #[test]
    fn check_profile_examples() {
        let grid = log_grid(0.1, 100.0, 60);
        assert!(check_profile(&make_power_profile(3).unwrap(), &grid).unwrap().pass);
        let hgrid = log_grid(1e-2, 50.0, 80);
        let d = check_profile(&make_hyperbolic_profile(-1.0, 3).unwrap(), &hgrid).unwrap();
        assert!(d.pass, "{} {}", d.max_deriv_residual, d.max_inverse_residual);
        let sine = VolumeProfile::custom("sine", f64::sin, f64::cos, f64::asin);
        let d = check_profile(&sine, &log_grid(0.1, 10.0, 40)).unwrap();
        assert!(!d.pass);
        assert!(!d.monotonicity_violations.is_empty());
        assert!(check_profile(&sine, &[]).is_err());
    }

    #[test]
    fn exp_minus_one_log_forms() {
        let p = VolumeProfile::exp_minus_one();
        for t in [1e-3, 0.5, 2.0, 40.0] {
            assert!((p.ln_eval(t) - p.eval(t).ln()).abs() < 1e-12);
            assert!((p.inverse_from_ln(p.ln_eval(t)) - t).abs() < 1e-10 * (1.0 + t));
        }
        assert!(check_profile(&p, &log_grid(1e-3, 30.0, 50)).unwrap().pass);
    }
}
