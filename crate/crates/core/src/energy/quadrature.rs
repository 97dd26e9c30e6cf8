use std::cell::Cell;

use super::{default_r0, ln_shell_ratio, Components, EnergyEstimate, EnergyOptions, Method, Split, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::measured::Provenance;
use crate::mollifiers::MollifierFamily;
use crate::quad::{integrate, QuadOptions};
use crate::radial::radial_integral;
use crate::spaces::{LineChart, MetricMeasureSpace};

/// Deterministic energy on a one-dimensional chart: outer adaptive quadrature
/// over `x ∈ S`, inner radial integral over `r = d(x, y)` summing both chart
/// directions, with breakpoints at every `r` where the integrand has a jump or
/// kink (support edges, centre, cutoff and region boundaries).
pub fn energy_quadrature_1d(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, n: usize, opts: &EnergyOptions) -> Result<EnergyEstimate> {
    let m = family.level(n);
    let r0 = opts.r0.unwrap_or_else(|| default_r0(&m, u));
    let split = Split::NearFar { r0 };
    let comps = run(space, u, family, n, opts, &split)?;
    Ok(comps.into_estimate(n, m.a(), opts, Method::Quadrature))
}

fn targets(chart: &LineChart, x: f64, pts: &[f64]) -> Vec<f64> {
    let shifts: &[f64] = match chart.period() {
        Some(p) => &[-p, 0.0, p],
        None => &[0.0],
    };
    let reach = chart.reach();
    let mut out = Vec::with_capacity(pts.len() * shifts.len());
    for &z in pts {
        for &s in shifts {
            let h = (z + s - x).abs();
            if h > 0.0 && h.is_finite() {
                let r = chart.inverse_displacement(h);
                if r > 0.0 && r < reach {
                    out.push(r);
                }
            }
        }
    }
    out
}

pub(crate) fn run(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, n: usize, opts: &EnergyOptions, split: &Split) -> Result<Components> {
    let chart = match space.line_chart() {
        Some(c) => c,
        None => return invalid(format!("{} has no one-dimensional chart", space.label())),
    };
    if u.center.len() != 1 {
        return invalid("test function centre must be a single chart coordinate");
    }
    if let Some(x0) = split.anchor() {
        if x0.len() != 1 {
            return invalid("anchor point must be a single chart coordinate");
        }
    }
    if space.diameter() <= u.radius {
        return invalid("support radius must be below the diameter");
    }
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let m = family.level(n);
    let floor = family.domain_floor();
    let c = u.center[0];
    let h = chart.displacement(u.radius);
    let (s_lo, s_hi) = (c - h, c + h);
    let ln_w = ln_shell_ratio(space, family);
    let reach = chart.reach();
    let r0 = match split {
        Split::NearFar { r0 } => *r0,
        Split::Regions { .. } => f64::NAN,
    };
    if r0 <= floor {
        return invalid(format!("cutoff r0 = {r0} must exceed the family domain floor {floor}"));
    }
    let x0 = split.anchor().map(|a| a[0]);

    let p = u.p;
    let ux = |y: f64| u.eval(space, &[y]);
    let inside = |y: f64| u.in_support(space, &[y]);
    let g = |x: f64, uxv: f64, dx0: f64, r: f64| -> [f64; 3] {
        let mut out = [0.0; 3];
        let d = chart.displacement(r);
        for y in [x + d, x - d] {
            let (uy, outside) = if d.is_finite() { (ux(y), !inside(y)) } else { (0.0, true) };
            let diff = (uxv - uy).abs();
            if diff == 0.0 {
                continue;
            }
            let val = 0.5 * (1.0 + f64::from(u8::from(outside))) * diff.powf(p);
            let dy0 = match x0 {
                Some(a) if d.is_finite() => space.distance(&[y], &[a]),
                Some(_) => f64::INFINITY,
                None => 0.0,
            };
            out[split.component(r, dx0, dy0)] += val;
        }
        out
    };

    if floor > 0.0 {
        let probe = floor * (1.0 + 1e-9);
        let eps = 1e-6 * h;
        for x in [s_lo + eps, s_hi - eps, c] {
            let v = g(x, ux(x), x0.map_or(0.0, |a| space.distance(&[x], &[a])), probe);
            if v.iter().any(|c| *c != 0.0) {
                return Err(Error::Divergent("pairs at the domain floor carry infinite energy".into()));
            }
        }
    }

    let inner_opts = QuadOptions::new(1e-300, (opts.tol * 1e-2).max(1e-13), 400);
    let outer_opts = QuadOptions::new(1e-300, opts.tol, 4000);
    let inner_err = Cell::new(0.0f64);
    let inner_ok = Cell::new(true);
    let failure: Cell<Option<Error>> = Cell::new(None);

    let outer = integrate(
        |x: f64| {
            let uxv = ux(x);
            let dx0 = x0.map_or(0.0, |a| space.distance(&[x], &[a]));
            let mut pts = vec![s_lo, c, s_hi];
            if let Some(a) = x0 {
                pts.push(a);
                for k in [2.0, 0.5] {
                    let dd = chart.displacement(k * dx0);
                    pts.push(a + dd);
                    pts.push(a - dd);
                }
            }
            let mut breaks = vec![floor];
            breaks.extend(targets(&chart, x, &pts));
            match split {
                Split::NearFar { r0 } => breaks.push(*r0),
                Split::Regions { r, .. } => breaks.push(*r),
            }
            if reach.is_finite() {
                breaks.push(reach);
            }
            match radial_integral(&m, |r| g(x, uxv, dx0, r), &ln_w, &breaks, inner_opts) {
                Ok(res) => {
                    inner_err.set(inner_err.get().max(res.error));
                    inner_ok.set(inner_ok.get() && res.converged);
                    res.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    [0.0; 3]
                }
            }
        },
        &[s_lo, c, s_hi],
        outer_opts,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let value = outer.value;
    let total: f64 = value.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("quadrature energy".into()));
    }
    let error = outer.error + inner_err.get() * 2.0 * h;
    Ok(Components {
        value,
        stderr: [0.0; 3],
        total,
        total_stderr: 0.0,
        error,
        bias: 0.0,
        residual: 0.0,
        provenance: Provenance::Quadrature,
        converged: outer.converged && inner_ok.get(),
        r0: if r0.is_nan() { 0.0 } else { r0 },
        samples: 0,
    })
}
