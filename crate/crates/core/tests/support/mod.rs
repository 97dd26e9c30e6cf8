//! Oracles shared by the integration tests. They only borrow the library's
//! Gauss–Legendre nodes and mollifier density; every integral is meshed here.
#![allow(dead_code)]

use nonlocal_core::energy::{TestFunction, TestKind};
use nonlocal_core::mollifiers::{Generator, Mollifier};
use nonlocal_core::quad::GaussLegendre;
use nonlocal_core::spaces::MetricMeasureSpace;

/// Composite rule over consecutive breakpoints.
pub fn composite(gl: &GaussLegendre, f: impl Fn(f64) -> f64, pts: &[f64]) -> f64 {
    pts.windows(2).map(|w| gl.integrate(&f, w[0], w[1])).sum()
}

/// `a, a + (b−a)2^{-levels}, …, a + (b−a)/2, b`: panels halving toward `a`.
pub fn graded(a: f64, b: f64, levels: u32) -> Vec<f64> {
    let mut pts = vec![a];
    for k in (0..levels).rev() {
        pts.push(a + (b - a) * 0.5f64.powi(k as i32 + 1));
    }
    pts.push(b);
    pts
}

/// `∫_0^1 ∫_0^1 |1_{[0,1]}(x) − 1_{[0,1]}(y)| a|x−y|^{-1-a}` over all of ℝ²,
/// as `4 ∫_0^1 du ∫_0^∞ dv a (u+v)^{-1-a}` by nested quadrature.
pub fn line_indicator_energy(a: f64) -> f64 {
    let gl = GaussLegendre::new(20);
    let outer = graded(0.0, 1.0, 80);
    let inner = |u: f64| {
        // v ∈ [0, 1] graded at 0, v ∈ [1, ∞) through v = 1/w
        let near = composite(&gl, |v| a * (u + v).powf(-1.0 - a), &graded(0.0, 1.0, 80));
        let mesh = graded(0.0, 1.0, 80);
        let far = composite(&gl, |w: f64| a * w.powf(a - 1.0) * (u * w + 1.0).powf(-1.0 - a), &mesh[1..]);
        // the first panel, where (uw + 1) ≈ 1
        near + far + mesh[1].powf(a)
    };
    4.0 * composite(&gl, inner, &outer)
}

/// Brute-force double sum for an indicator on a one-dimensional chart.
///
/// `nodes` midpoints cover `[lo, hi)`. Pairs closer than `band` cells are
/// replaced by the exact straddling integral at each of the two edges of the
/// support. Pairs leaving a non-periodic window use the closed tail `T`.
#[allow(clippy::too_many_arguments)]
pub fn grid_energy_1d(space: &dyn MetricMeasureSpace, u: &TestFunction, m: &Mollifier<'_>, lo: f64, hi: f64, nodes: usize, band: usize, periodic: bool) -> f64 {
    assert_eq!(u.kind, TestKind::BallIndicator);
    let dx = (hi - lo) / nodes as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| lo + (i as f64 + 0.5) * dx).collect();
    let inside: Vec<bool> = xs.iter().map(|&x| u.eval(space, &[x]) > 0.0).collect();
    let ins: Vec<usize> = (0..nodes).filter(|&i| inside[i]).collect();
    let outs: Vec<usize> = (0..nodes).filter(|&i| !inside[i]).collect();

    let mut sum = 0.0;
    for &i in &ins {
        for &j in &outs {
            let mut k = i.abs_diff(j);
            if periodic {
                k = k.min(nodes - k);
            }
            if k >= band {
                sum += m.rho(space.distance(&[xs[i]], &[xs[j]]));
            }
        }
    }
    let mut e = 2.0 * sum * dx * dx;

    // straddling pairs within the band: measure h at chart separation h
    let b = (band as f64 - 0.5) * dx;
    let gl = GaussLegendre::new(20);
    let per_edge = composite(&gl, |h| h * m.rho(space.distance(&[0.0], &[h])), &graded(0.0, b, 60));
    e += 2.0 * 2.0 * per_edge;

    if !periodic {
        let tail = |h: f64| m.tail_or_inf(space.distance(&[0.0], &[h]));
        let out: f64 = ins.iter().map(|&i| tail(xs[i] - lo) + tail(hi - xs[i])).sum();
        e += 2.0 * out * dx;
    }
    e
}

/// `φ(t) = exp(1 − 1/(1 − t²))` on the unit disc.
pub fn bump(x: f64, y: f64) -> f64 {
    let t2 = x * x + y * y;
    if t2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t2)).exp()
    }
}

fn tensor(gl: &GaussLegendre, f: impl Fn(f64, f64) -> f64, xs: &[f64], ys: &[f64]) -> f64 {
    composite(gl, |x| composite(gl, |y| f(x, y), ys), xs)
}

fn uniform(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// `∫ bump²` over ℝ².
pub fn bump_norm2() -> f64 {
    let gl = GaussLegendre::new(10);
    let grid = uniform(-1.0, 1.0, 24);
    tensor(&gl, |x, y| bump(x, y).powi(2), &grid, &grid)
}

/// `∫ |u(x + r e₁) − u(x)|² dx` for the unit bump.
pub fn bump_increment(r: f64) -> f64 {
    if r >= 2.0 {
        return 2.0 * bump_norm2();
    }
    let gl = GaussLegendre::new(8);
    let xs = uniform(-1.0 - r, 1.0, 32);
    let ys = uniform(-1.0, 1.0, 32);
    tensor(&gl, |x, y| (bump(x + r, y) - bump(x, y)).powi(2), &xs, &ys)
}

/// Energy of the unit bump (p = 2) in ℝ² for `ρ̃(r) = (a/2) r^{-(a+2)}`:
/// `π a ∫_0^∞ r^{-1-a} G(r) dr` with `G` from [`bump_increment`].
pub fn bump_energy_2d(a: f64) -> f64 {
    let gl = GaussLegendre::new(12);
    let body = composite(&gl, |r| r.powf(-1.0 - a) * bump_increment(r), &graded(0.0, 2.0, 50));
    let tail = 2.0 * bump_norm2() * 2f64.powf(-a) / a;
    std::f64::consts::PI * a * (body + tail)
}

/// `∫_δ^∞ S ρ̃` integrated in `w = ln V` (power, exp) or `z = ln ln V` (log).
///
/// The log case stops at `ln V = e^30`, which drops `e^{-30a}` of the mass.
pub fn tail_by_quadrature(m: &Mollifier<'_>, delta: f64) -> f64 {
    let w0 = m.family().profile().ln_eval(delta);
    let gl = GaussLegendre::new(20);
    let a = m.a();
    match m.family().generator() {
        Generator::Power { alpha } => {
            let rate = alpha * a;
            let width = 0.5 / rate;
            let end = w0 + 60.0 / rate;
            let pts: Vec<f64> = (0..)
                .map(|k| w0 + k as f64 * width)
                .take_while(|&w| w < end + width)
                .collect();
            composite(&gl, |w| (m.ln_rho_from_ln_v(w) + w).exp(), &pts)
        }
        Generator::Exp => {
            let end = (60.0 / a).ln().max(w0 + 1.0);
            let lo = w0.max(-60.0);
            composite(&gl, |w| (m.ln_rho_from_ln_v(w) + w).exp(), &uniform(lo, end, 400))
        }
        Generator::Log => {
            let z0 = w0.ln();
            composite(&gl, |z: f64| (m.ln_rho_from_ln_v(z.exp()) + z.exp() + z).exp(), &uniform(z0, 30.0, 400))
        }
    }
}
