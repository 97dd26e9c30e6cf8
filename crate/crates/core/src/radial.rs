//! Integrals of the form `∫_{b₀}^∞ g(r) w(r) S(r) ρ̃(r) dr`, where `S ρ̃` is the
//! radial law of a mollifier and `w` a bounded weight (typically the ratio of
//! a space's shell density to the family's `S`).
//!
//! Wherever the tail mass is finite the integral is taken in the tail variable
//! `q = T(r)`, in which `S ρ̃ dr = −dq`; this flattens the heavy tails of small
//! `a_n` and turns the unbounded range into the finite interval `(0, T(b)]`.
//! Radii beyond the range of the profile inverse reach `g` as `f64::INFINITY`.

use crate::error::{Error, Result};
use crate::mollifiers::Mollifier;
use crate::quad::{integrate, QuadOptions};

/// Radii above this are evaluated in the weight as if equal to it.
pub const R_HUGE: f64 = 1e300;

#[derive(Debug, Clone, Copy)]
pub struct RadialResult<const K: usize> {
    pub value: [f64; K],
    pub error: f64,
    pub converged: bool,
}

const MAX_TAIL_PIECES: usize = 400;
const TAIL_REL: f64 = 1e-15;

fn norm<const K: usize>(v: &[f64; K]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn weighted<const K: usize, G: FnMut(f64) -> [f64; K], W: Fn(f64) -> f64>(g: &mut G, ln_w: &W, r: f64) -> [f64; K] {
    let w = ln_w(r.min(R_HUGE)).exp();
    if w == 0.0 {
        return [0.0; K];
    }
    let mut v = g(r);
    for x in v.iter_mut() {
        *x *= w;
    }
    v
}

/// `breaks[0]` is the lower limit, the remaining entries interior breakpoints
/// (entries not above `breaks[0]` or non-finite are ignored). `ln_w` is
/// `ln w(r)`, `-inf` where the weight vanishes.
pub fn radial_integral<const K: usize, G, W>(m: &Mollifier<'_>, mut g: G, ln_w: W, breaks: &[f64], opts: QuadOptions) -> Result<RadialResult<K>>
where
    G: FnMut(f64) -> [f64; K],
    W: Fn(f64) -> f64,
{
    let lo = breaks[0];
    let mut pts: Vec<f64> = vec![lo];
    pts.extend(breaks.iter().copied().filter(|b| b.is_finite() && *b > lo));
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut value = [0.0; K];
    let mut error = 0.0;
    let mut converged = true;
    let mut accumulate = |v: &[f64; K], e: f64, c: bool, value: &mut [f64; K]| {
        for k in 0..K {
            value[k] += v[k];
        }
        error += e;
        converged &= c;
    };

    let ln_s = |r: f64| m.family().profile().ln_deriv(r);
    let mut first = 0;
    if !m.tail_or_inf(lo).is_finite() {
        if pts.len() < 2 {
            return Err(Error::Divergent("no breakpoint above a lower limit of infinite mass".into()));
        }
        let res = integrate(
            |r: f64| {
                let dens = (m.ln_rho(r) + ln_s(r)).exp();
                if dens == 0.0 {
                    return [0.0; K];
                }
                let mut v = weighted(&mut g, &ln_w, r);
                for x in v.iter_mut() {
                    *x *= dens;
                }
                v
            },
            &pts[..2],
            opts,
        );
        if res.value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergent(format!("integral over [{}, {}] is not finite", pts[0], pts[1])));
        }
        accumulate(&res.value, res.error, res.converged, &mut value);
        first = 1;
    }

    let mut eval_q = |q: f64| -> [f64; K] {
        let r = m.radius_from_ln_tail(q.ln());
        weighted(&mut g, &ln_w, r)
    };

    for w in pts[first..].windows(2) {
        let (q_hi, q_lo) = (m.tail_or_inf(w[0]), m.tail_or_inf(w[1]));
        if q_hi > q_lo {
            let res = integrate(&mut eval_q, &[q_lo, q_hi], opts);
            accumulate(&res.value, res.error, res.converged, &mut value);
        }
    }

    // (0, T(b_last)] in geometric pieces
    let top = m.tail_or_inf(*pts.last().expect("non-empty"));
    if top > 0.0 {
        let mut hi = top;
        let mut recent: Vec<f64> = Vec::new();
        let mut tail = [0.0; K];
        for _ in 0..MAX_TAIL_PIECES {
            let lo_q = hi * 0.1;
            let res = integrate(&mut eval_q, &[lo_q, hi], opts);
            if res.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergent("non-finite tail piece".into()));
            }
            for k in 0..K {
                tail[k] += res.value[k];
            }
            error += res.error;
            converged &= res.converged;
            let piece = norm(&res.value);
            recent.push(piece);
            if recent.len() >= 4 {
                let l = recent.len();
                if recent[l - 3] >= recent[l - 4] && recent[l - 2] >= recent[l - 3] && recent[l - 1] >= recent[l - 2] && piece > 0.0 {
                    return Err(Error::Divergent("tail pieces do not decrease".into()));
                }
            }
            let total = norm(&value) + norm(&tail);
            if piece <= TAIL_REL * total || lo_q < 1e-300 {
                break;
            }
            hi = lo_q;
        }
        for k in 0..K {
            value[k] += tail[k];
        }
    }
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("radial integral".into()));
    }
    Ok(RadialResult { value, error, converged })
}
