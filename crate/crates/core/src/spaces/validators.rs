use rand::Rng;
use serde::Serialize;

use super::MetricMeasureSpace;
use crate::error::{invalid, Result};
use crate::measured::{Measured, Provenance};
use crate::mollifiers::MollifierFamily;
use crate::quad::QuadOptions;
use crate::radial::radial_integral;
use crate::rng;
use crate::volume_profiles::VolumeProfile;

/// Relative tolerance for monotonicity of exact ratios.
pub const BGI_EXACT_TOL: f64 = 1e-9;
/// Standard errors allowed for Monte Carlo ratios.
pub const BGI_MC_SIGMAS: f64 = 3.0;
const CONSTANT_REL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct BgiReport {
    pub grid: Vec<f64>,
    pub ratios: Vec<Measured>,
    /// pairs `(r, R)`, `r < R`, with `ratio(R) > ratio(r)` beyond tolerance
    pub violations: Vec<(f64, f64)>,
    pub avr_estimate: Measured,
    pub density_estimate: Measured,
    /// sup of the ratios over the upper half of the grid
    pub k_bound: f64,
    pub pass: bool,
}

fn ratio(space: &dyn MetricMeasureSpace, v: &VolumeProfile, x: &[f64], r: f64) -> Measured {
    let vol = space.ball_volume(x, r);
    let denom = v.eval(r);
    Measured { value: vol.value / denom, uncertainty: vol.uncertainty / denom, provenance: vol.provenance }
}

/// Bishop–Gromov check at the base point: `r ↦ 𝔪(B_r(x₀))/V(r)` must be
/// non-increasing.
pub fn check_bgi(space: &dyn MetricMeasureSpace, v: &VolumeProfile, r_grid: &[f64]) -> Result<BgiReport> {
    if r_grid.len() < 3 || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radius grid must be strictly increasing with at least 3 points");
    }
    if space.diameter().is_infinite() && r_grid[r_grid.len() - 1] / r_grid[0] < 1e4 * (1.0 - 1e-12) {
        return invalid("radius grid must span at least 4 decades on an unbounded space");
    }
    let x0 = space.base_point();
    let ratios: Vec<Measured> = r_grid.iter().map(|&r| ratio(space, v, &x0, r)).collect();
    let mut violations = Vec::new();
    for i in 0..ratios.len() {
        for j in i + 1..ratios.len() {
            let (a, b) = (&ratios[i], &ratios[j]);
            let slack = if a.is_exact() && b.is_exact() {
                BGI_EXACT_TOL * a.value.abs()
            } else {
                BGI_MC_SIGMAS * a.uncertainty.hypot(b.uncertainty)
            };
            if b.value > a.value + slack {
                violations.push((r_grid[i], r_grid[j]));
            }
        }
    }
    let avr_estimate = estimate_avr(space, v, r_grid)?;
    let mut down = r_grid.to_vec();
    down.reverse();
    let density_estimate = estimate_density(space, v, &x0, &down)?;
    let k_bound = ratios[ratios.len() / 2..].iter().map(|m| m.value).fold(f64::NEG_INFINITY, f64::max);
    let pass = violations.is_empty();
    Ok(BgiReport { grid: r_grid.to_vec(), ratios, violations, avr_estimate, density_estimate, k_bound, pass })
}

/// Least-squares intercept of `y` against `x`.
fn intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        my
    } else {
        my - sxy / sxx * mx
    }
}

/// Limit of ratios `ρ_i` observed at abscissae `h_i → 0`.
fn limit_from(ratios: &[Measured], h: &[f64]) -> Measured {
    let vals: Vec<f64> = ratios.iter().map(|m| m.value).collect();
    let last = *ratios.last().expect("non-empty");
    let spread = vals.iter().fold(0.0f64, |m, v| m.max((v - last.value).abs()));
    if spread <= CONSTANT_REL * last.value.abs() {
        return last;
    }
    let b = intercept(h, &vals);
    let stat = ratios.iter().map(|m| m.uncertainty).fold(0.0, f64::max);
    Measured::extrapolated(b, (b - last.value).abs() + stat)
}

/// Asymptotic volume ratio from the three largest radii; the ratios are fitted
/// affinely in `1/r` and the intercept clamped to `[0, last ratio]`, the range
/// allowed for a non-increasing sequence. Finite-diameter spaces give 0.
pub fn estimate_avr(space: &dyn MetricMeasureSpace, v: &VolumeProfile, r_ladder: &[f64]) -> Result<Measured> {
    if space.diameter().is_finite() {
        return Ok(Measured::exact(0.0));
    }
    if r_ladder.len() < 3 || r_ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("AVR ladder must be strictly increasing with at least 3 radii");
    }
    let x0 = space.base_point();
    let top = &r_ladder[r_ladder.len() - 3..];
    let ratios: Vec<Measured> = top.iter().map(|&r| ratio(space, v, &x0, r)).collect();
    let h: Vec<f64> = top.iter().map(|r| 1.0 / r).collect();
    let mut m = limit_from(&ratios, &h);
    if m.provenance == Provenance::Extrapolated {
        let last = ratios[2].value;
        m.value = m.value.clamp(0.0, last);
    }
    Ok(m)
}

/// Density `θ^V(x) = lim_{r→0} 𝔪(B_r(x))/V(r)` from the three smallest radii of
/// a decreasing ladder, refined by an affine fit in `r`.
pub fn estimate_density(space: &dyn MetricMeasureSpace, v: &VolumeProfile, x: &[f64], r_ladder_down: &[f64]) -> Result<Measured> {
    if r_ladder_down.len() < 3 || r_ladder_down.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("density ladder must be strictly decreasing with at least 3 radii");
    }
    let tail = &r_ladder_down[r_ladder_down.len() - 3..];
    let ratios: Vec<Measured> = tail.iter().map(|&r| ratio(space, v, x, r)).collect();
    Ok(limit_from(&ratios, tail))
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeBoundReport {
    pub k: f64,
    pub k_uncertainty: f64,
    /// `(decade lower radius, max ratio within the decade)`
    pub per_decade: Vec<(f64, f64)>,
    pub centers: usize,
    pub bounded: bool,
}

pub const MIN_CENTERS: usize = 16;
const DECADE_GROWTH: f64 = 1.1;

/// Empirical `k` in `𝔪(B_r(x)) ≤ k V(r)` over random centres and the grid.
pub fn check_volume_bound(space: &dyn MetricMeasureSpace, v: &VolumeProfile, r_grid: &[f64], centers: usize, seed: u64) -> Result<VolumeBoundReport> {
    if centers < MIN_CENTERS {
        return invalid(format!("at least {MIN_CENTERS} centres required"));
    }
    if r_grid.is_empty() {
        return invalid("empty radius grid");
    }
    let dim = space.chart_dim();
    let mut stream = rng::stream(seed, rng::tags::CENTERS, 0);
    let mut pts = vec![space.base_point()];
    for _ in 1..centers {
        let mut p = vec![0.0; dim];
        space.random_point(&mut stream, &mut p);
        pts.push(p);
    }
    let mut per_decade: Vec<(f64, f64)> = Vec::new();
    let mut k = 0.0f64;
    let mut k_unc = 0.0f64;
    for &r in r_grid {
        let decade = 10f64.powf(r.log10().floor());
        let mut best = 0.0f64;
        for x in &pts {
            let m = ratio(space, v, x, r);
            if m.value > best {
                best = m.value;
            }
            if m.value > k {
                k = m.value;
                k_unc = m.uncertainty;
            }
        }
        match per_decade.last_mut() {
            Some(last) if last.0 == decade => last.1 = last.1.max(best),
            _ => per_decade.push((decade, best)),
        }
    }
    let bounded = k.is_finite() && per_decade.windows(2).all(|w| w[1].1 <= DECADE_GROWTH * w[0].1);
    Ok(VolumeBoundReport { k, k_uncertainty: k_unc, per_decade, centers, bounded })
}

const VOLUME_BATCH: u64 = 1 << 14;

/// Rejection estimate of `𝔪(B_r(x))` from the space's enclosing box,
/// stratified over the orthants of the first (up to) three chart axes.
pub fn mc_ball_volume(space: &dyn MetricMeasureSpace, x: &[f64], r: f64, samples: u64, seed: u64, workers: Option<usize>) -> Measured {
    let (lo, hi) = space.ball_box(x, r);
    let dim = lo.len();
    let split = dim.min(3);
    let strata = 1u64 << split;
    let per = (samples / strata).max(1);
    let batches = per.div_ceil(VOLUME_BATCH);
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let stratum_volume = box_volume / strata as f64;
    let mut value = 0.0;
    let mut var = 0.0;
    for s in 0..strata {
        let hits: Vec<u64> = rng::run_batches(batches, workers, |b| {
            let mut st = rng::stream(seed, rng::tags::BALL_VOLUME, s * batches + b);
            let n = VOLUME_BATCH.min(per - b * VOLUME_BATCH);
            let mut y = vec![0.0; dim];
            let mut hits = 0;
            for _ in 0..n {
                for i in 0..dim {
                    let mid = 0.5 * (lo[i] + hi[i]);
                    let u: f64 = st.random();
                    y[i] = if i < split {
                        if (s >> i) & 1 == 0 {
                            lo[i] + u * (mid - lo[i])
                        } else {
                            mid + u * (hi[i] - mid)
                        }
                    } else {
                        lo[i] + u * (hi[i] - lo[i])
                    };
                }
                if space.distance(&y, x) < r {
                    hits += 1;
                }
            }
            hits
        });
        let p = hits.iter().sum::<u64>() as f64 / per as f64;
        value += stratum_volume * p;
        var += stratum_volume * stratum_volume * p * (1.0 - p) / per as f64;
    }
    Measured::monte_carlo(value, var.sqrt())
}

/// `∫_{B_R(x)^c} ρ̃_n(d(x, y)) d𝔪(y) = ∫_R^∞ ρ̃_n(t) 𝔪'(B_t) dt`, integrated in the
/// tail variable of the family.
pub fn tail_mollifier_mass(space: &dyn MetricMeasureSpace, family: &MollifierFamily, n: usize, _x: &[f64], r: f64) -> Result<Measured> {
    if !(r > family.domain_floor()) {
        return invalid(format!("R = {r} must exceed the family domain floor {}", family.domain_floor()));
    }
    let reach = space.diameter();
    if r >= reach {
        return Ok(Measured::exact(0.0));
    }
    let m = family.level(n);
    let profile = family.profile();
    let ln_w = |t: f64| if t >= reach { f64::NEG_INFINITY } else { space.ln_shell_density(t) - profile.ln_deriv(t) };
    let res = radial_integral(&m, |_| [1.0], ln_w, &[r, reach], QuadOptions::new(1e-15, 1e-12, 400))?;
    let value = res.value[0];
    let unc = res.error + value * space.volume_rel_stderr();
    let mut out = Measured::quadrature(value, unc);
    if space.volume_rel_stderr() > 0.0 {
        out.provenance = Provenance::MonteCarlo;
    }
    Ok(out)
}
