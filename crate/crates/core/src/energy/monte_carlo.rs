use rand::Rng;

use super::{default_r0, ln_shell_ratio, near_bias_bound, Components, EnergyEstimate, EnergyOptions, Method, Split, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::measured::Provenance;
use crate::mollifiers::MollifierFamily;
use crate::radial::R_HUGE;
use crate::rng::{self, tags};
use crate::spaces::MetricMeasureSpace;

const BATCH: u64 = 8192;
/// Lower end of the sampled near band, relative to `r0`.
const NEAR_FLOOR: f64 = 1e-3;

/// Importance-sampled energy. Far part (`d ≥ r0`): `x` uniform in `S`, `r` by
/// inverse CDF of the family's radial law above `r0`, `y` on the metric sphere.
/// Near part: the same with `r` restricted to `[r0·10⁻³, r0)`; pairs closer
/// than that are covered by a deterministic bound.
pub fn energy_mc(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, n: usize, opts: &EnergyOptions) -> Result<EnergyEstimate> {
    let m = family.level(n);
    let r0 = opts.r0.unwrap_or_else(|| default_r0(&m, u));
    let comps = run(space, u, family, n, opts, &Split::NearFar { r0 })?;
    Ok(comps.into_estimate(n, m.a(), opts, Method::MonteCarlo))
}

/// Per-batch sums, merged in batch order.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: u64,
    comp: [f64; 3],
    comp_sq: [f64; 3],
    total: f64,
    total_sq: f64,
    residual: f64,
}

impl Sums {
    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        for k in 0..3 {
            self.comp[k] += o.comp[k];
            self.comp_sq[k] += o.comp_sq[k];
        }
        self.total += o.total;
        self.total_sq += o.total_sq;
        self.residual = self.residual.max(o.residual);
    }

    fn mean_se(sum: f64, sq: f64, n: u64) -> (f64, f64) {
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
        (mean, (var / nf).sqrt())
    }
}

pub(crate) fn run(space: &dyn MetricMeasureSpace, u: &TestFunction, family: &MollifierFamily, n: usize, opts: &EnergyOptions, split: &Split) -> Result<Components> {
    let seed = match opts.seed {
        Some(s) => s,
        None => return invalid("Monte Carlo energy needs a seed"),
    };
    if opts.samples < 16 {
        return invalid("too few samples");
    }
    let dim = space.chart_dim();
    if u.center.len() != dim {
        return invalid("test function centre has the wrong dimension");
    }
    let m = family.level(n);
    let floor = family.domain_floor();
    let r0 = match opts.r0 {
        Some(r) => r,
        None => default_r0(&m, u),
    };
    if !(r0 > floor) {
        return invalid(format!("cutoff r0 = {r0} must exceed the family domain floor {floor}"));
    }
    let delta_lo = (r0 * NEAR_FLOOR).max(floor * (1.0 + 1e-6)).min(r0);
    let ms = space.ball_volume(&u.center, u.radius).value;
    let t_r0 = m.tail_or_inf(r0);
    let t_lo = m.tail_or_inf(delta_lo);
    if !t_r0.is_finite() || !t_lo.is_finite() {
        return Err(Error::Domain("tail mass at the cutoff is not finite".into()));
    }
    let near_mass = t_lo - t_r0;
    let ln_w = ln_shell_ratio(space, family);
    let bias = near_bias_bound(space, u, family, &m, delta_lo)?;

    let n_far = opts.samples - opts.samples / 4;
    let n_near = opts.samples / 4;
    let anchor = split.anchor().map(|a| a.to_vec());
    let near_split = match split {
        Split::NearFar { .. } => Split::NearFar { r0 },
        s => s.clone(),
    };

    let p = u.p;
    let contribution = |x: &[f64], y: &[f64], r: f64, at_infinity: bool, scale: f64| -> (f64, usize) {
        let ux = u.eval(space, x);
        let (uy, outside) = if at_infinity { (0.0, true) } else { (u.eval(space, y), !u.in_support(space, y)) };
        let diff = (ux - uy).abs();
        let dx0 = anchor.as_ref().map_or(0.0, |a| space.distance(x, a));
        let dy0 = match &anchor {
            Some(_) if at_infinity => f64::INFINITY,
            Some(a) => space.distance(y, a),
            None => 0.0,
        };
        let k = near_split.component(r, dx0, dy0);
        if diff == 0.0 {
            return (0.0, k);
        }
        let w = ln_w(r.min(R_HUGE)).exp();
        (scale * w * (1.0 + f64::from(u8::from(outside))) * diff.powf(p), k)
    };

    let batch_sums = |tag: u64, count: u64, far: bool| -> Vec<Sums> {
        let batches = count.div_ceil(BATCH);
        rng::run_batches(batches, opts.workers, |b| {
            let mut s = rng::stream(seed, tag, b);
            let k_here = BATCH.min(count - b * BATCH);
            let mut x = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            let mut acc = Sums::default();
            for _ in 0..k_here {
                space.sample_ball(&u.center, u.radius, &mut s, &mut x);
                let q: f64 = 1.0 - s.random::<f64>();
                let (r, scale) = if far {
                    (m.radius_from_ln_tail(q.ln() + t_r0.ln()), ms * t_r0)
                } else {
                    (m.sample_radius_in_band(delta_lo, r0, q), ms * near_mass)
                };
                let at_infinity = !(r < R_HUGE);
                if !at_infinity {
                    space.sample_sphere(&x, r, &mut s, &mut y);
                }
                let at_infinity = at_infinity || y.iter().any(|v| !v.is_finite());
                let (v, k) = contribution(&x, &y, r, at_infinity, scale);
                let mut comp = [0.0; 3];
                comp[k] = v;
                acc.n += 1;
                for j in 0..3 {
                    acc.comp[j] += comp[j];
                    acc.comp_sq[j] += comp[j] * comp[j];
                }
                acc.total += v;
                acc.total_sq += v * v;
            }
            if acc.total != 0.0 {
                acc.residual = (acc.comp.iter().sum::<f64>() - acc.total).abs() / acc.total.abs();
            }
            acc
        })
    };

    let mut far = Sums::default();
    for b in batch_sums(tags::ENERGY_FAR, n_far, true) {
        far.merge(&b);
    }
    let mut near = Sums::default();
    if n_near > 0 && near_mass > 0.0 {
        for b in batch_sums(tags::ENERGY_NEAR, n_near, false) {
            near.merge(&b);
        }
    }

    let mut value = [0.0; 3];
    let mut var = [0.0; 3];
    for (sums, _) in [(&far, 0), (&near, 1)] {
        if sums.n == 0 {
            continue;
        }
        for k in 0..3 {
            let (mu, se) = Sums::mean_se(sums.comp[k], sums.comp_sq[k], sums.n);
            value[k] += mu;
            var[k] += se * se;
        }
    }
    let (far_mean, far_se) = Sums::mean_se(far.total, far.total_sq, far.n);
    let (near_mean, near_se) = if near.n > 0 { Sums::mean_se(near.total, near.total_sq, near.n) } else { (0.0, 0.0) };
    let total = far_mean + near_mean;
    let total_stderr = far_se.hypot(near_se);
    if !total.is_finite() || !total_stderr.is_finite() {
        return Err(Error::NonFinite(format!("Monte Carlo energy: value {total}, stderr {total_stderr}")));
    }
    let stderr = [var[0].sqrt(), var[1].sqrt(), var[2].sqrt()];
    // near/far reporting: components are [near, far, 0] for the energy split
    let (value, stderr) = match split {
        Split::NearFar { .. } => ([near_mean, far_mean, 0.0], [near_se, far_se, 0.0]),
        Split::Regions { .. } => (value, stderr),
    };
    let vol_rel = space.volume_rel_stderr();
    Ok(Components {
        value,
        stderr,
        total,
        total_stderr: total_stderr + total * vol_rel,
        error: 0.0,
        bias,
        residual: far.residual.max(near.residual),
        provenance: Provenance::MonteCarlo,
        converged: true,
        r0,
        samples: n_far + n_near,
    })
}
