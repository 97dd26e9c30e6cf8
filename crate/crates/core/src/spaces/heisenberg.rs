use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;

use super::{MetricMeasureSpace, SpaceKind};
use crate::measured::Measured;
use crate::rng::{self, Stream};
use crate::volume_profiles::{make_power_profile, VolumeProfile};

/// Samples used for the unit-ball volume of the gauge.
pub const GAUGE_SAMPLES: u64 = 10_000_000;
const GAUGE_SEED: u64 = 0x4e15_e1be_4600_0001;
const GAUGE_BATCH: u64 = 1 << 16;

/// Analytic volume of the unit gauge ball, `π²/8`.
pub const HEISENBERG_UNIT_BALL_EXACT: f64 = PI * PI / 8.0;

/// First Heisenberg group on `ℝ³` with law
/// `(x, y, τ)(x', y', τ') = (x + x', y + y', τ + τ' + (y x' − x y')/2)`,
/// the gauge `‖(x, y, τ)‖ = ((x² + y²)² + 16τ²)^{1/4}`, the left-invariant
/// distance `d(p, q) = ‖q⁻¹ p‖` and Lebesgue measure. Balls scale as `r⁴`.
#[derive(Debug, Clone)]
pub struct Heisenberg {
    unit_volume: Measured,
}

fn gauge(z: &[f64]) -> f64 {
    let h = z[0] * z[0] + z[1] * z[1];
    (h * h + 16.0 * z[2] * z[2]).sqrt().sqrt()
}

fn mul(p: &[f64], q: &[f64], out: &mut [f64]) {
    let t = p[2] + q[2] + 0.5 * (p[1] * q[0] - p[0] * q[1]);
    out[0] = p[0] + q[0];
    out[1] = p[1] + q[1];
    out[2] = t;
}

fn unit_ball_point(rng: &mut Stream) -> [f64; 3] {
    loop {
        let z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.25..0.25)];
        if gauge(&z) < 1.0 {
            return z;
        }
    }
}

/// Rejection estimate of the unit-ball volume from the box `[−1,1]²×[−¼,¼]`,
/// stratified over the 8 octants.
pub fn gauge_constant_mc(samples: u64, seed: u64, workers: Option<usize>) -> Measured {
    let per_octant = (samples / 8).max(1);
    let batches = per_octant.div_ceil(GAUGE_BATCH);
    let octant_volume = 2.0 * 2.0 * 0.5 / 8.0;
    let mut value = 0.0;
    let mut var = 0.0;
    for octant in 0..8u64 {
        let sx = if octant & 1 == 0 { 1.0 } else { -1.0 };
        let sy = if octant & 2 == 0 { 1.0 } else { -1.0 };
        let st = if octant & 4 == 0 { 1.0 } else { -1.0 };
        let hits: Vec<u64> = rng::run_batches(batches, workers, |b| {
            let mut s = rng::stream(seed, rng::tags::GAUGE_CONSTANT, octant * batches + b);
            let n = GAUGE_BATCH.min(per_octant - b * GAUGE_BATCH);
            let mut hits = 0;
            for _ in 0..n {
                let z = [sx * s.random::<f64>(), sy * s.random::<f64>(), st * 0.25 * s.random::<f64>()];
                if gauge(&z) < 1.0 {
                    hits += 1;
                }
            }
            hits
        });
        let p = hits.iter().sum::<u64>() as f64 / per_octant as f64;
        value += octant_volume * p;
        var += octant_volume * octant_volume * p * (1.0 - p) / per_octant as f64;
    }
    Measured::monte_carlo(value, var.sqrt())
}

fn default_unit_volume() -> Measured {
    static CELL: OnceLock<Measured> = OnceLock::new();
    *CELL.get_or_init(|| gauge_constant_mc(GAUGE_SAMPLES, GAUGE_SEED, None))
}

/// The gauge group with its unit-ball volume estimated once by Monte Carlo.
pub fn make_heisenberg() -> Heisenberg {
    Heisenberg { unit_volume: default_unit_volume() }
}

/// The gauge group with a caller-supplied unit-ball volume.
pub fn make_heisenberg_with(unit_volume: Measured) -> Heisenberg {
    Heisenberg { unit_volume }
}

impl Heisenberg {
    pub fn unit_volume(&self) -> Measured {
        self.unit_volume
    }

    pub fn gauge(z: &[f64]) -> f64 {
        gauge(z)
    }

    pub fn product(p: &[f64], q: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        mul(p, q, &mut out);
        out
    }

    pub fn dilate(z: &[f64], lambda: f64) -> [f64; 3] {
        [lambda * z[0], lambda * z[1], lambda * lambda * z[2]]
    }
}

impl MetricMeasureSpace for Heisenberg {
    fn kind(&self) -> SpaceKind {
        SpaceKind::Heisenberg { gauge: "((x^2+y^2)^2+16t^2)^(1/4)".into() }
    }

    fn label(&self) -> String {
        "heisenberg".into()
    }

    fn chart_dim(&self) -> usize {
        3
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut z = [0.0; 3];
        mul(&[-y[0], -y[1], -y[2]], x, &mut z);
        gauge(&z)
    }

    fn ball_volume(&self, _x: &[f64], r: f64) -> Measured {
        self.unit_volume.scale(r.powi(4))
    }

    fn shell_density(&self, r: f64) -> f64 {
        4.0 * self.unit_volume.value * r.powi(3)
    }

    fn ln_shell_density(&self, r: f64) -> f64 {
        (4.0 * self.unit_volume.value).ln() + 3.0 * r.ln()
    }

    fn volume_rel_stderr(&self) -> f64 {
        self.unit_volume.uncertainty / self.unit_volume.value
    }

    fn sample_ball(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let z = Self::dilate(&unit_ball_point(rng), r);
        mul(center, &z, out);
    }

    fn sample_sphere(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let z = unit_ball_point(rng);
        let g = gauge(&z);
        if g == 0.0 {
            return self.sample_sphere(center, r, rng, out);
        }
        let theta = Self::dilate(&z, r / g);
        mul(center, &theta, out);
    }

    fn random_point(&self, rng: &mut Stream, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = rng.random_range(-3.0..3.0);
        }
    }

    fn ball_box(&self, x: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
        let ht = 0.25 * r * r + 0.5 * r * (x[0].abs() + x[1].abs());
        (vec![x[0] - r, x[1] - r, x[2] - ht], vec![x[0] + r, x[1] + r, x[2] + ht])
    }

    fn natural_profile(&self) -> VolumeProfile {
        make_power_profile(4).expect("N = 4 is valid")
    }

    fn exact_avr(&self) -> Option<Measured> {
        None
    }

    fn rcd_dimension(&self) -> Option<u32> {
        Some(4)
    }

    fn notes(&self) -> Vec<String> {
        vec!["homogeneous gauge distance used in place of the Carnot-Caratheodory distance".into()]
    }
}
