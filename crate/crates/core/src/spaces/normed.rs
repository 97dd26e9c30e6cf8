use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::{gamma, ln_gamma};

use super::{LineChart, MetricMeasureSpace, SpaceKind};
use crate::error::{invalid, Result};
use crate::measured::Measured;
use crate::rng::Stream;
use crate::volume_profiles::{make_power_profile, VolumeProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Euclidean,
    Lq(f64),
    Max,
}

/// `(ℝ^N, ‖x − y‖, Lebesgue)`.
#[derive(Debug, Clone)]
pub struct NormedSpace {
    n: u32,
    norm: Norm,
    unit_volume: f64,
    profile: VolumeProfile,
    gamma: Option<Gamma<f64>>,
}

/// `ω_N = π^{N/2} / Γ(N/2 + 1)`.
pub fn unit_ball_volume(n: u32) -> f64 {
    // ω_N = ω_{N−2} · 2π/N
    let mut w = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

/// Lebesgue volume of the unit `ℓ^q` ball in `ℝ^N`.
pub fn lq_unit_ball_volume(n: u32, q: f64) -> f64 {
    if q.is_infinite() {
        return 2f64.powi(n as i32);
    }
    let n = n as f64;
    (n * (2.0 * gamma(1.0 + 1.0 / q)).ln() - ln_gamma(1.0 + n / q)).exp()
}

pub fn make_euclidean(n: u32) -> Result<NormedSpace> {
    if n == 0 {
        return invalid("dimension must be positive");
    }
    Ok(NormedSpace { n, norm: Norm::Euclidean, unit_volume: unit_ball_volume(n), profile: make_power_profile(n)?, gamma: None })
}

/// `ℓ^q` norm on `ℝ^N`; `q = +∞` gives the max norm.
pub fn make_normed(n: u32, q: f64) -> Result<NormedSpace> {
    if n == 0 {
        return invalid("dimension must be positive");
    }
    if !(q >= 1.0) {
        return invalid(format!("norm exponent must be >= 1, got {q}"));
    }
    if q == 2.0 {
        return make_euclidean(n);
    }
    let (norm, gamma) = if q.is_infinite() {
        (Norm::Max, None)
    } else {
        (Norm::Lq(q), Some(Gamma::new(1.0 / q, 1.0).map_err(|e| crate::Error::InvalidParameter(e.to_string()))?))
    };
    Ok(NormedSpace { n, norm, unit_volume: lq_unit_ball_volume(n, q), profile: make_power_profile(n)?, gamma })
}

impl NormedSpace {
    pub fn dimension(&self) -> u32 {
        self.n
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn unit_volume(&self) -> f64 {
        self.unit_volume
    }

    fn norm_of(&self, z: &[f64]) -> f64 {
        match self.norm {
            Norm::Euclidean => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Lq(q) => {
                let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                m * z.iter().map(|v| (v.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
            }
            Norm::Max => z.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    /// Cone-measure direction on the unit sphere, written to `out`.
    fn direction(&self, rng: &mut Stream, out: &mut [f64]) {
        loop {
            match self.norm {
                Norm::Euclidean => {
                    for o in out.iter_mut() {
                        *o = StandardNormal.sample(rng);
                    }
                }
                Norm::Lq(q) => {
                    let g = self.gamma.as_ref().expect("gamma law for finite q");
                    for o in out.iter_mut() {
                        let mag: f64 = g.sample(rng).powf(1.0 / q);
                        *o = if rng.random::<bool>() { mag } else { -mag };
                    }
                }
                Norm::Max => {
                    for o in out.iter_mut() {
                        *o = rng.random_range(-1.0..1.0);
                    }
                }
            }
            let s = self.norm_of(out);
            if s > 0.0 && s.is_finite() {
                out.iter_mut().for_each(|o| *o /= s);
                return;
            }
        }
    }
}

impl MetricMeasureSpace for NormedSpace {
    fn kind(&self) -> SpaceKind {
        match self.norm {
            Norm::Euclidean => SpaceKind::Euclidean { n: self.n },
            Norm::Lq(q) => SpaceKind::Normed { n: self.n, q },
            Norm::Max => SpaceKind::Normed { n: self.n, q: f64::INFINITY },
        }
    }

    fn label(&self) -> String {
        match self.norm {
            Norm::Euclidean => format!("euclidean{}", self.n),
            Norm::Lq(q) => format!("l{q}^{}", self.n),
            Norm::Max => format!("linf^{}", self.n),
        }
    }

    fn chart_dim(&self) -> usize {
        self.n as usize
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.norm {
            Norm::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            _ => {
                let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                self.norm_of(&z)
            }
        }
    }

    fn ball_volume(&self, _x: &[f64], r: f64) -> Measured {
        Measured::exact(self.unit_volume * r.powi(self.n as i32))
    }

    fn shell_density(&self, r: f64) -> f64 {
        self.n as f64 * self.unit_volume * r.powi(self.n as i32 - 1)
    }

    fn ln_shell_density(&self, r: f64) -> f64 {
        (self.n as f64 * self.unit_volume).ln() + (self.n as f64 - 1.0) * r.ln()
    }

    fn sample_ball(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        self.direction(rng, out);
        let rad = r * rng.random::<f64>().powf(1.0 / self.n as f64);
        for (o, c) in out.iter_mut().zip(center) {
            *o = c + rad * *o;
        }
    }

    fn sample_sphere(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        self.direction(rng, out);
        for (o, c) in out.iter_mut().zip(center) {
            *o = c + r * *o;
        }
    }

    fn random_point(&self, rng: &mut Stream, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = rng.random_range(-10.0..10.0);
        }
    }

    fn ball_box(&self, x: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
        (x.iter().map(|c| c - r).collect(), x.iter().map(|c| c + r).collect())
    }

    fn natural_profile(&self) -> VolumeProfile {
        self.profile.clone()
    }

    fn exact_avr(&self) -> Option<Measured> {
        Some(Measured::exact(self.unit_volume))
    }

    fn rcd_dimension(&self) -> Option<u32> {
        (self.norm == Norm::Euclidean).then_some(self.n)
    }

    fn line_chart(&self) -> Option<LineChart> {
        (self.n == 1).then_some(LineChart::Line)
    }
}
