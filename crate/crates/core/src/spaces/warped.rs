use rand::Rng;

use super::{LineChart, MetricMeasureSpace, SpaceKind};
use crate::error::{invalid, Result};
use crate::measured::Measured;
use crate::rng::{self, Stream};
use crate::volume_profiles::VolumeProfile;

/// `(ℝ, V^{-1}(|x − y|), length)`: balls are intervals of half-length `V(r)`,
/// so `𝔪(B_r) = 2V(r)` and the ratio against `V` is identically 2.
#[derive(Debug, Clone)]
pub struct WarpedLine {
    profile: VolumeProfile,
}

const SUBADDITIVITY_PAIRS: u64 = 10_000;
const SUBADDITIVITY_SEED: u64 = 0x5eed_0001;

/// Accepts `V` only if `V^{-1}(a + b) ≤ V^{-1}(a) + V^{-1}(b)` on random pairs,
/// which is what makes `V^{-1}(|x − y|)` a metric.
pub fn make_warped_line(profile: VolumeProfile) -> Result<WarpedLine> {
    if profile.domain_floor() > 0.0 {
        return invalid("warped line needs a profile defined from 0");
    }
    let mut stream = rng::stream(SUBADDITIVITY_SEED, rng::tags::PROPERTY, 0);
    for _ in 0..SUBADDITIVITY_PAIRS {
        let a = 10f64.powf(stream.random_range(-6.0..6.0));
        let b = 10f64.powf(stream.random_range(-6.0..6.0));
        let lhs = profile.inverse(a + b);
        let rhs = profile.inverse(a) + profile.inverse(b);
        if !(lhs <= rhs * (1.0 + 1e-12)) {
            return invalid(format!("V^-1 is not subadditive: V^-1({a}+{b}) = {lhs} > {rhs}"));
        }
    }
    Ok(WarpedLine { profile })
}

impl WarpedLine {
    pub fn profile(&self) -> &VolumeProfile {
        &self.profile
    }
}

impl MetricMeasureSpace for WarpedLine {
    fn kind(&self) -> SpaceKind {
        SpaceKind::WarpedLine { profile: self.profile.kind().clone() }
    }

    fn label(&self) -> String {
        "warped_line".into()
    }

    fn chart_dim(&self) -> usize {
        1
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.profile.inverse((x[0] - y[0]).abs())
    }

    fn ball_volume(&self, _x: &[f64], r: f64) -> Measured {
        Measured::exact(2.0 * self.profile.eval(r))
    }

    fn shell_density(&self, r: f64) -> f64 {
        2.0 * self.profile.deriv(r)
    }

    fn ln_shell_density(&self, r: f64) -> f64 {
        std::f64::consts::LN_2 + self.profile.ln_deriv(r)
    }

    fn sample_ball(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let h = self.profile.eval(r);
        out[0] = center[0] + h * rng.random_range(-1.0..1.0);
    }

    fn sample_sphere(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let h = self.profile.eval(r);
        out[0] = if rng.random::<bool>() { center[0] + h } else { center[0] - h };
    }

    fn random_point(&self, rng: &mut Stream, out: &mut [f64]) {
        out[0] = rng.random_range(-10.0..10.0);
    }

    fn ball_box(&self, x: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.profile.eval(r);
        (vec![x[0] - h], vec![x[0] + h])
    }

    fn natural_profile(&self) -> VolumeProfile {
        self.profile.clone()
    }

    fn exact_avr(&self) -> Option<Measured> {
        Some(Measured::exact(2.0))
    }

    fn rcd_dimension(&self) -> Option<u32> {
        (self.profile.power_exponent() == Some(1)).then_some(1)
    }

    fn line_chart(&self) -> Option<LineChart> {
        Some(LineChart::Warped(self.profile.clone()))
    }
}
