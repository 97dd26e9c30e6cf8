use std::f64::consts::PI;

use rand::Rng;

use super::{LineChart, MetricMeasureSpace, SpaceKind};
use crate::error::{invalid, Result};
use crate::measured::Measured;
use crate::rng::Stream;
use crate::volume_profiles::{make_power_profile, VolumeProfile};

/// Circle of radius `R` with arc-length distance; the chart coordinate is arc
/// length in `[−πR, πR)`.
#[derive(Debug, Clone)]
pub struct Circle {
    radius: f64,
}

pub fn make_circle(radius: f64) -> Result<Circle> {
    if !(radius > 0.0 && radius.is_finite()) {
        return invalid(format!("circle radius must be positive, got {radius}"));
    }
    Ok(Circle { radius })
}

impl Circle {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn wrap(&self, s: f64) -> f64 {
        let period = 2.0 * PI * self.radius;
        (s + 0.5 * period).rem_euclid(period) - 0.5 * period
    }
}

impl MetricMeasureSpace for Circle {
    fn kind(&self) -> SpaceKind {
        SpaceKind::Circle { radius: self.radius }
    }

    fn label(&self) -> String {
        format!("circle(R={})", self.radius)
    }

    fn chart_dim(&self) -> usize {
        1
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.wrap(x[0] - y[0]).abs()
    }

    fn ball_volume(&self, _x: &[f64], r: f64) -> Measured {
        Measured::exact((2.0 * r).min(2.0 * PI * self.radius))
    }

    fn shell_density(&self, r: f64) -> f64 {
        if r < PI * self.radius {
            2.0
        } else {
            0.0
        }
    }

    fn sample_ball(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let h = r.min(PI * self.radius);
        out[0] = self.wrap(center[0] + h * rng.random_range(-1.0..1.0));
    }

    fn sample_sphere(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]) {
        let h = if rng.random::<bool>() { r } else { -r };
        out[0] = self.wrap(center[0] + h);
    }

    fn random_point(&self, rng: &mut Stream, out: &mut [f64]) {
        out[0] = rng.random_range(-PI * self.radius..PI * self.radius);
    }

    fn ball_box(&self, x: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
        let h = r.min(PI * self.radius);
        (vec![x[0] - h], vec![x[0] + h])
    }

    fn diameter(&self) -> f64 {
        PI * self.radius
    }

    fn natural_profile(&self) -> VolumeProfile {
        make_power_profile(1).expect("N = 1 is valid")
    }

    fn exact_avr(&self) -> Option<Measured> {
        Some(Measured::exact(0.0))
    }

    fn line_chart(&self) -> Option<LineChart> {
        Some(LineChart::Circle { radius: self.radius })
    }
}
