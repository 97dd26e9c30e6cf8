//! Concrete metric measure spaces and the geometric validators.
//!
//! Every implemented space is homogeneous (ball volumes do not depend on the
//! centre), which lets the energy estimators parametrize `y` by its distance
//! `r = d(x, y)` and a point on the metric sphere.

mod circle;
mod heisenberg;
mod normed;
mod validators;
mod warped;

pub use circle::{make_circle, Circle};
pub use heisenberg::{gauge_constant_mc, make_heisenberg, make_heisenberg_with, Heisenberg, GAUGE_SAMPLES, HEISENBERG_UNIT_BALL_EXACT};
pub use normed::{lq_unit_ball_volume, make_euclidean, make_normed, unit_ball_volume, Norm, NormedSpace};
pub use validators::{
    check_bgi, check_volume_bound, estimate_avr, estimate_density, mc_ball_volume, tail_mollifier_mass, BgiReport, VolumeBoundReport,
};
pub use warped::{make_warped_line, WarpedLine};

use serde::Serialize;

use crate::measured::Measured;
use crate::rng::Stream;
use crate::volume_profiles::{ProfileKind, VolumeProfile};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean { n: u32 },
    Normed { n: u32, q: f64 },
    WarpedLine { profile: ProfileKind },
    Circle { radius: f64 },
    Heisenberg { gauge: String },
}

/// How a one-dimensional space sits on its real chart: the two points at
/// distance `r` from `x` are `x ± displacement(r)` (wrapped on the circle).
#[derive(Debug, Clone)]
pub enum LineChart {
    Line,
    Warped(VolumeProfile),
    Circle { radius: f64 },
}

impl LineChart {
    pub fn displacement(&self, r: f64) -> f64 {
        match self {
            LineChart::Line | LineChart::Circle { .. } => r,
            LineChart::Warped(v) => v.eval(r),
        }
    }

    /// Distance corresponding to a chart displacement.
    pub fn distance_of_displacement(&self, h: f64) -> f64 {
        match self {
            LineChart::Line => h,
            LineChart::Warped(v) => v.inverse(h),
            LineChart::Circle { radius } => {
                let period = 2.0 * std::f64::consts::PI * radius;
                let m = h.rem_euclid(period);
                m.min(period - m)
            }
        }
    }

    /// Distance `r` with `displacement(r) = h`.
    pub fn inverse_displacement(&self, h: f64) -> f64 {
        match self {
            LineChart::Line | LineChart::Circle { .. } => h,
            LineChart::Warped(v) => v.inverse(h),
        }
    }

    /// Largest distance realized (πR on the circle).
    pub fn reach(&self) -> f64 {
        match self {
            LineChart::Circle { radius } => std::f64::consts::PI * radius,
            _ => f64::INFINITY,
        }
    }

    /// Chart period, if any.
    pub fn period(&self) -> Option<f64> {
        match self {
            LineChart::Circle { radius } => Some(2.0 * std::f64::consts::PI * radius),
            _ => None,
        }
    }
}

/// A homogeneous metric measure space `(X, d, 𝔪)` on a coordinate chart.
pub trait MetricMeasureSpace: Send + Sync {
    fn kind(&self) -> SpaceKind;

    fn label(&self) -> String;

    fn chart_dim(&self) -> usize;

    fn distance(&self, x: &[f64], y: &[f64]) -> f64;

    /// `𝔪(B_r(x))`.
    fn ball_volume(&self, x: &[f64], r: f64) -> Measured;

    /// `d/dr 𝔪(B_r(x))`, the same for every centre.
    fn shell_density(&self, r: f64) -> f64;

    /// `ln` of [`shell_density`](Self::shell_density), finite for huge `r`.
    fn ln_shell_density(&self, r: f64) -> f64 {
        self.shell_density(r).ln()
    }

    /// Relative standard error shared by all volumes (0 when exact).
    fn volume_rel_stderr(&self) -> f64 {
        0.0
    }

    /// Writes a point uniformly distributed (w.r.t. 𝔪) in `B_r(center)`.
    fn sample_ball(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]);

    /// Writes a point at distance exactly `r` from `center`, distributed as the
    /// disintegration of 𝔪 along the spheres about `center`.
    fn sample_sphere(&self, center: &[f64], r: f64, rng: &mut Stream, out: &mut [f64]);

    /// A chart point spread over a bounded window, used as a random centre.
    fn random_point(&self, rng: &mut Stream, out: &mut [f64]);

    /// An axis box in the chart containing `B_r(x)`.
    fn ball_box(&self, x: &[f64], r: f64) -> (Vec<f64>, Vec<f64>);

    fn base_point(&self) -> Vec<f64> {
        vec![0.0; self.chart_dim()]
    }

    fn diameter(&self) -> f64 {
        f64::INFINITY
    }

    fn natural_profile(&self) -> VolumeProfile;

    /// Closed-form asymptotic volume ratio against the natural profile.
    fn exact_avr(&self) -> Option<Measured>;

    /// `N` when the space is `N`-homogeneous with unit-ball volume at most `ω_N`
    /// relative to `t^N`, so that the non-collapsed bound applies.
    fn rcd_dimension(&self) -> Option<u32> {
        None
    }

    fn line_chart(&self) -> Option<LineChart> {
        None
    }

    /// Remarks carried into reports.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }
}

/// A boxed space.
pub type DynSpace = Box<dyn MetricMeasureSpace>;

#[cfg(test)]
mod tests;
