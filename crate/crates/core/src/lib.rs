//! Numerical toolkit for nonlocal energies of the form
//! `∬ |u(x) - u(y)|^p ρ̃_n(d(x, y)) dμ dμ` on metric measure spaces and their
//! limits as the mollifier parameter `a_n → 0`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod measured;
pub mod mollifiers;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod spaces;
pub mod volume_profiles;

pub use error::{Error, Result};
pub use measured::{Measured, Provenance};
pub use mollifiers::{make_family, Generator, Ladder, Mollifier, MollifierFamily};
pub use volume_profiles::{make_hyperbolic_profile, make_power_profile, VolumeProfile};
