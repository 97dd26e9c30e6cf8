//! Experiment configuration files (TOML).

use std::path::Path;

use nonlocal_core::asymptotics::{Model, MsOptions, Normalization};
use nonlocal_core::energy::{EnergyOptions, Method, TestFunction, TestKind};
use nonlocal_core::mollifiers::{make_family, Generator, Ladder, MollifierFamily, DEFAULT_S_LADDER};
use nonlocal_core::spaces::{make_circle, make_euclidean, make_heisenberg, make_normed, make_warped_line, DynSpace};
use nonlocal_core::volume_profiles::{make_hyperbolic_profile, make_power_profile, VolumeProfile};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Power { n: u32 },
    Hyperbolic { k: f64, n: u32 },
    ExpMinusOne,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<VolumeProfile, CliError> {
        Ok(match self {
            ProfileSpec::Power { n } => make_power_profile(*n)?,
            ProfileSpec::Hyperbolic { k, n } => make_hyperbolic_profile(*k, *n)?,
            ProfileSpec::ExpMinusOne => VolumeProfile::exp_minus_one(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Euclidean { n: u32 },
    Normed { n: u32, q: f64 },
    WarpedLine { profile: ProfileSpec },
    Circle { radius: f64 },
    Heisenberg,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<DynSpace, CliError> {
        Ok(match self {
            SpaceSpec::Euclidean { n } => Box::new(make_euclidean(*n)?),
            SpaceSpec::Normed { n, q } => Box::new(make_normed(*n, *q)?),
            SpaceSpec::WarpedLine { profile } => Box::new(make_warped_line(profile.build()?)?),
            SpaceSpec::Circle { radius } => Box::new(make_circle(*radius)?),
            SpaceSpec::Heisenberg => Box::new(make_heisenberg()),
        })
    }

    fn natural_profile(&self) -> ProfileSpec {
        match self {
            SpaceSpec::Euclidean { n } | SpaceSpec::Normed { n, .. } => ProfileSpec::Power { n: *n },
            SpaceSpec::WarpedLine { profile } => profile.clone(),
            SpaceSpec::Circle { .. } => ProfileSpec::Power { n: 1 },
            SpaceSpec::Heisenberg => ProfileSpec::Power { n: 4 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `alpha` defaults to `1/N` for `V = t^N`
    Power { alpha: Option<f64> },
    Exp,
    Log,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    /// `a_n = s_n · p`
    pub s: Option<Vec<f64>>,
    /// explicit `a_n`
    pub a: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub kind: TestKindSpec,
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKindSpec {
    BallIndicator,
    Tent,
    SmoothBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Auto,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default = "default_method")]
    pub method: MethodSpec,
    #[serde(default = "default_samples")]
    pub samples: u64,
    pub seed: Option<u64>,
    pub r0: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_method() -> MethodSpec {
    MethodSpec::Auto
}
fn default_samples() -> u64 {
    1_000_000
}
fn default_tol() -> f64 {
    1e-8
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self { method: default_method(), samples: default_samples(), seed: None, r0: None, tol: default_tol() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Affine,
    Quadratic,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationSpec {
    Mollifier,
    SOutside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsSpec {
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_tolerance")]
    pub absolute_floor: f64,
    #[serde(default = "default_normalization")]
    pub normalization: NormalizationSpec,
}

fn default_model() -> ModelSpec {
    ModelSpec::Auto
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_normalization() -> NormalizationSpec {
    NormalizationSpec::Mollifier
}

impl Default for MsSpec {
    fn default() -> Self {
        Self { model: default_model(), tolerance: default_tolerance(), absolute_floor: default_tolerance(), normalization: default_normalization() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    #[serde(default = "default_tail_r")]
    pub r: Vec<f64>,
    /// number of centres; the first is the base point, the rest random
    #[serde(default = "default_centers")]
    pub centers: usize,
    /// fixed `R` of the region-A decay check
    pub region_a_r: Option<f64>,
    /// relative tolerance on the iterated limit against the AVR
    #[serde(default = "default_limit_tol")]
    pub limit_tolerance: f64,
}

fn default_tail_r() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0, 10000.0]
}
fn default_centers() -> usize {
    4
}
fn default_limit_tol() -> f64 {
    0.01
}

impl Default for TailSpec {
    fn default() -> Self {
        Self { r: default_tail_r(), centers: default_centers(), region_a_r: None, limit_tolerance: default_limit_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    #[serde(default = "default_decompose_r")]
    pub r: Vec<f64>,
}

fn default_decompose_r() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}

impl Default for DecomposeSpec {
    fn default() -> Self {
        Self { r: default_decompose_r() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvrSpec {
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_centers_vb")]
    pub centers: usize,
}

fn default_r_min() -> f64 {
    1e-2
}
fn default_r_max() -> f64 {
    1e3
}
fn default_points() -> usize {
    16
}
fn default_centers_vb() -> usize {
    16
}

impl Default for AvrSpec {
    fn default() -> Self {
        Self { r_min: default_r_min(), r_max: default_r_max(), points: default_points(), centers: default_centers_vb() }
    }
}

/// One experiment. Every optional section is filled with its defaults before
/// the config is echoed into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub space: SpaceSpec,
    pub profile: Option<ProfileSpec>,
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub ladder: LadderSpec,
    pub test_function: Option<TestFunctionSpec>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub ms: MsSpec,
    #[serde(default)]
    pub tails: TailSpec,
    #[serde(default)]
    pub decompose: DecomposeSpec,
    #[serde(default)]
    pub avr: AvrSpec,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    cfg.fill_defaults();
    Ok(cfg)
}

impl ExperimentConfig {
    fn fill_defaults(&mut self) {
        if self.profile.is_none() {
            self.profile = Some(self.space.natural_profile());
        }
        let n = match self.profile {
            Some(ProfileSpec::Power { n }) => Some(n),
            _ => None,
        };
        match &mut self.generator {
            None => self.generator = Some(GeneratorSpec::Power { alpha: n.map(|n| 1.0 / n as f64) }),
            Some(GeneratorSpec::Power { alpha }) if alpha.is_none() => *alpha = n.map(|n| 1.0 / n as f64),
            _ => {}
        }
        if self.ladder.s.is_none() && self.ladder.a.is_none() {
            self.ladder.s = Some(DEFAULT_S_LADDER.to_vec());
        }
        if let Some(tf) = &mut self.test_function {
            if tf.center.is_none() {
                tf.center = Some(vec![0.0; self.space.chart_dim()]);
            }
        }
    }

    pub fn profile(&self) -> Result<VolumeProfile, CliError> {
        self.profile.as_ref().expect("filled").build()
    }

    pub fn generator(&self) -> Result<Generator, CliError> {
        Ok(match self.generator.as_ref().expect("filled") {
            GeneratorSpec::Power { alpha: Some(a) } => Generator::power(*a)?,
            GeneratorSpec::Power { alpha: None } => return Err(CliError::Usage("power generator needs alpha for a non-power profile".into())),
            GeneratorSpec::Exp => Generator::Exp,
            GeneratorSpec::Log => Generator::Log,
        })
    }

    /// The ladder in `a`; `s` ladders need the test function's `p`.
    pub fn ladder(&self) -> Result<Ladder, CliError> {
        match (&self.ladder.s, &self.ladder.a) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either ladder.s or ladder.a, not both".into())),
            (_, Some(a)) => Ok(Ladder::explicit(a.clone())),
            (Some(s), None) => {
                let p = self.test_function.as_ref().map_or(1.0, |t| t.p);
                Ok(Ladder::s_times_p(s.clone(), p))
            }
            (None, None) => unreachable!("filled"),
        }
    }

    /// The family, validated.
    pub fn family(&self) -> Result<MollifierFamily, CliError> {
        Ok(make_family(self.generator()?, self.profile()?, self.ladder()?)?)
    }

    /// The family without ladder validation, for reporting on broken ladders.
    pub fn family_unchecked(&self) -> Result<MollifierFamily, CliError> {
        Ok(MollifierFamily::unchecked(self.generator()?, self.profile()?, self.ladder()?))
    }

    pub fn test_function(&self) -> Result<TestFunction, CliError> {
        let tf = self.test_function.as_ref().ok_or_else(|| CliError::Usage("this command needs a [test_function] section".into()))?;
        let kind = match tf.kind {
            TestKindSpec::BallIndicator => TestKind::BallIndicator,
            TestKindSpec::Tent => TestKind::Tent,
            TestKindSpec::SmoothBump => TestKind::SmoothBump,
        };
        let center = tf.center.clone().expect("filled");
        if center.len() != self.space.chart_dim() {
            return Err(CliError::Usage(format!("test_function.center needs {} coordinates", self.space.chart_dim())));
        }
        Ok(TestFunction::new(kind, center, tf.radius, tf.p)?)
    }

    /// Monte Carlo is used when requested, or by `auto` off one-dimensional charts.
    pub fn uses_monte_carlo(&self) -> bool {
        match self.estimator.method {
            MethodSpec::MonteCarlo => true,
            MethodSpec::Quadrature => false,
            MethodSpec::Auto => self.space.chart_dim() != 1,
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.estimator.seed.ok_or_else(|| CliError::Usage("Monte Carlo scenario needs estimator.seed (or --seed)".into()))
    }

    pub fn energy_options(&self, workers: Option<usize>) -> EnergyOptions {
        let e = &self.estimator;
        EnergyOptions {
            method: match e.method {
                MethodSpec::Auto => Method::Auto,
                MethodSpec::Quadrature => Method::Quadrature,
                MethodSpec::MonteCarlo => Method::MonteCarlo,
            },
            r0: e.r0,
            tol: e.tol,
            samples: e.samples,
            seed: e.seed,
            workers,
        }
    }

    pub fn ms_options(&self, workers: Option<usize>, validate: bool) -> MsOptions {
        MsOptions {
            energy: self.energy_options(workers),
            model: match self.ms.model {
                ModelSpec::Affine => Model::Affine,
                ModelSpec::Quadratic => Model::Quadratic,
                ModelSpec::Auto => Model::Auto,
            },
            tolerance: self.ms.tolerance,
            absolute_floor: self.ms.absolute_floor,
            normalization: match self.ms.normalization {
                NormalizationSpec::Mollifier => Normalization::Mollifier,
                NormalizationSpec::SOutside => Normalization::SOutside,
            },
            validate,
        }
    }
}

impl SpaceSpec {
    pub fn chart_dim(&self) -> usize {
        match self {
            SpaceSpec::Euclidean { n } | SpaceSpec::Normed { n, .. } => *n as usize,
            SpaceSpec::WarpedLine { .. } | SpaceSpec::Circle { .. } => 1,
            SpaceSpec::Heisenberg => 3,
        }
    }
}
