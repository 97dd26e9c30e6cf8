use serde::Serialize;

/// How a number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Quadrature,
    MonteCarlo,
    Extrapolated,
}

/// A value together with its uncertainty and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    pub uncertainty: f64,
    pub provenance: Provenance,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Self { value, uncertainty: 0.0, provenance: Provenance::Exact }
    }

    pub fn quadrature(value: f64, uncertainty: f64) -> Self {
        Self { value, uncertainty, provenance: Provenance::Quadrature }
    }

    pub fn monte_carlo(value: f64, stderr: f64) -> Self {
        Self { value, uncertainty: stderr, provenance: Provenance::MonteCarlo }
    }

    pub fn extrapolated(value: f64, uncertainty: f64) -> Self {
        Self { value, uncertainty, provenance: Provenance::Extrapolated }
    }

    pub fn is_exact(&self) -> bool {
        self.provenance == Provenance::Exact
    }

    /// Scales value and uncertainty by a known constant.
    pub fn scale(self, k: f64) -> Self {
        Self { value: self.value * k, uncertainty: self.uncertainty * k.abs(), ..self }
    }
}
