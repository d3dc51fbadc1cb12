//! Hygric material properties of a porous slab.
//!
//! Vapour pressure is the transport potential. The storage coefficient is
//! derived from the sorption curve `f(φ)` (equilibrium moisture content in
//! kg/m³) as `c = f'(φ) / P_s(T)`, the permeability is affine in relative
//! humidity and the advection coefficient `a = v / (R_v T)` is constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Specific gas constant of water vapour, J/(kg·K).
pub const GAS_CONSTANT_VAPOR: f64 = 461.5;

/// Highest polynomial degree accepted for a sorption curve.
pub const MAX_SORPTION_DEGREE: usize = 5;

const KELVIN_OFFSET: f64 = 273.15;

/// Saturation vapour pressure over liquid water (Pa).
///
/// Magnus-type correlation `611.85 · exp(17.269 θ / (θ + 237.3))` with `θ` in °C,
/// valid for 233 K < T < 373 K.
pub fn saturation_pressure(temperature: f64) -> Result<f64> {
    if !(temperature > 233.0 && temperature < 373.0) {
        return Err(Error::domain(format!(
            "saturation pressure correlation is valid for 233 K < T < 373 K, got {temperature} K"
        )));
    }
    let theta = temperature - KELVIN_OFFSET;
    Ok(611.85 * (17.269 * theta / (theta + 237.3)).exp())
}

fn check_fraction(phi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(Error::domain(format!("relative humidity {phi} outside [0, 1]")))
    }
}

/// Sorption isotherm `f(φ) = Σ w_k φ^k` in kg/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SorptionCurve {
    coeffs: Vec<f64>,
}

impl SorptionCurve {
    /// Grid used to check monotonicity on [0, 1].
    const CHECK_STEP: f64 = 1e-3;

    /// Builds a curve from ascending polynomial coefficients.
    ///
    /// The constant term must vanish and `f'` must be strictly positive on [0, 1].
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_SORPTION_DEGREE + 1 {
            return Err(Error::domain(format!(
                "sorption polynomial needs 1..={} coefficients, got {}",
                MAX_SORPTION_DEGREE + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("sorption coefficients must be finite"));
        }
        if coeffs[0] != 0.0 {
            return Err(Error::InvariantViolation(format!(
                "sorption curve must hold no moisture when dry, f(0) = {}",
                coeffs[0]
            )));
        }
        let curve = SorptionCurve { coeffs };
        let steps = (1.0 / Self::CHECK_STEP).round() as usize;
        let min_slope = (0..=steps)
            .map(|k| curve.slope(k as f64 * Self::CHECK_STEP))
            .fold(f64::INFINITY, f64::min);
        if min_slope <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "sorption curve is not strictly increasing on [0, 1] (min f' = {min_slope:.3e})"
            )));
        }
        Ok(curve)
    }

    /// `f(φ) = 40 φ³ − 49 φ² + 27.02 φ`, the a-priori wood fibre isotherm.
    pub fn wood_fibre() -> Self {
        SorptionCurve { coeffs: vec![0.0, 27.02, -49.0, 40.0] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Moisture content `f(φ)`, kg/m³. Evaluated as a polynomial for any `φ`.
    pub fn moisture_content(&self, phi: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &w| acc * phi + w)
    }

    /// `f'(φ)`.
    pub fn slope(&self, phi: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &w)| acc * phi + k as f64 * w)
    }

    /// `f''(φ)`.
    pub fn curvature(&self, phi: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &w)| acc * phi + (k * (k - 1)) as f64 * w)
    }

    /// Coefficients of `f'` in ascending order.
    pub(crate) fn slope_coefficients(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &w)| k as f64 * w)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for SorptionCurve {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        SorptionCurve::new(coeffs)
    }
}

impl From<SorptionCurve> for Vec<f64> {
    fn from(curve: SorptionCurve) -> Self {
        curve.coeffs
    }
}

/// Permeability `d(φ) = d0 + d1 φ` (s) and advection coefficient `a` (s/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCoefficients {
    pub d0: f64,
    pub d1: f64,
    pub a: f64,
}

impl TransportCoefficients {
    pub fn new(d0: f64, d1: f64, a: f64) -> Result<Self> {
        let t = TransportCoefficients { d0, d1, a };
        t.validate()?;
        Ok(t)
    }

    /// A-priori wood fibre values: `d = 2.33e-11 + 5.68e-11 φ`, `a = 7.2e-11`.
    pub fn wood_fibre() -> Self {
        TransportCoefficients { d0: 2.33e-11, d1: 5.68e-11, a: 7.2e-11 }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.d0, self.d1, self.a].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("transport coefficients must be finite"));
        }
        if self.d0 <= 0.0 || self.d0 + self.d1 <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "permeability must be positive on [0, 1] (d0 = {:e}, d1 = {:e})",
                self.d0, self.d1
            )));
        }
        if self.a < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "advection coefficient must be non-negative, got {:e}",
                self.a
            )));
        }
        Ok(())
    }

    pub fn get(&self, p: Parameter) -> f64 {
        match p {
            Parameter::D0 => self.d0,
            Parameter::D1 => self.d1,
            Parameter::A => self.a,
        }
    }

    pub fn set(&mut self, p: Parameter, value: f64) {
        match p {
            Parameter::D0 => self.d0 = value,
            Parameter::D1 => self.d1 = value,
            Parameter::A => self.a = value,
        }
    }
}

/// Unknown transport parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    D0,
    D1,
    A,
}

impl Parameter {
    pub const ALL: [Parameter; 3] = [Parameter::D0, Parameter::D1, Parameter::A];

    pub fn label(self) -> &'static str {
        match self {
            Parameter::D0 => "d0",
            Parameter::D1 => "d1",
            Parameter::A => "a",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Parameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d0" => Ok(Parameter::D0),
            "d1" => Ok(Parameter::D1),
            "a" => Ok(Parameter::A),
            other => Err(Error::domain(format!("unknown parameter label `{other}` (expected d0, d1 or a)"))),
        }
    }
}

/// Parses a comma separated parameter list such as `d1,a`.
pub fn parse_parameters(s: &str) -> Result<Vec<Parameter>> {
    let mut out: Vec<Parameter> = Vec::new();
    for tok in s.split(',').filter(|t| !t.trim().is_empty()) {
        let p: Parameter = tok.parse()?;
        if out.contains(&p) {
            return Err(Error::domain(format!("parameter `{p}` listed twice")));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::domain("empty parameter list"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub sorption: SorptionCurve,
    pub transport: TransportCoefficients,
    /// Material temperature, K.
    pub temperature: f64,
    #[serde(default = "default_rv")]
    pub gas_constant_rv: f64,
}

fn default_rv() -> f64 {
    GAS_CONSTANT_VAPOR
}

impl MaterialModel {
    pub fn new(sorption: SorptionCurve, transport: TransportCoefficients, temperature: f64) -> Result<Self> {
        let m = MaterialModel { sorption, transport, temperature, gas_constant_rv: GAS_CONSTANT_VAPOR };
        m.validate()?;
        Ok(m)
    }

    /// Wood fibre with a-priori properties at 24.5 °C.
    pub fn wood_fibre() -> Self {
        MaterialModel {
            sorption: SorptionCurve::wood_fibre(),
            transport: TransportCoefficients::wood_fibre(),
            temperature: 297.65,
            gas_constant_rv: GAS_CONSTANT_VAPOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::domain(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.gas_constant_rv > 0.0) {
            return Err(Error::domain("gas constant must be positive"));
        }
        self.transport.validate()?;
        saturation_pressure(self.temperature)?;
        Ok(())
    }

    pub fn with_transport(&self, transport: TransportCoefficients) -> Self {
        MaterialModel { transport, ..self.clone() }
    }

    pub fn saturation_pressure(&self) -> Result<f64> {
        saturation_pressure(self.temperature)
    }

    /// `d(φ) = d0 + d1 φ`, s.
    pub fn permeability(&self, phi: f64) -> Result<f64> {
        check_fraction(phi)?;
        Ok(self.permeability_unchecked(phi))
    }

    pub(crate) fn permeability_unchecked(&self, phi: f64) -> f64 {
        self.transport.d0 + self.transport.d1 * phi
    }

    /// `c(φ) = f'(φ) / P_s(T)`, kg/(m³·Pa).
    pub fn storage_coefficient(&self, phi: f64) -> Result<f64> {
        check_fraction(phi)?;
        let slope = self.sorption.slope(phi);
        if slope <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "storage coefficient is non-positive at φ = {phi} (f' = {slope:e})"
            )));
        }
        Ok(slope / self.saturation_pressure()?)
    }

    /// Mass average velocity `v = a R_v T`, m/s.
    pub fn advection_to_velocity(&self) -> f64 {
        self.transport.a * self.gas_constant_rv * self.temperature
    }

    /// Inverse of [`advection_to_velocity`](Self::advection_to_velocity).
    pub fn velocity_to_advection(&self, velocity: f64) -> f64 {
        velocity / (self.gas_constant_rv * self.temperature)
    }
}
