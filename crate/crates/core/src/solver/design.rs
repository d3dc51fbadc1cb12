use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::saturation_pressure;

/// Constant ambient humidity held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumidityStep {
    pub duration: f64,
    pub ambient_phi: f64,
}

/// Piecewise-constant ambient humidity at the exposed face (x = 0).
///
/// The slab starts in equilibrium at `initial_phi`; at t = 0 the ambient
/// humidity switches to the first step of `schedule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDesign {
    pub id: String,
    pub initial_phi: f64,
    pub schedule: Vec<HumidityStep>,
    /// Surface vapour transfer coefficient, s/m. Zero seals the surface.
    pub h: f64,
    /// Ambient air temperature, K.
    pub ambient_temperature: f64,
}

impl BoundaryDesign {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |phi: f64| phi > 0.0 && phi < 1.0;
        if !in_unit(self.initial_phi) {
            return Err(Error::domain(format!("design {}: initial humidity {} not in (0, 1)", self.id, self.initial_phi)));
        }
        if self.schedule.is_empty() {
            return Err(Error::domain(format!("design {}: empty schedule", self.id)));
        }
        for step in &self.schedule {
            if !(step.duration > 0.0 && step.duration.is_finite()) {
                return Err(Error::domain(format!("design {}: step duration must be positive", self.id)));
            }
            if !in_unit(step.ambient_phi) {
                return Err(Error::domain(format!(
                    "design {}: ambient humidity {} not in (0, 1)",
                    self.id, step.ambient_phi
                )));
            }
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::domain(format!("design {}: transfer coefficient must be >= 0", self.id)));
        }
        saturation_pressure(self.ambient_temperature)?;
        Ok(())
    }

    /// Sum of step durations, s.
    pub fn total_duration(&self) -> f64 {
        self.schedule.iter().map(|s| s.duration).sum()
    }

    /// Ambient humidity at time `t` (s). Step changes take effect at the start of each step.
    pub fn ambient_phi_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.initial_phi;
        }
        let mut end = 0.0;
        for step in &self.schedule {
            end += step.duration;
            if t < end {
                return step.ambient_phi;
            }
        }
        self.schedule.last().map(|s| s.ambient_phi).unwrap_or(self.initial_phi)
    }

    /// Start and end times (s) of each step.
    pub fn step_bounds(&self) -> Vec<(f64, f64)> {
        let mut t = 0.0;
        self.schedule
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                (start, t)
            })
            .collect()
    }

    /// Smallest and largest humidity the slab is exposed to, including its initial state.
    pub fn humidity_range(&self) -> (f64, f64) {
        self.schedule
            .iter()
            .map(|s| s.ambient_phi)
            .fold((self.initial_phi, self.initial_phi), |(lo, hi), p| (lo.min(p), hi.max(p)))
    }
}
