use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{ExperimentDataset, ReadingUnit};
use crate::material::MaterialModel;
use crate::solver::{sample_at, solve_forward, BoundaryDesign, Grid1D, Tolerances};

/// Humidity sensor: Gaussian noise, first-order response lag and a fixed sampling
/// interval. Noise is drawn from `ChaCha8Rng` seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Standard deviation, relative humidity fraction.
    pub noise_sigma: f64,
    /// Time constant of the sensor response, s. Zero is an ideal sensor.
    pub response_time: f64,
    pub sampling_interval: f64,
    pub seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { noise_sigma: 0.02, response_time: 0.0, sampling_interval: 600.0, seed: 0 }
    }
}

impl SensorModel {
    pub fn ideal(sampling_interval: f64) -> Self {
        SensorModel { noise_sigma: 0.0, response_time: 0.0, sampling_interval, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain("sensor noise sigma must be >= 0"));
        }
        if !(self.response_time >= 0.0 && self.response_time.is_finite()) {
            return Err(Error::domain("sensor response time must be >= 0"));
        }
        if !(self.sampling_interval > 0.0 && self.sampling_interval.is_finite()) {
            return Err(Error::domain("sampling interval must be positive"));
        }
        Ok(())
    }

    /// Sample times `0, Δ, 2Δ, ...` up to `duration`.
    pub fn sample_times(&self, duration: f64) -> Vec<f64> {
        let count = (duration / self.sampling_interval * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|k| k as f64 * self.sampling_interval).collect()
    }
}

/// First-order lag `τ y' = u − y`, exact for input that is linear between samples.
/// The output starts at the first input value.
pub fn first_order_lag(times: &[f64], signal: &[f64], time_constant: f64) -> Vec<f64> {
    if time_constant == 0.0 || signal.is_empty() {
        return signal.to_vec();
    }
    let mut out = Vec::with_capacity(signal.len());
    let mut y = signal[0];
    out.push(y);
    for k in 1..signal.len() {
        let dt = times[k] - times[k - 1];
        let e = (-dt / time_constant).exp();
        let (u0, u1) = (signal[k - 1], signal[k]);
        y = u1 + (y - u0) * e - (u1 - u0) * time_constant / dt * (1.0 - e);
        out.push(y);
    }
    out
}

/// Simulated sensor record at `sensor_x`.
///
/// Readings are relative humidity. If the noisy record leaves `(0, 1)` it is
/// stored as vapour pressure in Pa instead.
pub fn generate_synthetic_dataset(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    tol: &Tolerances,
    sensor_x: f64,
    sensor: &SensorModel,
) -> Result<ExperimentDataset> {
    sensor.validate()?;
    if !(sensor_x > 0.0 && sensor_x < grid.length) {
        return Err(Error::domain(format!("sensor position {sensor_x} m outside (0, {}) m", grid.length)));
    }
    let times = sensor.sample_times(design.total_duration());
    let solution = solve_forward(model, design, grid, tol, &times)?;
    let p_sat = model.saturation_pressure()?;
    let ideal: Vec<f64> = sample_at(&solution, sensor_x, &times)?.into_iter().map(|p| p / p_sat).collect();
    let mut readings = first_order_lag(&times, &ideal, sensor.response_time);
    if sensor.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(sensor.seed);
        let normal = Normal::new(0.0, sensor.noise_sigma).map_err(|e| Error::domain(e.to_string()))?;
        for r in readings.iter_mut() {
            *r += normal.sample(&mut rng);
        }
    }
    let mut ds = ExperimentDataset {
        design_id: design.id.clone(),
        sensor_position: sensor_x,
        times,
        readings,
        unit: ReadingUnit::Rh,
        noise_sigma: sensor.noise_sigma,
    };
    if ds.readings.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        ds.readings.iter_mut().for_each(|r| *r *= p_sat);
        ds.noise_sigma *= p_sat;
        ds.unit = ReadingUnit::Pa;
    }
    ds.validate()?;
    Ok(ds)
}
