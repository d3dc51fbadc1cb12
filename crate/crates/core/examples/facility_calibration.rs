//! Facility calibration: surface transfer coefficient from the mass loss of an
//! evaporating water cup, and the humidity uncertainty budget of a sensor.
//!
//! `cargo run --release --example facility_calibration`

use moisture_oed::harness::{FACILITY_H, FACILITY_TEMPERATURE};
use moisture_oed::inverse::*;
use moisture_oed::material::saturation_pressure;
use moisture_oed::Result;

fn main() -> Result<()> {
    let (t, phi, area) = (FACILITY_TEMPERATURE, 0.33, 0.0079);
    // cup weighed every hour for four days, losing mass at the facility's rate
    let rate = FACILITY_H * saturation_pressure(t)? * (1.0 - phi) * area;
    let times: Vec<f64> = (0..96).map(|k| k as f64 * 3600.0).collect();
    let masses: Vec<f64> = times.iter().enumerate().map(|(k, s)| 0.150 - rate * s + 2e-6 * ((k * 7919 % 13) as f64 - 6.0) / 6.0).collect();
    let h = estimate_h_from_mass_series(&times, &masses, t, t, phi, area)?;
    println!("mass loss {:.3e} kg/s -> h = {:.3e} s/m", rate, h);

    for (phi, gradient) in [(0.10, 0.04), (0.50, 2.0), (0.75, 8.0)] {
        let (position, sensor) = uncertainty_contributions(gradient, 1e-4, 0.02);
        let total = total_measurement_uncertainty(phi, gradient, 1e-4, 0.02)?;
        println!("RH {phi:.2}, dRH/dx {gradient:>4} 1/m: position {position:.1e}, sensor {sensor:.2}, total {total:.4}");
    }
    Ok(())
}
