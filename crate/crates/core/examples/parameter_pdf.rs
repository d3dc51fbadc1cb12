//! Linearized distribution of d0 implied by a 0.15 % RH measurement error on
//! S2, and how its width changes over the experiment.
//!
//! `cargo run --release --example parameter_pdf [x_m]`

use moisture_oed::harness::single_step;
use moisture_oed::inverse::*;
use moisture_oed::sensitivity::solve_sensitivities;
use moisture_oed::solver::{uniform_output_times, Scaling};
use moisture_oed::*;

fn main() -> Result<()> {
    let x: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0784);
    let model = MaterialModel::wood_fibre();
    let design = single_step(2)?;
    let grid = Grid1D::facility();
    let times = uniform_output_times(design.total_duration(), 401);
    let (_, fields) = solve_sensitivities(&model, &design, &grid, &[Parameter::D0], &Tolerances::default(), &times, 1.0)?;
    let series = fields[0].series_at(x)?;

    let scaling = Scaling::new(&model, grid.length)?;
    let scale = scaling.parameter_scale(Parameter::D0);
    let sigma_u = DEFAULT_PDF_SIGMA * model.saturation_pressure()? / scaling.p_ref;
    let d0 = model.transport.d0;
    for k in (40..times.len()).step_by(40) {
        let sd = parameter_sd(sigma_u, series[k])? * scale;
        println!("t = {:6.1} h  sd(d0) = {:.3e} ({:5.2} %)", times[k] / 3600.0, sd, 100.0 * sd / d0);
    }

    let k = (1..series.len()).max_by(|&i, &j| series[i].abs().total_cmp(&series[j].abs())).unwrap();
    let theta = series[k] / scale;
    let sd = parameter_sd(sigma_u, theta)?;
    let queries: Vec<f64> = (0..=8).map(|i| d0 + sd * (i as f64 - 4.0)).collect();
    println!("narrowest at t = {:.1} h:", times[k] / 3600.0);
    for (p, pdf, cdf) in parameter_pdf_curve(sigma_u, theta, d0, &queries)? {
        println!("  d0 = {p:.4e}  pdf {pdf:.4e}  cdf {cdf:.4}");
    }
    Ok(())
}
