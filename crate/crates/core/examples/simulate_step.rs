//! Forward solve of the single-step design S2 (10 % -> 75 %) and the humidity
//! seen by sensors at a few depths.
//!
//! `cargo run --release --example simulate_step [out.csv]`

use moisture_oed::harness::single_step;
use moisture_oed::solver::{sample_at, solve_forward, uniform_output_times};
use moisture_oed::*;

fn main() -> Result<()> {
    let model = MaterialModel::wood_fibre();
    let design = single_step(2)?;
    let grid = Grid1D::facility();
    let times = uniform_output_times(design.total_duration(), 201);
    let solution = solve_forward(&model, &design, &grid, &Tolerances::default(), &times)?;
    println!(
        "{}: {} accepted / {} rejected steps, max RH {:.3}",
        design.id,
        solution.accepted_step_count,
        solution.rejected_step_count,
        solution.max_relative_humidity()
    );

    let p_sat = model.saturation_pressure()?;
    let depths = [0.01, 0.04, 0.07];
    let traces: Vec<Vec<f64>> = depths.iter().map(|&x| sample_at(&solution, x, &times)).collect::<Result<_>>()?;
    println!("{:>8} {}", "t [h]", depths.map(|x| format!("RH@{x:.2}m")).join("  "));
    for k in (0..times.len()).step_by(20) {
        let row: Vec<String> = traces.iter().map(|tr| format!("{:>9.4}", tr[k] / p_sat)).collect();
        println!("{:>8.1} {}", times[k] / 3600.0, row.join(" "));
    }

    if let Some(path) = std::env::args().nth(1) {
        solution.write_csv(std::fs::File::create(&path)?)?;
        println!("field written to {path}");
    }
    Ok(())
}
