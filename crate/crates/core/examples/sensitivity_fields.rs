//! Sensitivity of the vapour pressure to d0, d1 and a on design S2, checked
//! against central finite differences.
//!
//! `cargo run --release --example sensitivity_fields`

use moisture_oed::harness::single_step;
use moisture_oed::sensitivity::*;
use moisture_oed::solver::uniform_output_times;
use moisture_oed::*;

fn main() -> Result<()> {
    let model = MaterialModel::wood_fibre();
    let design = single_step(2)?;
    let grid = Grid1D::facility();
    let tol = Tolerances::default();
    let times = uniform_output_times(design.total_duration(), 401);
    let (_, fields) = solve_sensitivities(&model, &design, &grid, &Parameter::ALL, &tol, &times, DEFAULT_SIGMA_U)?;

    for f in &fields {
        let series = f.series_at(0.06)?;
        let k = (0..series.len()).max_by(|&i, &j| series[i].abs().total_cmp(&series[j].abs())).unwrap_or(0);
        let fd = fd_sensitivity_oracle(&model, &design, &grid, f.parameter, 1e-4, &tol, &times, DEFAULT_SIGMA_U)?;
        println!(
            "theta_{:<2} max |theta| {:8.3}, at x = 0.06 m peak {:8.3} at {:6.1} h, rel. L2 vs finite differences {:.1e}",
            f.parameter,
            f.max_abs(),
            series[k],
            times[k] / 3600.0,
            relative_l2_error(f, &fd)?
        );
    }
    Ok(())
}
