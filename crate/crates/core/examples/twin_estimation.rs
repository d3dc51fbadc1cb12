//! Twin experiment: synthetic sensor records from S2 (informing d0) and M16
//! (informing d1 and a) at known coefficients, then recovery from the prior.
//!
//! `cargo run --release --example twin_estimation [noise_sigma] [seed]`

use moisture_oed::harness::{find_design, generate_synthetic_dataset, SensorModel};
use moisture_oed::inverse::*;
use moisture_oed::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let prior = MaterialModel::wood_fibre();
    let truth = TransportCoefficients::new(4.45e-11, 2.58e-11, 8.3e-10)?;
    let grid = Grid1D::facility();
    let tol = Tolerances::default();
    let mut bindings = Vec::new();
    for (id, x, informs) in [("S2", 0.0784, vec![Parameter::D0]), ("M16", 0.0792, vec![Parameter::D1, Parameter::A])] {
        let design = find_design(id)?;
        let sensor = SensorModel { noise_sigma: noise, response_time: 0.0, sampling_interval: 600.0, seed };
        let dataset = generate_synthetic_dataset(&prior.with_transport(truth), &design, &grid, &tol, x, &sensor)?;
        bindings.push(DatasetBinding { dataset, design, informs });
    }
    let mut problem = EstimationProblem::new(prior.clone(), bindings);
    problem.bounds[2].1 = 100.0 * prior.transport.a;

    let (_, cond) = joint_fisher(&problem, &truth, 0.02)?;
    println!("joint Fisher condition number at the truth: {cond:.3e}");

    let report = estimate(&problem)?;
    for p in Parameter::ALL {
        let (e, t) = (report.estimate.get(p), truth.get(p));
        println!("{:<2} prior {:.3e}  estimate {:.4e}  truth {:.3e}  ({:+.2} %)", p, prior.transport.get(p), e, t, 100.0 * (e / t - 1.0));
    }
    println!(
        "cost {:.3e} -> {:.3e}, {} forward solves, {} iterations: {}",
        report.cost_initial, report.cost_final, report.forward_solve_count, report.iterations, report.termination
    );
    for r in &report.residuals {
        let d = residual_statistics(r)?;
        println!("residual rms {:.3e}, lag-1 autocorrelation {:+.3}", d.rms, d.lag1_autocorrelation);
    }
    Ok(())
}
