//! D-optimal ranking of the four single-step designs and the best sensor depth
//! for each parameter.
//!
//! `cargo run --release --example single_step_oed`

use moisture_oed::harness::single_step_designs;
use moisture_oed::oed::*;
use moisture_oed::*;

fn main() -> Result<()> {
    let model = MaterialModel::wood_fibre();
    let designs = single_step_designs();
    let opts = SearchOptions::default();
    let positions = opts.candidate_positions()?;
    let fields: Vec<_> = designs
        .iter()
        .map(|d| design_sensitivities(&model, d, &Parameter::ALL, &opts))
        .collect::<Result<_>>()?;

    for params in [vec![Parameter::D0], vec![Parameter::D1], vec![Parameter::A], vec![Parameter::D0, Parameter::D1]] {
        let mut scores = designs
            .iter()
            .zip(&fields)
            .map(|(d, f)| score_positions(f, &d.id, &params, &positions))
            .collect::<Result<Vec<_>>>()?;
        scores.sort_by(|a, b| b.best.psi.total_cmp(&a.best.psi));
        let label: Vec<&str> = params.iter().map(|p| p.label()).collect();
        println!("params ({})", label.join(", "));
        for s in &scores {
            println!("  {:<3} psi {:10.4e}  X = {:.4} m", s.best.plan.design_id, s.best.psi, s.best.x_opt());
        }
    }
    Ok(())
}
