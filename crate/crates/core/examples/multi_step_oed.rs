//! Multi-step designs: growth of the d0 criterion with step duration and the
//! best design for (d1, a), with parameter correlations at its optimum.
//!
//! `cargo run --release --example multi_step_oed [ranking.csv]`

use moisture_oed::harness::{multi_step, multi_step_designs};
use moisture_oed::oed::*;
use moisture_oed::*;

fn main() -> Result<()> {
    let model = MaterialModel::wood_fibre();
    let opts = SearchOptions::default();

    let family: Vec<_> = (9..=16).map(multi_step).collect::<Result<_>>()?;
    for s in search_optimal_plan(&model, &family, &[Parameter::D0], &opts)? {
        println!("d0  {:<4} psi {:10.4e}  X = {:.4} m", s.best.plan.design_id, s.best.psi, s.best.x_opt());
    }

    let scores = search_optimal_plan(&model, &multi_step_designs(), &[Parameter::D1, Parameter::A], &opts)?;
    for s in scores.iter().take(5) {
        let corr = s.best.correlation_between(Parameter::D1, Parameter::A).unwrap_or(f64::NAN);
        println!("(d1, a) {:<4} psi {:10.4e}  X = {:.4} m  corr {:+.3}", s.best.plan.design_id, s.best.psi, s.best.x_opt(), corr);
    }

    let best = &scores[0].best;
    let design = multi_step_designs().into_iter().find(|d| d.id == best.plan.design_id).unwrap();
    let fields = design_sensitivities(&model, &design, &Parameter::ALL, &opts)?;
    let all = fisher_matrix(&fields, &best.plan, &Parameter::ALL)?;
    println!("three-parameter correlations on {} at X = {:.4} m:\n{:.3}", design.id, best.x_opt(), all.correlation);

    if let Some(path) = std::env::args().nth(1) {
        write_ranking_csv(&scores, std::fs::File::create(&path)?)?;
    }
    Ok(())
}
