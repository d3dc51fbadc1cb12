//! Stability of the single-step d0 ranking when the prior coefficients vary by
//! ±10 % (Halton samples over the box).
//!
//! `cargo run --release --example prior_sweep [samples]`

use moisture_oed::harness::single_step_designs;
use moisture_oed::oed::*;
use moisture_oed::*;

fn main() -> Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let model = MaterialModel::wood_fibre();
    let prior = PriorBox::relative(&model.transport, 0.1);
    let report = prior_sweep(&model, &prior, n, &single_step_designs(), &[Parameter::D0], &SearchOptions::default())?;
    for s in &report.samples {
        let t = &s.transport;
        match (&s.winner, s.x_opt, &s.failure) {
            (Some(w), Some(x), _) => println!("{:>3}: d0 {:.3e} d1 {:.3e} a {:.3e} -> {w} at {x:.4} m", s.index, t.d0, t.d1, t.a),
            (_, _, failure) => println!("{:>3}: failed ({})", s.index, failure.as_deref().unwrap_or("unknown")),
        }
    }
    println!("winners {:?}", report.winner_counts);
    if let (Some(lo), Some(hi), Some(mean)) = (report.x_opt_min, report.x_opt_max, report.x_opt_mean) {
        println!("X range [{lo:.4}, {hi:.4}] m, mean {mean:.4} m");
    }
    Ok(())
}
