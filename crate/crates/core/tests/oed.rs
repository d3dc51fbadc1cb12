use approx::assert_relative_eq;
use moisture_oed::harness::{multi_step, single_step, single_step_designs};
use moisture_oed::oed::*;
use moisture_oed::sensitivity::*;
use moisture_oed::*;

fn s2_fields(n_times: usize) -> Vec<SensitivityField> {
    let opts = SearchOptions { n_times, ..SearchOptions::default() };
    design_sensitivities(&MaterialModel::wood_fibre(), &single_step(2).unwrap(), &Parameter::ALL, &opts).unwrap()
}

#[test]
fn scale_equivariance() {
    let fields = s2_fields(2001);
    let positions = SearchOptions::default().candidate_positions().unwrap();
    let scaled: Vec<SensitivityField> = fields.iter().map(|f| f.scaled(2.0)).collect();
    for params in [vec![Parameter::D0], vec![Parameter::D1, Parameter::A], Parameter::ALL.to_vec()] {
        let a = score_positions(&fields, "S2", &params, &positions).unwrap();
        let b = score_positions(&scaled, "S2", &params, &positions).unwrap();
        let k = 2f64.powi(2 * params.len() as i32);
        assert_relative_eq!(b.best.psi, k * a.best.psi, max_relative = 1e-12);
        assert_eq!(a.best.x_opt(), b.best.x_opt());
    }
}

#[test]
fn fisher_matrix_properties() {
    let fields = s2_fields(2001);
    for x in [0.01, 0.04, 0.07] {
        let plan = MeasurementPlan::new("S2", vec![x], 200.0 * 3600.0, 0.08).unwrap();
        let r = fisher_matrix(&fields, &plan, &Parameter::ALL).unwrap();
        assert_eq!(r.matrix, r.matrix.transpose());
        let trace = r.matrix.trace();
        let eig = r.matrix.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e >= -1e-10 * trace));
        assert!(r.psi >= -1e-10 * trace);
        for i in 0..3 {
            assert_eq!(r.correlation[(i, i)], 1.0);
            for j in 0..3 {
                assert!(r.correlation[(i, j)].abs() <= 1.0);
            }
        }
    }
}

#[test]
fn quadrature_is_converged() {
    let coarse = s2_fields(2001);
    let fine = s2_fields(4001);
    for x in [0.02, 0.05, 0.0792] {
        let plan = MeasurementPlan::new("S2", vec![x], 200.0 * 3600.0, 0.08).unwrap();
        let a = fisher_matrix(&coarse, &plan, &Parameter::ALL).unwrap();
        let b = fisher_matrix(&fine, &plan, &Parameter::ALL).unwrap();
        for (u, v) in a.matrix.iter().zip(b.matrix.iter()) {
            assert!((u - v).abs() <= 5e-3 * v.abs(), "{u} vs {v}");
        }
    }
}

#[test]
fn mismatched_fields_are_rejected() {
    let a = s2_fields(11);
    let b = s2_fields(21);
    let mixed = vec![a[0].clone(), b[1].clone()];
    let plan = MeasurementPlan::new("S2", vec![0.04], 200.0 * 3600.0, 0.08).unwrap();
    assert!(fisher_matrix(&mixed, &plan, &[Parameter::D0, Parameter::D1]).is_err());
}

#[test]
fn d0_prefers_design_2_among_single_steps() {
    let scores =
        search_optimal_plan(&MaterialModel::wood_fibre(), &single_step_designs(), &[Parameter::D0], &SearchOptions::default())
            .unwrap();
    assert_eq!(scores[0].best.plan.design_id, "S2");
    assert!(scores.windows(2).all(|w| w[0].best.psi >= w[1].best.psi));
    assert_eq!(scores[0].curve.len(), 99);
}

#[test]
fn d0_criterion_grows_with_step_duration() {
    let model = MaterialModel::wood_fibre();
    let designs: Vec<_> = (9..=16).map(|k| multi_step(k).unwrap()).collect();
    let mut scores = search_optimal_plan(&model, &designs, &[Parameter::D0], &SearchOptions::default()).unwrap();
    scores.sort_by_key(|s| s.best.plan.design_id[1..].parse::<usize>().unwrap());
    for w in scores.windows(2) {
        assert!(w[1].best.psi >= w[0].best.psi, "{} -> {}", w[0].best.plan.design_id, w[1].best.plan.design_id);
    }
}

#[test]
fn search_is_deterministic_and_validates() {
    let model = MaterialModel::wood_fibre();
    let designs = vec![single_step(1).unwrap(), single_step(3).unwrap()];
    let opts = SearchOptions { n_times: 501, ..SearchOptions::default() };
    let a = search_optimal_plan(&model, &designs, &[Parameter::D1], &opts).unwrap();
    let b = search_optimal_plan(&model, &designs, &[Parameter::D1], &opts).unwrap();
    assert_eq!(a, b);
    assert!(search_optimal_plan(&model, &[], &[Parameter::D1], &opts).is_err());
    assert!(search_optimal_plan(&model, &designs, &[], &opts).is_err());
}

#[test]
fn prior_sweep_with_degenerate_box_repeats_direct_search() {
    let model = MaterialModel::wood_fibre();
    let designs = single_step_designs();
    let opts = SearchOptions { n_times: 501, ..SearchOptions::default() };
    let direct = search_optimal_plan(&model, &designs, &[Parameter::D0], &opts).unwrap();
    let prior = PriorBox::relative(&model.transport, 0.0);
    let report = prior_sweep(&model, &prior, 3, &designs, &[Parameter::D0], &opts).unwrap();
    assert_eq!(report.samples.len(), 3);
    for s in &report.samples {
        assert_eq!(s.winner.as_deref(), Some(direct[0].best.plan.design_id.as_str()));
        assert_eq!(s.x_opt, Some(direct[0].best.x_opt()));
    }
    assert!(prior_sweep(&model, &prior, 0, &designs, &[Parameter::D0], &opts).is_err());
}

#[test]
fn prior_sweep_ranking_is_stable_under_ten_percent_perturbation() {
    let model = MaterialModel::wood_fibre();
    let prior = PriorBox::relative(&model.transport, 0.1);
    let report = prior_sweep(&model, &prior, 16, &single_step_designs(), &[Parameter::D0], &SearchOptions::default()).unwrap();
    let wins = report.winner_counts.get("S2").copied().unwrap_or(0);
    assert!(wins >= 14, "S2 won {wins}/16: {:?}", report.winner_counts);
    assert_eq!(report.most_frequent_winner().unwrap().0, "S2");
}
