//! Scaled sensitivity fields `Θ_m = (σ_p/σ_u) ∂u*/∂p*_m` of the dimensionless vapour
//! pressure with respect to the transport coefficients.
//!
//! `p*` is the dimensionless group of each coefficient (`d0/d_ref`, `d1/d_ref`,
//! `a L/d_ref`), so `Θ` is independent of the unit system. The tangent equations are
//! integrated together with the forward problem in one state vector.

use std::io::Write;

use crate::error::{Error, Result};
use crate::material::{MaterialModel, Parameter};
use crate::solver::{self, BoundaryDesign, FieldSolution, Grid1D, Scaling, Tolerances};

/// Default measurement standard deviation, in relative humidity.
pub const DEFAULT_SIGMA_U: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityField {
    pub parameter: Parameter,
    /// Output times, s.
    pub times: Vec<f64>,
    /// Row-major (time × cell), dimensionless.
    values: Vec<f64>,
    pub grid: Grid1D,
    /// Measurement standard deviation in units of `p_ref`.
    pub sigma_u: f64,
    pub sigma_p: f64,
    /// Time unit used for time integrals of the field, s.
    pub time_scale: f64,
}

impl SensitivityField {
    /// Wraps precomputed values (time × cell), mainly for synthetic fields.
    pub fn new(parameter: Parameter, times: Vec<f64>, values: Vec<f64>, grid: Grid1D, sigma_u: f64, time_scale: f64) -> Result<Self> {
        if values.len() != times.len() * grid.n_cells {
            return Err(Error::domain(format!(
                "sensitivity values have {} entries, expected {} × {}",
                values.len(),
                times.len(),
                grid.n_cells
            )));
        }
        if !(sigma_u > 0.0) || !(time_scale > 0.0) {
            return Err(Error::domain("sigma_u and time scale must be positive"));
        }
        Ok(SensitivityField { parameter, times, values, grid, sigma_u, sigma_p: 1.0, time_scale })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.n_cells;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize, cell: usize) -> f64 {
        self.values[k * self.grid.n_cells + cell]
    }

    /// Time series of `Θ` at position `x` (m), linear between cell centres.
    pub fn series_at(&self, x: f64) -> Result<Vec<f64>> {
        let (i0, i1, w) = self.grid.stencil(x)?;
        let n = self.grid.n_cells;
        Ok((0..self.times.len()).map(|k| (1.0 - w) * self.values[k * n + i0] + w * self.values[k * n + i1]).collect())
    }

    /// Same field for a different measurement standard deviation.
    pub fn with_sigma_u(&self, sigma_u: f64) -> Self {
        let k = self.sigma_u / sigma_u;
        SensitivityField { values: self.values.iter().map(|v| v * k).collect(), sigma_u, ..self.clone() }
    }

    /// Field multiplied by a constant.
    pub fn scaled(&self, k: f64) -> Self {
        SensitivityField { values: self.values.iter().map(|v| v * k).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Long-format CSV `t_s,x_m,theta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,x_m,theta")?;
        let xs = self.grid.cell_centers();
        for (k, t) in self.times.iter().enumerate() {
            for (x, v) in xs.iter().zip(self.row(k)) {
                writeln!(w, "{t},{x},{v}")?;
            }
        }
        Ok(())
    }
}

/// Forward field plus one sensitivity field per requested parameter, from a single
/// coupled solve.
pub fn solve_sensitivities(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    params: &[Parameter],
    tol: &Tolerances,
    output_times: &[f64],
    sigma_u: f64,
) -> Result<(FieldSolution, Vec<SensitivityField>)> {
    if params.is_empty() {
        return Err(Error::domain("no parameters requested"));
    }
    if (1..params.len()).any(|i| params[..i].contains(&params[i])) {
        return Err(Error::domain("duplicate parameter"));
    }
    if !(sigma_u > 0.0) {
        return Err(Error::domain("sigma_u must be positive"));
    }
    let run = solver::run_schedule(model, design, grid, tol, output_times, params)?;
    let blocks = 1 + params.len();
    let n = grid.n_cells;
    let field = solver::field_from_run(&run, grid, blocks);
    let fields = params
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            let values = run
                .states
                .chunks(n * blocks)
                .flat_map(|row| row[(m + 1) * n..(m + 2) * n].iter().map(|s| s / sigma_u))
                .collect();
            SensitivityField {
                parameter: p,
                times: run.times.clone(),
                values,
                grid: *grid,
                sigma_u,
                sigma_p: 1.0,
                time_scale: run.scaling.t_ref,
            }
        })
        .collect();
    Ok((field, fields))
}

/// Central finite-difference estimate of `Θ` for one parameter from two forward
/// solves at tolerances tightened 100×.
///
/// The step is `δ = rel_step·|p|`, or `rel_step` times the parameter's reference
/// scale when `p = 0`. Negative perturbed values of `a` are allowed here.
pub fn fd_sensitivity_oracle(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    parameter: Parameter,
    rel_step: f64,
    tol: &Tolerances,
    output_times: &[f64],
    sigma_u: f64,
) -> Result<SensitivityField> {
    if !(1e-6..=1e-2).contains(&rel_step) {
        return Err(Error::domain(format!("rel_step {rel_step} outside [1e-6, 1e-2]")));
    }
    let scaling = Scaling::new(model, grid.length)?;
    let p = model.transport.get(parameter);
    let delta = if p != 0.0 { rel_step * p.abs() } else { rel_step * scaling.parameter_scale(parameter) };
    let tight = tol.tightened(100.0);
    let solve = |value: f64| -> Result<FieldSolution> {
        let mut tr = model.transport;
        tr.set(parameter, value);
        let perturbed = MaterialModel { transport: tr, ..model.clone() };
        // skip validation of `a >= 0` so that the oracle works at a = 0
        let run = solver::run_schedule_unchecked(&perturbed, design, grid, &tight, output_times)?;
        Ok(solver::field_from_run(&run, grid, 1))
    };
    let plus = solve(p + delta)?;
    let minus = solve(p - delta)?;
    let factor = scaling.parameter_scale(parameter) / (2.0 * delta * scaling.p_ref * sigma_u);
    let values = plus.values().iter().zip(minus.values()).map(|(a, b)| (a - b) * factor).collect();
    Ok(SensitivityField {
        parameter,
        times: output_times.to_vec(),
        values,
        grid: *grid,
        sigma_u,
        sigma_p: 1.0,
        time_scale: scaling.t_ref,
    })
}

/// Relative discrete L2 distance `‖a − b‖ / ‖b‖` between two fields on the same base.
pub fn relative_l2_error(a: &SensitivityField, b: &SensitivityField) -> Result<f64> {
    if a.values.len() != b.values.len() || a.times != b.times {
        return Err(Error::domain("fields are on different bases"));
    }
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.values.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{uniform_output_times, HumidityStep};

    fn equilibrium() -> (MaterialModel, BoundaryDesign) {
        let mut model = MaterialModel::wood_fibre();
        model.transport.a = 0.0;
        let design = BoundaryDesign {
            id: "eq".into(),
            initial_phi: 0.5,
            schedule: vec![HumidityStep { duration: 20.0 * 3600.0, ambient_phi: 0.5 }],
            h: 9e-9,
            ambient_temperature: model.temperature,
        };
        (model, design)
    }

    #[test]
    fn equilibrium_has_zero_permeability_sensitivity() {
        let (model, design) = equilibrium();
        let grid = Grid1D::new(20, 0.08).unwrap();
        let times = uniform_output_times(design.total_duration(), 21);
        let (_, fields) =
            solve_sensitivities(&model, &design, &grid, &Parameter::ALL, &Tolerances::default(), &times, 0.02).unwrap();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].max_abs(), 0.0);
        assert_eq!(fields[1].max_abs(), 0.0);
        // advection of a uniform field piles moisture up against the sealed face
        assert!(fields[2].max_abs() > 1.0);
    }

    #[test]
    fn sigma_scaling_is_exact() {
        let (model, mut design) = equilibrium();
        design.initial_phi = 0.1;
        let grid = Grid1D::new(20, 0.08).unwrap();
        let times = uniform_output_times(design.total_duration(), 11);
        let (_, fields) =
            solve_sensitivities(&model, &design, &grid, &[Parameter::D0], &Tolerances::default(), &times, 0.02).unwrap();
        let halved = fields[0].with_sigma_u(0.04);
        for (a, b) in fields[0].values().iter().zip(halved.values()) {
            assert_eq!(*b, a * 0.5);
        }
        assert!(fields[0].row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_requests() {
        let (model, design) = equilibrium();
        let grid = Grid1D::new(20, 0.08).unwrap();
        let times = [0.0, 10.0];
        let tol = Tolerances::default();
        assert!(solve_sensitivities(&model, &design, &grid, &[], &tol, &times, 0.02).is_err());
        assert!(solve_sensitivities(&model, &design, &grid, &[Parameter::A, Parameter::A], &tol, &times, 0.02).is_err());
        assert!(fd_sensitivity_oracle(&model, &design, &grid, Parameter::D0, 0.1, &tol, &times, 0.02).is_err());
    }
}
