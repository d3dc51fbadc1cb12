//! Parameter estimation from sensor records, residual diagnostics, linearized
//! parameter distributions and facility calibration formulas.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::material::{saturation_pressure, MaterialModel, Parameter, TransportCoefficients};
use crate::oed::{fisher_matrix, MeasurementPlan};
use crate::sensitivity::solve_sensitivities;
use crate::solver::{self, uniform_output_times, BoundaryDesign, Grid1D, Scaling, Tolerances};

/// Standard deviation used for parameter distributions, in relative humidity.
pub const DEFAULT_PDF_SIGMA: f64 = 0.0015;
/// Largest change of any `ln p` in one optimizer step.
const MAX_LOG_STEP: f64 = 0.5;
/// Forward-solve budget of one estimation.
pub const DEFAULT_MAX_FORWARD_SOLVES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadingUnit {
    /// Relative humidity fraction.
    Rh,
    /// Vapour pressure, Pa.
    Pa,
}

impl ReadingUnit {
    pub fn label(self) -> &'static str {
        match self {
            ReadingUnit::Rh => "rh",
            ReadingUnit::Pa => "pa",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rh" => Ok(ReadingUnit::Rh),
            "pa" => Ok(ReadingUnit::Pa),
            other => Err(Error::domain(format!("unknown reading unit {other:?}"))),
        }
    }
}

/// Time series recorded by one sensor during one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    pub design_id: String,
    /// Sensor position, m.
    pub sensor_position: f64,
    /// Sample times, s.
    pub times: Vec<f64>,
    pub readings: Vec<f64>,
    pub unit: ReadingUnit,
    /// Measurement standard deviation, in `unit`.
    pub noise_sigma: f64,
}

#[derive(Debug, Deserialize)]
struct DatasetRow {
    time_s: f64,
    reading: f64,
    unit: String,
}

impl ExperimentDataset {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.readings.len() {
            return Err(Error::domain("times and readings differ in length"));
        }
        if self.times.is_empty() {
            return Err(Error::domain("dataset is empty"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("dataset times must be strictly increasing"));
        }
        let ok = match self.unit {
            ReadingUnit::Rh => self.readings.iter().all(|&r| r > 0.0 && r < 1.0),
            ReadingUnit::Pa => self.readings.iter().all(|&r| r > 0.0 && r.is_finite()),
        };
        if !ok {
            return Err(Error::domain(format!("readings out of range for unit {}", self.unit.label())));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::domain("noise sigma must be non-negative"));
        }
        Ok(())
    }

    /// Readings as vapour pressure in units of `scaling.p_ref`. Humidity readings
    /// are converted with the saturation pressure at the material temperature.
    pub fn dimensionless(&self, model: &MaterialModel, scaling: &Scaling) -> Result<Vec<f64>> {
        let factor = match self.unit {
            ReadingUnit::Rh => model.saturation_pressure()? / scaling.p_ref,
            ReadingUnit::Pa => 1.0 / scaling.p_ref,
        };
        Ok(self.readings.iter().map(|r| r * factor).collect())
    }

    /// CSV with `# key: value` metadata lines followed by `time_s,reading,unit` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# design_id: {}", self.design_id)?;
        writeln!(w, "# sensor_position_m: {}", self.sensor_position)?;
        writeln!(w, "# noise_sigma: {}", self.noise_sigma)?;
        writeln!(w, "time_s,reading,unit")?;
        for (t, r) in self.times.iter().zip(&self.readings) {
            writeln!(w, "{t},{r},{}", self.unit.label())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut design_id = None;
        let mut sensor_position = None;
        let mut noise_sigma = 0.0;
        let mut body = String::new();
        for line in reader.lines() {
            let line = line?;
            if let Some(meta) = line.trim_start().strip_prefix('#') {
                if let Some((key, value)) = meta.split_once(':') {
                    let value = value.trim();
                    let num = || value.parse::<f64>().map_err(|_| Error::domain(format!("bad metadata value {value:?}")));
                    match key.trim() {
                        "design_id" => design_id = Some(value.to_string()),
                        "sensor_position_m" => sensor_position = Some(num()?),
                        "noise_sigma" => noise_sigma = num()?,
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut times = Vec::new();
        let mut readings = Vec::new();
        let mut unit = None;
        for row in csv::Reader::from_reader(body.as_bytes()).deserialize() {
            let row: DatasetRow = row?;
            let u = ReadingUnit::parse(&row.unit)?;
            if unit.is_some_and(|prev| prev != u) {
                return Err(Error::domain("mixed reading units in one dataset"));
            }
            unit = Some(u);
            times.push(row.time_s);
            readings.push(row.reading);
        }
        let ds = ExperimentDataset {
            design_id: design_id.ok_or_else(|| Error::domain("dataset lacks '# design_id:' metadata"))?,
            sensor_position: sensor_position.ok_or_else(|| Error::domain("dataset lacks '# sensor_position_m:' metadata"))?,
            times,
            readings,
            unit: unit.unwrap_or(ReadingUnit::Rh),
            noise_sigma,
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// A dataset, the boundary design it was recorded under and the parameters it is
/// meant to inform.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBinding {
    pub dataset: ExperimentDataset,
    pub design: BoundaryDesign,
    pub informs: Vec<Parameter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    pub datasets: Vec<DatasetBinding>,
    /// `[lo, hi]` for `(d0, d1, a)`.
    pub bounds: [(f64, f64); 3],
    pub initial_guess: TransportCoefficients,
    pub model_template: MaterialModel,
    pub grid: Grid1D,
    pub tolerances: Tolerances,
    pub max_forward_solves: usize,
}

/// `d0, d1 ∈ [0.01, 10]·prior`, `a ∈ [0.001, 10]·prior`.
pub fn default_bounds(prior: &TransportCoefficients) -> [(f64, f64); 3] {
    let b = |v: f64, lo: f64| (v * lo, v * 10.0);
    [b(prior.d0, 0.01), b(prior.d1, 0.01), b(prior.a, 0.001)]
}

impl EstimationProblem {
    /// Problem with default bounds around, and initial guess at, the template's coefficients.
    pub fn new(model_template: MaterialModel, datasets: Vec<DatasetBinding>) -> Self {
        EstimationProblem {
            datasets,
            bounds: default_bounds(&model_template.transport),
            initial_guess: model_template.transport,
            model_template,
            grid: Grid1D::facility(),
            tolerances: Tolerances::default(),
            max_forward_solves: DEFAULT_MAX_FORWARD_SOLVES,
        }
    }

    /// Parameters informed by at least one dataset, in canonical order.
    pub fn free_parameters(&self) -> Vec<Parameter> {
        Parameter::ALL.into_iter().filter(|p| self.datasets.iter().any(|d| d.informs.contains(p))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::domain("estimation needs at least one dataset"));
        }
        for b in &self.datasets {
            b.dataset.validate()?;
            b.design.validate()?;
            let last = *b.dataset.times.last().unwrap();
            if b.dataset.times[0] < 0.0 || last > b.design.total_duration() * (1.0 + 1e-12) {
                return Err(Error::domain(format!("dataset {} extends beyond its design", b.dataset.design_id)));
            }
            self.grid.stencil(b.dataset.sensor_position)?;
        }
        if self.free_parameters().is_empty() {
            return Err(Error::domain("no dataset informs any parameter"));
        }
        for p in Parameter::ALL {
            let (lo, hi) = self.bounds[p.index()];
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::domain(format!("bounds for {p} must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
            }
            let g = self.initial_guess.get(p);
            if !(lo..=hi).contains(&g) {
                return Err(Error::domain(format!("initial {p} = {g:e} outside [{lo:e}, {hi:e}]")));
            }
        }
        if self.max_forward_solves == 0 {
            return Err(Error::domain("forward solve budget must be positive"));
        }
        Ok(())
    }

    fn check_within_bounds(&self, p: &TransportCoefficients) -> Result<()> {
        for q in Parameter::ALL {
            let (lo, hi) = self.bounds[q.index()];
            let v = p.get(q);
            if !(lo..=hi).contains(&v) {
                return Err(Error::domain(format!("{q} = {v:e} outside [{lo:e}, {hi:e}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEvaluation {
    /// `+∞` when a forward solve failed.
    pub value: f64,
    pub per_dataset: Vec<f64>,
    pub failure: Option<String>,
}

/// Model prediction and residual Jacobian (w.r.t. `ln p`) for one dataset.
struct DatasetEval {
    residuals: Vec<f64>,
    /// Column per free parameter.
    jacobian: Vec<Vec<f64>>,
}

fn evaluate_dataset(
    problem: &EstimationProblem,
    binding: &DatasetBinding,
    p: &TransportCoefficients,
    free: &[Parameter],
) -> Result<DatasetEval> {
    let model = problem.model_template.with_transport(*p);
    let ds = &binding.dataset;
    let scaling = Scaling::new(&model, problem.grid.length)?;
    let observed = ds.dimensionless(&model, &scaling)?;
    let (field, sens) = if free.is_empty() {
        (solver::solve_forward(&model, &binding.design, &problem.grid, &problem.tolerances, &ds.times)?, Vec::new())
    } else {
        solve_sensitivities(&model, &binding.design, &problem.grid, free, &problem.tolerances, &ds.times, 1.0)?
    };
    let predicted = solver::sample_at(&field, ds.sensor_position, &ds.times)?;
    let residuals = observed.iter().zip(&predicted).map(|(o, m)| o - m / scaling.p_ref).collect();
    let jacobian = sens
        .iter()
        .map(|f| {
            let p_star = p.get(f.parameter) / scaling.parameter_scale(f.parameter);
            f.series_at(ds.sensor_position).map(|s| s.into_iter().map(|v| -v * p_star).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DatasetEval { residuals, jacobian })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `J(p) = Σ_k ‖u_exp,k − u_k(p)‖²` in dimensionless vapour pressure.
pub fn cost(problem: &EstimationProblem, p: &TransportCoefficients) -> Result<CostEvaluation> {
    problem.check_within_bounds(p)?;
    let mut per_dataset = Vec::with_capacity(problem.datasets.len());
    for b in &problem.datasets {
        match evaluate_dataset(problem, b, p, &[]) {
            Ok(e) => per_dataset.push(sum_sq(&e.residuals)),
            Err(e) if e.is_numerical_failure() => {
                return Ok(CostEvaluation { value: f64::INFINITY, per_dataset, failure: Some(e.to_string()) })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CostEvaluation { value: per_dataset.iter().sum(), per_dataset, failure: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub estimate: TransportCoefficients,
    pub free_parameters: Vec<Parameter>,
    pub cost_initial: f64,
    pub cost_final: f64,
    pub forward_solve_count: usize,
    pub iterations: usize,
    /// Residuals `u_exp − u_model` at the estimate, per dataset.
    pub residuals: Vec<Vec<f64>>,
    pub converged: bool,
    pub termination: String,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_trace: Vec<f64>,
}

struct Evaluation {
    p: TransportCoefficients,
    cost: f64,
    residuals: Vec<Vec<f64>>,
    jacobian: DMatrix<f64>,
    stacked: DVector<f64>,
}

fn evaluate_all(problem: &EstimationProblem, p: &TransportCoefficients, free: &[Parameter], solves: &mut usize) -> Result<Evaluation> {
    let mut residuals = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); free.len()];
    for b in &problem.datasets {
        *solves += 1;
        let e = evaluate_dataset(problem, b, p, free)?;
        for (c, col) in columns.iter_mut().zip(e.jacobian) {
            c.extend(col);
        }
        residuals.push(e.residuals);
    }
    let stacked = DVector::from_iterator(residuals.iter().map(Vec::len).sum(), residuals.iter().flatten().cloned());
    let rows = stacked.len();
    let jacobian = DMatrix::from_fn(rows, free.len(), |i, j| columns[j][i]);
    Ok(Evaluation { p: *p, cost: stacked.norm_squared(), residuals, jacobian, stacked })
}

/// Bound-constrained least squares: projected Levenberg–Marquardt on `ln p` with
/// the exact Jacobian from the sensitivity equations. Each coupled forward and
/// sensitivity solve of one dataset counts as one forward solve.
pub fn estimate(problem: &EstimationProblem) -> Result<EstimationReport> {
    problem.validate()?;
    let free = problem.free_parameters();
    let m = free.len();
    let lo: Vec<f64> = free.iter().map(|p| problem.bounds[p.index()].0.ln()).collect();
    let hi: Vec<f64> = free.iter().map(|p| problem.bounds[p.index()].1.ln()).collect();
    let to_params = |q: &DVector<f64>| {
        let mut t = problem.initial_guess;
        for (k, p) in free.iter().enumerate() {
            let (blo, bhi) = problem.bounds[p.index()];
            t.set(*p, q[k].exp().clamp(blo, bhi));
        }
        t
    };

    let mut solves = 0;
    let mut current = evaluate_all(problem, &problem.initial_guess, &free, &mut solves)
        .map_err(|e| Error::Estimation(format!("forward solve failed at the initial guess: {e}")))?;
    let cost_initial = current.cost;
    let mut q = DVector::from_iterator(m, free.iter().map(|p| problem.initial_guess.get(*p).ln()));
    let mut lambda = 1e-3;
    let mut trace = vec![current.cost];
    let mut iterations = 0;
    let mut converged = false;
    let mut termination = String::from("forward solve budget exhausted");

    while solves + problem.datasets.len() <= problem.max_forward_solves {
        if current.cost == 0.0 {
            converged = true;
            termination = "zero cost".into();
            break;
        }
        iterations += 1;
        let jt = current.jacobian.transpose();
        let a = &jt * &current.jacobian;
        let g = &jt * &current.stacked;
        let mut damped = a.clone();
        let scale_floor = a.diagonal().max() * 1e-12;
        for i in 0..m {
            damped[(i, i)] += lambda * a[(i, i)].max(scale_floor);
        }
        // r = u_exp − u_model and J = ∂r/∂q, so the Gauss–Newton step solves (JᵀJ) δ = −Jᵀ r
        let Some(step) = damped.lu().solve(&(-&g)) else {
            lambda *= 10.0;
            if lambda > 1e16 {
                termination = "singular normal equations".into();
                break;
            }
            continue;
        };
        let longest = step.amax();
        let step = if longest > MAX_LOG_STEP { step * (MAX_LOG_STEP / longest) } else { step };
        let mut q_new = &q + &step;
        for k in 0..m {
            q_new[k] = q_new[k].clamp(lo[k], hi[k]);
        }
        let actual_step = (&q_new - &q).amax();
        if actual_step < 1e-8 {
            converged = true;
            termination = "parameter step below 1e-8 relative".into();
            break;
        }
        let trial = evaluate_all(problem, &to_params(&q_new), &free, &mut solves);
        match trial {
            Ok(t) if t.cost < current.cost => {
                let decrease = (current.cost - t.cost) / current.cost;
                q = q_new;
                current = t;
                trace.push(current.cost);
                lambda = (lambda / 3.0).max(1e-12);
                if decrease < 1e-8 {
                    converged = true;
                    termination = "relative cost decrease below 1e-8".into();
                    break;
                }
            }
            Ok(_) => lambda *= 4.0,
            Err(e) if e.is_numerical_failure() => lambda *= 10.0,
            Err(e) => return Err(e),
        }
        if lambda > 1e16 {
            converged = true;
            termination = "no further decrease possible".into();
            break;
        }
    }

    Ok(EstimationReport {
        estimate: current.p,
        free_parameters: free,
        cost_initial,
        cost_final: current.cost,
        forward_solve_count: solves,
        iterations,
        residuals: current.residuals,
        converged,
        termination,
        cost_trace: trace,
    })
}

/// Fisher matrix of the datasets' sensors at `p` for all three parameters (continuous
/// time integrals on 2001 output times per design) and its condition number.
pub fn joint_fisher(problem: &EstimationProblem, p: &TransportCoefficients, sigma_u: f64) -> Result<(DMatrix<f64>, f64)> {
    let model = problem.model_template.with_transport(*p);
    let mut total = DMatrix::zeros(3, 3);
    for b in &problem.datasets {
        let times = uniform_output_times(b.design.total_duration(), 2001);
        let (_, fields) = solve_sensitivities(&model, &b.design, &problem.grid, &Parameter::ALL, &problem.tolerances, &times, sigma_u)?;
        let plan = MeasurementPlan::new(&b.design.id, vec![b.dataset.sensor_position], b.design.total_duration(), problem.grid.length)?;
        total += fisher_matrix(&fields, &plan, &Parameter::ALL)?.matrix;
    }
    let sv = total.clone().singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    Ok((total, cond))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualDiagnostics {
    pub residuals: Vec<f64>,
    pub rms: f64,
    pub lag1_autocorrelation: f64,
}

/// RMS and lag-1 autocorrelation of a residual series. A constant series has
/// autocorrelation 0.
pub fn residual_statistics(residuals: &[f64]) -> Result<ResidualDiagnostics> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::domain("residual diagnostics need at least 3 points"));
    }
    let rms = (sum_sq(residuals) / n as f64).sqrt();
    let (x, y) = (&residuals[..n - 1], &residuals[1..]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let lag1 = if vx > 0.0 && vy > 0.0 { cov / (vx * vy).sqrt() } else { 0.0 };
    Ok(ResidualDiagnostics { residuals: residuals.to_vec(), rms, lag1_autocorrelation: lag1 })
}

/// Residuals `u_exp − u_model` (dimensionless) of a dataset against a forward solution.
pub fn residual_diagnostics(dataset: &ExperimentDataset, solution: &solver::FieldSolution, model: &MaterialModel) -> Result<ResidualDiagnostics> {
    dataset.validate()?;
    let observed = dataset.dimensionless(model, &solution.scaling)?;
    let predicted = solver::sample_at(solution, dataset.sensor_position, &dataset.times)?;
    let r: Vec<f64> = observed.iter().zip(&predicted).map(|(o, m)| o - m / solution.scaling.p_ref).collect();
    residual_statistics(&r)
}

/// Linearized parameter CDF: `F_p(p̄) = F_u(u + Θ (p̄ − p°))` for `Θ > 0` and
/// `1 − F_u(u + Θ (p̄ − p°))` for `Θ < 0`.
pub fn parameter_cdf(u_value_cdf: &dyn Fn(f64) -> f64, u_nominal: f64, theta: f64, p_nominal: f64, p_query: f64) -> Result<f64> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::DegenerateSensitivity);
    }
    let f = u_value_cdf(u_nominal + theta * (p_query - p_nominal));
    Ok(if theta > 0.0 { f } else { 1.0 - f })
}

/// Standard deviation `σ_u / |Θ|` of the linearized parameter distribution.
pub fn parameter_sd(sigma_u: f64, theta: f64) -> Result<f64> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::DegenerateSensitivity);
    }
    Ok(sigma_u / theta.abs())
}

/// Gaussian parameter distribution implied by a Gaussian measurement error `σ_u`.
pub fn parameter_distribution(sigma_u: f64, theta: f64, p_nominal: f64) -> Result<Normal> {
    Normal::new(p_nominal, parameter_sd(sigma_u, theta)?).map_err(|e| Error::domain(e.to_string()))
}

/// Density and CDF of the parameter distribution at each query point.
pub fn parameter_pdf_curve(sigma_u: f64, theta: f64, p_nominal: f64, queries: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let dist = parameter_distribution(sigma_u, theta, p_nominal)?;
    Ok(queries.iter().map(|&p| (p, dist.pdf(p), dist.cdf(p))).collect())
}

/// Sensor and positioning contributions `(φ·|∂φ/∂x|·ΔX/φ, Δφ)` to the total uncertainty.
pub fn uncertainty_contributions(dphi_dx: f64, delta_x: f64, delta_phi_sensor: f64) -> (f64, f64) {
    ((dphi_dx * delta_x).abs(), delta_phi_sensor.abs())
}

/// `Δφ = φ·√((∂φ/∂x·ΔX/φ)² + (Δφ_s/φ)²)`.
pub fn total_measurement_uncertainty(phi: f64, dphi_dx: f64, delta_x: f64, delta_phi_sensor: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::domain(format!("humidity must be positive, got {phi}")));
    }
    Ok(phi * ((dphi_dx * delta_x / phi).powi(2) + (delta_phi_sensor / phi).powi(2)).sqrt())
}

/// Surface transfer coefficient from the mass loss of an evaporating water cup:
/// `h = g / (P_s(T_w) − P_s(T∞) φ∞)` with `g = |dm/dt| / area`.
pub fn estimate_h_from_mass_series(
    times: &[f64],
    masses: &[f64],
    water_temperature: f64,
    ambient_temperature: f64,
    ambient_phi: f64,
    area: f64,
) -> Result<f64> {
    if times.len() != masses.len() || times.len() < 3 {
        return Err(Error::domain("need at least 3 paired mass samples"));
    }
    if !(area > 0.0) {
        return Err(Error::domain("area must be positive"));
    }
    let denom = saturation_pressure(water_temperature)? - saturation_pressure(ambient_temperature)? * ambient_phi;
    if !(denom > 0.0) {
        return Err(Error::domain(format!("vapour pressure difference {denom} Pa is not positive")));
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mm = masses.iter().sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(masses).map(|(t, m)| (t - mt) * (m - mm)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("sample times must not all coincide"));
    }
    Ok((sxy / sxx).abs() / area / denom)
}
