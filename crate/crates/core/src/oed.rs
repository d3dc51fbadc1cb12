//! D-optimal measurement plans.
//!
//! For a plan with sensors at `x_n`, the normalized Fisher matrix is
//! `Φ_ij = Σ_n ∫ Θ_i(x_n, τ) Θ_j(x_n, τ) dτ` (trapezoidal rule on the stored
//! output times, `τ` in units of the field's time scale) and the D-criterion is
//! `Ψ = det Φ`.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::material::{MaterialModel, Parameter, TransportCoefficients};
use crate::sensitivity::{solve_sensitivities, SensitivityField, DEFAULT_SIGMA_U};
use crate::solver::{uniform_output_times, BoundaryDesign, Grid1D, Tolerances};

/// Relative tolerance under which two Ψ values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementPlan {
    pub design_id: String,
    /// Sensor positions, m.
    pub sensor_positions: Vec<f64>,
    /// Experiment duration, s.
    pub horizon: f64,
}

impl MeasurementPlan {
    pub fn new(design_id: impl Into<String>, sensor_positions: Vec<f64>, horizon: f64, length: f64) -> Result<Self> {
        if sensor_positions.is_empty() {
            return Err(Error::domain("plan needs at least one sensor"));
        }
        for (i, &x) in sensor_positions.iter().enumerate() {
            if !(x > 0.0 && x < length) {
                return Err(Error::domain(format!("sensor position {x} m outside (0, {length}) m")));
            }
            if sensor_positions[..i].contains(&x) {
                return Err(Error::domain(format!("duplicate sensor position {x} m")));
            }
        }
        if !(horizon > 0.0) {
            return Err(Error::domain("plan horizon must be positive"));
        }
        Ok(MeasurementPlan { design_id: design_id.into(), sensor_positions, horizon })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherResult {
    pub matrix: DMatrix<f64>,
    pub psi: f64,
    pub correlation: DMatrix<f64>,
    pub plan: MeasurementPlan,
    pub params: Vec<Parameter>,
}

impl FisherResult {
    pub fn correlation_between(&self, a: Parameter, b: Parameter) -> Option<f64> {
        let i = self.params.iter().position(|&p| p == a)?;
        let j = self.params.iter().position(|&p| p == b)?;
        Some(self.correlation[(i, j)])
    }

    /// Position of the first sensor, m.
    pub fn x_opt(&self) -> f64 {
        self.plan.sensor_positions[0]
    }
}

fn trapezoid(tau: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    tau.windows(2).enumerate().map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(k) + f(k + 1))).sum()
}

fn select_fields<'a>(sensitivities: &'a [SensitivityField], params: &[Parameter]) -> Result<Vec<&'a SensitivityField>> {
    if params.is_empty() {
        return Err(Error::domain("no parameters requested"));
    }
    let fields: Vec<&SensitivityField> = params
        .iter()
        .map(|p| {
            sensitivities
                .iter()
                .find(|f| f.parameter == *p)
                .ok_or_else(|| Error::domain(format!("no sensitivity field for {p}")))
        })
        .collect::<Result<_>>()?;
    let first = fields[0];
    for f in &fields[1..] {
        if f.times != first.times || f.grid != first.grid || f.time_scale != first.time_scale {
            return Err(Error::domain("sensitivity fields do not share a grid and time base"));
        }
    }
    Ok(fields)
}

fn assemble(series: &[Vec<Vec<f64>>], tau: &[f64], m: usize) -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(m, m);
    for sensor in series {
        for i in 0..m {
            for j in i..m {
                let v = trapezoid(tau, |k| sensor[i][k] * sensor[j][k]);
                phi[(i, j)] += v;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            phi[(i, j)] = phi[(j, i)];
        }
    }
    phi
}

fn finish(matrix: DMatrix<f64>, plan: MeasurementPlan, params: Vec<Parameter>) -> FisherResult {
    let m = params.len();
    let psi = if m == 1 { matrix[(0, 0)] } else { matrix.clone().determinant() };
    let mut correlation = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let den = (matrix[(i, i)] * matrix[(j, j)]).sqrt();
                correlation[(i, j)] = if den > 0.0 { (matrix[(i, j)] / den).clamp(-1.0, 1.0) } else { 0.0 };
            }
        }
    }
    FisherResult { matrix, psi, correlation, plan, params }
}

/// Fisher matrix, D-criterion and correlation matrix of a plan.
pub fn fisher_matrix(sensitivities: &[SensitivityField], plan: &MeasurementPlan, params: &[Parameter]) -> Result<FisherResult> {
    let fields = select_fields(sensitivities, params)?;
    let base = fields[0];
    let end = base.times.partition_point(|&t| t <= plan.horizon * (1.0 + 1e-12));
    if end < 2 {
        return Err(Error::domain("plan horizon covers fewer than two output times"));
    }
    let tau: Vec<f64> = base.times[..end].iter().map(|t| t / base.time_scale).collect();
    let series = plan
        .sensor_positions
        .iter()
        .map(|&x| fields.iter().map(|f| f.series_at(x).map(|mut s| {
            s.truncate(end);
            s
        })).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(assemble(&series, &tau, params.len()), plan.clone(), params.to_vec()))
}

/// Settings shared by design searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub grid: Grid1D,
    pub tolerances: Tolerances,
    /// Number of equally spaced output times per design, including t = 0.
    pub n_times: usize,
    /// Candidate sensor spacing as a fraction of the slab thickness.
    pub position_step: f64,
    pub sigma_u: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grid: Grid1D::facility(),
            tolerances: Tolerances::default(),
            n_times: 2001,
            position_step: 0.01,
            sigma_u: DEFAULT_SIGMA_U,
        }
    }
}

impl SearchOptions {
    /// Candidate positions `k·step·L`, `k = 1, 2, ...`, strictly inside the slab.
    pub fn candidate_positions(&self) -> Result<Vec<f64>> {
        let step = self.position_step;
        if !(step > 0.0 && step < 0.5) {
            return Err(Error::domain(format!("position step {step} not in (0, 0.5)")));
        }
        if step < 1.0 / self.grid.n_cells as f64 * (1.0 - 1e-9) {
            return Err(Error::domain(format!(
                "position step {step} finer than the grid resolution 1/{}",
                self.grid.n_cells
            )));
        }
        let count = (1.0 / step + 1e-9).floor() as usize;
        let l = self.grid.length;
        Ok((1..=count).map(|k| k as f64 * step * l).filter(|&x| x < l * (1.0 - 1e-12)).collect())
    }
}

/// Ψ as a function of the (single) sensor position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiPoint {
    pub x: f64,
    pub psi: f64,
}

/// Best single-sensor plan of one design, with the full Ψ(X) curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignScore {
    pub best: FisherResult,
    pub curve: Vec<PsiPoint>,
}

/// Scores every candidate sensor position on precomputed sensitivity fields.
/// Ties within [`TIE_TOLERANCE`] go to the smaller position.
pub fn score_positions(
    sensitivities: &[SensitivityField],
    design_id: &str,
    params: &[Parameter],
    positions: &[f64],
) -> Result<DesignScore> {
    let fields = select_fields(sensitivities, params)?;
    let base = fields[0];
    let horizon = *base.times.last().unwrap();
    let tau: Vec<f64> = base.times.iter().map(|t| t / base.time_scale).collect();
    let mut best: Option<(f64, DMatrix<f64>, f64)> = None;
    let mut curve = Vec::with_capacity(positions.len());
    for &x in positions {
        let series = vec![fields.iter().map(|f| f.series_at(x)).collect::<Result<Vec<_>>>()?];
        let matrix = assemble(&series, &tau, params.len());
        let psi = if params.len() == 1 { matrix[(0, 0)] } else { matrix.clone().determinant() };
        curve.push(PsiPoint { x, psi });
        let better = match &best {
            None => true,
            Some((_, _, b)) => psi > b + TIE_TOLERANCE * b.abs(),
        };
        if better {
            best = Some((x, matrix, psi));
        }
    }
    let (x, matrix, _) = best.ok_or_else(|| Error::domain("no candidate sensor positions"))?;
    let plan = MeasurementPlan { design_id: design_id.to_string(), sensor_positions: vec![x], horizon };
    Ok(DesignScore { best: finish(matrix, plan, params.to_vec()), curve })
}

/// Sensitivity fields of one design on the search output grid.
pub fn design_sensitivities(
    model: &MaterialModel,
    design: &BoundaryDesign,
    params: &[Parameter],
    opts: &SearchOptions,
) -> Result<Vec<SensitivityField>> {
    let times = uniform_output_times(design.total_duration(), opts.n_times);
    let (_, fields) = solve_sensitivities(model, design, &opts.grid, params, &opts.tolerances, &times, opts.sigma_u)?;
    Ok(fields)
}

/// One coupled solve per design, then Ψ over all candidate positions. Results are
/// sorted by Ψ_max, descending; equal values keep the input order.
pub fn search_optimal_plan(
    model: &MaterialModel,
    designs: &[BoundaryDesign],
    params: &[Parameter],
    opts: &SearchOptions,
) -> Result<Vec<DesignScore>> {
    if designs.is_empty() {
        return Err(Error::domain("empty design subset"));
    }
    if opts.n_times < 2 {
        return Err(Error::domain("need at least two output times"));
    }
    let positions = opts.candidate_positions()?;
    let mut scores = designs
        .par_iter()
        .map(|design| {
            let fields = design_sensitivities(model, design, params, opts)?;
            score_positions(&fields, &design.id, params, &positions)
        })
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(|a, b| b.best.psi.total_cmp(&a.best.psi));
    Ok(scores)
}

/// Ranked CSV: `rank,design_id,params,psi_max,x_opt_m,corr_<p>_<q>...`.
pub fn write_ranking_csv<W: Write>(scores: &[DesignScore], mut w: W) -> Result<()> {
    let Some(first) = scores.first() else {
        return Ok(());
    };
    let params = &first.best.params;
    write!(w, "rank,design_id,params,psi_max,x_opt_m")?;
    for i in 0..params.len() {
        for j in i + 1..params.len() {
            write!(w, ",corr_{}_{}", params[i], params[j])?;
        }
    }
    writeln!(w)?;
    let label = params.iter().map(|p| p.label()).collect::<Vec<_>>().join("+");
    for (rank, s) in scores.iter().enumerate() {
        let r = &s.best;
        write!(w, "{},{},{},{},{}", rank + 1, r.plan.design_id, label, r.psi, r.x_opt())?;
        for i in 0..params.len() {
            for j in i + 1..params.len() {
                write!(w, ",{}", r.correlation[(i, j)])?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Ψ(X) curves: `design_id,x_m,psi`.
pub fn write_curves_csv<W: Write>(scores: &[DesignScore], mut w: W) -> Result<()> {
    writeln!(w, "design_id,x_m,psi")?;
    for s in scores {
        for p in &s.curve {
            writeln!(w, "{},{},{}", s.best.plan.design_id, p.x, p.psi)?;
        }
    }
    Ok(())
}

/// Radical inverse of `index` in `base` (van der Corput sequence).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

/// First `n` points of the Halton sequence in the unit cube of dimension `bases.len()`,
/// starting at index 1.
pub fn halton(n: usize, bases: &[u64]) -> Vec<Vec<f64>> {
    (1..=n as u64).map(|i| bases.iter().map(|&b| radical_inverse(i, b)).collect()).collect()
}

/// Per-parameter intervals `[lo, hi]` for `(d0, d1, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorBox {
    pub bounds: [(f64, f64); 3],
}

impl PriorBox {
    /// `value·(1 ± fraction)` around the given coefficients.
    pub fn relative(center: &TransportCoefficients, fraction: f64) -> Self {
        let b = |v: f64| {
            let (x, y) = (v * (1.0 - fraction), v * (1.0 + fraction));
            (x.min(y), x.max(y))
        };
        PriorBox { bounds: [b(center.d0), b(center.d1), b(center.a)] }
    }

    fn validate(&self) -> Result<()> {
        for (p, (lo, hi)) in Parameter::ALL.iter().zip(self.bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::domain(format!("invalid prior interval for {p}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn sample(&self, unit: &[f64]) -> TransportCoefficients {
        let v = |i: usize| {
            let (lo, hi) = self.bounds[i];
            lo + (hi - lo) * unit[i]
        };
        TransportCoefficients { d0: v(0), d1: v(1), a: v(2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub index: usize,
    pub transport: TransportCoefficients,
    pub winner: Option<String>,
    pub x_opt: Option<f64>,
    pub psi_max: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub samples: Vec<SweepSample>,
    /// Number of samples each design won.
    pub winner_counts: BTreeMap<String, usize>,
    pub x_opt_min: Option<f64>,
    pub x_opt_max: Option<f64>,
    pub x_opt_mean: Option<f64>,
}

impl SweepReport {
    /// Design with the most wins; ties go to the lexicographically smallest id.
    pub fn most_frequent_winner(&self) -> Option<(&str, usize)> {
        self.winner_counts
            .iter()
            .fold(None, |best: Option<(&str, usize)>, (id, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((id.as_str(), c)),
            })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sample,d0,d1,a,winner,x_opt_m,psi_max,failure")?;
        for s in &self.samples {
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.index,
                s.transport.d0,
                s.transport.d1,
                s.transport.a,
                s.winner.as_deref().unwrap_or(""),
                opt(s.x_opt),
                opt(s.psi_max),
                s.failure.as_deref().unwrap_or("").replace(',', ";")
            )?;
        }
        Ok(())
    }
}

/// Reruns the design search for Halton samples (bases 2, 3, 5 for d0, d1, a) of the
/// prior box. Samples whose solves fail are recorded and skipped.
pub fn prior_sweep(
    model: &MaterialModel,
    prior: &PriorBox,
    n_samples: usize,
    designs: &[BoundaryDesign],
    params: &[Parameter],
    opts: &SearchOptions,
) -> Result<SweepReport> {
    if n_samples == 0 {
        return Err(Error::domain("prior sweep needs at least one sample"));
    }
    if designs.is_empty() {
        return Err(Error::domain("empty design subset"));
    }
    prior.validate()?;
    let points = halton(n_samples, &[2, 3, 5]);
    let samples: Vec<SweepSample> = points
        .par_iter()
        .enumerate()
        .map(|(index, unit)| {
            let transport = prior.sample(unit);
            let outcome = transport
                .validate()
                .and_then(|_| search_optimal_plan(&model.with_transport(transport), designs, params, opts));
            match outcome {
                Ok(scores) => {
                    let best = &scores[0].best;
                    SweepSample {
                        index,
                        transport,
                        winner: Some(best.plan.design_id.clone()),
                        x_opt: Some(best.x_opt()),
                        psi_max: Some(best.psi),
                        failure: None,
                    }
                }
                Err(e) => SweepSample { index, transport, winner: None, x_opt: None, psi_max: None, failure: Some(e.to_string()) },
            }
        })
        .collect();
    let mut winner_counts = BTreeMap::new();
    for s in &samples {
        if let Some(id) = &s.winner {
            *winner_counts.entry(id.clone()).or_insert(0) += 1;
        }
    }
    let xs: Vec<f64> = samples.iter().filter_map(|s| s.x_opt).collect();
    let (x_opt_min, x_opt_max, x_opt_mean) = if xs.is_empty() {
        (None, None, None)
    } else {
        (
            Some(xs.iter().cloned().fold(f64::INFINITY, f64::min)),
            Some(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
            Some(xs.iter().sum::<f64>() / xs.len() as f64),
        )
    };
    Ok(SweepReport { samples, winner_counts, x_opt_min, x_opt_max, x_opt_mean })
}
