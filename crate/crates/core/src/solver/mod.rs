//! Forward solver for one-dimensional moisture transport in a slab.
//!
//! The slab `[0, L]` is exposed to ambient air at `x = 0` (Robin condition) and
//! sealed at `x = L`. The equation is solved in dimensionless form with a
//! cell-centred finite-volume discretisation (Scharfetter–Gummel face fluxes)
//! and an embedded Dormand–Prince pair in time.

mod design;
pub mod flux;
pub mod operator;
pub mod rk;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use design::{BoundaryDesign, HumidityStep};
pub use flux::{bernoulli, sg_face_flux};
pub use operator::TransportOperator;

use crate::error::{Error, Result};
use crate::material::{saturation_pressure, MaterialModel, Parameter};
use operator::Workspace;
use rk::{OdeSystem, RkOptions, RkStats};

/// Humidity at which the reference storage and permeability are taken.
pub const REFERENCE_PHI: f64 = 0.5;

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 10;

/// Uniform cell-centred grid on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n_cells: usize,
    pub length: f64,
}

impl Grid1D {
    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::domain(format!("grid needs at least {MIN_CELLS} cells, got {n_cells}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain(format!("slab length must be positive, got {length}")));
        }
        Ok(Grid1D { n_cells, length })
    }

    /// 100 cells over the 8 cm sample.
    pub fn facility() -> Self {
        Grid1D { n_cells: 100, length: 0.08 }
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }

    pub fn face_positions(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut faces: Vec<f64> = (0..=self.n_cells).map(|i| i as f64 * dx).collect();
        faces[self.n_cells] = self.length;
        faces
    }

    /// Linear interpolation stencil between cell centres: `(i0, i1, w1)` so that
    /// `value = (1 − w1) v[i0] + w1 v[i1]`. Positions inside the first or last
    /// half cell take the nearest centre value.
    pub fn stencil(&self, x: f64) -> Result<(usize, usize, f64)> {
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::domain(format!("position {x} m outside [0, {}] m", self.length)));
        }
        let s = x / self.dx() - 0.5;
        if s <= 0.0 {
            return Ok((0, 0, 0.0));
        }
        let last = self.n_cells - 1;
        if s >= last as f64 {
            return Ok((last, last, 0.0));
        }
        let i0 = s.floor() as usize;
        Ok((i0, i0 + 1, s - i0 as f64))
    }
}

/// Reference scales of the dimensionless problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// Reference vapour pressure, `P_s(T)`, Pa.
    pub p_ref: f64,
    /// Reference time `L² c_ref / d_ref`, s.
    pub t_ref: f64,
    /// Reference length, the slab thickness, m.
    pub x_ref: f64,
    /// Permeability at the reference humidity, s.
    pub d_ref: f64,
    /// Storage coefficient at the reference humidity, kg/(m³·Pa).
    pub c_ref: f64,
}

impl Scaling {
    /// Scales derived from the material at [`REFERENCE_PHI`]; they do not depend on
    /// the boundary design, so dimensionless results of different designs compare
    /// directly.
    pub fn new(model: &MaterialModel, length: f64) -> Result<Self> {
        let p_ref = model.saturation_pressure()?;
        let d_ref = model.permeability(REFERENCE_PHI)?;
        let c_ref = model.storage_coefficient(REFERENCE_PHI)?;
        Ok(Scaling { p_ref, t_ref: length * length * c_ref / d_ref, x_ref: length, d_ref, c_ref })
    }

    /// Scale of the dimensionless group associated with each parameter:
    /// `d0* = d0 / d_ref`, `d1* = d1 / d_ref`, `Pe = a L / d_ref`.
    pub fn parameter_scale(&self, p: Parameter) -> f64 {
        match p {
            Parameter::D0 | Parameter::D1 => self.d_ref,
            Parameter::A => self.d_ref / self.x_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-6, abs: 1e-8 }
    }
}

impl Tolerances {
    pub fn tightened(&self, factor: f64) -> Self {
        Tolerances { rel: self.rel / factor, abs: self.abs / factor }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.abs > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        Ok(())
    }
}

/// `n_points` equally spaced times from 0 to `duration`, inclusive.
pub fn uniform_output_times(duration: f64, n_points: usize) -> Vec<f64> {
    assert!(n_points >= 2);
    let mut times: Vec<f64> = (0..n_points).map(|k| duration * k as f64 / (n_points - 1) as f64).collect();
    times[n_points - 1] = duration;
    times
}

/// Vapour pressure field `P_v(x, t)` on the stored output times.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    /// Output times, s.
    pub times: Vec<f64>,
    /// Vapour pressure, Pa, row-major (time × cell).
    values: Vec<f64>,
    /// `∂P_v/∂t`, Pa/s, same layout; used for cubic interpolation in time.
    rates: Vec<f64>,
    pub grid: Grid1D,
    pub scaling: Scaling,
    pub accepted_step_count: usize,
    pub rejected_step_count: usize,
}

#[derive(Debug, Serialize)]
struct FieldMetadata<'a> {
    scaling: &'a Scaling,
    n_cells: usize,
    length_m: f64,
    n_times: usize,
    accepted_step_count: usize,
    rejected_step_count: usize,
}

impl FieldSolution {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Vapour pressure of every cell at output index `k`, Pa.
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.n_cells;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize, cell: usize) -> f64 {
        self.values[k * self.grid.n_cells + cell]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `P_v / P_s(T)` over the whole solution.
    pub fn max_relative_humidity(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) / self.scaling.p_ref
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Writes `t_s,<x_0>,<x_1>,...` rows of vapour pressure in Pa.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t_s")?;
        for x in self.grid.cell_centers() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.row(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn metadata_json(&self) -> Result<String> {
        let meta = FieldMetadata {
            scaling: &self.scaling,
            n_cells: self.grid.n_cells,
            length_m: self.grid.length,
            n_times: self.times.len(),
            accepted_step_count: self.accepted_step_count,
            rejected_step_count: self.rejected_step_count,
        };
        Ok(serde_json::to_string_pretty(&meta)?)
    }
}

/// Builds the dimensionless operator for a material, grid and surface condition.
pub fn build_operator(model: &MaterialModel, design: &BoundaryDesign, grid: &Grid1D, scaling: &Scaling) -> Result<TransportOperator> {
    let tr = &model.transport;
    let slope_ref = model.sorption.slope(REFERENCE_PHI);
    let storage: Vec<f64> = model.sorption.slope_coefficients().iter().map(|c| c / slope_ref).collect();
    if storage.is_empty() {
        return Err(Error::InvariantViolation("sorption curve has zero slope".into()));
    }
    Ok(TransportOperator::new(
        grid.n_cells,
        tr.d0 / scaling.d_ref,
        tr.d1 / scaling.d_ref,
        tr.a * grid.length / scaling.d_ref,
        design.h * grid.length / scaling.d_ref,
        storage,
    ))
}

/// Ambient vapour pressure in units of `p_ref`.
fn ambient_ratio(design: &BoundaryDesign, model: &MaterialModel) -> Result<f64> {
    Ok(saturation_pressure(design.ambient_temperature)? / model.saturation_pressure()?)
}

/// Time derivative `∂P_v/∂t` (Pa/s) of every cell for the given state (Pa) at time `t` (s).
pub fn assemble_rhs(state: &[f64], model: &MaterialModel, design: &BoundaryDesign, grid: &Grid1D, t: f64) -> Result<Vec<f64>> {
    if state.len() != grid.n_cells {
        return Err(Error::domain(format!("state has {} values for {} cells", state.len(), grid.n_cells)));
    }
    if state.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("vapour pressure state must be positive"));
    }
    let scaling = Scaling::new(model, grid.length)?;
    let op = build_operator(model, design, grid, &scaling)?;
    let u: Vec<f64> = state.iter().map(|v| v / scaling.p_ref).collect();
    if let Some(bad) = u.iter().find(|&&v| op.storage(v) <= 0.0) {
        return Err(Error::InvariantViolation(format!("non-positive storage coefficient at φ = {bad}")));
    }
    let ambient = design.ambient_phi_at(t) * ambient_ratio(design, model)?;
    let mut out = vec![0.0; grid.n_cells];
    op.rhs(&u, ambient, &mut out);
    let factor = scaling.p_ref / scaling.t_ref;
    Ok(out.into_iter().map(|r| r * factor).collect())
}

struct CoupledSystem<'a> {
    op: &'a TransportOperator,
    params: &'a [Parameter],
    ambient: f64,
    ws: Workspace,
}

impl OdeSystem for CoupledSystem<'_> {
    fn dim(&self) -> usize {
        self.op.n_cells() * (1 + self.params.len())
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        self.op.coupled_rhs(y, self.params, self.ambient, &mut self.ws, dydt);
    }
}

/// Raw output of a (possibly coupled) dimensionless solve over a schedule.
#[derive(Debug, Clone)]
pub(crate) struct ScheduleRun {
    pub times: Vec<f64>,
    /// Dimensionless state rows, `n_out × n·(1 + M)`.
    pub states: Vec<f64>,
    /// Dimensionless forward rates `du/dτ`, `n_out × n`.
    pub rates: Vec<f64>,
    pub scaling: Scaling,
    pub stats: RkStats,
}

pub(crate) fn check_output_times(times: &[f64], duration: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::domain("no output times requested"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("output times must be strictly increasing"));
    }
    if times[0] < 0.0 || *times.last().unwrap() > duration * (1.0 + 1e-12) {
        return Err(Error::domain(format!("output times must lie within [0, {duration}] s")));
    }
    Ok(())
}

pub(crate) fn run_schedule(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    tol: &Tolerances,
    output_times: &[f64],
    params: &[Parameter],
) -> Result<ScheduleRun> {
    model.validate()?;
    run_schedule_inner(model, design, grid, tol, output_times, params)
}

/// Forward run that accepts a negative advection coefficient (finite-difference
/// perturbations around `a = 0`).
pub(crate) fn run_schedule_unchecked(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    tol: &Tolerances,
    output_times: &[f64],
) -> Result<ScheduleRun> {
    let mut checked = model.clone();
    checked.transport.a = checked.transport.a.max(0.0);
    checked.validate()?;
    run_schedule_inner(model, design, grid, tol, output_times, &[])
}

fn run_schedule_inner(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    tol: &Tolerances,
    output_times: &[f64],
    params: &[Parameter],
) -> Result<ScheduleRun> {
    design.validate()?;
    tol.validate()?;
    let duration = design.total_duration();
    check_output_times(output_times, duration)?;

    let scaling = Scaling::new(model, grid.length)?;
    let op = build_operator(model, design, grid, &scaling)?;
    let ratio = ambient_ratio(design, model)?;
    let n = grid.n_cells;
    let dim = n * (1 + params.len());
    let opts = RkOptions { rtol: tol.rel, atol: tol.abs, ..Default::default() };

    let mut y = vec![0.0; dim];
    y[..n].fill(design.initial_phi);

    let mut states = Vec::with_capacity(output_times.len() * dim);
    let mut rates = Vec::with_capacity(output_times.len() * n);
    let mut stats = RkStats::default();
    let mut out_idx = 0;
    let bounds = design.step_bounds();

    for (k, (step, &(start, end))) in design.schedule.iter().zip(&bounds).enumerate() {
        let last_step = k + 1 == bounds.len();
        let ambient = step.ambient_phi * ratio;
        let mut seg_outputs = Vec::new();
        while out_idx < output_times.len() && (output_times[out_idx] <= end || last_step) {
            seg_outputs.push(output_times[out_idx].min(end) / scaling.t_ref);
            out_idx += 1;
        }
        let mut system = CoupledSystem { op: &op, params, ambient, ws: Workspace::default() };
        let mut rate = vec![0.0; n];
        let mut sink = |_t: f64, state: &[f64]| {
            states.extend_from_slice(state);
            op.rhs(&state[..n], ambient, &mut rate);
            rates.extend_from_slice(&rate);
        };
        let (tau0, tau1) = (start / scaling.t_ref, end / scaling.t_ref);
        let seg_stats = rk::integrate(&mut system, &opts, tau0, tau1, &mut y, &seg_outputs, &mut sink).map_err(|f| {
            Error::SolverFailure { t_last: f.t_last * scaling.t_ref, reason: f.reason }
        })?;
        stats += seg_stats;
    }

    if states.chunks(dim).any(|row| row[..n].iter().any(|&v| !(v > 0.0))) {
        return Err(Error::SolverFailure { t_last: duration, reason: "vapour pressure became non-positive".into() });
    }
    Ok(ScheduleRun { times: output_times.to_vec(), states, rates, scaling, stats })
}

/// Integrates the transport equation over the whole schedule of `design` and
/// reports the vapour pressure field at `output_times` (s).
pub fn solve_forward(
    model: &MaterialModel,
    design: &BoundaryDesign,
    grid: &Grid1D,
    tol: &Tolerances,
    output_times: &[f64],
) -> Result<FieldSolution> {
    let run = run_schedule(model, design, grid, tol, output_times, &[])?;
    Ok(field_from_run(&run, grid, 1))
}

pub(crate) fn field_from_run(run: &ScheduleRun, grid: &Grid1D, blocks: usize) -> FieldSolution {
    let n = grid.n_cells;
    let sc = run.scaling;
    let values = run.states.chunks(n * blocks).flat_map(|row| row[..n].iter().map(|v| v * sc.p_ref)).collect();
    let rate_factor = sc.p_ref / sc.t_ref;
    let rates = run.rates.iter().map(|r| r * rate_factor).collect();
    FieldSolution {
        times: run.times.clone(),
        values,
        rates,
        grid: *grid,
        scaling: sc,
        accepted_step_count: run.stats.accepted,
        rejected_step_count: run.stats.rejected,
    }
}

/// Vapour pressure (Pa) at position `x` (m) and each of `times` (s).
///
/// Linear in space between cell centres; cubic Hermite in time between stored
/// outputs using the stored rates, exact at stored times.
pub fn sample_at(solution: &FieldSolution, x: f64, times: &[f64]) -> Result<Vec<f64>> {
    let (i0, i1, w) = solution.grid.stencil(x)?;
    let n = solution.grid.n_cells;
    let ts = &solution.times;
    let (t_first, t_last) = (ts[0], *ts.last().unwrap());
    let at = |buf: &[f64], k: usize| (1.0 - w) * buf[k * n + i0] + w * buf[k * n + i1];
    times
        .iter()
        .map(|&t| {
            if !(t >= t_first && t <= t_last) {
                return Err(Error::domain(format!("time {t} s outside [{t_first}, {t_last}] s")));
            }
            let k = ts.partition_point(|&s| s <= t).saturating_sub(1).min(ts.len() - 1);
            if ts[k] == t || k + 1 == ts.len() {
                return Ok(at(&solution.values, k));
            }
            let h = ts[k + 1] - ts[k];
            let s = (t - ts[k]) / h;
            let (y0, y1) = (at(&solution.values, k), at(&solution.values, k + 1));
            let (m0, m1) = (at(&solution.rates, k) * h, at(&solution.rates, k + 1) * h);
            let s2 = s * s;
            let s3 = s2 * s;
            Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1)
        })
        .collect()
}
