#![allow(dead_code)]

use std::f64::consts::PI;

use moisture_oed::harness::single_step;
use moisture_oed::solver::rk::{integrate, OdeSystem, RkOptions};
use moisture_oed::solver::*;
use moisture_oed::*;

/// Manufactured solution `u = e^{kξ} w(ξ, t)` with `k = Pe/d`, so the total flux
/// `J = −d e^{kξ} w_ξ` vanishes at the sealed face whenever `w_ξ(1) = 0`.
pub struct Manufactured {
    pub d: f64,
    pub pe: f64,
    pub bi: f64,
}

impl Manufactured {
    fn k(&self) -> f64 {
        self.pe / self.d
    }
    fn w(&self, x: f64, t: f64) -> (f64, f64, f64, f64) {
        // (w, w_x, w_xx, w_t)
        let s = 0.2 * (t + 1.0).sin();
        let ds = 0.2 * (t + 1.0).cos();
        let w = 1.0 + s * (PI * x).cos() + 0.1 * t * (x - 0.5 * x * x);
        let wx = -s * PI * (PI * x).sin() + 0.1 * t * (1.0 - x);
        let wxx = -s * PI * PI * (PI * x).cos() - 0.1 * t;
        let wt = ds * (PI * x).cos() + 0.1 * (x - 0.5 * x * x);
        (w, wx, wxx, wt)
    }
    fn u(&self, x: f64, t: f64) -> f64 {
        (self.k() * x).exp() * self.w(x, t).0
    }
    fn flux(&self, x: f64, t: f64) -> f64 {
        -self.d * (self.k() * x).exp() * self.w(x, t).1
    }
    /// `∂u/∂t + ∂J/∂x` with unit storage.
    fn source(&self, x: f64, t: f64) -> f64 {
        let (_, wx, wxx, wt) = self.w(x, t);
        let e = (self.k() * x).exp();
        e * wt - self.d * e * (self.k() * wx + wxx)
    }
    fn ambient(&self, t: f64) -> f64 {
        self.u(0.0, t) + self.flux(0.0, t) / self.bi
    }
}

struct MmsSystem<'a> {
    op: TransportOperator,
    m: &'a Manufactured,
    centers: Vec<f64>,
}

impl OdeSystem for MmsSystem<'_> {
    fn dim(&self) -> usize {
        self.centers.len()
    }
    fn rhs(&mut self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.op.rhs(y, self.m.ambient(t), dydt);
        for (r, &x) in dydt.iter_mut().zip(&self.centers) {
            *r += self.m.source(x, t);
        }
    }
}

pub fn mms_error(n: usize, m: &Manufactured) -> f64 {
    let op = TransportOperator::new(n, m.d, 0.0, m.pe, m.bi, vec![1.0]);
    let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let mut y: Vec<f64> = centers.iter().map(|&x| m.u(x, 0.0)).collect();
    let mut sys = MmsSystem { op, m, centers: centers.clone() };
    let opts = RkOptions { rtol: 1e-12, atol: 1e-12, ..Default::default() };
    integrate(&mut sys, &opts, 0.0, 1.0, &mut y, &[], &mut |_, _| {}).unwrap();
    y.iter().zip(&centers).map(|(v, &x)| (v - m.u(x, 1.0)).abs()).fold(0.0, f64::max)
}

struct Plain(TransportOperator, f64);

impl OdeSystem for Plain {
    fn dim(&self) -> usize {
        self.0.n_cells()
    }
    fn rhs(&mut self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        self.0.rhs(y, self.1, dydt);
    }
}

/// Worst relative drift of total moisture content over 200 h in a sealed slab
/// without advection, and the final spread of the profile.
pub fn closed_slab_drift() -> (f64, f64) {
    let model = MaterialModel::wood_fibre();
    let grid = Grid1D::facility();
    let scaling = Scaling::new(&model, grid.length).unwrap();
    let mut sealed = single_step(2).unwrap();
    sealed.h = 0.0;
    let mut tr = model.transport;
    tr.a = 0.0;
    let model = model.with_transport(tr);
    let op = build_operator(&model, &sealed, &grid, &scaling).unwrap();
    assert_eq!(op.biot(), 0.0);
    let centers = grid.cell_centers();
    let mut y: Vec<f64> = centers.iter().map(|x| 0.1 + 0.65 * (-x / 0.01).exp()).collect();
    let content = |u: &[f64]| u.iter().map(|&v| model.sorption.moisture_content(v) * grid.dx()).sum::<f64>();
    let initial = content(&y);
    let tau_end = 200.0 * 3600.0 / scaling.t_ref;
    let outputs: Vec<f64> = (1..=20).map(|k| tau_end * k as f64 / 20.0).collect();
    let mut worst: f64 = 0.0;
    let mut sys = Plain(op, 0.0);
    integrate(&mut sys, &RkOptions { rtol: 1e-6, atol: 1e-8, ..Default::default() }, 0.0, tau_end, &mut y, &outputs, &mut |_, u| {
        worst = worst.max((content(u) / initial - 1.0).abs());
    })
    .unwrap();
    (worst, (y[0] - y[y.len() - 1]).abs())
}

/// Observed orders of the manufactured-solution error between successive
/// refinements 20, 40, 80, 160.
pub fn mms_orders(m: &Manufactured) -> Vec<f64> {
    let errors: Vec<f64> = [20, 40, 80, 160].iter().map(|&n| mms_error(n, m)).collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
