//! Dimensionless semi-discrete transport operator and its exact linearization.
//!
//! State `u = P_v / p_ref` on `n` cell centres of `[0, 1]`, time `τ = t / t_ref`:
//!
//! ```text
//! c*(u) ∂u/∂τ = −∂J/∂ξ,   J = −d*(u) ∂u/∂ξ + Pe u
//! J(0) = Bi (u∞ − u_s),   J(1) = 0
//! ```
//!
//! Interior faces use the Scharfetter–Gummel flux `J = G (u_l − u_r) + Pe u_l` with
//! `G = g B(Pe/g)` and `g = d*_face / Δξ`. At the exposed face the surface value
//! `u_s` is eliminated through the half-cell SG flux so that the surface relaxes
//! toward the ambient value.
//!
//! The sensitivity right-hand side is the exact derivative of this semi-discrete
//! system with respect to `d0* = d0/d_ref`, `d1* = d1/d_ref` and `Pe = a L/d_ref`.
//! For small cell Péclet numbers it coincides with central differencing.

use super::flux::conductance;
use crate::material::Parameter;

#[derive(Debug, Clone)]
pub struct TransportOperator {
    n: usize,
    dx: f64,
    d0: f64,
    d1: f64,
    peclet: f64,
    biot: f64,
    /// Ascending coefficients of `c*(u)`.
    storage: Vec<f64>,
}

/// Per-call face quantities shared by the forward and tangent evaluations.
#[derive(Debug, Clone, Default)]
pub(crate) struct Workspace {
    flux: Vec<f64>,
    // interior faces 1..n-1, indexed by face
    dj_dl: Vec<f64>,
    dj_dr: Vec<f64>,
    dj_dd0: Vec<f64>,
    dj_dd1: Vec<f64>,
    dj_dpe: Vec<f64>,
    storage: Vec<f64>,
    storage_log_slope: Vec<f64>,
    rate: Vec<f64>,
    dflux: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        if self.flux.len() != n + 1 {
            *self = Workspace {
                flux: vec![0.0; n + 1],
                dj_dl: vec![0.0; n + 1],
                dj_dr: vec![0.0; n + 1],
                dj_dd0: vec![0.0; n + 1],
                dj_dd1: vec![0.0; n + 1],
                dj_dpe: vec![0.0; n + 1],
                storage: vec![0.0; n],
                storage_log_slope: vec![0.0; n],
                rate: vec![0.0; n],
                dflux: vec![0.0; n + 1],
            };
        }
    }
}

impl TransportOperator {
    /// `storage` holds the ascending coefficients of the dimensionless storage
    /// coefficient `c*(u)`; it must stay positive on the visited states.
    pub fn new(n_cells: usize, d0: f64, d1: f64, peclet: f64, biot: f64, storage: Vec<f64>) -> Self {
        assert!(n_cells >= 2, "need at least two cells");
        assert!(!storage.is_empty());
        TransportOperator { n: n_cells, dx: 1.0 / n_cells as f64, d0, d1, peclet, biot, storage }
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn peclet(&self) -> f64 {
        self.peclet
    }

    pub fn biot(&self) -> f64 {
        self.biot
    }

    #[inline]
    fn diffusivity(&self, u: f64) -> f64 {
        self.d0 + self.d1 * u
    }

    #[inline]
    fn storage_and_slope(&self, u: f64) -> (f64, f64) {
        let mut c = 0.0;
        let mut dc = 0.0;
        for &w in self.storage.iter().rev() {
            dc = dc * u + c;
            c = c * u + w;
        }
        (c, dc)
    }

    /// Dimensionless storage coefficient at `u`.
    pub fn storage(&self, u: f64) -> f64 {
        self.storage_and_slope(u).0
    }

    /// Face fluxes `J_0 .. J_n` (length `n + 1`).
    pub fn face_fluxes(&self, u: &[f64], ambient: f64, flux: &mut [f64]) {
        let n = self.n;
        let inv_dx = 1.0 / self.dx;
        let pe = self.peclet;
        for f in 1..n {
            let (ul, ur) = (u[f - 1], u[f]);
            let g = 0.5 * (self.diffusivity(ul) + self.diffusivity(ur)) * inv_dx;
            let (big_g, _, _) = conductance(g, pe);
            flux[f] = big_g * (ul - ur) + pe * ul;
        }
        flux[0] = self.surface_flux(u[0], ambient).0;
        flux[n] = 0.0;
    }

    /// Surface flux and its partials `(J0, ∂/∂u0, ∂/∂d0*, ∂/∂d1*, ∂/∂Pe)`.
    #[inline]
    fn surface_flux(&self, u0: f64, ambient: f64) -> (f64, f64, f64, f64, f64) {
        let (pe, bi) = (self.peclet, self.biot);
        if bi == 0.0 {
            return (0.0, 0.0, 0.0, 0.0, 0.0);
        }
        let g0 = 2.0 * self.diffusivity(u0) / self.dx;
        let (big_g, dg_dg, dg_dpe) = conductance(g0, pe);
        let den = big_g + pe + bi;
        let j0 = bi * ((big_g + pe) * ambient - big_g * u0) / den;
        let den2 = den * den;
        let dj_dgc = bi * (bi * ambient - (pe + bi) * u0) / den2;
        let dj_dpe_explicit = bi * (bi * ambient + big_g * u0) / den2;
        let dj_du0_explicit = -bi * big_g / den;
        let via_g = dj_dgc * dg_dg * 2.0 / self.dx;
        (
            j0,
            dj_du0_explicit + via_g * self.d1,
            via_g,
            via_g * u0,
            dj_dpe_explicit + dj_dgc * dg_dpe,
        )
    }

    /// Forward right-hand side `du/dτ`.
    pub fn rhs(&self, u: &[f64], ambient: f64, out: &mut [f64]) {
        let mut flux = vec![0.0; self.n + 1];
        self.face_fluxes(u, ambient, &mut flux);
        self.divergence(u, &flux, out);
    }

    fn divergence(&self, u: &[f64], flux: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = -(flux[i + 1] - flux[i]) / (self.dx * self.storage(u[i]));
        }
    }

    /// Right-hand side of the coupled forward + tangent system.
    ///
    /// `y = [u, s_1, .., s_M]` where `s_m = ∂u/∂p*_m` for `params[m]`.
    pub(crate) fn coupled_rhs(&self, y: &[f64], params: &[Parameter], ambient: f64, ws: &mut Workspace, out: &mut [f64]) {
        let n = self.n;
        ws.ensure(n);
        let u = &y[..n];
        let inv_dx = 1.0 / self.dx;
        let pe = self.peclet;
        let tangents = !params.is_empty();

        for f in 1..n {
            let (ul, ur) = (u[f - 1], u[f]);
            let g = 0.5 * (self.diffusivity(ul) + self.diffusivity(ur)) * inv_dx;
            let (big_g, dg_dg, dg_dpe) = conductance(g, pe);
            let du = ul - ur;
            ws.flux[f] = big_g * du + pe * ul;
            if tangents {
                let via_g = du * dg_dg;
                ws.dj_dl[f] = big_g + pe + via_g * self.d1 * 0.5 * inv_dx;
                ws.dj_dr[f] = -big_g + via_g * self.d1 * 0.5 * inv_dx;
                ws.dj_dd0[f] = via_g * inv_dx;
                ws.dj_dd1[f] = via_g * 0.5 * (ul + ur) * inv_dx;
                ws.dj_dpe[f] = du * dg_dpe + ul;
            }
        }
        let (j0, dj0_du0, dj0_dd0, dj0_dd1, dj0_dpe) = self.surface_flux(u[0], ambient);
        ws.flux[0] = j0;
        ws.flux[n] = 0.0;

        for i in 0..n {
            let (c, dc) = self.storage_and_slope(u[i]);
            ws.storage[i] = c;
            ws.storage_log_slope[i] = dc / c;
            ws.rate[i] = -(ws.flux[i + 1] - ws.flux[i]) / (self.dx * c);
        }
        out[..n].copy_from_slice(&ws.rate);

        for (m, &p) in params.iter().enumerate() {
            let s = &y[(m + 1) * n..(m + 2) * n];
            let (explicit, explicit0) = match p {
                Parameter::D0 => (&ws.dj_dd0, dj0_dd0),
                Parameter::D1 => (&ws.dj_dd1, dj0_dd1),
                Parameter::A => (&ws.dj_dpe, dj0_dpe),
            };
            ws.dflux[0] = dj0_du0 * s[0] + explicit0;
            for f in 1..n {
                ws.dflux[f] = ws.dj_dl[f] * s[f - 1] + ws.dj_dr[f] * s[f] + explicit[f];
            }
            ws.dflux[n] = 0.0;
            let o = &mut out[(m + 1) * n..(m + 2) * n];
            for i in 0..n {
                o[i] = -(ws.dflux[i + 1] - ws.dflux[i]) / (self.dx * ws.storage[i])
                    - ws.rate[i] * ws.storage_log_slope[i] * s[i];
            }
        }
    }

    /// Returns a copy with one dimensionless parameter group replaced.
    pub fn with_parameter(&self, p: Parameter, value: f64) -> Self {
        let mut op = self.clone();
        match p {
            Parameter::D0 => op.d0 = value,
            Parameter::D1 => op.d1 = value,
            Parameter::A => op.peclet = value,
        }
        op
    }

    pub fn parameter(&self, p: Parameter) -> f64 {
        match p {
            Parameter::D0 => self.d0,
            Parameter::D1 => self.d1,
            Parameter::A => self.peclet,
        }
    }
}
