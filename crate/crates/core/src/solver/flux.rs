//! Scharfetter–Gummel (exponentially fitted) face fluxes.

/// Bernoulli function `B(z) = z / (e^z − 1)`, with `B(0) = 1`.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Derivative `B'(z)`.
pub fn bernoulli_derivative(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        -0.5 + z / 6.0 - z * z * z / 180.0
    } else {
        // B'(z) = B(z) (1/z − e^z / (e^z − 1)), rearranged to avoid overflow
        bernoulli(z) * (1.0 / z + 1.0 / (-z).exp_m1())
    }
}

/// Total (diffusive + advective) flux across a face, positive toward increasing x.
///
/// `flux = (d/Δx) [B(−Pe) u_left − B(Pe) u_right]` with cell Péclet number
/// `Pe = a Δx / d`. Units follow the inputs: with pressures in Pa, `d` in s,
/// `a` in s/m and `Δx` in m the flux is in kg/(m²·s).
pub fn sg_face_flux(u_left: f64, u_right: f64, d_face: f64, a: f64, dx: f64) -> f64 {
    debug_assert!(d_face > 0.0 && dx > 0.0);
    let pe = a * dx / d_face;
    d_face / dx * (bernoulli(-pe) * u_left - bernoulli(pe) * u_right)
}

/// Conductance `G(g, Pe) = g B(Pe/g)` and its partials `(∂G/∂g, ∂G/∂Pe)`.
///
/// With `g = d/Δx`, the SG flux is `G (u_l − u_r) + Pe u_l`.
#[inline]
pub(crate) fn conductance(g: f64, pe: f64) -> (f64, f64, f64) {
    let z = pe / g;
    let b = bernoulli(z);
    let db = bernoulli_derivative(z);
    (g * b, b - z * db, db)
}
