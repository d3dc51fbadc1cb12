//! Dormand–Prince 5(4) integrator with PI step-size control and dense output.

/// First-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dydt: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions { rtol: 1e-6, atol: 1e-8, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RkStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl std::ops::AddAssign for RkStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
    }
}

/// Integration stopped before reaching the end of the interval.
#[derive(Debug, Clone)]
pub struct RkFailure {
    pub t_last: f64,
    pub reason: String,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

struct Stages {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    err: Vec<f64>,
    cont: [Vec<f64>; 5],
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            ytmp: vec![0.0; n],
            ynew: vec![0.0; n],
            err: vec![0.0; n],
            cont: std::array::from_fn(|_| vec![0.0; n]),
        }
    }
}

fn weighted_rms(v: &[f64], y0: &[f64], y1: Option<&[f64]>, opts: &RkOptions) -> f64 {
    let n = v.len() as f64;
    let sum: f64 = v
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mag = match y1 {
                Some(y1) => y0[i].abs().max(y1[i].abs()),
                None => y0[i].abs(),
            };
            let sk = opts.atol + opts.rtol * mag;
            (e / sk) * (e / sk)
        })
        .sum();
    (sum / n).sqrt()
}

fn weighted_max(v: &[f64], y0: &[f64], y1: &[f64], opts: &RkOptions) -> f64 {
    v.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| (e / (opts.atol + opts.rtol * a.abs().max(b.abs()))).abs())
        .fold(0.0, f64::max)
}

fn initial_step<S: OdeSystem>(sys: &mut S, t: f64, y: &[f64], f0: &[f64], hmax: f64, opts: &RkOptions, st: &mut Stages) -> f64 {
    let dnf = weighted_rms(f0, y, None, opts);
    let dny = weighted_rms(y, y, None, opts);
    let mut h = if dnf <= 1e-5 || dny <= 1e-5 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(hmax);
    for i in 0..y.len() {
        st.ytmp[i] = y[i] + h * f0[i];
    }
    let (ytmp, k2) = (&st.ytmp, &mut st.k[1]);
    sys.rhs(t + h, ytmp, k2);
    for i in 0..y.len() {
        st.err[i] = st.k[1][i] - f0[i];
    }
    let der2 = weighted_rms(&st.err, y, None, opts) / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(hmax)
}

/// Integrates `sys` from `t0` to `t1` in place on `y`.
///
/// `outputs` must be sorted and lie in `[t0, t1]`; for each of them `sink(t, y)` is called
/// with the dense-output state, in order. Returns step statistics.
pub fn integrate<S: OdeSystem>(
    sys: &mut S,
    opts: &RkOptions,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    outputs: &[f64],
    sink: &mut dyn FnMut(f64, &[f64]),
) -> Result<RkStats, RkFailure> {
    let n = sys.dim();
    assert_eq!(y.len(), n, "state length does not match system dimension");
    let mut stats = RkStats::default();
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        sink(outputs[next_out], y);
        next_out += 1;
    }
    if t1 <= t0 {
        return Ok(stats);
    }

    let mut st = Stages::new(n);
    sys.rhs(t0, y, &mut st.k[0]);
    stats.rhs_evals += 1;
    let hmax = t1 - t0;
    let f0 = st.k[0].clone();
    let mut h = initial_step(sys, t0, y, &f0, hmax, opts, &mut st);
    stats.rhs_evals += 1;

    let expo1 = 0.2 - BETA * 0.75;
    let mut facold: f64 = 1e-4;
    let mut t = t0;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(RkFailure { t_last: t, reason: format!("step limit {} reached", opts.max_steps) });
        }
        let h_floor = 1e-14 * t.abs().max(hmax);
        if h < h_floor || !h.is_finite() {
            return Err(RkFailure { t_last: t, reason: format!("step size underflow (h = {h:.3e})") });
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        {
            let Stages { k, ytmp, ynew, err, .. } = &mut st;
            let [k1, k2, k3, k4, k5, k6, k7] = k;
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            sys.rhs(t + h, ytmp, k6);
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sys.rhs(t + h, ynew, k7);
            stats.rhs_evals += 6;
            for i in 0..n {
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
        }
        let err = weighted_max(&st.err, y, &st.ynew, opts);

        if !err.is_finite() {
            stats.rejected += 1;
            last_rejected = true;
            h *= 0.1;
            continue;
        }

        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = err.max(1e-4);
            stats.accepted += 1;
            let t_new = if last { t1 } else { t + h };

            if next_out < outputs.len() && outputs[next_out] <= t_new {
                let Stages { k, ynew, cont, .. } = &mut st;
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k[6][i] - bspl;
                    cont[4][i] = h
                        * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
                }
                let mut yout = vec![0.0; n];
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let to = outputs[next_out];
                    if to == t_new {
                        sink(to, ynew);
                    } else {
                        let theta = (to - t) / h;
                        let theta1 = 1.0 - theta;
                        for i in 0..n {
                            yout[i] = cont[0][i]
                                + theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
                        }
                        sink(to, &yout);
                    }
                    next_out += 1;
                }
            }

            y.copy_from_slice(&st.ynew);
            st.k.swap(0, 6);
            t = t_new;
            if last {
                return Ok(stats);
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }
}
