//! Brute-force reference: adaptive Dormand–Prince 5(4) integration of
//! dρ/dt = 𝓛(t)ρ with 𝓛(t) rebuilt from its three harmonics at every stage.
//!
//! Nothing here touches the Floquet machinery; the only shared input is the
//! [`FourierLiouvillian`].

use std::io::{self, Write};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{self, CMat, ZERO};
use crate::master_equation::FourierLiouvillian;
use crate::observables::{self, OutputOperators};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("time grid must start at 0 and increase strictly")]
    BadGrid,
    #[error("initial state is {got}×{got}, Liouvillian acts on {expected}×{expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem looks stiff")]
    Stiffness { t: f64, h: f64 },
    #[error("gave up after {0} steps")]
    TooManySteps(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; `None` means one twentieth of the drive period.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_step: None, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted local error, in units of the tolerance.
    pub max_local_error: f64,
    /// Sum of accepted local error estimates, expressed as a trace-distance bound.
    pub error_estimate: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    /// Writes `t,Iout,g2,trace_error` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, ops: &OutputOperators) -> io::Result<()> {
        writeln!(w, "t,Iout,g2,trace_error")?;
        for (t, rho) in self.times.iter().zip(&self.states) {
            let i = observables::output_intensity(rho, ops);
            let g2 = observables::g2_zero(rho, ops).map(|x| format!("{x:.12e}")).unwrap_or_default();
            let tr = (linalg::trace(rho).re - 1.0).abs();
            writeln!(w, "{t:.12e},{i:.12e},{g2},{tr:.3e}")?;
        }
        Ok(())
    }
}

/// Compressed sparse rows, built from a dense superoperator.
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &CMat) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let x = m[(i, j)];
                if x != ZERO {
                    cols.push(j);
                    vals.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    /// out += s · A x
    fn mul_add(&self, x: &[C64], s: C64, out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *o += s * acc;
        }
    }
}

struct Rhs {
    l0: Csr,
    l_plus: Csr,
    l_minus: Csr,
    omega: f64,
    evals: usize,
}

impl Rhs {
    fn eval(&mut self, t: f64, y: &[C64], out: &mut [C64]) {
        self.evals += 1;
        out.iter_mut().for_each(|o| *o = ZERO);
        self.l0.mul_add(y, C64::new(1.0, 0.0), out);
        self.l_plus.mul_add(y, C64::from_polar(1.0, -self.omega * t), out);
        self.l_minus.mul_add(y, C64::from_polar(1.0, self.omega * t), out);
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from ρ₀ at t = 0 and returns the state at every grid time.
pub fn integrate(
    liouv: &FourierLiouvillian,
    rho0: &CMat,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory, IntegratorError> {
    let n = liouv.dims;
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(IntegratorError::DimensionMismatch { got: rho0.nrows(), expected: n });
    }
    if t_grid.first() != Some(&0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IntegratorError::BadGrid);
    }
    let mut rhs = Rhs {
        l0: Csr::from_dense(liouv.harmonic(0)),
        l_plus: Csr::from_dense(liouv.harmonic(1)),
        l_minus: Csr::from_dense(liouv.harmonic(-1)),
        omega: liouv.omega_d,
        evals: 0,
    };
    let max_step = opts.max_step.unwrap_or(liouv.period() / 20.0);
    let dim = n * n;
    let trace_bound = 0.5 * (n as f64).sqrt();

    let mut y = linalg::vectorize(rho0);
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; dim]; 7];
    let mut stage = vec![ZERO; dim];
    let mut y_new = vec![ZERO; dim];
    let mut stats = IntegratorStats::default();

    let mut t = 0.0;
    let mut h = 0.1 * max_step;
    rhs.eval(t, &y, &mut k[0]);

    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for &target in &t_grid[1..] {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(IntegratorError::TooManySteps(opts.max_steps));
            }
            let mut step = h.min(max_step);
            let landing = t + step >= target;
            if landing {
                step = target - t;
            }
            if step < 1e-13 * t.abs().max(1.0) && !landing {
                return Err(IntegratorError::Stiffness { t, h: step });
            }

            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().take(s).enumerate() {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += kj[i] * (step * a);
                        }
                    }
                    stage[i] = acc;
                }
                let (done, rest) = k.split_at_mut(s);
                let _ = done;
                rhs.eval(t + C[s] * step, &stage, &mut rest[0]);
            }
            // stage now holds the fifth-order solution (FSAL row)
            y_new.copy_from_slice(&stage);

            let mut err_sq = 0.0;
            let mut err_abs_sq = 0.0;
            for i in 0..dim {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * (step * E[j]);
                    }
                }
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / scale).powi(2);
                err_abs_sq += e.norm_sqr();
            }
            let err = (err_sq / dim as f64).sqrt();

            if err <= 1.0 {
                t = if landing { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                stats.max_local_error = stats.max_local_error.max(err);
                stats.error_estimate += trace_bound * err_abs_sq.sqrt();
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !landing || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < 1e-13 * t.abs().max(1.0) {
                    return Err(IntegratorError::Stiffness { t, h });
                }
            }
        }
        times.push(t);
        states.push(linalg::unvectorize(&y, n));
    }
    stats.rhs_evals = rhs.evals;
    Ok(Trajectory { times, states, stats })
}
