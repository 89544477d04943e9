//! Output-field operator, emitted intensity and equal-time g²(0).

use faer::Mat;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::floquet::{FloquetEigensystem, PeriodicMatrix};
use crate::linalg::{self, CMat, ZERO};
use crate::rabi_model::{self, DressedSpectrum};

/// Intensities below this make g²(0) undefined.
pub const INTENSITY_FLOOR: f64 = 1e-14;
pub const MIN_SAMPLES: usize = 16;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("period average needs at least {MIN_SAMPLES} samples (got {0})")]
    TooFewSamples(usize),
}

#[derive(Clone, Debug)]
pub struct OutputOperators {
    pub xdot_plus: CMat,
    pub xdot_minus: CMat,
    /// Ẋ⁻Ẋ⁺
    pub intensity_op: CMat,
    /// Ẋ⁻Ẋ⁻Ẋ⁺Ẋ⁺
    pub g2_numerator_op: CMat,
}

/// Ẋ⁺ = Σ Θ(Δ_jk) Δ_jk |j⟩⟨j| i(a† − a) |k⟩⟨k| over opposite-parity pairs.
///
/// Only entries with E_j < E_k survive, so in the energy-ordered dressed basis
/// the matrix is strictly upper triangular: it lowers the energy.
pub fn build_xdot_plus(spectrum: &DressedSpectrum) -> OutputOperators {
    let a = rabi_model::cavity_annihilation(spectrum.n_fock());
    let y = linalg::scale(&linalg::add_scaled(&linalg::dagger(&a), &a, -linalg::ONE), linalg::I);
    let yd = spectrum.project(&y);
    let levels = spectrum.levels();
    let n = levels.len();
    let xdot_plus = Mat::from_fn(n, n, |j, k| {
        let delta = levels[k].energy - levels[j].energy;
        if delta > 0.0 && levels[j].parity != levels[k].parity {
            yd[(j, k)] * delta
        } else {
            ZERO
        }
    });
    let xdot_minus = linalg::dagger(&xdot_plus);
    let intensity_op = &xdot_minus * &xdot_plus;
    let g2_numerator_op = &(&xdot_minus * &intensity_op) * &xdot_plus;
    OutputOperators { xdot_plus, xdot_minus, intensity_op, g2_numerator_op }
}

/// Something an expectation value can be taken in.
pub trait State {
    /// Tr[O ρ]; for periodic states the exact period average Tr[O ρ⁽⁰⁾].
    fn expect(&self, op: &CMat) -> C64;
}

impl State for CMat {
    fn expect(&self, op: &CMat) -> C64 {
        trace_product(op, self)
    }
}

impl State for PeriodicMatrix {
    fn expect(&self, op: &CMat) -> C64 {
        self.component(0).map(|r| trace_product(op, r)).unwrap_or(ZERO)
    }
}

/// Tr[A B] without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn output_intensity<S: State + ?Sized>(state: &S, ops: &OutputOperators) -> f64 {
    state.expect(&ops.intensity_op).re
}

/// Tr[Ẋ⁻Ẋ⁻Ẋ⁺Ẋ⁺ρ] / Tr[Ẋ⁻Ẋ⁺ρ]², or `None` below the intensity floor.
pub fn g2_zero<S: State + ?Sized>(state: &S, ops: &OutputOperators) -> Option<f64> {
    let i = output_intensity(state, ops);
    ratio(state.expect(&ops.g2_numerator_op).re, i)
}

fn ratio(numerator: f64, intensity: f64) -> Option<f64> {
    (intensity >= INTENSITY_FLOOR).then(|| numerator / (intensity * intensity))
}

/// Mean of `f` over one period starting at `t0`, sampled at `n` equally
/// spaced points (the trapezoid rule for a periodic integrand).
pub fn period_average<F: FnMut(f64) -> f64>(
    mut f: F,
    t0: f64,
    period: f64,
    n: usize,
) -> Result<f64, ObservableError> {
    if n < MIN_SAMPLES {
        return Err(ObservableError::TooFewSamples(n));
    }
    let h = period / n as f64;
    Ok((0..n).map(|k| f(t0 + h * k as f64)).sum::<f64>() / n as f64)
}

/// Per-mode, per-harmonic traces Tr[O R_α⁽ⁿ⁾], so that ⟨O⟩(t) for any
/// initial state costs one pass over the modes.
#[derive(Clone, Debug)]
pub struct ModeTraces {
    traces: Vec<Vec<(i64, C64)>>,
    omega: f64,
}

impl ModeTraces {
    pub fn new(eig: &FloquetEigensystem, op: &CMat) -> Self {
        let traces = eig
            .modes()
            .iter()
            .map(|m| m.right.harmonics().map(|(n, r)| (n, trace_product(op, r))).collect())
            .collect();
        Self { traces, omega: eig.omega_d() }
    }

    /// ⟨O⟩(t) given the evolved mode weights c_α e^{Ω_α t}.
    pub fn value(&self, weights: &[C64], t: f64) -> f64 {
        let mut acc = ZERO;
        for (w, tr) in weights.iter().zip(&self.traces) {
            if *w == ZERO {
                continue;
            }
            let mut s = ZERO;
            for &(n, x) in tr {
                s += x * C64::from_polar(1.0, -(n as f64) * self.omega * t);
            }
            acc += w * s;
        }
        acc.re
    }
}

/// Finite-time observables I_out(τ) and g²(τ) for one initial state, each
/// averaged over the drive period that starts at τ.
#[derive(Clone, Debug)]
pub struct TransientObservables<'a> {
    eig: &'a FloquetEigensystem,
    intensity: ModeTraces,
    numerator: ModeTraces,
    coefficients: Vec<C64>,
    pub samples: usize,
}

impl<'a> TransientObservables<'a> {
    pub fn new(eig: &'a FloquetEigensystem, ops: &OutputOperators, rho0: &CMat) -> Self {
        Self {
            eig,
            intensity: ModeTraces::new(eig, &ops.intensity_op),
            numerator: ModeTraces::new(eig, &ops.g2_numerator_op),
            coefficients: eig.coefficients(rho0),
            samples: DEFAULT_SAMPLES,
        }
    }

    /// Re-targets the cached traces to another initial state.
    pub fn with_initial_state(&self, rho0: &CMat) -> Self {
        Self { coefficients: self.eig.coefficients(rho0), ..self.clone() }
    }

    pub fn intensity_at(&self, t: f64) -> f64 {
        self.intensity.value(&self.eig.evolved_weights(&self.coefficients, t), t)
    }

    /// (I_out, g²) period-averaged from `tau`.
    pub fn at(&self, tau: f64) -> (f64, Option<f64>) {
        let period = self.eig.period();
        let mut num = 0.0;
        let intensity = period_average(
            |t| {
                let w = self.eig.evolved_weights(&self.coefficients, t);
                num += self.numerator.value(&w, t);
                self.intensity.value(&w, t)
            },
            tau,
            period,
            self.samples,
        )
        .expect("sample count is at least the minimum");
        let numerator = num / self.samples as f64;
        (intensity, ratio(numerator, intensity))
    }
}

/// Least-squares fit of ln δ(τ) = a − rτ over the last decade δ passes
/// through before settling below `converged`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DecayFit {
    /// Fitted rate r (positive for decay).
    pub rate: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Scans `delta` on a geometric grid over [`t_min`, `t_max`], locates the last
/// passage from `10·converged` down to `converged`, and fits an exponential to
/// 64 points in that window. `None` if δ never crosses the decade.
pub fn fit_final_decade<F: FnMut(f64) -> f64>(
    mut delta: F,
    t_min: f64,
    t_max: f64,
    converged: f64,
) -> Option<DecayFit> {
    const SCAN: usize = 400;
    let ratio = (t_max / t_min).powf(1.0 / (SCAN - 1) as f64);
    let grid: Vec<f64> = (0..SCAN).map(|k| t_min * ratio.powi(k as i32)).collect();
    let values: Vec<f64> = grid.iter().map(|&t| delta(t)).collect();
    let end = values.iter().rposition(|&d| d >= converged)?;
    if end + 1 >= SCAN {
        return None;
    }
    let start = values[..=end].iter().rposition(|&d| d >= 10.0 * converged)?;
    let (a, b) = (grid[start], grid[end + 1]);
    let n = 64;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .map(|t| (t, delta(t)))
        .filter(|&(_, d)| d > 0.0)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    let (slope, _) = linear_fit(&pts)?;
    Some(DecayFit { rate: -slope, window: (a, b), samples: pts.len() })
}

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
