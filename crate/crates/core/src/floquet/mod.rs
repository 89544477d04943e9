//! Floquet-Liouville spectral solver.
//!
//! A periodic Liouvillian 𝓛(t) = Σₙ 𝓛⁽ⁿ⁾e^{−inω t} is lifted to the
//! time-independent operator on T-periodic matrices whose harmonic blocks are
//! `(n, m) ↦ 𝓛⁽ⁿ⁻ᵐ⁾ + inω δₙₘ`. Its eigenpairs (Ω, R) give solutions
//! ρ(t) = e^{Ωt} R(t); shifting Ω by −ikω while relabeling R⁽ᵐ⁾ ← R⁽ᵐ⁺ᵏ⁾
//! gives the same physical solution, so each physical mode is kept once, in
//! the first Brillouin zone |Im Ω| ≤ ω/2.
//!
//! The drive operator flips dressed parity, so the superparity
//! `p_a p_b (−1)ⁿ` of the basis element `|a⟩⟨b| ⊗ |n)` is conserved and the
//! enlarged matrix splits into two independent halves.

mod eigen;
mod periodic;
pub mod serialize;

use faer::Mat;
use num_complex::Complex64 as C64;
use thiserror::Error;

pub use eigen::{eigendecompose, RawEigensystem, MAX_CONDITION};
pub use periodic::{evaluate_periodic, PeriodicMatrix};

use crate::linalg::{self, vec_index, CMat, I, ZERO};
use crate::master_equation::FourierLiouvillian;
use crate::rabi_model::Parity;

/// Default ceiling on the dense Floquet matrix storage.
pub const DEFAULT_MEMORY_BUDGET: usize = 4 << 30;
/// Steady-mode tolerance in units of the largest dissipative rate.
pub const ZERO_MODE_TOL: f64 = 1e-10;
/// Two raw eigenvalues are copies when they differ by ikω within this.
const COPY_EIGENVALUE_TOL: f64 = 1e-9;
const COPY_OVERLAP_TOL: f64 = 1e-6;
/// Escalation target for max |⟨⟨L_α|R_β⟩⟩ − δ_αβ|.
pub const BIORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("harmonic cutoff k_max must be at least 1 (got {0})")]
    InvalidCutoff(usize),
    #[error("Floquet matrix of dimension {dim} needs ~{bytes} bytes, above the budget of {budget}")]
    MemoryBudget { dim: usize, bytes: usize, budget: usize },
    #[error("eigendecomposition failed: {0}")]
    EigenFailed(String),
    #[error("eigenvector {index} (Ω = {eigenvalue}) has condition number {condition:.3e}; the Liouvillian is close to defective")]
    IllConditioned { index: usize, condition: f64, eigenvalue: C64 },
    #[error("found {found} physical modes, expected {expected}; increase k_max (currently {k_max})")]
    ModeCount { found: usize, expected: usize, k_max: usize },
    #[error("steady mode: {0}")]
    ZeroMode(String),
    #[error("no dissipation: the steady mode is not isolated")]
    NoDissipation,
    #[error("harmonic cutoff not converged at k_max = {k_max}: slowest rate still moves by {drift:.3e}")]
    NotConverged { k_max: usize, drift: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloquetOptions {
    pub k_max: usize,
    /// Double k_max until the slowest nonzero mode stops moving.
    pub escalate: bool,
    /// Escalation stops when |Ω₁| changes by less than this times `rate_scale`.
    pub escalation_tol: f64,
    /// ... and max |⟨⟨L_α|R_β⟩⟩ − δ_αβ| is below this.
    pub biorthonormality_tol: f64,
    pub max_k_max: usize,
    /// Largest dissipative rate, used for the zero-mode and escalation tolerances.
    pub rate_scale: f64,
    pub memory_budget: usize,
    /// Split by superparity before diagonalizing.
    pub use_symmetry: bool,
}

impl FloquetOptions {
    pub fn new(k_max: usize, rate_scale: f64) -> Self {
        Self {
            k_max,
            escalate: true,
            escalation_tol: 1e-8,
            biorthonormality_tol: BIORTHONORMALITY_TOL,
            max_k_max: 32,
            rate_scale,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            use_symmetry: true,
        }
    }

    pub fn fixed(k_max: usize, rate_scale: f64) -> Self {
        Self { escalate: false, ..Self::new(k_max, rate_scale) }
    }

    pub fn for_params(params: &crate::SystemParams) -> Self {
        Self::new(params.k_max, params.rate_scale())
    }
}

pub fn floquet_dim(n_dressed: usize, k_max: usize) -> usize {
    (2 * k_max + 1) * n_dressed * n_dressed
}

/// Position of `|i⟩⟨j| ⊗ |n)` in the enlarged vector.
#[inline]
pub fn floquet_index(n: i64, i: usize, j: usize, dims: usize, k_max: usize) -> usize {
    (n + k_max as i64) as usize * dims * dims + vec_index(i, j, dims)
}

fn check_budget(dim: usize, budget: usize) -> Result<(), FloquetError> {
    // the matrix, its eigenvectors, their inverse and factorization workspace
    let bytes = dim.saturating_mul(dim).saturating_mul(16).saturating_mul(4);
    if bytes > budget {
        return Err(FloquetError::MemoryBudget { dim, bytes, budget });
    }
    Ok(())
}

pub fn assemble_floquet_matrix(liouv: &FourierLiouvillian, k_max: usize) -> Result<CMat, FloquetError> {
    assemble_floquet_matrix_with_budget(liouv, k_max, DEFAULT_MEMORY_BUDGET)
}

pub fn assemble_floquet_matrix_with_budget(
    liouv: &FourierLiouvillian,
    k_max: usize,
    budget: usize,
) -> Result<CMat, FloquetError> {
    if k_max < 1 {
        return Err(FloquetError::InvalidCutoff(k_max));
    }
    let nn = liouv.dims * liouv.dims;
    let blocks = 2 * k_max + 1;
    let dim = blocks * nn;
    check_budget(dim, budget)?;
    let mut m = Mat::<C64>::zeros(dim, dim);
    for bn in 0..blocks {
        let n = bn as i64 - k_max as i64;
        for bm in bn.saturating_sub(1)..(bn + 2).min(blocks) {
            let h = liouv.harmonic((bn as i64 - bm as i64) as i32);
            m.submatrix_mut(bn * nn, bm * nn, nn, nn).copy_from(h);
        }
        let shift = I * (n as f64 * liouv.omega_d);
        for r in 0..nn {
            m[(bn * nn + r, bn * nn + r)] += shift;
        }
    }
    Ok(m)
}

/// Superparity of every enlarged-space index.
fn superparity(parities: &[Parity], k_max: usize) -> Vec<bool> {
    let n = parities.len();
    let mut out = Vec::with_capacity(floquet_dim(n, k_max));
    for b in 0..(2 * k_max + 1) {
        let harmonic_odd = (b + k_max) % 2 == 1;
        for j in 0..n {
            for i in 0..n {
                let pair_odd = parities[i] != parities[j];
                out.push(pair_odd ^ harmonic_odd);
            }
        }
    }
    out
}

/// Eigendecomposition of the enlarged matrix, optionally split by superparity.
pub fn raw_floquet_eigensystem(
    liouv: &FourierLiouvillian,
    parities: &[Parity],
    k_max: usize,
    use_symmetry: bool,
    budget: usize,
) -> Result<RawEigensystem, FloquetError> {
    let full = assemble_floquet_matrix_with_budget(liouv, k_max, budget)?;
    if !use_symmetry {
        return eigendecompose(&full);
    }
    let dim = full.nrows();
    let labels = superparity(parities, k_max);
    let sectors: [Vec<usize>; 2] = [
        (0..dim).filter(|&i| !labels[i]).collect(),
        (0..dim).filter(|&i| labels[i]).collect(),
    ];
    let mut leak = 0.0f64;
    for &c in &sectors[0] {
        for &r in &sectors[1] {
            leak = leak.max(full[(r, c)].norm()).max(full[(c, r)].norm());
        }
    }
    if leak != 0.0 {
        log::warn!("superparity sectors leak ({leak:.3e}); diagonalizing the full matrix");
        return eigendecompose(&full);
    }

    let mut values = Vec::with_capacity(dim);
    let mut condition = Vec::with_capacity(dim);
    let mut right = Mat::<C64>::zeros(dim, dim);
    let mut left = Mat::<C64>::zeros(dim, dim);
    let mut col = 0;
    for idx in &sectors {
        if idx.is_empty() {
            continue;
        }
        let sub = Mat::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]);
        let e = eigendecompose(&sub)?;
        for k in 0..e.len() {
            for (r, &g) in idx.iter().enumerate() {
                right[(g, col)] = e.right[(r, k)];
                left[(g, col)] = e.left[(r, k)];
            }
            values.push(e.values[k]);
            condition.push(e.condition[k]);
            col += 1;
        }
    }
    Ok(RawEigensystem { values, right, left, condition })
}

/// Splits an enlarged vector into its harmonic components, n = −k_max..=k_max.
pub fn unstack(v: faer::ColRef<'_, C64>, dims: usize, k_max: usize) -> Vec<CMat> {
    let nn = dims * dims;
    (0..(2 * k_max + 1))
        .map(|b| Mat::from_fn(dims, dims, |i, j| v[b * nn + vec_index(i, j, dims)]))
        .collect()
}

fn harmonic_centroid(v: faer::ColRef<'_, C64>, dims: usize, k_max: usize) -> f64 {
    let nn = dims * dims;
    let mut num = 0.0;
    let mut den = 0.0;
    for b in 0..(2 * k_max + 1) {
        let w: f64 = (0..nn).map(|r| v[b * nn + r].norm_sqr()).sum();
        num += (b as f64 - k_max as f64) * w;
        den += w;
    }
    num / den
}

/// One physical Floquet mode in the first Brillouin zone.
#[derive(Clone, Debug)]
pub struct FloquetMode {
    pub eigenvalue: C64,
    pub right: PeriodicMatrix,
    pub left: PeriodicMatrix,
    pub condition: f64,
}

/// Physical modes of the periodic Liouvillian, ordered with the steady mode
/// first and the rest by ascending |Re Ω|.
#[derive(Clone, Debug)]
pub struct FloquetEigensystem {
    modes: Vec<FloquetMode>,
    omega_d: f64,
    zero_index: usize,
    dims: usize,
    k_max: usize,
}

fn sort_key(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.abs()
        .total_cmp(&b.re.abs())
        .then(a.im.total_cmp(&b.im))
}

/// Keeps one representative per physical mode, shifted into the first
/// Brillouin zone, and normalizes the steady mode to unit trace.
pub fn reduce_to_first_brillouin(
    raw: &RawEigensystem,
    dims: usize,
    k_max: usize,
    omega_d: f64,
    rate_scale: f64,
) -> Result<FloquetEigensystem, FloquetError> {
    let expected = dims * dims;
    if raw.right.nrows() != floquet_dim(dims, k_max) {
        return Err(FloquetError::NotSquare { rows: raw.right.nrows(), cols: floquet_dim(dims, k_max) });
    }
    if rate_scale <= 0.0 {
        return Err(FloquetError::NoDissipation);
    }

    let mut candidates: Vec<(f64, usize)> = (0..raw.len())
        .filter_map(|k| {
            let c = harmonic_centroid(raw.right.col(k), dims, k_max);
            (c > -0.5 && c <= 0.5).then_some((c.abs(), k))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut modes: Vec<FloquetMode> = Vec::with_capacity(expected);
    for &(_, k) in &candidates {
        let omega = raw.values[k];
        let shift = (omega.im / omega_d).round() as i64;
        let eigenvalue = omega - I * (shift as f64 * omega_d);
        let lowest = -(k_max as i64) - shift;
        let right = PeriodicMatrix::new(lowest, unstack(raw.right.col(k), dims, k_max), omega_d);
        let is_copy = modes.iter().any(|m| {
            (m.eigenvalue - eigenvalue).norm() < COPY_EIGENVALUE_TOL && {
                let ov = m.right.inner(&right).norm()
                    / (m.right.norm_sqr() * right.norm_sqr()).sqrt();
                ov > 1.0 - COPY_OVERLAP_TOL
            }
        });
        if is_copy {
            continue;
        }
        let left = PeriodicMatrix::new(lowest, unstack(raw.left.col(k), dims, k_max), omega_d);
        modes.push(FloquetMode { eigenvalue, right, left, condition: raw.condition[k] });
    }
    if modes.len() != expected {
        return Err(FloquetError::ModeCount { found: modes.len(), expected, k_max });
    }

    let tol_zero = ZERO_MODE_TOL * rate_scale;
    let zeros: Vec<usize> = (0..modes.len()).filter(|&k| modes[k].eigenvalue.norm() < tol_zero).collect();
    if zeros.len() != 1 {
        let smallest = modes.iter().map(|m| m.eigenvalue.norm()).fold(f64::INFINITY, f64::min);
        return Err(FloquetError::ZeroMode(format!(
            "{} eigenvalues below {tol_zero:.1e} (smallest |Ω| = {smallest:.3e})",
            zeros.len()
        )));
    }
    let mut zero = modes.swap_remove(zeros[0]);
    modes.sort_by(|a, b| sort_key(&a.eigenvalue, &b.eigenvalue));

    let tr = zero.right.component(0).map(linalg::trace).unwrap_or(ZERO);
    if tr.norm() < 1e-12 {
        return Err(FloquetError::ZeroMode(format!("zeroth harmonic has trace {:.3e}", tr.norm())));
    }
    zero.right = zero.right.scaled(C64::new(1.0, 0.0) / tr);
    zero.left = PeriodicMatrix::constant(linalg::identity(dims), omega_d);
    refine_steady_mode(&mut zero, &mut modes);
    modes.insert(0, zero);

    Ok(FloquetEigensystem { modes, omega_d, zero_index: 0, dims, k_max })
}

/// Cleans up the mixing between the steady mode and the other modes that a
/// dense solver leaves behind when |Ω₁| is tiny. The steady left mode is
/// known exactly (the trace) and R₀ is Hermitian, so decaying modes are made
/// exactly traceless, R₀ is replaced by its Hermitian part, and the other left
/// modes are re-orthogonalized against it.
fn refine_steady_mode(zero: &mut FloquetMode, others: &mut [FloquetMode]) {
    for m in others.iter_mut() {
        let tr = zero.left.inner(&m.right);
        m.right = m.right.combine(linalg::ONE, &zero.right, -tr);
    }
    let half = C64::new(0.5, 0.0);
    zero.right = zero.right.combine(half, &zero.right.adjoint(), half);
    for m in others.iter_mut() {
        let c = m.left.inner(&zero.right).conj();
        m.left = m.left.combine(linalg::ONE, &zero.left, -c);
    }
}

/// Diagonalizes at the requested cutoff without escalation.
pub fn solve_at(
    liouv: &FourierLiouvillian,
    parities: &[Parity],
    k_max: usize,
    opts: &FloquetOptions,
) -> Result<FloquetEigensystem, FloquetError> {
    let raw = raw_floquet_eigensystem(liouv, parities, k_max, opts.use_symmetry, opts.memory_budget)?;
    reduce_to_first_brillouin(&raw, liouv.dims, k_max, liouv.omega_d, opts.rate_scale)
}

/// Diagonalizes, doubling k_max until the physical modes are resolved: the
/// mode count is right, left and right modes are biorthonormal to
/// `opts.biorthonormality_tol`, and the slowest nonzero mode has stopped moving.
pub fn solve(
    liouv: &FourierLiouvillian,
    parities: &[Parity],
    opts: &FloquetOptions,
) -> Result<FloquetEigensystem, FloquetError> {
    if !opts.escalate {
        return solve_at(liouv, parities, opts.k_max, opts);
    }
    let mut k = opts.k_max;
    let mut previous: Option<FloquetEigensystem> = None;
    let mut drift = f64::NAN;
    loop {
        match solve_at(liouv, parities, k, opts) {
            Ok(current) => {
                let residual = current.biorthonormality_residual();
                log::debug!("k_max {k}: biorthonormality residual {residual:.2e}");
                if !liouv.is_driven() {
                    return Ok(current);
                }
                if let Some(prev) = &previous {
                    drift = (current.slowest().norm() - prev.slowest().norm()).abs();
                    log::debug!("k_max {k}: |Ω₁| drift {drift:.3e}");
                    if residual < opts.biorthonormality_tol
                        && drift < opts.escalation_tol * opts.rate_scale
                    {
                        return Ok(current);
                    }
                }
                previous = Some(current);
            }
            Err(FloquetError::ModeCount { .. }) => previous = None,
            Err(e) => return Err(e),
        }
        if 2 * k > opts.max_k_max {
            return Err(FloquetError::NotConverged { k_max: k, drift });
        }
        k *= 2;
    }
}

impl FloquetEigensystem {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[FloquetMode] {
        &self.modes
    }

    pub fn mode(&self, alpha: usize) -> &FloquetMode {
        &self.modes[alpha]
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_d
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Nonzero modes ordered by |Re Ω| (indices into [`Self::modes`]).
    pub fn nonzero_indices(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&k| k != self.zero_index).collect()
    }

    /// Ω₁, the nonzero eigenvalue with the smallest |Re Ω|.
    pub fn slowest(&self) -> C64 {
        self.nonzero_indices()
            .first()
            .map(|&k| self.modes[k].eigenvalue)
            .unwrap_or(ZERO)
    }

    /// R₀(t), normalized to unit trace.
    pub fn steady_state(&self) -> &PeriodicMatrix {
        &self.modes[self.zero_index].right
    }

    /// c_α = Tr[L_α(0)† ρ₀] for every mode.
    pub fn coefficients(&self, rho0: &CMat) -> Vec<C64> {
        self.modes
            .iter()
            .map(|m| {
                let l0 = m.left.at_zero();
                let mut c = ZERO;
                for j in 0..self.dims {
                    for i in 0..self.dims {
                        c += l0[(i, j)].conj() * rho0[(i, j)];
                    }
                }
                c
            })
            .collect()
    }

    /// Σ_α w_α R_α(t).
    pub fn synthesize(&self, weights: &[C64], t: f64) -> CMat {
        let d = self.dims;
        let mut out = Mat::<C64>::zeros(d, d);
        for (m, &w) in self.modes.iter().zip(weights) {
            if w == ZERO {
                continue;
            }
            for (n, comp) in m.right.harmonics() {
                let f = w * C64::from_polar(1.0, -(n as f64) * self.omega_d * t);
                for j in 0..d {
                    for i in 0..d {
                        out[(i, j)] += f * comp[(i, j)];
                    }
                }
            }
        }
        out
    }

    /// Mode weights c_α e^{Ω_α t}, with the steady mode held at exactly one.
    pub fn evolved_weights(&self, coefficients: &[C64], t: f64) -> Vec<C64> {
        coefficients
            .iter()
            .zip(&self.modes)
            .enumerate()
            .map(|(k, (&c, m))| if k == self.zero_index { c } else { c * (m.eigenvalue * t).exp() })
            .collect()
    }

    /// ρ(t) = Σ_α c_α e^{Ω_α t} R_α(t).
    pub fn propagate(&self, rho0: &CMat, t: f64) -> CMat {
        let c = self.coefficients(rho0);
        self.synthesize(&self.evolved_weights(&c, t), t)
    }

    /// Superoperator U(t, t′) = Σ_α e^{Ω_α(t−t′)} |R_α(t)⟩⟩⟨⟨L_α(t′)|.
    pub fn propagator(&self, t: f64, t_prime: f64) -> CMat {
        let nn = self.dims * self.dims;
        let mut u = Mat::<C64>::zeros(nn, nn);
        for (k, m) in self.modes.iter().enumerate() {
            let f = if k == self.zero_index { linalg::ONE } else { (m.eigenvalue * (t - t_prime)).exp() };
            let r = linalg::vectorize(&m.right.evaluate(t));
            let l = linalg::vectorize(&m.left.evaluate(t_prime));
            for (c, lc) in l.iter().enumerate() {
                let lc = f * lc.conj();
                if lc == ZERO {
                    continue;
                }
                for (row, rv) in r.iter().enumerate() {
                    u[(row, c)] += rv * lc;
                }
            }
        }
        u
    }

    /// max |⟨⟨L_α|R_β⟩⟩ − δ_αβ| over all mode pairs.
    pub fn biorthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, ma) in self.modes.iter().enumerate() {
            for (b, mb) in self.modes.iter().enumerate() {
                let target = if a == b { linalg::ONE } else { ZERO };
                worst = worst.max((ma.left.inner(&mb.right) - target).norm());
            }
        }
        worst
    }

    pub(crate) fn from_parts(
        modes: Vec<FloquetMode>,
        omega_d: f64,
        zero_index: usize,
        dims: usize,
        k_max: usize,
    ) -> Self {
        Self { modes, omega_d, zero_index, dims, k_max }
    }
}

/// Steady state R₀(t) with unit trace in the zeroth harmonic.
pub fn steady_state(eig: &FloquetEigensystem) -> PeriodicMatrix {
    eig.steady_state().clone()
}

pub fn propagate(eig: &FloquetEigensystem, rho0: &CMat, t: f64) -> CMat {
    eig.propagate(rho0, t)
}

pub fn propagator(eig: &FloquetEigensystem, t: f64, t_prime: f64) -> CMat {
    eig.propagator(t, t_prime)
}
