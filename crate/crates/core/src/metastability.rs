//! Slow modes of the Floquet Liouvillian and the one-parameter metastable
//! manifold ρ(c) = R₀(t) + c R₁(t), c ∈ [c_min, c_max].

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::floquet::{FloquetEigensystem, PeriodicMatrix};
use crate::linalg::{self, CMat, ONE};

/// Lowest admissible eigenvalue of an extremal state before it is declared unphysical.
pub const POSITIVITY_TOL: f64 = -1e-6;
/// Number of phases per period at which positivity is checked.
pub const POSITIVITY_SAMPLES: usize = 64;
/// A slow mode counts as real when |Im Ω| is below this times γ.
pub const REALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetastabilityError {
    #[error("slow mode Ω = {0} is not real")]
    NotReal(C64),
    #[error("no real nonzero mode available")]
    NoRealMode,
    #[error("periodic matrix vanishes under hermitization")]
    Degenerate,
    #[error("extremal state ρ_{which} has eigenvalue {min_eigenvalue:.3e} at t = {t:.4}; the single-mode manifold is not a set of states here")]
    Positivity { which: &'static str, min_eigenvalue: f64, t: f64 },
}

/// Nonzero eigenvalues ordered by ascending |Re Ω|.
pub fn liouvillian_gap(eig: &FloquetEigensystem) -> Vec<C64> {
    let mut v: Vec<C64> = eig.nonzero_indices().iter().map(|&k| eig.mode(k).eigenvalue).collect();
    v.sort_by(|a, b| a.re.abs().total_cmp(&b.re.abs()).then(a.im.total_cmp(&b.im)));
    v
}

/// Slow rates Ω₁, Ω₂, Ω₃, … with each complex-conjugate pair counted once
/// (represented by its member with Im Ω ≥ 0).
pub fn labelled_rates(eig: &FloquetEigensystem, gamma: f64) -> Vec<C64> {
    let tol = 1e-9_f64.max(REALITY_TOL * gamma);
    let mut out: Vec<C64> = Vec::new();
    for z in liouvillian_gap(eig) {
        let rep = if z.im < -tol { z.conj() } else { z };
        if rep.im > tol && out.iter().any(|w| (w - rep).norm() < tol.max(1e-6 * rep.norm())) {
            continue;
        }
        out.push(rep);
    }
    out
}

/// Indices of the nonzero modes with |Re Ω| < threshold · γ.
pub fn detect_metastability(eig: &FloquetEigensystem, threshold: f64, gamma: f64) -> Vec<usize> {
    eig.nonzero_indices()
        .into_iter()
        .filter(|&k| eig.mode(k).eigenvalue.re.abs() < threshold * gamma)
        .collect()
}

/// Nonzero mode with the smallest |Re Ω| among the real ones.
pub fn slowest_real_mode(eig: &FloquetEigensystem, gamma: f64) -> Option<usize> {
    eig.nonzero_indices()
        .into_iter()
        .find(|&k| eig.mode(k).eigenvalue.im.abs() < REALITY_TOL * gamma)
}

fn hermitize(m: &PeriodicMatrix) -> Result<PeriodicMatrix, MetastabilityError> {
    let adj = m.adjoint();
    let half = C64::new(0.5, 0.0);
    let even = m.combine(half, &adj, half);
    // i·M made Hermitian: i(M − M‡)/2
    let odd = m.combine(C64::new(0.0, 0.5), &adj, C64::new(0.0, -0.5));
    let (ne, no) = (even.norm_sqr(), odd.norm_sqr());
    if ne.max(no) < 1e-300 {
        return Err(MetastabilityError::Degenerate);
    }
    Ok(if ne >= no { even } else { odd })
}

/// Hermitian representatives of a real slow mode, normalized so that
/// ⟨⟨L₁|R₁⟩⟩ = 1 and max|Sp L₁(0)| = 1.
///
/// R₁ is oriented so that its zeroth harmonic has non-positive weight on the
/// dressed ground state; with this choice ρ_min lies on the ground-state side.
pub fn hermitize_slow_mode(
    r1: &PeriodicMatrix,
    l1: &PeriodicMatrix,
    omega_1: C64,
    gamma: f64,
) -> Result<(PeriodicMatrix, PeriodicMatrix), MetastabilityError> {
    if omega_1.im.abs() >= REALITY_TOL * gamma {
        return Err(MetastabilityError::NotReal(omega_1));
    }
    let r = hermitize(r1)?;
    let l = hermitize(l1)?;
    let overlap = l.inner(&r).re;
    if overlap.abs() < 1e-300 {
        return Err(MetastabilityError::Degenerate);
    }
    let l = l.scaled(C64::new(1.0 / overlap, 0.0));
    let spread = linalg::hermitian_eigenvalues(&l.at_zero())
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    let mut r = r.scaled(C64::new(spread, 0.0));
    let mut l = l.scaled(C64::new(1.0 / spread, 0.0));
    let ground = r.component(0).map(|c| c[(0, 0)].re).unwrap_or(0.0);
    if ground > 0.0 {
        r = r.scaled(-ONE);
        l = l.scaled(-ONE);
    }
    Ok((r, l))
}

/// (min, max) of Sp[L₁(0)].
pub fn extremal_coefficients(l1: &PeriodicMatrix) -> (f64, f64) {
    let ev = linalg::hermitian_eigenvalues(&l1.at_zero());
    (ev[0], ev[ev.len() - 1])
}

/// c₁ = Tr[L₁(0) ρ₀].
pub fn metastable_projection(rho0: &CMat, l1: &PeriodicMatrix) -> f64 {
    let l0 = l1.at_zero();
    let d = rho0.nrows();
    let mut c = C64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            c += l0[(i, j)].conj() * rho0[(i, j)];
        }
    }
    c.re
}

/// R₀ + c R₁ with its worst eigenvalue over one period.
#[derive(Clone, Debug)]
pub struct ExtremalState {
    pub state: PeriodicMatrix,
    pub coefficient: f64,
    pub min_eigenvalue: f64,
    pub worst_time: f64,
}

impl ExtremalState {
    pub fn new(r0: &PeriodicMatrix, r1: &PeriodicMatrix, c: f64) -> Self {
        let state = r0.combine(ONE, r1, C64::new(c, 0.0));
        let period = state.period();
        let mut min_eigenvalue = f64::INFINITY;
        let mut worst_time = 0.0;
        for s in 0..POSITIVITY_SAMPLES {
            let t = period * s as f64 / POSITIVITY_SAMPLES as f64;
            let e = linalg::hermitian_eigenvalues(&state.evaluate(t))[0];
            if e < min_eigenvalue {
                min_eigenvalue = e;
                worst_time = t;
            }
        }
        Self { state, coefficient: c, min_eigenvalue, worst_time }
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= POSITIVITY_TOL
    }

    /// Density matrix at time t, with small negative eigenvalues clipped.
    pub fn density_at(&self, t: f64) -> CMat {
        linalg::clip_to_density(&self.state.evaluate(t))
    }
}

/// ρ_min and ρ_max; fails if either has an eigenvalue below −10⁻⁶.
pub fn extremal_states(
    r0: &PeriodicMatrix,
    r1: &PeriodicMatrix,
    c_min: f64,
    c_max: f64,
) -> Result<(ExtremalState, ExtremalState), MetastabilityError> {
    let lo = ExtremalState::new(r0, r1, c_min);
    let hi = ExtremalState::new(r0, r1, c_max);
    for (which, s) in [("min", &lo), ("max", &hi)] {
        if !s.is_physical() {
            return Err(MetastabilityError::Positivity {
                which,
                min_eigenvalue: s.min_eigenvalue,
                t: s.worst_time,
            });
        }
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug)]
pub struct MetastableManifold {
    /// Index of the slow mode in the eigensystem.
    pub mode_index: usize,
    pub omega_1: f64,
    pub r1: PeriodicMatrix,
    pub l1: PeriodicMatrix,
    pub c_min: f64,
    pub c_max: f64,
    pub rho_min: ExtremalState,
    pub rho_max: ExtremalState,
    /// Sorted |Re Ω| of all nonzero modes.
    pub gap_report: Vec<f64>,
    /// |c₂|‖R₂(0)‖ / (|c₁|‖R₁(0)‖) for a ground-state start, where mode 2 is
    /// the slowest complex mode; `None` when there is no complex mode.
    pub secondary_weight: Option<f64>,
}

impl MetastableManifold {
    /// Builds the manifold on the slowest real nonzero mode. Extremal states
    /// are kept even when they fail the positivity check; inspect
    /// [`ExtremalState::is_physical`] or call [`Self::check_positivity`].
    pub fn build(eig: &FloquetEigensystem, gamma: f64) -> Result<Self, MetastabilityError> {
        let k = slowest_real_mode(eig, gamma).ok_or(MetastabilityError::NoRealMode)?;
        let mode = eig.mode(k);
        let (r1, l1) = hermitize_slow_mode(&mode.right, &mode.left, mode.eigenvalue, gamma)?;
        let (c_min, c_max) = extremal_coefficients(&l1);
        let r0 = eig.steady_state();
        let rho_min = ExtremalState::new(r0, &r1, c_min);
        let rho_max = ExtremalState::new(r0, &r1, c_max);
        let gap_report = liouvillian_gap(eig).iter().map(|z| z.re.abs()).collect();

        let ground = linalg::basis_projector(eig.dims(), 0);
        let c1 = metastable_projection(&ground, &l1);
        let secondary_weight = eig
            .nonzero_indices()
            .into_iter()
            .find(|&j| eig.mode(j).eigenvalue.im.abs() >= REALITY_TOL * gamma)
            .map(|j| {
                let m = eig.mode(j);
                let c2 = eig.coefficients(&ground)[j];
                let r1_norm = r1.at_zero().norm_l2();
                (c2.norm() * m.right.at_zero().norm_l2()) / (c1.abs() * r1_norm).max(1e-300)
            });

        Ok(Self {
            mode_index: k,
            omega_1: mode.eigenvalue.re,
            r1,
            l1,
            c_min,
            c_max,
            rho_min,
            rho_max,
            gap_report,
            secondary_weight,
        })
    }

    pub fn check_positivity(&self) -> Result<(), MetastabilityError> {
        for (which, s) in [("min", &self.rho_min), ("max", &self.rho_max)] {
            if !s.is_physical() {
                return Err(MetastabilityError::Positivity {
                    which,
                    min_eigenvalue: s.min_eigenvalue,
                    t: s.worst_time,
                });
            }
        }
        Ok(())
    }

    pub fn projection(&self, rho0: &CMat) -> f64 {
        metastable_projection(rho0, &self.l1)
    }

    /// R₀ + c₁ R₁ for the given initial state.
    pub fn metastable_state(&self, eig: &FloquetEigensystem, rho0: &CMat) -> PeriodicMatrix {
        eig.steady_state()
            .combine(ONE, &self.r1, C64::new(self.projection(rho0), 0.0))
    }
}
