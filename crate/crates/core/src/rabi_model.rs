//! The quantum Rabi Hamiltonian on a truncated cavity ⊗ qubit space and its
//! parity-labeled dressed spectrum.
//!
//! Basis ordering is Fock index major, qubit index minor: `|n, q⟩` sits at
//! index `2n + q`, with `q = 0` the qubit ground state and `q = 1` the excited
//! state.

use std::fmt;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat, ONE, ZERO};

/// Two eigenvalues closer than this (in units of ω_c) are treated as a
/// near-degenerate cluster whose basis is re-chosen to diagonalize parity.
const DEGENERACY_TOL: f64 = 1e-6;
/// Minimum |⟨v|Π|v⟩| accepted for a dressed state.
const MIN_PARITY_PURITY: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cavity truncation n_fock = {0} is too small (need at least 2)")]
    TruncationTooSmall(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dressed state {index} has parity expectation {expectation:.4}; truncation or degeneracy handling is inadequate")]
    ParityMixing { index: usize, expectation: f64 },
    #[error("Hamiltonian does not commute with parity (‖[H, Π]‖ = {0:.3e})")]
    ParityNotConserved(f64),
    #[error("dressed ground state has odd parity")]
    OddGroundState,
    #[error("dressed level {parity}{index} is not among the retained levels")]
    MissingLevel { parity: Parity, index: usize },
}

/// All physical and numerical knobs. Frequencies and rates are in units of ω_c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub omega_c: f64,
    pub omega_a: f64,
    pub g: f64,
    /// Drive amplitude F.
    pub drive: f64,
    pub omega_d: f64,
    /// Cavity decay rate γ.
    pub gamma: f64,
    /// Atomic decay rate κ.
    pub kappa: f64,
    /// Pure dephasing rate γ_φ.
    pub gamma_phi: f64,
    pub n_fock: usize,
    pub n_dressed: usize,
    pub k_max: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            omega_a: 1.0,
            g: 0.0,
            drive: 0.0,
            omega_d: 1.0,
            gamma: 0.0,
            kappa: 0.0,
            gamma_phi: 0.0,
            n_fock: 56,
            n_dressed: 12,
            k_max: 2,
        }
    }
}

impl SystemParams {
    /// Resonant qubit and cavity with γ = κ = 10⁻² ω_c and F = 0.1 γ. The
    /// drive frequency still has to be resolved, e.g. with
    /// [`SystemParams::with_resonant_drive`].
    pub fn weak_drive_point(g: f64) -> Self {
        Self {
            g,
            drive: 1e-3,
            gamma: 1e-2,
            kappa: 1e-2,
            ..Self::default()
        }
    }

    /// Largest dissipative rate; the scale for all "small eigenvalue" tests.
    pub fn rate_scale(&self) -> f64 {
        self.gamma.max(self.kappa).max(self.gamma_phi)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [
            ("omega_c", self.omega_c),
            ("omega_a", self.omega_a),
            ("g", self.g),
            ("drive", self.drive),
            ("omega_d", self.omega_d),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("gamma_phi", self.gamma_phi),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.omega_c <= 0.0 {
            return Err(invalid("omega_c", "must be positive"));
        }
        for (name, v) in [("gamma", self.gamma), ("kappa", self.kappa), ("gamma_phi", self.gamma_phi)] {
            if v < 0.0 {
                return Err(invalid(name, "rates must be non-negative"));
            }
        }
        if self.n_fock < 2 {
            return Err(ModelError::TruncationTooSmall(self.n_fock));
        }
        if self.n_dressed == 0 || self.n_dressed > 2 * self.n_fock {
            return Err(invalid("n_dressed", format!("must lie in 1..={}", 2 * self.n_fock)));
        }
        if self.k_max < 1 {
            return Err(invalid("k_max", "must be at least 1"));
        }
        if self.drive != 0.0 && self.omega_d <= 0.0 {
            return Err(invalid("omega_d", "must be positive when the drive is on"));
        }
        Ok(())
    }

    /// Returns a copy whose drive is tuned to the |Ψ₀⁺⟩ → |Ψ₁⁻⟩ transition.
    pub fn with_resonant_drive(&self) -> Result<Self, ModelError> {
        let spectrum = dressed_spectrum(self)?;
        Ok(Self {
            omega_d: resonant_drive_frequency(&spectrum)?,
            ..self.clone()
        })
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter { name, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+")]
    Even,
    #[serde(rename = "-")]
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "+",
            Parity::Odd => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedLevel {
    pub energy: f64,
    pub parity: Parity,
    /// Position within its parity sector, counted from the lowest energy.
    pub index: usize,
}

/// Lowest `n_dressed` eigenpairs of the Rabi Hamiltonian, in ascending energy.
#[derive(Clone, Debug)]
pub struct DressedSpectrum {
    levels: Vec<DressedLevel>,
    vectors: CMat,
    n_fock: usize,
}

impl DressedSpectrum {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn levels(&self) -> &[DressedLevel] {
        &self.levels
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn parities(&self) -> Vec<Parity> {
        self.levels.iter().map(|l| l.parity).collect()
    }

    /// Eigenvectors as columns, in the bare Fock ⊗ qubit basis.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// Global (energy-ordered) position of |Ψ_index^parity⟩.
    pub fn position(&self, parity: Parity, index: usize) -> Option<usize> {
        self.levels
            .iter()
            .position(|l| l.parity == parity && l.index == index)
    }

    pub fn require(&self, parity: Parity, index: usize) -> Result<usize, ModelError> {
        self.position(parity, index)
            .ok_or(ModelError::MissingLevel { parity, index })
    }

    pub fn energy(&self, parity: Parity, index: usize) -> Option<f64> {
        self.position(parity, index).map(|k| self.levels[k].energy)
    }

    /// Matrix elements `⟨Ψ_i|op|Ψ_j⟩` of a bare-basis operator.
    pub fn project(&self, op: &CMat) -> CMat {
        let v = &self.vectors;
        &(v.adjoint() * op) * v
    }

    /// JSON dump with fields `g`, `energies`, `parities`.
    pub fn to_json(&self, g: f64) -> String {
        #[derive(Serialize)]
        struct Dump {
            g: f64,
            energies: Vec<f64>,
            parities: Vec<Parity>,
        }
        serde_json::to_string(&Dump {
            g,
            energies: self.energies(),
            parities: self.parities(),
        })
        .expect("spectrum dump serializes")
    }
}

#[inline]
fn bare_index(n: usize, q: usize) -> usize {
    2 * n + q
}

/// Cavity annihilation operator `a ⊗ 1`.
pub fn cavity_annihilation(n_fock: usize) -> CMat {
    let d = 2 * n_fock;
    let mut a = Mat::zeros(d, d);
    for n in 1..n_fock {
        for q in 0..2 {
            a[(bare_index(n - 1, q), bare_index(n, q))] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    a
}

/// Qubit lowering operator `1 ⊗ σ₋`.
pub fn qubit_lowering(n_fock: usize) -> CMat {
    let d = 2 * n_fock;
    let mut s = Mat::zeros(d, d);
    for n in 0..n_fock {
        s[(bare_index(n, 0), bare_index(n, 1))] = ONE;
    }
    s
}

/// `1 ⊗ σ_z` with σ_z = |e⟩⟨e| − |g⟩⟨g|.
pub fn qubit_sigma_z(n_fock: usize) -> CMat {
    let d = 2 * n_fock;
    Mat::from_fn(d, d, |i, j| {
        if i != j {
            ZERO
        } else if i % 2 == 1 {
            ONE
        } else {
            -ONE
        }
    })
}

pub fn build_rabi_hamiltonian(params: &SystemParams) -> Result<CMat, ModelError> {
    if params.n_fock < 2 {
        return Err(ModelError::TruncationTooSmall(params.n_fock));
    }
    let n_fock = params.n_fock;
    let d = 2 * n_fock;
    let mut h = Mat::zeros(d, d);
    for n in 0..n_fock {
        for q in 0..2 {
            let i = bare_index(n, q);
            h[(i, i)] = C64::new(params.omega_c * n as f64 + params.omega_a * q as f64, 0.0);
        }
    }
    // −g (a + a†) σ_x: couples |n, q⟩ ↔ |n ± 1, 1 − q⟩.
    for n in 1..n_fock {
        let amp = C64::new(-params.g * (n as f64).sqrt(), 0.0);
        for q in 0..2 {
            let i = bare_index(n - 1, q);
            let j = bare_index(n, 1 - q);
            h[(i, j)] += amp;
            h[(j, i)] += amp;
        }
    }
    Ok(h)
}

/// Π = exp[iπ(a†a + σ₊σ₋)], diagonal in the bare basis.
pub fn build_parity_operator(n_fock: usize) -> Result<CMat, ModelError> {
    if n_fock < 1 {
        return Err(ModelError::TruncationTooSmall(n_fock));
    }
    let d = 2 * n_fock;
    Ok(Mat::from_fn(d, d, |i, j| {
        if i != j {
            ZERO
        } else if (i / 2 + i % 2) % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    }))
}

pub fn diagonalize_dressed(
    h: &CMat,
    parity: &CMat,
    n_dressed: usize,
) -> Result<DressedSpectrum, ModelError> {
    let d = h.nrows();
    let comm = linalg::add_scaled(&(h * parity), &(parity * h), -ONE);
    let comm_norm = linalg::max_abs(&comm);
    if comm_norm > 1e-10 * linalg::max_abs(h).max(1.0) {
        return Err(ModelError::ParityNotConserved(comm_norm));
    }
    if n_dressed == 0 || n_dressed > d {
        return Err(invalid("n_dressed", format!("must lie in 1..={d}")));
    }

    let (energies, mut vecs) = linalg::hermitian_eigen(h);

    // Near-degenerate clusters: rotate to the parity eigenbasis inside each.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && energies[end] - energies[end - 1] < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let block = vecs.subcols(start, end - start).to_owned();
            let pi_block = &(block.adjoint() * parity) * &block;
            let (_, rot) = linalg::hermitian_eigen(&pi_block);
            let rotated = &block * &rot;
            vecs.subcols_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }

    let mut candidates: Vec<(f64, usize)> = (0..d)
        .map(|k| {
            let v = vecs.col(k);
            let e = (v.adjoint() * h * v).re;
            (e, k)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut vectors = Mat::zeros(d, n_dressed);
    let mut levels = Vec::with_capacity(n_dressed);
    let mut counts = [0usize; 2];
    for (slot, &(energy, k)) in candidates.iter().take(n_dressed).enumerate() {
        let mut col: Vec<C64> = (0..d).map(|i| vecs[(i, k)]).collect();
        fix_phase(&mut col);
        let expectation: f64 = col
            .iter()
            .enumerate()
            .map(|(i, z)| parity[(i, i)].re * z.norm_sqr())
            .sum();
        if expectation.abs() < MIN_PARITY_PURITY {
            return Err(ModelError::ParityMixing { index: slot, expectation });
        }
        let p = if expectation > 0.0 { Parity::Even } else { Parity::Odd };
        let sector = (p == Parity::Odd) as usize;
        levels.push(DressedLevel { energy, parity: p, index: counts[sector] });
        counts[sector] += 1;
        for (i, z) in col.into_iter().enumerate() {
            vectors[(i, slot)] = z;
        }
    }
    if levels[0].parity != Parity::Even {
        return Err(ModelError::OddGroundState);
    }
    Ok(DressedSpectrum { levels, vectors, n_fock: d / 2 })
}

/// Rotates the global phase so the largest-magnitude component is real positive.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .expect("pivot exists");
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// Builds H_r and Π for `params` and returns the dressed spectrum.
pub fn dressed_spectrum(params: &SystemParams) -> Result<DressedSpectrum, ModelError> {
    let h = build_rabi_hamiltonian(params)?;
    let pi = build_parity_operator(params.n_fock)?;
    diagonalize_dressed(&h, &pi, params.n_dressed)
}

/// Drive frequency resonant with |Ψ₀⁺⟩ → |Ψ₁⁻⟩.
pub fn resonant_drive_frequency(spectrum: &DressedSpectrum) -> Result<f64, ModelError> {
    let ground = spectrum
        .energy(Parity::Even, 0)
        .ok_or(ModelError::MissingLevel { parity: Parity::Even, index: 0 })?;
    let target = spectrum
        .energy(Parity::Odd, 1)
        .ok_or(ModelError::MissingLevel { parity: Parity::Odd, index: 1 })?;
    Ok(target - ground)
}
