//! Dressed-state master equation: transition rates, the dissipator, and the
//! harmonic components of the periodically driven Liouvillian.
//!
//! Superoperators act on column-stacked density matrices (see [`crate::linalg`])
//! and the coherent part follows `∂ₜρ = i[ρ, H]`.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, vec_index, CMat, ZERO};
use crate::rabi_model::{self, DressedSpectrum, Parity, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasterEquationError {
    #[error("negative rate {value:e} in {table} table at ({j}, {k})")]
    NegativeRate { table: &'static str, j: usize, k: usize, value: f64 },
    #[error("dimension mismatch: rate table has {rates} levels, spectrum has {spectrum}")]
    DimensionMismatch { rates: usize, spectrum: usize },
}

/// Dense rate tables indexed by global (energy-ordered) level position.
///
/// Entry `(j, k)` of a transition table is the rate of the jump `|k⟩ → |j⟩`.
#[derive(Clone, Debug)]
pub struct RateTable {
    pub gamma_rates: Mat<f64>,
    pub kappa_rates: Mat<f64>,
    /// Coefficient Φ_k of `|Ψ_k⟩⟨Ψ_k|` in the collective dephasing jump operator.
    pub dephasing_diag: Vec<f64>,
    pub dephasing_offdiag: Mat<f64>,
    /// Δ_jk = E_k − E_j.
    pub transition_freqs: Mat<f64>,
    parities: Vec<Parity>,
}

impl RateTable {
    pub fn len(&self) -> usize {
        self.parities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parities.is_empty()
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    /// Γ + K for the jump `|k⟩ → |j⟩`.
    pub fn total(&self, j: usize, k: usize) -> f64 {
        self.gamma_rates[(j, k)] + self.kappa_rates[(j, k)]
    }

    /// Total radiative rate out of level `k`.
    pub fn exit_rate(&self, k: usize) -> f64 {
        (0..self.len()).map(|j| self.total(j, k) + self.dephasing_offdiag[(j, k)]).sum()
    }

    fn check_non_negative(&self) -> Result<(), MasterEquationError> {
        let n = self.len();
        for (table, m) in [
            ("gamma", &self.gamma_rates),
            ("kappa", &self.kappa_rates),
            ("dephasing", &self.dephasing_offdiag),
        ] {
            for k in 0..n {
                for j in 0..n {
                    let value = m[(j, k)];
                    if value < 0.0 || value.is_nan() {
                        return Err(MasterEquationError::NegativeRate { table, j, k, value });
                    }
                }
            }
        }
        Ok(())
    }
}

/// One named transition `|Ψ_from⟩ → |Ψ_to⟩` split into its cavity and atomic parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Channel {
    pub gamma: f64,
    pub kappa: f64,
}

impl Channel {
    pub fn total(&self) -> f64 {
        self.gamma + self.kappa
    }
}

/// The four channels that govern the slow dynamics, read as χ_jk^{pp̄}: from
/// `|Ψ_k^p̄⟩` to `|Ψ_j^p⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowChannels {
    pub chi_00_pm: Channel,
    pub chi_11_pm: Channel,
    pub chi_01_pm: Channel,
    pub chi_01_mp: Channel,
}

impl SlowChannels {
    pub fn from_table(rates: &RateTable, spectrum: &DressedSpectrum) -> Self {
        let channel = |pj: Parity, j: usize, pk: Parity, k: usize| match (
            spectrum.position(pj, j),
            spectrum.position(pk, k),
        ) {
            (Some(a), Some(b)) => Channel {
                gamma: rates.gamma_rates[(a, b)],
                kappa: rates.kappa_rates[(a, b)],
            },
            _ => Channel { gamma: 0.0, kappa: 0.0 },
        };
        use Parity::{Even as P, Odd as M};
        Self {
            chi_00_pm: channel(P, 0, M, 0),
            chi_11_pm: channel(P, 1, M, 1),
            chi_01_pm: channel(P, 0, M, 1),
            chi_01_mp: channel(M, 0, P, 1),
        }
    }
}

fn opposite_parity_rates(
    spectrum: &DressedSpectrum,
    op: &CMat,
    rate: f64,
    omega_c: f64,
) -> Mat<f64> {
    let n = spectrum.len();
    let levels = spectrum.levels();
    let elems = spectrum.project(op);
    Mat::from_fn(n, n, |j, k| {
        let delta = levels[k].energy - levels[j].energy;
        if rate == 0.0 || delta <= 0.0 || levels[j].parity == levels[k].parity {
            0.0
        } else {
            rate * (delta / omega_c) * elems[(j, k)].norm_sqr()
        }
    })
}

fn transition_freqs(spectrum: &DressedSpectrum) -> Mat<f64> {
    let levels = spectrum.levels();
    Mat::from_fn(levels.len(), levels.len(), |j, k| levels[k].energy - levels[j].energy)
}

/// Cavity (Γ) and atomic (K) rates between opposite-parity dressed states.
/// Dephasing entries are left at zero; see [`dephasing_rates`].
pub fn transition_rates(
    spectrum: &DressedSpectrum,
    gamma: f64,
    kappa: f64,
    omega_c: f64,
) -> RateTable {
    let nf = spectrum.n_fock();
    let n = spectrum.len();
    let a = rabi_model::cavity_annihilation(nf);
    let sm = rabi_model::qubit_lowering(nf);
    let a_minus_ad = linalg::add_scaled(&a, &linalg::dagger(&a), -linalg::ONE);
    let sm_minus_sp = linalg::add_scaled(&sm, &linalg::dagger(&sm), -linalg::ONE);
    RateTable {
        gamma_rates: opposite_parity_rates(spectrum, &a_minus_ad, gamma, omega_c),
        kappa_rates: opposite_parity_rates(spectrum, &sm_minus_sp, kappa, omega_c),
        dephasing_diag: vec![0.0; n],
        dephasing_offdiag: Mat::zeros(n, n),
        transition_freqs: transition_freqs(spectrum),
        parities: spectrum.parities(),
    }
}

/// Fills the pure-dephasing entries of `rates` for a white spectral density
/// γ_φ(Δ) = γ_φ, Δ ≥ 0.
pub fn dephasing_rates(spectrum: &DressedSpectrum, gamma_phi: f64, rates: &mut RateTable) {
    let n = spectrum.len();
    let levels = spectrum.levels();
    if gamma_phi == 0.0 {
        rates.dephasing_diag = vec![0.0; n];
        rates.dephasing_offdiag = Mat::zeros(n, n);
        return;
    }
    let sz = spectrum.project(&rabi_model::qubit_sigma_z(spectrum.n_fock()));
    let amp = (gamma_phi / 2.0).sqrt();
    rates.dephasing_diag = (0..n).map(|k| amp * sz[(k, k)].re).collect();
    rates.dephasing_offdiag = Mat::from_fn(n, n, |j, k| {
        let delta = levels[k].energy - levels[j].energy;
        if delta <= 0.0 || levels[j].parity != levels[k].parity {
            0.0
        } else {
            0.5 * gamma_phi * sz[(j, k)].norm_sqr()
        }
    });
}

/// Full rate table for `params`: cavity, atomic and dephasing channels.
pub fn rate_table(spectrum: &DressedSpectrum, params: &SystemParams) -> RateTable {
    let mut rates = transition_rates(spectrum, params.gamma, params.kappa, params.omega_c);
    dephasing_rates(spectrum, params.gamma_phi, &mut rates);
    rates
}

/// Σ (Γ + K) 𝒟[|j⟩⟨k|] + Σ Φ_jk 𝒟[|j⟩⟨k|] + 𝒟[Σ Φ_k |k⟩⟨k|] on the dressed space.
pub fn build_dissipator(
    rates: &RateTable,
    spectrum: &DressedSpectrum,
) -> Result<CMat, MasterEquationError> {
    let n = rates.len();
    if n != spectrum.len() {
        return Err(MasterEquationError::DimensionMismatch { rates: n, spectrum: spectrum.len() });
    }
    rates.check_non_negative()?;

    let mut d = Mat::<C64>::zeros(n * n, n * n);
    // Jumps |k⟩ → |j⟩ with rate r: ρ_kk feeds ρ_jj, and every element in row
    // or column k decays at r/2 per index hit.
    let mut out_rate = vec![0.0; n];
    for k in 0..n {
        for j in 0..n {
            let r = rates.total(j, k) + rates.dephasing_offdiag[(j, k)];
            if r == 0.0 {
                continue;
            }
            d[(vec_index(j, j, n), vec_index(k, k, n))] += C64::new(r, 0.0);
            out_rate[k] += r;
        }
    }
    let phi = &rates.dephasing_diag;
    for b in 0..n {
        for a in 0..n {
            let dphi = phi[a] - phi[b];
            let decay = -0.5 * (out_rate[a] + out_rate[b]) - 0.5 * dphi * dphi;
            if decay != 0.0 {
                d[(vec_index(a, b, n), vec_index(a, b, n))] += C64::new(decay, 0.0);
            }
        }
    }
    Ok(d)
}

/// Harmonics of 𝓛(t) = 𝓛⁽⁰⁾ + 𝓛⁽¹⁾e^{−iω_d t} + 𝓛⁽⁻¹⁾e^{iω_d t}.
#[derive(Clone, Debug)]
pub struct FourierLiouvillian {
    /// Components for n = −1, 0, +1, in that order.
    pub harmonics: [CMat; 3],
    pub omega_d: f64,
    pub dims: usize,
}

impl FourierLiouvillian {
    pub fn harmonic(&self, n: i32) -> &CMat {
        &self.harmonics[(n + 1) as usize]
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_d
    }

    pub fn is_driven(&self) -> bool {
        linalg::max_abs(self.harmonic(1)) > 0.0
    }
}

/// Drive operator (a + a†) in the dressed basis with the parity-forbidden
/// entries set to exact zero.
pub fn dressed_drive_operator(spectrum: &DressedSpectrum) -> CMat {
    let a = rabi_model::cavity_annihilation(spectrum.n_fock());
    let x = linalg::add_scaled(&a, &linalg::dagger(&a), linalg::ONE);
    let mut xd = spectrum.project(&x);
    let parities = spectrum.parities();
    let n = spectrum.len();
    for k in 0..n {
        for j in 0..n {
            if parities[j] == parities[k] {
                xd[(j, k)] = ZERO;
            }
        }
    }
    linalg::hermitian_part(&xd)
}

pub fn build_fourier_liouvillian(
    params: &SystemParams,
    spectrum: &DressedSpectrum,
    dissipator: &CMat,
) -> FourierLiouvillian {
    let n = spectrum.len();
    let h = Mat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(spectrum.levels()[i].energy, 0.0)
        } else {
            ZERO
        }
    });
    let l0 = linalg::add_scaled(dissipator, &linalg::commutator_generator(&h), linalg::ONE);
    let l1 = if params.drive == 0.0 {
        Mat::zeros(n * n, n * n)
    } else {
        let v = linalg::scale(&dressed_drive_operator(spectrum), C64::new(0.5 * params.drive, 0.0));
        linalg::commutator_generator(&v)
    };
    FourierLiouvillian {
        harmonics: [l1.clone(), l0, l1],
        omega_d: params.omega_d,
        dims: n,
    }
}

/// Spectrum → rates → dissipator → harmonics in one call.
pub fn liouvillian_for(
    params: &SystemParams,
    spectrum: &DressedSpectrum,
) -> Result<(RateTable, FourierLiouvillian), MasterEquationError> {
    let rates = rate_table(spectrum, params);
    let d = build_dissipator(&rates, spectrum)?;
    let liouv = build_fourier_liouvillian(params, spectrum, &d);
    Ok((rates, liouv))
}

/// Trace functional ⟨⟨1| as a row vector on vectorized matrices.
pub fn trace_row(n: usize) -> Vec<C64> {
    let mut row = vec![ZERO; n * n];
    for i in 0..n {
        row[vec_index(i, i, n)] = linalg::ONE;
    }
    row
}

/// Largest |Tr[𝓛ρ]| over basis inputs ρ = |a⟩⟨b|, i.e. max-norm of ⟨⟨1|𝓛.
pub fn trace_leak(l: &CMat, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..n * n {
        let mut s = ZERO;
        for i in 0..n {
            s += l[(vec_index(i, i, n), c)];
        }
        worst = worst.max(s.norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabi_model::dressed_spectrum;

    fn spectrum(g: f64, n_dressed: usize) -> DressedSpectrum {
        dressed_spectrum(&SystemParams { g, n_fock: 40, n_dressed, ..SystemParams::default() })
            .unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        Mat::from_fn(n, n, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn same_parity_rates_vanish_and_theta_gates() {
        let s = spectrum(1.5, 10);
        let mut r = transition_rates(&s, 1e-2, 1e-2, 1.0);
        dephasing_rates(&s, 1e-2, &mut r);
        let p = s.parities();
        for j in 0..10 {
            for k in 0..10 {
                let delta = r.transition_freqs[(j, k)];
                if p[j] == p[k] || delta <= 0.0 {
                    assert_eq!(r.gamma_rates[(j, k)], 0.0);
                    assert_eq!(r.kappa_rates[(j, k)], 0.0);
                }
                if p[j] != p[k] || delta <= 0.0 {
                    assert_eq!(r.dephasing_offdiag[(j, k)], 0.0);
                }
                assert!(r.gamma_rates[(j, k)] >= 0.0 && r.kappa_rates[(j, k)] >= 0.0);
            }
        }
    }

    #[test]
    fn bare_cavity_decay_rate() {
        // Off-resonant qubit so the one-photon state stays bare.
        let s = dressed_spectrum(&SystemParams {
            g: 1e-5,
            omega_a: 1.7,
            n_fock: 10,
            n_dressed: 4,
            ..SystemParams::default()
        })
        .unwrap();
        let r = transition_rates(&s, 0.02, 0.0, 1.0);
        // level 1 is |1, ↓⟩ at energy ≈ 1
        assert!((s.energies()[1] - 1.0).abs() < 1e-8);
        assert!((r.gamma_rates[(0, 1)] - 0.02).abs() < 1e-8);
        assert!((r.exit_rate(1) - 0.02).abs() < 1e-8);
    }

    #[test]
    fn zero_dephasing_gives_empty_tables() {
        let s = spectrum(1.0, 8);
        let mut r = transition_rates(&s, 1e-2, 1e-2, 1.0);
        dephasing_rates(&s, 0.0, &mut r);
        assert!(r.dephasing_diag.iter().all(|&x| x == 0.0));
        assert_eq!(r.dephasing_offdiag.norm_max(), 0.0);
    }

    /// Golden value: Φ₀₁⁺⁺ at g = 1.5, γ_φ = 10⁻², obtained once from direct
    /// evaluation of (γ_φ/2)|⟨Ψ₀⁺|σ_z|Ψ₁⁺⟩|² and frozen.
    #[test]
    fn dephasing_cascade_golden_value() {
        let s = spectrum(1.5, 12);
        let mut r = transition_rates(&s, 1e-2, 1e-2, 1.0);
        dephasing_rates(&s, 1e-2, &mut r);
        let j = s.position(Parity::Even, 0).unwrap();
        let k = s.position(Parity::Even, 1).unwrap();
        let phi = r.dephasing_offdiag[(j, k)];
        assert!(phi > 0.0);
        assert!((phi - GOLDEN_PHI_01_PP).abs() < 1e-12, "{phi:.15e}");
    }

    #[allow(clippy::excessive_precision)]
    const GOLDEN_PHI_01_PP: f64 = 4.504418359257930e-5;

    #[test]
    fn dissipator_zero_when_rates_zero() {
        let s = spectrum(0.7, 6);
        let r = transition_rates(&s, 0.0, 0.0, 1.0);
        let d = build_dissipator(&r, &s).unwrap();
        assert_eq!(d.norm_max(), 0.0);
    }

    #[test]
    fn dissipator_rejects_negative_rates() {
        let s = spectrum(0.7, 6);
        let mut r = transition_rates(&s, 1e-2, 0.0, 1.0);
        r.gamma_rates[(0, 1)] = -1.0;
        assert!(matches!(
            build_dissipator(&r, &s),
            Err(MasterEquationError::NegativeRate { .. })
        ));
    }

    #[test]
    fn dissipator_matches_generic_lindblad_construction() {
        let s = spectrum(1.2, 6);
        let mut r = transition_rates(&s, 1e-2, 2e-2, 1.0);
        dephasing_rates(&s, 3e-2, &mut r);
        let d = build_dissipator(&r, &s).unwrap();
        let n = 6;
        let mut oracle = Mat::<C64>::zeros(n * n, n * n);
        for j in 0..n {
            for k in 0..n {
                let rate = r.total(j, k) + r.dephasing_offdiag[(j, k)];
                if rate > 0.0 {
                    let mut o = Mat::<C64>::zeros(n, n);
                    o[(j, k)] = C64::new(rate.sqrt(), 0.0);
                    oracle = linalg::add_scaled(&oracle, &linalg::lindblad_dissipator(&o), linalg::ONE);
                }
            }
        }
        let collective =
            Mat::from_fn(n, n, |i, j| if i == j { C64::new(r.dephasing_diag[i], 0.0) } else { ZERO });
        oracle = linalg::add_scaled(&oracle, &linalg::lindblad_dissipator(&collective), linalg::ONE);
        let diff = linalg::add_scaled(&d, &oracle, -linalg::ONE);
        assert!(diff.norm_max() < 1e-15);
    }

    #[test]
    fn every_harmonic_annihilates_trace() {
        let params = SystemParams { g: 1.3, drive: 1e-3, gamma: 1e-2, kappa: 1e-2, gamma_phi: 1e-2, ..SystemParams::default() };
        let s = dressed_spectrum(&SystemParams { n_dressed: 8, ..params.clone() }).unwrap();
        let (_, l) = liouvillian_for(&params, &s).unwrap();
        for h in &l.harmonics {
            assert!(trace_leak(h, 8) < 1e-12);
        }
    }

    #[test]
    fn undriven_ground_state_is_null_vector() {
        let params = SystemParams::weak_drive_point(1.0);
        let params = SystemParams { drive: 0.0, n_dressed: 8, ..params };
        let s = dressed_spectrum(&params).unwrap();
        let (_, l) = liouvillian_for(&params, &s).unwrap();
        assert_eq!(l.harmonic(1).norm_max(), 0.0);
        assert_eq!(l.harmonic(-1).norm_max(), 0.0);
        let ground = linalg::basis_projector(8, 0);
        let out = linalg::apply_superop(l.harmonic(0), &ground);
        assert!(out.norm_max() < 1e-15);
    }

    #[test]
    fn harmonics_preserve_hermiticity_pairwise() {
        let params = SystemParams { g: 0.9, drive: 1e-3, gamma: 1e-2, kappa: 1e-2, gamma_phi: 5e-3, n_dressed: 6, ..SystemParams::default() };
        let s = dressed_spectrum(&params).unwrap();
        let (_, l) = liouvillian_for(&params, &s).unwrap();
        for seed in 1..4 {
            let rho = random_matrix(6, seed);
            let rho_dag = linalg::dagger(&rho);
            for n in -1..=1 {
                let lhs = linalg::dagger(&linalg::apply_superop(l.harmonic(n), &rho));
                let rhs = linalg::apply_superop(l.harmonic(-n), &rho_dag);
                assert!(linalg::add_scaled(&lhs, &rhs, -linalg::ONE).norm_max() < 1e-12);
            }
        }
    }

    #[test]
    fn bare_cavity_population_block_has_integer_decay_spectrum() {
        // Detuned qubit, tiny coupling, cavity loss only: the photon-number
        // populations relax with eigenvalues 0, −γ, −2γ, ….
        let gamma = 1e-2;
        let params = SystemParams {
            g: 1e-4,
            omega_a: 1.7,
            gamma,
            n_fock: 12,
            n_dressed: 6,
            ..SystemParams::default()
        };
        let s = dressed_spectrum(&params).unwrap();
        let r = rate_table(&s, &params);
        let d = build_dissipator(&r, &s).unwrap();
        // levels with qubit down: energies 0, 1, 2, 3 (qubit-up starts at 1.7)
        let photon: Vec<usize> =
            (0..6).filter(|&k| (s.energies()[k] - s.energies()[k].round()).abs() < 1e-3).collect();
        assert_eq!(photon.len(), 4);
        let m = photon.len();
        let block = Mat::from_fn(m, m, |a, b| {
            d[(vec_index(photon[a], photon[a], 6), vec_index(photon[b], photon[b], 6))]
        });
        let mut eig: Vec<f64> = block.eigenvalues().unwrap().iter().map(|z| z.re).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (n, e) in eig.iter().enumerate() {
            assert!((e + gamma * n as f64).abs() < 1e-6 * gamma, "{eig:?}");
        }
    }

    #[test]
    fn weak_coupling_secular_part_matches_quantum_optical_dissipator() {
        let params = SystemParams {
            g: 1e-3,
            gamma: 1e-2,
            kappa: 2e-2,
            n_fock: 12,
            n_dressed: 6,
            ..SystemParams::default()
        };
        let s = dressed_spectrum(&params).unwrap();
        let r = rate_table(&s, &params);
        let d = build_dissipator(&r, &s).unwrap();

        let nf = params.n_fock;
        let a = s.project(&rabi_model::cavity_annihilation(nf));
        let sm = s.project(&rabi_model::qubit_lowering(nf));
        let standard = linalg::add_scaled(
            &linalg::lindblad_dissipator(&linalg::scale(&a, C64::new(params.gamma.sqrt(), 0.0))),
            &linalg::lindblad_dissipator(&linalg::scale(&sm, C64::new(params.kappa.sqrt(), 0.0))),
            linalg::ONE,
        );
        let n = 6;
        let scale = params.rate_scale();
        // populations → populations
        for j in 0..n {
            for k in 0..n {
                let row = vec_index(j, j, n);
                let col = vec_index(k, k, n);
                let (x, y) = (d[(row, col)].re, standard[(row, col)].re);
                assert!((x - y).abs() < 1e-2 * scale.max(y.abs()), "({j},{k}): {x} vs {y}");
            }
        }
        // diagonal decay of every matrix element
        for c in 0..n * n {
            let (x, y) = (d[(c, c)].re, standard[(c, c)].re);
            assert!((x - y).abs() < 1e-2 * y.abs().max(scale * 1e-3), "{c}: {x} vs {y}");
        }
    }

    #[test]
    fn slow_channels_read_named_levels() {
        let s = spectrum(1.5, 12);
        let r = transition_rates(&s, 1e-2, 1e-2, 1.0);
        let ch = SlowChannels::from_table(&r, &s);
        let a = s.position(Parity::Even, 0).unwrap();
        let b = s.position(Parity::Odd, 1).unwrap();
        assert_eq!(ch.chi_01_pm.total(), r.total(a, b));
        assert!(ch.chi_01_pm.total() > 0.0);
    }
}
