//! Randomized invariants over parameter space.

use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use rabi_floquet::floquet::{self, FloquetOptions, PeriodicMatrix};
use rabi_floquet::integrator::{self, IntegratorOptions};
use rabi_floquet::linalg::{self, CMat, ONE};
use rabi_floquet::master_equation;
use rabi_floquet::metastability;
use rabi_floquet::observables;
use rabi_floquet::rabi_model::{self, Parity};
use rabi_floquet::sweep::config::{Axis, SweepAxis};
use rabi_floquet::SystemParams;

fn matrix(n: usize, entries: &[(f64, f64)]) -> CMat {
    Mat::from_fn(n, n, |i, j| {
        let (re, im) = entries[(i * n + j) % entries.len()];
        C64::new(re, im)
    })
}

fn density(n: usize, entries: &[(f64, f64)]) -> CMat {
    let a = matrix(n, entries);
    let rho = &a * a.adjoint();
    let tr = linalg::trace(&rho);
    linalg::scale(&rho, tr.inv())
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 37)
}

fn driven(g: f64, omega_a: f64, drive: f64, gamma: f64, kappa: f64, gamma_phi: f64, n_dressed: usize) -> SystemParams {
    SystemParams { g, omega_a, drive, gamma, kappa, gamma_phi, n_dressed, n_fock: 40, ..SystemParams::default() }
        .with_resonant_drive()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_hermitian_and_parity_symmetric(g in 0.0..3.0f64, omega_a in 0.5..1.5f64, n_fock in 2usize..30) {
        let p = SystemParams { g, omega_a, n_fock, n_dressed: 2, ..SystemParams::default() };
        let h = rabi_model::build_rabi_hamiltonian(&p).unwrap();
        let pi = rabi_model::build_parity_operator(n_fock).unwrap();
        prop_assert!(linalg::hermiticity_residual(&h) < 1e-12);
        let comm = linalg::add_scaled(&(&pi * &h), &(&h * &pi), -ONE);
        prop_assert!(linalg::max_abs(&comm) < 1e-12);
        prop_assert!(linalg::max_abs(&linalg::add_scaled(&(&pi * &pi), &linalg::identity(2 * n_fock), -ONE)) == 0.0);
    }

    #[test]
    fn dressed_spectrum_is_orthonormal_and_parity_sorted(g in 0.02..3.0f64, omega_a in 0.6..1.4f64) {
        let p = SystemParams { g, omega_a, n_dressed: 10, ..SystemParams::default() };
        let s = rabi_model::dressed_spectrum(&p).unwrap();
        let v = s.vectors();
        let gram = v.adjoint() * v;
        prop_assert!(linalg::max_abs(&linalg::add_scaled(&gram, &linalg::identity(10), -ONE)) < 1e-10);
        prop_assert_eq!(s.levels()[0].parity, Parity::Even);
        for par in [Parity::Even, Parity::Odd] {
            let es: Vec<f64> = s.levels().iter().filter(|l| l.parity == par).map(|l| l.energy).collect();
            prop_assert!(es.windows(2).all(|w| w[1] > w[0]));
        }
        prop_assert!(s.energies().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn liouvillian_harmonics_conserve_trace_and_hermiticity(
        g in 0.05..2.5f64,
        drive in 0.0..5e-3f64,
        gamma in 0.0..3e-2f64,
        kappa in 0.0..3e-2f64,
        gamma_phi in 0.0..2e-2f64,
        e in entries(),
    ) {
        let p = driven(g, 1.0, drive, gamma, kappa, gamma_phi, 6);
        let s = rabi_model::dressed_spectrum(&p).unwrap();
        let (rates, l) = master_equation::liouvillian_for(&p, &s).unwrap();
        let rho = matrix(6, &e);
        let rho_dag = linalg::dagger(&rho);
        for n in -1..=1 {
            prop_assert!(master_equation::trace_leak(l.harmonic(n), 6) < 1e-12);
            let lhs = linalg::dagger(&linalg::apply_superop(l.harmonic(n), &rho));
            let rhs = linalg::apply_superop(l.harmonic(-n), &rho_dag);
            prop_assert!(linalg::max_abs(&linalg::add_scaled(&lhs, &rhs, -ONE)) < 1e-12);
        }
        let par = s.parities();
        for j in 0..6 {
            for k in 0..6 {
                let delta = rates.transition_freqs[(j, k)];
                for r in [rates.gamma_rates[(j, k)], rates.kappa_rates[(j, k)], rates.dephasing_offdiag[(j, k)]] {
                    prop_assert!(r >= 0.0);
                    if delta <= 0.0 { prop_assert_eq!(r, 0.0); }
                }
                if par[j] == par[k] {
                    prop_assert_eq!(rates.gamma_rates[(j, k)], 0.0);
                    prop_assert_eq!(rates.kappa_rates[(j, k)], 0.0);
                } else {
                    prop_assert_eq!(rates.dephasing_offdiag[(j, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn output_observables_are_non_negative(g in 0.05..3.0f64, e in entries()) {
        let p = SystemParams { g, n_dressed: 8, ..SystemParams::default() };
        let s = rabi_model::dressed_spectrum(&p).unwrap();
        let ops = observables::build_xdot_plus(&s);
        let rho = density(8, &e);
        prop_assert!(observables::output_intensity(&rho, &ops) >= -1e-12);
        if let Some(g2) = observables::g2_zero(&rho, &ops) {
            prop_assert!(g2 >= 0.0);
        }
    }

    #[test]
    fn periodic_matrices_are_periodic(lowest in -3i64..1, e in entries(), t in 0.0..20.0f64, omega in 0.3..2.0f64) {
        let comps: Vec<CMat> = (0..3).map(|k| matrix(3, &e[k * 9..])).collect();
        let m = PeriodicMatrix::new(lowest, comps, omega);
        let a = m.evaluate(t);
        let b = m.evaluate(t + m.period());
        prop_assert!(linalg::max_abs(&linalg::add_scaled(&a, &b, -ONE)) < 1e-10 * (1.0 + t));
        let adj = m.adjoint().evaluate(t);
        prop_assert!(linalg::max_abs(&linalg::add_scaled(&adj, &linalg::dagger(&a), -ONE)) < 1e-12);
    }

    #[test]
    fn sweep_grids_are_sorted_and_bounded(start in -2.0..2.0f64, width in 0.0..3.0f64, points in 1usize..80) {
        let axis = SweepAxis { axis: Axis::G, values: None, start: Some(start), stop: Some(start + width), points: Some(points) };
        let grid = axis.grid().unwrap();
        prop_assert!(!grid.is_empty() && grid.len() <= points);
        prop_assert!(grid.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(grid[0], start);
        prop_assert!(*grid.last().unwrap() <= start + width + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn floquet_spectrum_invariants(
        g in 0.1..2.0f64,
        drive in 1e-4..5e-3f64,
        gamma in 5e-3..3e-2f64,
        kappa in 5e-3..3e-2f64,
        gamma_phi in 0.0..1e-2f64,
        e in entries(),
        t in 0.0..500.0f64,
    ) {
        let p = driven(g, 1.0, drive, gamma, kappa, gamma_phi, 4);
        let s = rabi_model::dressed_spectrum(&p).unwrap();
        let (_, l) = master_equation::liouvillian_for(&p, &s).unwrap();
        let eig = floquet::solve(&l, &s.parities(), &FloquetOptions::for_params(&p)).unwrap();
        let scale = p.rate_scale();
        prop_assert_eq!(eig.len(), 16);
        prop_assert!(eig.biorthonormality_residual() < 1e-8);
        let zero: Vec<usize> = (0..eig.len()).filter(|&k| eig.mode(k).eigenvalue.norm() < 1e-10 * scale).collect();
        prop_assert_eq!(zero, vec![eig.zero_index()]);
        for (k, m) in eig.modes().iter().enumerate() {
            prop_assert!(m.eigenvalue.im.abs() <= 0.5 * eig.omega_d() + 1e-9);
            if k == eig.zero_index() { continue; }
            prop_assert!(m.eigenvalue.re < -1e-10 * scale);
            let traces: f64 = m.right.traces().iter().map(|(_, z)| z.norm()).sum();
            prop_assert!(traces < 1e-8 * m.right.norm_sqr().sqrt().max(1.0));
            if m.eigenvalue.im.abs() > 1e-9 {
                prop_assert!(eig.modes().iter().any(|o| (o.eigenvalue - m.eigenvalue.conj()).norm() < 1e-9));
            }
        }
        let rho0 = density(4, &e);
        let rho = eig.propagate(&rho0, t / scale);
        prop_assert!((linalg::trace(&rho) - ONE).norm() < 1e-9);
        prop_assert!(linalg::hermiticity_residual(&rho) < 1e-9);
        let c = metastability::labelled_rates(&eig, scale);
        prop_assert!(c.windows(2).all(|w| w[0].re.abs() <= w[1].re.abs() + 1e-15));
    }

    #[test]
    fn direct_integration_preserves_trace_and_hermiticity(
        g in 0.1..2.0f64,
        drive in 1e-4..5e-3f64,
        gamma_phi in 0.0..1e-2f64,
        e in entries(),
    ) {
        let p = driven(g, 1.0, drive, 1e-2, 1e-2, gamma_phi, 5);
        let s = rabi_model::dressed_spectrum(&p).unwrap();
        let (_, l) = master_equation::liouvillian_for(&p, &s).unwrap();
        let rho0 = density(5, &e);
        let grid = [0.0, 3.0 * l.period(), 1000.0];
        let traj = integrator::integrate(&l, &rho0, &grid, &IntegratorOptions::new(1e-9, 1e-11)).unwrap();
        for rho in &traj.states {
            prop_assert!((linalg::trace(rho) - ONE).norm() < 1e-8);
            prop_assert!(linalg::hermiticity_residual(rho) < 1e-8);
            prop_assert!(linalg::hermitian_eigenvalues(rho)[0] > -1e-6);
        }
    }
}
