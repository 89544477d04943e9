//! End-to-end acceptance checks at the weak-drive operating point
//! (γ = κ = 10⁻² ω_c, F = 0.1 γ, drive on Ψ₀⁺ → Ψ₁⁻). Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rabi_floquet::floquet::FloquetOptions;
use rabi_floquet::integrator::{self, IntegratorOptions};
use rabi_floquet::linalg;
use rabi_floquet::master_equation::SlowChannels;
use rabi_floquet::metastability::{self, MetastableManifold};
use rabi_floquet::observables::{self, TransientObservables};
use rabi_floquet::sweep::{self, PointSystem};
use rabi_floquet::SystemParams;

const GAMMA: f64 = 1e-2;
const GRID: [f64; 12] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.2, 1.5, 1.8, 2.0, 2.5, 3.0];
const DEPHASING_GRID: [f64; 3] = [1.2, 1.5, 1.8];

fn key(g: f64) -> u64 {
    (g * 1000.0).round() as u64
}

fn system(g: f64, gamma_phi: f64) -> PointSystem {
    let params = SystemParams { gamma_phi, ..SystemParams::weak_drive_point(g) }.with_resonant_drive().unwrap();
    let opts = FloquetOptions::for_params(&params);
    let t = Instant::now();
    let sys = sweep::build_system(&params, &opts, None).unwrap_or_else(|(stage, e)| panic!("g = {g}: {stage}: {e}"));
    eprintln!("  built g = {g}, γ_φ = {gamma_phi}: k_max {} in {:.1?}", sys.eig.k_max(), t.elapsed());
    sys
}

struct Outcome {
    lines: Vec<String>,
    failed: usize,
}

impl Outcome {
    fn record(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.failed += usize::from(!pass);
        let line = format!("criterion {n:>2} {verdict} {name}: {detail}");
        println!("{line}");
        self.lines.push(line);
    }
}

fn omega_1(sys: &PointSystem) -> f64 {
    metastability::labelled_rates(&sys.eig, GAMMA)[0].re.abs() / GAMMA
}

fn steady_g2(sys: &PointSystem) -> f64 {
    observables::g2_zero(sys.eig.steady_state(), &sys.ops).unwrap()
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    let start = Instant::now();
    let mut out = Outcome { lines: Vec::new(), failed: 0 };
    let systems: BTreeMap<u64, PointSystem> = GRID.iter().map(|&g| (key(g), system(g, 0.0))).collect();
    let at = |g: f64| &systems[&key(g)];

    // 1. zero mode
    let mut worst_zero: f64 = 0.0;
    let mut worst_re = f64::NEG_INFINITY;
    for sys in systems.values() {
        let eig = &sys.eig;
        worst_zero = worst_zero.max(eig.mode(eig.zero_index()).eigenvalue.norm() / GAMMA);
        for k in eig.nonzero_indices() {
            worst_re = worst_re.max(eig.mode(k).eigenvalue.re / GAMMA);
        }
    }
    out.record(
        1,
        "zero mode",
        worst_zero < 1e-10 && worst_re < 0.0,
        format!("max |Ω₀|/γ = {worst_zero:.2e}, max Re Ω/γ over other modes = {worst_re:.3e}"),
    );

    // 2. Floquet propagation vs direct integration
    let mut worst: f64 = 0.0;
    for g in [0.5, 1.2, 1.5] {
        let sys = at(g);
        let rho0 = linalg::basis_projector(sys.spectrum.len(), 0);
        let grid: Vec<f64> = [0.0, 1.0, 10.0, 100.0].iter().map(|x| x / GAMMA).collect();
        let traj = integrator::integrate(&sys.liouv, &rho0, &grid, &IntegratorOptions::new(1e-10, 1e-12)).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states).skip(1) {
            worst = worst.max(linalg::trace_distance(rho, &sys.eig.propagate(&rho0, *t)));
        }
    }
    out.record(2, "oracle equivalence", worst < 1e-6, format!("max trace distance {worst:.2e} at g ∈ {{0.5, 1.2, 1.5}}, τγ ∈ {{1, 10, 100}}"));

    // 3. gap collapse
    let (w1, w2) = (omega_1(at(1.0)), omega_1(at(2.0)));
    let third: Vec<(f64, f64)> = [1.0, 1.2, 1.5, 1.8, 2.0]
        .iter()
        .map(|&g| (g, metastability::labelled_rates(&at(g).eig, GAMMA)[2].re.abs() / GAMMA))
        .collect();
    let third_ok = third.iter().all(|(_, w)| (0.3..=3.0).contains(w));
    out.record(
        3,
        "gap collapse",
        w1 / w2 >= 1e4 && w2 <= 1e-5 && third_ok,
        format!(
            "|Re Ω₁|/γ = {w1:.3e} (g = 1) → {w2:.3e} (g = 2), ratio {:.2e}; |Re Ω₃|/γ over g ∈ [1, 2]: {}",
            w1 / w2,
            third.iter().map(|(g, w)| format!("{g}:{w:.3}")).collect::<Vec<_>>().join(" ")
        ),
    );

    // 4. metastable plateau
    let sys = at(1.5);
    let ground = linalg::basis_projector(sys.spectrum.len(), 0);
    let tr = TransientObservables::new(&sys.eig, &sys.ops, &ground);
    let i_ss = observables::output_intensity(sys.eig.steady_state(), &sys.ops);
    let delta = |tg: f64| (tr.at(tg / GAMMA).0 - i_ss).abs() / i_ss;
    let plateau: Vec<f64> = (0..=40).map(|k| tr.at(30.0 * 10f64.powf(k as f64 / 40.0) / GAMMA).0).collect();
    let (lo, hi) = plateau.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let change = (hi - lo) / lo;
    let offset = delta(100.0);
    let scan: Vec<f64> = (0..=300).map(|k| 10f64.powf(k as f64 / 60.0)).collect();
    let converged_at = scan.iter().copied().find(|&tg| delta(tg) < 0.01);
    let before_ok = scan.iter().filter(|&&tg| tg < 3e4).all(|&tg| delta(tg) >= 0.01);
    out.record(
        4,
        "metastable plateau",
        change < 0.05 && offset > 0.2 && before_ok && converged_at.is_some(),
        format!(
            "relative change over τγ ∈ [30, 300] = {change:.3e}; |ΔI|/I∞ at τγ = 100 = {offset:.3}; first τγ within 1 % = {}",
            converged_at.map(|t| format!("{t:.3e}")).unwrap_or_else(|| "never".into())
        ),
    );

    // 5. exponential tail
    let mut details = Vec::new();
    let mut ok = true;
    for g in [1.2, 1.5] {
        let sys = at(g);
        let rho0 = linalg::basis_projector(sys.spectrum.len(), 0);
        let tr = TransientObservables::new(&sys.eig, &sys.ops, &rho0);
        let i_ss = observables::output_intensity(sys.eig.steady_state(), &sys.ops);
        let w = omega_1(sys);
        let fit = observables::fit_final_decade(|t| ((tr.at(t).0 - i_ss) / i_ss).abs(), 1.0 / GAMMA, 100.0 / (w * GAMMA), 1e-2);
        match fit {
            Some(f) => {
                let rel = (f.rate / GAMMA - w).abs() / w;
                ok &= rel < 0.05;
                details.push(format!("g = {g}: fit {:.4e} vs |Re Ω₁| {w:.4e} ({:.2} %)", f.rate / GAMMA, 100.0 * rel));
            }
            None => {
                ok = false;
                details.push(format!("g = {g}: no decade found"));
            }
        }
    }
    out.record(5, "exponential tail", ok, details.join("; "));

    // 6. photon statistics
    let g2: Vec<(f64, f64)> = GRID.iter().map(|&g| (g, steady_g2(at(g)))).collect();
    let bunched = g2.iter().any(|&(g, v)| g > 0.45 && g < 1.0 && v > 1.0);
    let revived = g2.iter().any(|&(g, v)| g > 1.0 && g < 2.5 && v < 1.0);
    let g2_of = |g: f64| g2.iter().find(|(x, _)| *x == g).unwrap().1;
    out.record(
        6,
        "photon-statistics phases",
        g2_of(0.3) < 1.0 && bunched && revived && (0.8..=1.2).contains(&g2_of(3.0)),
        g2.iter().map(|(g, v)| format!("{g}:{v:.3}")).collect::<Vec<_>>().join(" "),
    );

    // 7. extremal-state bracketing
    let sys = at(1.5);
    let m = MetastableManifold::build(&sys.eig, GAMMA).unwrap();
    let g2_min = observables::g2_zero(&m.rho_min.state, &sys.ops).unwrap();
    let g2_max = observables::g2_zero(&m.rho_max.state, &sys.ops).unwrap();
    let bracket = sweep::bracket_check(sys, &m, 100, 7, 100.0, 0.02);
    out.record(
        7,
        "extremal-state bracketing",
        g2_min < 1.0 && g2_max > 1.0 && bracket.inside == bracket.total,
        format!(
            "g²(ρ_min) = {g2_min:.3}, g²(ρ_max) = {g2_max:.2}; {}/{} random states inside ±2 % (worst excess {:.2e})",
            bracket.inside, bracket.total, bracket.worst_excess
        ),
    );

    // 8. initial-state selection
    let tau = 100.0 / GAMMA;
    let n = sys.spectrum.len();
    let d_min = linalg::trace_distance(&sys.eig.propagate(&linalg::basis_projector(n, 0), tau), &m.rho_min.state.evaluate(tau));
    let d_max = linalg::trace_distance(&sys.eig.propagate(&linalg::basis_projector(n, 1), tau), &m.rho_max.state.evaluate(tau));
    out.record(
        8,
        "initial-state selection",
        d_min < 0.1 && d_max < 0.1,
        format!("ground → ρ_min: {d_min:.2e}; first excited → ρ_max: {d_max:.2e}"),
    );

    // 9. spectral properties over the grid
    let (mut trace_worst, mut pair_worst, mut herm_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for sys in systems.values() {
        let eig = &sys.eig;
        for mode in eig.modes().iter().filter(|m| m.eigenvalue.re.abs() > 1e-10) {
            trace_worst = trace_worst.max(mode.right.traces().iter().map(|(_, t)| t.norm()).sum());
            if mode.eigenvalue.im.abs() > 1e-9 {
                let gap = eig.modes().iter().map(|o| (o.eigenvalue - mode.eigenvalue.conj()).norm()).fold(f64::MAX, f64::min);
                pair_worst = pair_worst.max(gap);
            }
        }
        let m = MetastableManifold::build(eig, GAMMA).unwrap();
        herm_worst = herm_worst.max(m.r1.hermiticity_residual());
    }
    out.record(
        9,
        "spectral properties",
        trace_worst < 1e-8 && pair_worst < 1e-9 && herm_worst < 1e-10,
        format!("max Σ|Tr R⁽ⁿ⁾| = {trace_worst:.2e}; max conjugate mismatch = {pair_worst:.2e}; max slow-mode hermiticity residual = {herm_worst:.2e}"),
    );

    // 10. dephasing
    let mut larger = true;
    let mut smallest = f64::MAX;
    let mut details = Vec::new();
    for g in DEPHASING_GRID {
        let with = omega_1(&system(g, GAMMA));
        let without = omega_1(at(g));
        larger &= with > without;
        smallest = smallest.min(with);
        details.push(format!("g = {g}: {with:.3e} vs {without:.3e}"));
    }
    out.record(10, "dephasing robustness", larger && smallest < 1e-2, format!("|Re Ω₁|/γ with vs without γ_φ = γ: {}", details.join("; ")));

    // 11. rate-table structure
    let chi = |g: f64| SlowChannels::from_table(&at(g).rates, &at(g).spectrum);
    let (weak, strong) = (chi(0.5), chi(1.5));
    let r00 = strong.chi_00_pm.total() / weak.chi_00_pm.total();
    let r11 = strong.chi_11_pm.total() / weak.chi_11_pm.total();
    let ratio01 = strong.chi_01_pm.total() / strong.chi_01_mp.total();
    out.record(
        11,
        "rate-table structure",
        r00 < 0.1 && r11 < 0.1 && (0.5..=2.0).contains(&ratio01),
        format!("χ₀₀⁺⁻(1.5)/χ₀₀⁺⁻(0.5) = {r00:.3e}; χ₁₁⁺⁻(1.5)/χ₁₁⁺⁻(0.5) = {r11:.3e}; χ₀₁⁺⁻/χ₀₁⁻⁺ at 1.5 = {ratio01:.3}"),
    );

    println!("acceptance: {} of {} criteria passed in {:.1?}", out.lines.len() - out.failed, out.lines.len(), start.elapsed());
    if out.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
