//! Parameter sweeps: per-point pipeline, parallel orchestration, convergence
//! audits and decay fits.

pub mod cache;
pub mod config;
pub mod output;

use std::fmt;
use std::panic::{self, AssertUnwindSafe};

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::floquet::{self, FloquetEigensystem, FloquetOptions};
use crate::linalg::{self, CMat};
use crate::master_equation::{self, FourierLiouvillian, RateTable};
use crate::metastability::{self, MetastableManifold};
use crate::observables::{self, DecayFit, OutputOperators, TransientObservables};
use crate::rabi_model::{self, DressedSpectrum};
use crate::SystemParams;

pub use config::{Axis, ConfigError, DriveRule, Format, InitialState, Observable, ScenarioConfig};

/// Relative drift above which a point is flagged as not converged.
pub const CONVERGENCE_FLAG: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parameters,
    Spectrum,
    MasterEquation,
    Floquet,
    Metastability,
    Observables,
    Panic,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parameters => "parameters",
            Stage::Spectrum => "spectrum",
            Stage::MasterEquation => "master_equation",
            Stage::Floquet => "floquet",
            Stage::Metastability => "metastability",
            Stage::Observables => "observables",
            Stage::Panic => "panic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointFailure {
    pub value: f64,
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for PointFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "point {}: {} stage failed: {}", self.value, self.stage, self.message)
    }
}

impl std::error::Error for PointFailure {}

type StageResult<T> = Result<T, (Stage, String)>;

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> (Stage, String) {
    move |e| (stage, e.to_string())
}

/// Everything needed to evaluate observables at one parameter point.
pub struct PointSystem {
    pub params: SystemParams,
    pub spectrum: DressedSpectrum,
    pub rates: RateTable,
    pub liouv: FourierLiouvillian,
    pub eig: FloquetEigensystem,
    pub ops: OutputOperators,
}

impl PointSystem {
    /// Rate unit for reported eigenvalues and times: γ, or the largest rate
    /// when the cavity is lossless.
    pub fn gamma(&self) -> f64 {
        rate_unit(&self.params)
    }
}

fn rate_unit(p: &SystemParams) -> f64 {
    if p.gamma > 0.0 {
        p.gamma
    } else {
        p.rate_scale()
    }
}

pub fn floquet_options(params: &SystemParams, numerics: &config::NumericsConfig) -> FloquetOptions {
    FloquetOptions {
        biorthonormality_tol: numerics.biorthonormality_tol,
        max_k_max: numerics.max_k_max,
        ..FloquetOptions::for_params(params)
    }
}

/// Applies the grid value and the drive rule to the base parameters.
pub fn resolve_params(cfg: &ScenarioConfig, value: f64) -> Result<SystemParams, PointFailure> {
    resolve(&cfg.base, cfg.sweep.axis, &cfg.drive_rule, value).map_err(|(stage, message)| PointFailure {
        value,
        stage,
        message,
    })
}

fn resolve(base: &SystemParams, axis: Axis, rule: &DriveRule, value: f64) -> StageResult<SystemParams> {
    let mut p = axis.apply(base, value);
    match rule {
        DriveRule::Fixed(w) => p.omega_d = *w,
        DriveRule::ResonantSecondTransition => {
            p.validate().map_err(at(Stage::Parameters))?;
            p = p.with_resonant_drive().map_err(at(Stage::Spectrum))?;
        }
    }
    p.validate().map_err(at(Stage::Parameters))?;
    Ok(p)
}

/// Spectrum → rates → Liouvillian → Floquet eigensystem, with the optional cache.
pub fn build_system(params: &SystemParams, opts: &FloquetOptions, cache_dir: Option<&std::path::Path>) -> StageResult<PointSystem> {
    let spectrum = rabi_model::dressed_spectrum(params).map_err(at(Stage::Spectrum))?;
    let (rates, liouv) = master_equation::liouvillian_for(params, &spectrum).map_err(at(Stage::MasterEquation))?;
    let key = cache_dir.map(|_| cache::key(params, opts));
    let cached = cache_dir.zip(key.as_deref()).and_then(|(d, k)| cache::load(d, k));
    let eig = match cached {
        Some(eig) => eig,
        None => {
            let eig = floquet::solve(&liouv, &spectrum.parities(), opts).map_err(at(Stage::Floquet))?;
            if let (Some(d), Some(k)) = (cache_dir, key.as_deref()) {
                if let Err(e) = cache::store(d, k, &eig) {
                    log::warn!("could not write cache entry {k}: {e}");
                }
            }
            eig
        }
    };
    let ops = observables::build_xdot_plus(&spectrum);
    Ok(PointSystem { params: params.clone(), spectrum, rates, liouv, eig, ops })
}

/// Initial density matrix in the dressed basis.
pub fn initial_density(state: &InitialState, spectrum: &DressedSpectrum) -> CMat {
    let n = spectrum.len();
    match state {
        InitialState::Ground => linalg::basis_projector(n, 0),
        InitialState::FirstExcited => linalg::basis_projector(n, 1),
        InitialState::Populations(p) => {
            let total: f64 = p.iter().sum();
            Mat::from_fn(n, n, |i, j| {
                if i == j && i < p.len() {
                    C64::new(p[i] / total, 0.0)
                } else {
                    linalg::ZERO
                }
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Steady {
    pub iout: f64,
    pub g2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetastableSummary {
    /// Slow real rate, in units of γ.
    pub omega_1: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub iout_min: f64,
    pub iout_max: f64,
    pub g2_min: Option<f64>,
    pub g2_max: Option<f64>,
    /// Lowest eigenvalue of ρ_min and ρ_max over one period.
    pub min_eigenvalue_min: f64,
    pub min_eigenvalue_max: f64,
    pub secondary_weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransientRow {
    pub tau_gamma: f64,
    pub iout: f64,
    pub g2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketReport {
    pub total: usize,
    /// States whose intensity lies within the slackened extremal bracket.
    pub inside: usize,
    /// Largest excursion outside [I_min, I_max], relative to the bracket edge.
    pub worst_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResult {
    pub value: f64,
    pub params: SystemParams,
    /// Harmonic cutoff the eigensystem was computed at.
    pub k_max: usize,
    /// First three labelled nonzero eigenvalues, in units of γ.
    pub rates: Vec<[f64; 2]>,
    pub steady: Option<Steady>,
    pub metastable: Option<MetastableSummary>,
    pub transient: Vec<TransientRow>,
    pub bracket: Option<BracketReport>,
}

impl PointResult {
    pub fn omega_1(&self) -> Option<C64> {
        self.rates.first().map(|z| C64::new(z[0], z[1]))
    }
}

pub type PointOutcome = Result<PointResult, PointFailure>;

/// Random density matrices W W† / Tr with W an n×r complex matrix, r drawn
/// uniformly from 1..=n so that nearly pure and highly mixed states both occur.
pub fn random_density(rng: &mut impl Rng, n: usize) -> CMat {
    let r = rng.random_range(1..=n);
    let w = Mat::from_fn(n, r, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let rho = &w * w.adjoint();
    let tr = linalg::trace(&rho);
    linalg::scale(&rho, tr.inv())
}

/// Period-averaged I_out at τ for `count` random initial states, compared to
/// the intensities of ρ_min and ρ_max widened by `slack`.
pub fn bracket_check(
    sys: &PointSystem,
    manifold: &MetastableManifold,
    count: usize,
    seed: u64,
    tau_gamma: f64,
    slack: f64,
) -> BracketReport {
    let i_min = observables::output_intensity(&manifold.rho_min.state, &sys.ops);
    let i_max = observables::output_intensity(&manifold.rho_max.state, &sys.ops);
    let (lo, hi) = (i_min.min(i_max), i_min.max(i_max));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.spectrum.len();
    let tau = tau_gamma / sys.gamma();
    let probe = TransientObservables::new(&sys.eig, &sys.ops, &linalg::basis_projector(n, 0));
    let mut inside = 0;
    let mut worst_excess: f64 = 0.0;
    for _ in 0..count {
        let rho0 = random_density(&mut rng, n);
        let i = probe.with_initial_state(&rho0).at(tau).0;
        let excess = ((lo - i) / lo).max((i - hi) / hi).max(0.0);
        worst_excess = worst_excess.max(excess);
        if excess <= slack {
            inside += 1;
        }
    }
    BracketReport { total: count, inside, worst_excess }
}

/// Runs the full pipeline for one grid value. Panics are caught and reported
/// as failures of the point.
pub fn evaluate_point(cfg: &ScenarioConfig, value: f64, seed: u64) -> PointOutcome {
    let run = || -> StageResult<PointResult> {
        let params = resolve(&cfg.base, cfg.sweep.axis, &cfg.drive_rule, value)?;
        let opts = floquet_options(&params, &cfg.numerics);
        let sys = build_system(&params, &opts, cfg.numerics.cache_dir.as_deref())?;
        evaluate_system(cfg, value, &sys, seed)
    };
    match panic::catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(r)) => Ok(r),
        Ok(Err((stage, message))) => Err(PointFailure { value, stage, message }),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(PointFailure { value, stage: Stage::Panic, message })
        }
    }
}

fn evaluate_system(cfg: &ScenarioConfig, value: f64, sys: &PointSystem, seed: u64) -> StageResult<PointResult> {
    let gamma = sys.gamma();
    let eig = &sys.eig;
    let rates = metastability::labelled_rates(eig, gamma)
        .into_iter()
        .take(3)
        .map(|z| [z.re / gamma, z.im / gamma])
        .collect();
    let steady = cfg.wants(Observable::Steady).then(|| {
        let ss = eig.steady_state();
        Steady { iout: observables::output_intensity(ss, &sys.ops), g2: observables::g2_zero(ss, &sys.ops) }
    });

    let needs_manifold = cfg.wants(Observable::Metastable) || cfg.wants(Observable::Bracket);
    let manifold = if needs_manifold {
        Some(MetastableManifold::build(eig, gamma).map_err(at(Stage::Metastability))?)
    } else {
        None
    };
    let metastable = manifold.as_ref().filter(|_| cfg.wants(Observable::Metastable)).map(|m| {
        let (lo, hi) = (&m.rho_min.state, &m.rho_max.state);
        MetastableSummary {
            omega_1: m.omega_1 / gamma,
            c_min: m.c_min,
            c_max: m.c_max,
            iout_min: observables::output_intensity(lo, &sys.ops),
            iout_max: observables::output_intensity(hi, &sys.ops),
            g2_min: observables::g2_zero(lo, &sys.ops),
            g2_max: observables::g2_zero(hi, &sys.ops),
            min_eigenvalue_min: m.rho_min.min_eigenvalue,
            min_eigenvalue_max: m.rho_max.min_eigenvalue,
            secondary_weight: m.secondary_weight,
        }
    });

    let mut transient = Vec::new();
    if cfg.wants(Observable::Transient) {
        let rho0 = initial_density(&cfg.initial_state, &sys.spectrum);
        let tr = TransientObservables::new(eig, &sys.ops, &rho0);
        for &tau_gamma in &cfg.tau_list {
            let (iout, g2) = tr.at(tau_gamma / gamma);
            if !iout.is_finite() {
                return Err((Stage::Observables, format!("non-finite intensity at τγ = {tau_gamma}")));
            }
            transient.push(TransientRow { tau_gamma, iout, g2 });
        }
    }

    let bracket = match (&manifold, cfg.wants(Observable::Bracket)) {
        (Some(m), true) => Some(bracket_check(
            sys,
            m,
            cfg.numerics.random_states,
            seed,
            cfg.numerics.bracket_tau,
            cfg.numerics.bracket_slack,
        )),
        _ => None,
    };

    Ok(PointResult {
        value,
        params: sys.params.clone(),
        k_max: eig.k_max(),
        rates,
        steady,
        metastable,
        transient,
        bracket,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub axis: Axis,
    pub config_hash: String,
    /// Sorted by grid value.
    pub outcomes: Vec<PointOutcome>,
}

impl SweepReport {
    pub fn successes(&self) -> impl Iterator<Item = &PointResult> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &PointFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }
}

fn pool(workers: Option<usize>) -> rayon::ThreadPool {
    let n = workers
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
}

/// Evaluates every grid point on a pool of `workers` threads (all cores by
/// default). Each point runs its dense linear algebra single-threaded, so
/// the output does not depend on scheduling.
pub fn run_sweep(cfg: &ScenarioConfig, workers: Option<usize>, seed: u64) -> Result<SweepReport, ConfigError> {
    cfg.validate()?;
    let grid = cfg.sweep.grid()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let outcomes = pool(workers).install(|| {
        grid.par_iter()
            .map(|&v| {
                let r = evaluate_point(cfg, v, seed);
                match &r {
                    Ok(p) => log::info!("{} = {v}: done at k_max = {}", cfg.sweep.axis, p.k_max),
                    Err(e) => log::warn!("{e}"),
                }
                r
            })
            .collect()
    });
    Ok(SweepReport { axis: cfg.sweep.axis, config_hash: cfg.hash(), outcomes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub value: f64,
    /// Cutoffs of the refined rerun.
    pub n_fock: usize,
    pub n_dressed: usize,
    pub k_max: usize,
    /// Relative drifts of Ω₁, I_out^ss and g²_ss.
    pub drift_omega_1: f64,
    pub drift_iout: f64,
    pub drift_g2: f64,
    pub max_drift: f64,
    pub flagged: bool,
    /// Set when the refined rerun itself failed; the point is then flagged.
    pub error: Option<String>,
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn steady_summary(sys: &PointSystem) -> (C64, f64, f64) {
    let gamma = sys.gamma();
    let omega_1 = metastability::labelled_rates(&sys.eig, gamma).first().copied().unwrap_or_default();
    let ss = sys.eig.steady_state();
    let iout = observables::output_intensity(ss, &sys.ops);
    let g2 = observables::g2_zero(ss, &sys.ops).unwrap_or(0.0);
    (omega_1, iout, g2)
}

/// Recomputes the point with n_fock, n_dressed and k_max all doubled (the
/// harmonic cutoff fixed at twice the one the point converged at) and
/// reports how far Ω₁, I_out^ss and g²_ss move.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_convergence(cfg: &ScenarioConfig, point: &PointResult) -> ConvergenceReport {
    let mut refined = cfg.base.clone();
    refined.n_fock *= 2;
    refined.n_dressed *= 2;
    let k_max = 2 * point.k_max;
    let mut report = ConvergenceReport {
        value: point.value,
        n_fock: refined.n_fock,
        n_dressed: refined.n_dressed,
        k_max,
        drift_omega_1: f64::NAN,
        drift_iout: f64::NAN,
        drift_g2: f64::NAN,
        max_drift: f64::INFINITY,
        flagged: true,
        error: None,
    };
    let rerun = || -> StageResult<(PointSystem, PointSystem)> {
        let base_params = resolve(&cfg.base, cfg.sweep.axis, &cfg.drive_rule, point.value)?;
        let base = build_system(&base_params, &floquet_options(&base_params, &cfg.numerics), None)?;
        let params = resolve(&refined, cfg.sweep.axis, &cfg.drive_rule, point.value)?;
        let opts = FloquetOptions { k_max, escalate: false, ..floquet_options(&params, &cfg.numerics) };
        Ok((base, build_system(&params, &opts, None)?))
    };
    match rerun() {
        Ok((base, fine)) => {
            let (w0, i0, g0) = steady_summary(&base);
            let (w1, i1, g1) = steady_summary(&fine);
            report.drift_omega_1 = if w0 == w1 { 0.0 } else { (w1 - w0).norm() / w0.norm().max(w1.norm()) };
            report.drift_iout = relative(i1, i0);
            report.drift_g2 = relative(g1, g0);
            report.max_drift = report.drift_omega_1.max(report.drift_iout).max(report.drift_g2);
            report.flagged = !(report.max_drift <= CONVERGENCE_FLAG);
        }
        Err((stage, message)) => report.error = Some(format!("{stage}: {message}")),
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub value: f64,
    pub fit: DecayFit,
    /// First labelled nonzero eigenvalue, in units of γ.
    pub omega_1: [f64; 2],
    /// Slowest real nonzero rate, in units of γ.
    pub slowest_real: Option<f64>,
    /// Fitted rate in units of γ.
    pub fitted_rate: f64,
    /// |fitted − |Re Ω₁|| / |Re Ω₁|
    pub relative_error: f64,
}

/// Fits the exponential approach of I_out to its steady value over the last
/// decade of δI_out/I_out before it drops below `numerics.fit_converged`.
pub fn fit_decay(cfg: &ScenarioConfig, value: f64) -> Result<FitReport, PointFailure> {
    let fail = |(stage, message): (Stage, String)| PointFailure { value, stage, message };
    let params = resolve(&cfg.base, cfg.sweep.axis, &cfg.drive_rule, value).map_err(fail)?;
    let opts = floquet_options(&params, &cfg.numerics);
    let sys = build_system(&params, &opts, cfg.numerics.cache_dir.as_deref()).map_err(fail)?;
    let gamma = sys.gamma();
    let rho0 = initial_density(&cfg.initial_state, &sys.spectrum);
    let tr = TransientObservables::new(&sys.eig, &sys.ops, &rho0);
    let steady = observables::output_intensity(sys.eig.steady_state(), &sys.ops);
    if steady.abs() < observables::INTENSITY_FLOOR {
        return Err(fail((Stage::Observables, "steady intensity vanishes".into())));
    }
    let slowest = sys.eig.slowest().re.abs().max(1e-300);
    let t_max = (1e3 / gamma).max(50.0 / slowest);
    let fit = observables::fit_final_decade(|t| ((tr.at(t).0 - steady) / steady).abs(), 1.0 / gamma, t_max, cfg.numerics.fit_converged)
        .ok_or_else(|| fail((Stage::Observables, "no decade of decay before convergence".into())))?;
    let omega_1 = metastability::labelled_rates(&sys.eig, gamma)[0] / gamma;
    let slowest_real = metastability::slowest_real_mode(&sys.eig, gamma).map(|k| sys.eig.mode(k).eigenvalue.re.abs() / gamma);
    let fitted_rate = fit.rate / gamma;
    Ok(FitReport {
        value,
        relative_error: (fitted_rate - omega_1.re.abs()).abs() / omega_1.re.abs(),
        fit,
        omega_1: [omega_1.re, omega_1.im],
        slowest_real,
        fitted_rate,
    })
}

/// Convergence audits of every successful point of a sweep, in parallel.
pub fn validate_sweep(cfg: &ScenarioConfig, report: &SweepReport, workers: Option<usize>) -> Vec<ConvergenceReport> {
    faer::set_global_parallelism(faer::Par::Seq);
    let points: Vec<&PointResult> = report.successes().collect();
    pool(workers).install(|| points.par_iter().map(|p| validate_convergence(cfg, p)).collect())
}
