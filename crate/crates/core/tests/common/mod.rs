#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rabi_floquet::floquet::{self, FloquetEigensystem, FloquetOptions};
use rabi_floquet::master_equation::{self, FourierLiouvillian, RateTable};
use rabi_floquet::rabi_model::{self, DressedSpectrum};
use rabi_floquet::SystemParams;

type Cache = Mutex<HashMap<(u64, u64), Arc<Point>>>;

pub struct Point {
    pub params: SystemParams,
    pub spectrum: DressedSpectrum,
    pub rates: RateTable,
    pub liouv: FourierLiouvillian,
    pub eig: FloquetEigensystem,
}

pub fn build(params: SystemParams) -> Point {
    let opts = FloquetOptions::for_params(&params);
    build_with(params, &opts)
}

pub fn build_with(params: SystemParams, opts: &FloquetOptions) -> Point {
    faer::set_global_parallelism(faer::Par::Seq);
    let spectrum = rabi_model::dressed_spectrum(&params).unwrap();
    let (rates, liouv) = master_equation::liouvillian_for(&params, &spectrum).unwrap();
    let eig = floquet::solve(&liouv, &spectrum.parities(), opts).unwrap();
    Point { params, spectrum, rates, liouv, eig }
}

/// Weakly driven point (γ = κ = 10⁻², F/γ = 0.1) with the drive on the
/// second transition, cached per test binary.
pub fn weak_drive(g: f64) -> Arc<Point> {
    cached(g, 1e-8)
}

/// Same point with the harmonic cutoff raised until left and right modes are
/// biorthonormal to 10⁻¹⁰.
pub fn weak_drive_tight(g: f64) -> Arc<Point> {
    cached(g, 1e-10)
}

fn cached(g: f64, biorthonormality_tol: f64) -> Arc<Point> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (g.to_bits(), biorthonormality_tol.to_bits());
    if let Some(p) = cache.lock().unwrap().get(&key) {
        return p.clone();
    }
    let params = SystemParams::weak_drive_point(g).with_resonant_drive().unwrap();
    let opts = FloquetOptions { biorthonormality_tol, ..FloquetOptions::for_params(&params) };
    let p = Arc::new(build_with(params, &opts));
    cache.lock().unwrap().insert(key, p.clone());
    p
}
