//! Floquet-Liouville engine for the periodically driven, dissipative quantum
//! Rabi model.
//!
//! The pipeline runs `rabi_model` → `master_equation` → `floquet` →
//! `metastability` / `observables`; `integrator` is an independent
//! time-stepping check and `sweep` orchestrates parameter scans.

pub mod floquet;
pub mod linalg;
pub mod integrator;
pub mod master_equation;
pub mod metastability;
pub mod observables;
pub mod rabi_model;
pub mod sweep;

pub use rabi_model::{DressedSpectrum, Parity, SystemParams};
