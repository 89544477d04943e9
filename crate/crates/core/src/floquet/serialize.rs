//! JSON form of a [`FloquetEigensystem`].
//!
//! Schema (version 1):
//!
//! ```text
//! { "schema": 1, "omega_d": f64, "dims": N, "k_max": K, "zero_index": usize,
//!   "modes": [ { "eigenvalue": [re, im], "condition": f64,
//!                "right": { "lowest": n0, "components": [[[re, im], ...], ...] },
//!                "left":  { ... } } ] }
//! ```
//!
//! Each component is an N×N matrix flattened row-major.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{FloquetEigensystem, FloquetMode, PeriodicMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PeriodicJson {
    lowest: i64,
    components: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ModeJson {
    eigenvalue: [f64; 2],
    condition: f64,
    right: PeriodicJson,
    left: PeriodicJson,
}

#[derive(Serialize, Deserialize)]
struct EigensystemJson {
    schema: u32,
    omega_d: f64,
    dims: usize,
    k_max: usize,
    zero_index: usize,
    modes: Vec<ModeJson>,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheFormatError {
    #[error("malformed eigensystem JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error("inconsistent eigensystem: {0}")]
    Shape(String),
}

fn periodic_to_json(m: &PeriodicMatrix) -> PeriodicJson {
    let d = m.dim();
    PeriodicJson {
        lowest: m.lowest_harmonic(),
        components: m
            .components()
            .iter()
            .map(|c| {
                let mut flat = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        flat.push([c[(i, j)].re, c[(i, j)].im]);
                    }
                }
                flat
            })
            .collect(),
    }
}

fn periodic_from_json(p: PeriodicJson, dims: usize, omega: f64) -> Result<PeriodicMatrix, CacheFormatError> {
    if p.components.is_empty() {
        return Err(CacheFormatError::Shape("periodic matrix without components".into()));
    }
    let mut comps = Vec::with_capacity(p.components.len());
    for flat in p.components {
        if flat.len() != dims * dims {
            return Err(CacheFormatError::Shape(format!(
                "component has {} entries, expected {}",
                flat.len(),
                dims * dims
            )));
        }
        comps.push(Mat::from_fn(dims, dims, |i, j| {
            let [re, im] = flat[i * dims + j];
            C64::new(re, im)
        }));
    }
    Ok(PeriodicMatrix::new(p.lowest, comps, omega))
}

pub fn to_json(eig: &FloquetEigensystem) -> String {
    let doc = EigensystemJson {
        schema: SCHEMA_VERSION,
        omega_d: eig.omega_d(),
        dims: eig.dims(),
        k_max: eig.k_max(),
        zero_index: eig.zero_index(),
        modes: eig
            .modes()
            .iter()
            .map(|m| ModeJson {
                eigenvalue: [m.eigenvalue.re, m.eigenvalue.im],
                condition: m.condition,
                right: periodic_to_json(&m.right),
                left: periodic_to_json(&m.left),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("eigensystem serializes")
}

pub fn from_json(text: &str) -> Result<FloquetEigensystem, CacheFormatError> {
    let doc: EigensystemJson = serde_json::from_str(text)?;
    if doc.schema != SCHEMA_VERSION {
        return Err(CacheFormatError::Schema(doc.schema));
    }
    if doc.zero_index >= doc.modes.len() {
        return Err(CacheFormatError::Shape("zero index out of range".into()));
    }
    let mut modes = Vec::with_capacity(doc.modes.len());
    for m in doc.modes {
        modes.push(FloquetMode {
            eigenvalue: C64::new(m.eigenvalue[0], m.eigenvalue[1]),
            condition: m.condition,
            right: periodic_from_json(m.right, doc.dims, doc.omega_d)?,
            left: periodic_from_json(m.left, doc.dims, doc.omega_d)?,
        });
    }
    Ok(FloquetEigensystem::from_parts(modes, doc.omega_d, doc.zero_index, doc.dims, doc.k_max))
}
