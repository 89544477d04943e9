//! Opt-in on-disk eigensystem cache. Entries are written once, through a
//! temporary file and a rename, so concurrent workers never see partial files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::floquet::{serialize, FloquetEigensystem, FloquetOptions};
use crate::SystemParams;

#[derive(Serialize)]
struct Key<'a> {
    params: &'a SystemParams,
    biorthonormality_tol: f64,
    escalation_tol: f64,
    max_k_max: usize,
    k_max: usize,
    escalate: bool,
    schema: u32,
}

pub fn key(params: &SystemParams, opts: &FloquetOptions) -> String {
    let k = Key {
        params,
        biorthonormality_tol: opts.biorthonormality_tol,
        escalation_tol: opts.escalation_tol,
        max_k_max: opts.max_k_max,
        k_max: opts.k_max,
        escalate: opts.escalate,
        schema: serialize::SCHEMA_VERSION,
    };
    let text = serde_json::to_string(&k).expect("cache key serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn path_for(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

/// Cached eigensystem, or `None` if absent or unreadable.
pub fn load(dir: &Path, key: &str) -> Option<FloquetEigensystem> {
    let text = fs::read_to_string(path_for(dir, key)).ok()?;
    match serialize::from_json(&text) {
        Ok(eig) => Some(eig),
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {key}: {e}");
            None
        }
    }
}

pub fn store(dir: &Path, key: &str, eig: &FloquetEigensystem) -> io::Result<()> {
    let target = path_for(dir, key);
    if target.exists() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
    fs::write(&tmp, serialize::to_json(eig))?;
    fs::rename(&tmp, &target)
}
