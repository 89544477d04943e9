//! Dense non-Hermitian eigendecomposition with biorthonormal left vectors.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::FloquetError;
use crate::linalg::{CMat, ZERO};

/// Eigenvector condition numbers above this are treated as a defective matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Full eigensystem of a square matrix: `A vᵢ = λᵢ vᵢ`, `wᵢ† A = λᵢ wᵢ†`,
/// `wᵢ† vⱼ = δᵢⱼ`. Vectors are stored as columns.
#[derive(Clone, Debug)]
pub struct RawEigensystem {
    pub values: Vec<C64>,
    pub right: CMat,
    pub left: CMat,
    /// ‖wᵢ‖‖vᵢ‖, the sensitivity of λᵢ to perturbations of A.
    pub condition: Vec<f64>,
}

impl RawEigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// max |wᵢ† vⱼ − δᵢⱼ|.
    pub fn biorthonormality_residual(&self) -> f64 {
        let gram = self.left.adjoint() * &self.right;
        let mut worst = 0.0f64;
        for j in 0..gram.ncols() {
            for i in 0..gram.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Eigendecomposition of a general complex matrix.
///
/// Right vectors are unit-normalized with their largest entry made real
/// positive. Left vectors are the rows of V⁻¹, which makes the pair
/// biorthonormal by construction, including inside degenerate clusters.
pub fn eigendecompose(a: &CMat) -> Result<RawEigensystem, FloquetError> {
    let d = a.nrows();
    if d != a.ncols() {
        return Err(FloquetError::NotSquare { rows: d, cols: a.ncols() });
    }
    if d == 0 {
        return Ok(RawEigensystem { values: vec![], right: Mat::zeros(0, 0), left: Mat::zeros(0, 0), condition: vec![] });
    }
    let evd = a.eigen().map_err(|e| FloquetError::EigenFailed(format!("{e:?}")))?;
    let s = evd.S();
    let values: Vec<C64> = (0..d).map(|i| s[i]).collect();
    let mut right = evd.U().to_owned();
    for j in 0..d {
        let mut norm = 0.0;
        let mut pivot = ZERO;
        let mut best = -1.0;
        for i in 0..d {
            let z = right[(i, j)];
            norm += z.norm_sqr();
            if z.norm() > best * (1.0 + 1e-12) {
                best = z.norm();
                pivot = z;
            }
        }
        let norm = norm.sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(FloquetError::EigenFailed(format!("eigenvector {j} is degenerate")));
        }
        let phase = pivot.conj() / (pivot.norm() * norm);
        for i in 0..d {
            right[(i, j)] *= phase;
        }
    }
    let inv = right.partial_piv_lu().inverse();
    let left = inv.adjoint().to_owned();
    let mut condition = Vec::with_capacity(d);
    for (j, &eigenvalue) in values.iter().enumerate() {
        let k = left.col(j).norm_l2();
        if !k.is_finite() || k > MAX_CONDITION {
            return Err(FloquetError::IllConditioned { index: j, condition: k, eigenvalue });
        }
        condition.push(k);
    }
    Ok(RawEigensystem { values, right, left, condition })
}
