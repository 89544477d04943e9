//! Dense complex matrix helpers shared by every module.
//!
//! Density matrices are vectorized by column stacking: element `ρ[i, j]` of an
//! `n × n` matrix lives at index `i + n * j`. With this convention the map
//! `ρ ↦ A ρ B` has superoperator matrix `Bᵀ ⊗ A`.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn vec_index(i: usize, j: usize, n: usize) -> usize {
    i + n * j
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `a + s * b`, element-wise.
pub fn add_scaled(a: &CMat, b: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + s * b[(i, j)])
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    a.norm_l2()
}

/// Max-entry deviation of `a` from `a†`.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigenvalues (ascending) of the Hermitian part of `a`.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    hermitian_part(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalue iteration failed")
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the Hermitian part of `a`.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let evd = hermitian_part(a)
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition failed");
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i].re).collect();
    (values, evd.U().to_owned())
}

/// Trace distance ½‖a − b‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let diff = add_scaled(a, b, -ONE);
    0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>()
}

/// Stack columns of a square matrix into a vector.
pub fn vectorize(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut v = vec![ZERO; n * a.ncols()];
    for j in 0..a.ncols() {
        for i in 0..n {
            v[vec_index(i, j, n)] = a[(i, j)];
        }
    }
    v
}

pub fn unvectorize(v: &[C64], n: usize) -> CMat {
    debug_assert_eq!(v.len(), n * n);
    Mat::from_fn(n, n, |i, j| v[vec_index(i, j, n)])
}

/// Rank-one projector `|v⟩⟨v|` onto basis state `k` of an `n`-dimensional space.
pub fn basis_projector(n: usize, k: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == k && j == k { ONE } else { ZERO })
}

/// Superoperator of `ρ ↦ A ρ B`.
pub fn sprepost(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let nn = n * n;
    let mut s = Mat::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = vec_index(i, j, n);
            for l in 0..n {
                let blj = b[(l, j)];
                if blj == ZERO {
                    continue;
                }
                for k in 0..n {
                    let aik = a[(i, k)];
                    if aik != ZERO {
                        s[(row, vec_index(k, l, n))] += aik * blj;
                    }
                }
            }
        }
    }
    s
}

/// Superoperator of `ρ ↦ A ρ`.
pub fn spre(a: &CMat) -> CMat {
    sprepost(a, &identity(a.nrows()))
}

/// Superoperator of `ρ ↦ ρ B`.
pub fn spost(b: &CMat) -> CMat {
    sprepost(&identity(b.nrows()), b)
}

/// Superoperator of `ρ ↦ i(ρV − Vρ)`, the unitary part generated by `V`.
pub fn commutator_generator(v: &CMat) -> CMat {
    let s = add_scaled(&spost(v), &spre(v), -ONE);
    scale(&s, I)
}

/// Superoperator of the Lindblad dissipator `𝒟[O]ρ = OρO† − ½{O†O, ρ}`.
pub fn lindblad_dissipator(o: &CMat) -> CMat {
    let od = dagger(o);
    let odo = &od * o;
    let jump = sprepost(o, &od);
    let anti = add_scaled(&spre(&odo), &spost(&odo), ONE);
    add_scaled(&jump, &anti, C64::new(-0.5, 0.0))
}

/// Apply a superoperator matrix to a density matrix.
pub fn apply_superop(s: &CMat, rho: &CMat) -> CMat {
    let n = rho.nrows();
    let v = vectorize(rho);
    let mut out = vec![ZERO; n * n];
    for (c, &x) in v.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += s[(r, c)] * x;
        }
    }
    unvectorize(&out, n)
}

/// Projects a Hermitian matrix onto the density matrices: negative eigenvalues
/// are clipped and the trace renormalized to one.
pub fn clip_to_density(rho: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(rho);
    let n = rho.nrows();
    let clipped: Vec<f64> = vals.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    Mat::from_fn(n, n, |i, j| {
        let mut acc = ZERO;
        for (k, &w) in clipped.iter().enumerate() {
            if w != 0.0 {
                acc += vecs[(i, k)] * vecs[(j, k)].conj() * w;
            }
        }
        acc / total
    })
}
