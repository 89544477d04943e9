use faer::Mat;
use num_complex::Complex64 as C64;

use crate::linalg::{self, CMat, ZERO};

/// A T-periodic matrix M(t) = Σₙ M⁽ⁿ⁾ e^{−inω t}, stored as a contiguous run of
/// Fourier components starting at harmonic `lowest`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMatrix {
    lowest: i64,
    components: Vec<CMat>,
    omega: f64,
}

impl PeriodicMatrix {
    pub fn new(lowest: i64, components: Vec<CMat>, omega: f64) -> Self {
        assert!(!components.is_empty(), "periodic matrix needs at least one component");
        let d = components[0].nrows();
        assert!(components.iter().all(|c| c.nrows() == d && c.ncols() == d));
        Self { lowest, components, omega }
    }

    pub fn constant(m: CMat, omega: f64) -> Self {
        Self::new(0, vec![m], omega)
    }

    pub fn dim(&self) -> usize {
        self.components[0].nrows()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    pub fn lowest_harmonic(&self) -> i64 {
        self.lowest
    }

    pub fn highest_harmonic(&self) -> i64 {
        self.lowest + self.components.len() as i64 - 1
    }

    pub fn component(&self, n: i64) -> Option<&CMat> {
        if n < self.lowest {
            return None;
        }
        self.components.get((n - self.lowest) as usize)
    }

    /// `(n, M⁽ⁿ⁾)` pairs in ascending harmonic order.
    pub fn harmonics(&self) -> impl Iterator<Item = (i64, &CMat)> {
        self.components.iter().enumerate().map(move |(k, m)| (self.lowest + k as i64, m))
    }

    pub fn evaluate(&self, t: f64) -> CMat {
        let d = self.dim();
        let mut out = Mat::<C64>::zeros(d, d);
        for (n, m) in self.harmonics() {
            let phase = C64::from_polar(1.0, -(n as f64) * self.omega * t);
            for j in 0..d {
                for i in 0..d {
                    out[(i, j)] += m[(i, j)] * phase;
                }
            }
        }
        out
    }

    /// Σₙ M⁽ⁿ⁾ = M(0).
    pub fn at_zero(&self) -> CMat {
        self.evaluate(0.0)
    }

    /// Component-wise image of M(t) ↦ M(t)†, i.e. M⁽ⁿ⁾ ↦ (M⁽⁻ⁿ⁾)†.
    pub fn adjoint(&self) -> Self {
        let components = self.components.iter().rev().map(linalg::dagger).collect();
        Self { lowest: -self.highest_harmonic(), components, omega: self.omega }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            lowest: self.lowest,
            components: self.components.iter().map(|m| linalg::scale(m, s)).collect(),
            omega: self.omega,
        }
    }

    /// `a·self + b·other` over the union of both harmonic ranges.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        let lo = self.lowest.min(other.lowest);
        let hi = self.highest_harmonic().max(other.highest_harmonic());
        let d = self.dim();
        let components = (lo..=hi)
            .map(|n| {
                let mut m = Mat::<C64>::zeros(d, d);
                if let Some(x) = self.component(n) {
                    m = linalg::add_scaled(&m, x, a);
                }
                if let Some(y) = other.component(n) {
                    m = linalg::add_scaled(&m, y, b);
                }
                m
            })
            .collect();
        Self { lowest: lo, components, omega: self.omega }
    }

    /// Largest entry of M⁽⁻ⁿ⁾ − (M⁽ⁿ⁾)† over all harmonics.
    pub fn hermiticity_residual(&self) -> f64 {
        let adj = self.adjoint();
        let diff = self.combine(linalg::ONE, &adj, -linalg::ONE);
        diff.components.iter().map(|m| m.norm_max()).fold(0.0, f64::max)
    }

    pub fn traces(&self) -> Vec<(i64, C64)> {
        self.harmonics().map(|(n, m)| (n, linalg::trace(m))).collect()
    }

    /// Floquet-space scalar product ⟨⟨self|other⟩⟩ = Σₙ Tr[self⁽ⁿ⁾† other⁽ⁿ⁾].
    pub fn inner(&self, other: &Self) -> C64 {
        let mut acc = ZERO;
        for (n, m) in self.harmonics() {
            if let Some(o) = other.component(n) {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        acc += m[(i, j)].conj() * o[(i, j)];
                    }
                }
            }
        }
        acc
    }

    /// Σₙ ‖M⁽ⁿ⁾‖²_F.
    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|m| m.norm_l2().powi(2)).sum()
    }

    pub fn components(&self) -> &[CMat] {
        &self.components
    }

    /// Drops leading and trailing components whose entries are all below `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let keep: Vec<bool> = self.components.iter().map(|m| m.norm_max() > tol).collect();
        let first = keep.iter().position(|&k| k);
        let last = keep.iter().rposition(|&k| k);
        match (first, last) {
            (Some(a), Some(b)) => Self {
                lowest: self.lowest + a as i64,
                components: self.components[a..=b].to_vec(),
                omega: self.omega,
            },
            _ => Self::new(0, vec![Mat::zeros(self.dim(), self.dim())], self.omega),
        }
    }
}

/// Σₙ M⁽ⁿ⁾ e^{−inω t}.
pub fn evaluate_periodic(m: &PeriodicMatrix, t: f64) -> CMat {
    m.evaluate(t)
}
