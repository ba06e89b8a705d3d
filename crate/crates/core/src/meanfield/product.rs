use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::C64;

/// Factorized lattice state `ρ = ⊗_j ρ_j`.
///
/// Each site matrix is stored as `m[a][b] = ⟨a|ρ_j|b⟩`; the component vector
/// exposed by [`ProductState::components`] is `(ρ⁰⁰, ρ⁰¹, ρ¹¹, ρ¹⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    sites: Vec<Mat2>,
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Haar-random pure qubit `(c₀, c₁)`.
pub fn haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let a = g();
    let b = g();
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / norm, b / norm]
}

fn projector(psi: [C64; 2]) -> Mat2 {
    [
        [psi[0] * psi[0].conj(), psi[0] * psi[1].conj()],
        [psi[1] * psi[0].conj(), psi[1] * psi[1].conj()],
    ]
}

impl ProductState {
    pub fn from_sites(sites: Vec<Mat2>) -> Result<Self> {
        let st = Self { sites };
        st.validate(1e-10)?;
        Ok(st)
    }

    pub fn uniform(n: usize, rho: Mat2) -> Self {
        Self { sites: vec![rho; n] }
    }

    pub fn all_down(n: usize) -> Self {
        Self::uniform(n, [[ONE, ZERO], [ZERO, ZERO]])
    }

    pub fn all_up(n: usize) -> Self {
        Self::uniform(n, [[ZERO, ZERO], [ZERO, ONE]])
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let h = C64::new(0.5, 0.0);
        Self::uniform(n, [[h, ZERO], [ZERO, h]])
    }

    /// Independent Haar-random pure state on every site.
    pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { sites: (0..n).map(|_| projector(haar_qubit(rng))).collect() }
    }

    pub fn from_pure(amplitudes: &[[C64; 2]]) -> Self {
        Self { sites: amplitudes.iter().map(|&psi| projector(psi)).collect() }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Mat2] {
        &self.sites
    }

    pub fn site(&self, j: usize) -> &Mat2 {
        &self.sites[j]
    }

    /// Components `(ρ⁰⁰, ρ⁰¹, ρ¹¹, ρ¹⁰)` of site `j`.
    pub fn components(&self, j: usize) -> [C64; 4] {
        let m = &self.sites[j];
        [m[0][0], m[0][1], m[1][1], m[1][0]]
    }

    pub fn set_components(&mut self, j: usize, c: [C64; 4]) {
        self.sites[j] = [[c[0], c[1]], [c[3], c[2]]];
    }

    pub fn density(&self, j: usize) -> f64 {
        self.sites[j][1][1].re
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.density(j)).collect()
    }

    /// `⟨σ⁻_j⟩ = Tr(σ⁻ρ_j) = ρ¹⁰_j`.
    pub fn lowering(&self, j: usize) -> C64 {
        self.sites[j][1][0]
    }

    pub fn max_density_diff(&self, other: &Self) -> f64 {
        self.densities()
            .iter()
            .zip(other.densities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks that each site is Hermitian with unit trace and eigenvalues in
    /// `[-tol, 1 + tol]`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (j, m) in self.sites.iter().enumerate() {
            let herm = (m[0][1] - m[1][0].conj()).norm().max(m[0][0].im.abs()).max(m[1][1].im.abs());
            let tr = (m[0][0] + m[1][1] - 1.0).norm();
            let (lo, hi) = eigenvalues(m);
            if herm > tol || tr > tol || lo < -tol || hi > 1.0 + tol {
                return Err(Error::Numerical(format!(
                    "site {j} invalid: hermiticity {herm:.3e}, trace error {tr:.3e}, eigenvalues ({lo:.3e}, {hi:.3e})"
                )));
            }
        }
        Ok(())
    }
}

/// Eigenvalues of the Hermitian part of a 2×2 matrix, ascending.
fn eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = (m[0][1] + m[1][0].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean - r, mean + r)
}
