//! Brute-force density-matrix reference for a few sites.
//!
//! Density matrices are vectorized by stacking columns, so that
//! `vec(ρ)[i + D·j] = ρ[i][j]` and `vec(AXB) = (Bᵀ ⊗ A)·vec(X)`. For a single
//! site that gives the order `(ρ⁰⁰, ρ¹⁰, ρ⁰¹, ρ¹¹)`; the mean-field component
//! order `(ρ⁰⁰, ρ⁰¹, ρ¹¹, ρ¹⁰)` is related to it by [`COMPONENT_ORDER`].

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, UPLO};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LocalOp, ModelParams};
use crate::linalg::{dagger, expm, kron, mat2_to_array, Mat2};
use crate::C64;

/// Largest lattice the dense Liouvillian accepts (a `4^5 × 4^5` matrix).
pub const MAX_LIOUVILLIAN_SITES: usize = 5;

/// Largest lattice for which a dense Hamiltonian is built.
pub const MAX_HAMILTONIAN_SITES: usize = 12;

/// `COMPONENT_ORDER[k]` is the column-stacked index of the `k`-th entry of
/// the component vector `(ρ⁰⁰, ρ⁰¹, ρ¹¹, ρ¹⁰)`.
pub const COMPONENT_ORDER: [usize; 4] = [0, 2, 3, 1];

pub fn column_stack_to_components(v: [C64; 4]) -> [C64; 4] {
    COMPONENT_ORDER.map(|i| v[i])
}

pub fn components_to_column_stack(c: [C64; 4]) -> [C64; 4] {
    let mut v = [C64::new(0.0, 0.0); 4];
    for (k, &i) in COMPONENT_ORDER.iter().enumerate() {
        v[i] = c[k];
    }
    v
}

/// Embeds a single-site operator at `site` of an `n`-site register.
pub fn site_operator(op: &Mat2, site: usize, n: usize) -> Array2<C64> {
    let left = 1usize << site;
    let right = 1usize << (n - site - 1);
    let mut out = kron(&Array2::eye(left), &mat2_to_array(op));
    out = kron(&out, &Array2::eye(right));
    out
}

/// XY Hamiltonian with explicit bond couplings `(a, b, hopping)`.
pub fn hamiltonian_with_bonds(
    n: usize,
    bonds: &[(usize, usize, f64)],
    detuning: f64,
    drive: f64,
) -> Array2<C64> {
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    let sp = LocalOp::SigmaPlus.matrix();
    let sm = LocalOp::SigmaMinus.matrix();
    let num = LocalOp::Number.matrix();
    for j in 0..n {
        h = h + site_operator(&num, j, n) * C64::new(detuning, 0.0);
        let x = site_operator(&sp, j, n) + site_operator(&sm, j, n);
        h = h + x * C64::new(drive, 0.0);
    }
    for &(a, b, hop) in bonds {
        let ab = site_operator(&sp, a, n).dot(&site_operator(&sm, b, n));
        let ba = site_operator(&sp, b, n).dot(&site_operator(&sm, a, n));
        h = h - (ab + ba) * C64::new(hop, 0.0);
    }
    h
}

pub fn hamiltonian(lattice: &Lattice, params: &ModelParams) -> Result<Array2<C64>> {
    params.validate()?;
    let n = lattice.n_sites();
    if n > MAX_HAMILTONIAN_SITES {
        return Err(Error::Capacity(format!(
            "dense Hamiltonian limited to {MAX_HAMILTONIAN_SITES} sites, lattice has {n}"
        )));
    }
    let bonds: Vec<_> = lattice.bonds().into_iter().map(|(a, b)| (a, b, params.hopping)).collect();
    Ok(hamiltonian_with_bonds(n, &bonds, params.detuning, params.drive))
}

/// Column-stacked superoperator of `−i[H, ·] + Σ γ_k (c ρ c† − ½{c†c, ρ})`.
pub fn lindblad_generator(h: &Array2<C64>, jumps: &[(f64, Array2<C64>)]) -> Array2<C64> {
    let d = h.nrows();
    let id = Array2::<C64>::eye(d);
    let mi = C64::new(0.0, -1.0);
    let mut l = (kron(&id, h) - kron(&h.t().to_owned(), &id)) * mi;
    for (rate, c) in jumps {
        let cdc = dagger(c).dot(c);
        let term = kron(&c.mapv(|z| z.conj()), c)
            - kron(&id, &cdc) * C64::new(0.5, 0.0)
            - kron(&cdc.t().to_owned(), &id) * C64::new(0.5, 0.0);
        l = l + term * C64::new(*rate, 0.0);
    }
    l
}

/// Applies the Lindblad map to an operator without building a superoperator.
pub fn apply_lindblad(h: &Array2<C64>, jumps: &[(f64, Array2<C64>)], x: &Array2<C64>) -> Array2<C64> {
    let mi = C64::new(0.0, -1.0);
    let mut out = (h.dot(x) - x.dot(h)) * mi;
    for (rate, c) in jumps {
        let cd = dagger(c);
        let cdc = cd.dot(c);
        let t = c.dot(x).dot(&cd) - (cdc.dot(x) + x.dot(&cdc)) * C64::new(0.5, 0.0);
        out = out + t * C64::new(*rate, 0.0);
    }
    out
}

/// Dense Liouvillian of the lattice model, `vec(dρ/dt) = L·vec(ρ)`.
pub fn dense_liouvillian(lattice: &Lattice, params: &ModelParams) -> Result<Array2<C64>> {
    let n = lattice.n_sites();
    if n > MAX_LIOUVILLIAN_SITES {
        return Err(Error::Capacity(format!(
            "dense Liouvillian limited to {MAX_LIOUVILLIAN_SITES} sites, lattice has {n}"
        )));
    }
    let h = hamiltonian(lattice, params)?;
    let sm = LocalOp::SigmaMinus.matrix();
    let jumps: Vec<_> = (0..n).map(|j| (params.decay, site_operator(&sm, j, n))).collect();
    Ok(lindblad_generator(&h, &jumps))
}

pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    let d = rho.nrows();
    Array1::from_shape_fn(d * d, |k| rho[[k % d, k / d]])
}

pub fn unvectorize(v: &Array1<C64>) -> Array2<C64> {
    let d = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(d * d, v.len(), "vector length is not a perfect square");
    Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j])
}

/// Row vector `t` with `t·vec(ρ) = Tr ρ`.
pub fn trace_functional(d: usize) -> Array1<C64> {
    let mut t = Array1::zeros(d * d);
    for i in 0..d {
        t[i + d * i] = C64::new(1.0, 0.0);
    }
    t
}

/// `vec(ρ) ↦ vec(ρ†)`.
pub fn adjoint_vec(v: &Array1<C64>) -> Array1<C64> {
    vectorize(&dagger(&unvectorize(v)))
}

/// Full density matrix on `n_sites` qubits.
#[derive(Debug, Clone)]
pub struct DenseState {
    rho: Array2<C64>,
    n_sites: usize,
}

impl DenseState {
    pub fn new(rho: Array2<C64>) -> Result<Self> {
        let d = rho.nrows();
        if d != rho.ncols() || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("density matrix shape {:?}", rho.dim())));
        }
        Ok(Self { n_sites: d.trailing_zeros() as usize, rho })
    }

    pub fn product(sites: &[Mat2]) -> Self {
        let mut rho = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for m in sites {
            rho = kron(&rho, &mat2_to_array(m));
        }
        Self { rho, n_sites: sites.len() }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.rho
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn trace(&self) -> C64 {
        self.rho.diag().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        crate::linalg::max_abs_diff(&self.rho, &dagger(&self.rho))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herm = (&self.rho + &dagger(&self.rho)) * C64::new(0.5, 0.0);
        let (vals, _) = herm.eigh(UPLO::Upper)?;
        Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        let tr = self.trace();
        let min_eig = self.min_eigenvalue()?;
        if herm > tol || (tr - 1.0).norm() > tol || min_eig < -tol {
            return Err(Error::Numerical(format!(
                "invalid density matrix: hermiticity error {herm:.3e}, trace {tr}, min eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// `Tr(O ρ)` for a full-register operator.
    pub fn expect(&self, op: &Array2<C64>) -> C64 {
        let d = self.rho.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += op[[i, k]] * self.rho[[k, i]];
            }
        }
        acc
    }

    pub fn local_expect(&self, op: LocalOp, site: usize) -> C64 {
        self.expect(&site_operator(&op.matrix(), site, self.n_sites))
    }

    pub fn two_point(&self, a: LocalOp, j: usize, b: LocalOp, k: usize) -> C64 {
        let oa = site_operator(&a.matrix(), j, self.n_sites);
        let ob = site_operator(&b.matrix(), k, self.n_sites);
        self.expect(&oa.dot(&ob))
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.n_sites).map(|j| self.local_expect(LocalOp::Number, j).re).collect()
    }

    /// Reduced single-site density matrix.
    pub fn reduced_site(&self, site: usize) -> Mat2 {
        let n = self.n_sites;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        let bit = n - site - 1;
        let d = 1usize << n;
        for i in 0..d {
            for k in 0..d {
                if (i & !(1 << bit)) != (k & !(1 << bit)) {
                    continue;
                }
                out[(i >> bit) & 1][(k >> bit) & 1] += self.rho[[i, k]];
            }
        }
        out
    }
}

/// Null-space solution of a Liouvillian.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Trace-one Hermitian steady state (the first null vector with nonzero
    /// trace when the null space is degenerate).
    pub state: DenseState,
    /// Number of singular values below the null tolerance.
    pub null_dimension: usize,
    /// Raw null-space basis, one matrix per null vector.
    pub basis: Vec<Array2<C64>>,
    /// Ascending smallest singular values, relative to the largest.
    pub smallest_singular_values: Vec<f64>,
}

impl SteadyState {
    pub fn is_degenerate(&self) -> bool {
        self.null_dimension > 1
    }
}

/// Relative singular-value threshold below which a direction counts as null.
pub const NULL_TOLERANCE: f64 = 1e-10;

/// Steady state from the right-singular vector(s) of `L` with vanishing
/// singular value, Hermitized and normalized to unit trace.
pub fn steadystate_dense(l: &Array2<C64>) -> Result<SteadyState> {
    let (_, sv, vt) = l.svddc(JobSvd::All)?;
    let vt = vt.ok_or_else(|| Error::Numerical("SVD returned no right vectors".into()))?;
    let smax = sv[0].max(f64::MIN_POSITIVE);
    let m = sv.len();
    let null: Vec<usize> = (0..m).rev().take_while(|&i| sv[i] <= NULL_TOLERANCE * smax).collect();
    let smallest: Vec<f64> = (0..m.min(4)).map(|k| sv[m - 1 - k] / smax).collect();
    if null.is_empty() {
        return Err(Error::Numerical(format!(
            "no null space: smallest relative singular value {:.3e}",
            smallest[0]
        )));
    }
    let basis: Vec<Array2<C64>> = null
        .iter()
        .map(|&i| unvectorize(&vt.slice(s![i, ..]).mapv(|z| z.conj())))
        .collect();
    let chosen = basis
        .iter()
        .max_by(|a, b| a.diag().sum().norm().total_cmp(&b.diag().sum().norm()))
        .expect("non-empty");
    let tr = chosen.diag().sum();
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical("null space is traceless".into()));
    }
    let rho = chosen / tr;
    let rho = (&rho + &dagger(&rho)) * C64::new(0.5, 0.0);
    Ok(SteadyState {
        state: DenseState::new(rho)?,
        null_dimension: null.len(),
        basis,
        smallest_singular_values: smallest,
    })
}

/// `ρ(t) = exp(L t)·ρ(0)` by dense exponentiation.
pub fn propagate(l: &Array2<C64>, rho0: &DenseState, t: f64) -> Result<DenseState> {
    let prop = expm(&(l * C64::new(t, 0.0)));
    DenseState::new(unvectorize(&prop.dot(&vectorize(rho0.matrix()))))
}
