use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use super::chain::Chain;
use super::pauli;
use crate::error::{invalid, Error, Result};
use crate::lattice::LocalOp;
use crate::linalg::Mat2;
use crate::meanfield::ProductState;
use crate::C64;

/// `|Tr ρ| / ‖ρ‖_HS` below which the trace is considered lost.
pub const TRACE_COLLAPSE: f64 = 1e-12;

/// Denominator magnitude below which a normalized correlation is flagged.
pub const SINGULAR_DENOMINATOR: f64 = 1e-10;

/// Density operator of a chain as a real matrix-product operator in the
/// normalized Pauli basis, one index of dimension 4 per site.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedMpo {
    pub(crate) chain: Chain<f64>,
    /// Sum of the discarded squared-singular-value fractions of all
    /// truncations so far.
    pub(crate) discarded_weight: f64,
    pub(crate) time: f64,
}

/// A normalized correlation with a flag for vanishing denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub singular: bool,
}

/// Product density operator with bond dimension 1.
pub fn product_mpo(state: &ProductState) -> VectorizedMpo {
    VectorizedMpo::from_sites(state.sites())
}

impl VectorizedMpo {
    pub fn from_sites(sites: &[Mat2]) -> Self {
        assert!(!sites.is_empty(), "MPO needs at least one site");
        let tensors: Vec<Array3<f64>> = sites
            .iter()
            .map(|m| Array3::from_shape_vec((1, 4, 1), pauli::real_coefficients(m).to_vec()).unwrap())
            .collect();
        let chain = Chain::from_tensors(tensors, 0).expect("product tensors are consistent");
        let mut mpo = Self { chain, discarded_weight: 0.0, time: 0.0 };
        mpo.renormalize().expect("product state has unit trace");
        mpo
    }

    pub(crate) fn from_parts(tensors: Vec<Array3<f64>>, center: usize, discarded_weight: f64, time: f64) -> Result<Self> {
        if tensors.iter().any(|t| t.dim().1 != 4) {
            return Err(invalid("MPO tensors need a physical dimension of 4"));
        }
        Ok(Self { chain: Chain::from_canonical(tensors, center)?, discarded_weight, time })
    }

    pub fn n_sites(&self) -> usize {
        self.chain.len()
    }

    pub fn chain(&self) -> &Chain<f64> {
        &self.chain
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn max_bond(&self) -> usize {
        self.chain.max_bond()
    }

    pub fn center(&self) -> usize {
        self.chain.center()
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    /// Evolution time accumulated by TEBD.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn isometry_error(&self) -> f64 {
        self.chain.isometry_error()
    }

    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.chain.canonicalize(center)
    }

    /// Hilbert–Schmidt norm of the represented operator.
    pub fn hs_norm(&self) -> f64 {
        self.chain.norm()
    }

    pub fn trace(&self) -> f64 {
        let env = self.left_environments();
        env[self.n_sites()][0]
    }

    /// Rescales to unit trace.
    pub fn renormalize(&mut self) -> Result<f64> {
        let tr = self.trace();
        let norm = self.hs_norm();
        if !tr.is_finite() || tr.abs() < TRACE_COLLAPSE * norm || norm == 0.0 {
            return Err(Error::Numerical(format!("trace collapsed: Tr ρ = {tr:e}, ‖ρ‖ = {norm:e}")));
        }
        self.chain.scale_center(1.0 / tr);
        Ok(tr)
    }

    /// `left[j]` is the trace of sites `0..j` as a row vector over bond `j`.
    fn left_environments(&self) -> Vec<Array1<f64>> {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.n_sites() + 1);
        out.push(Array1::from_elem(1, 1.0));
        for t in self.chain.tensors() {
            let next = out.last().unwrap().dot(&t.index_axis(ndarray::Axis(1), 0)) * sqrt2;
            out.push(next);
        }
        out
    }

    /// `right[j]` is the trace of sites `j..N` as a column vector over bond
    /// `j`; `right[N] = [1]`.
    fn right_environments(&self) -> Vec<Array1<f64>> {
        let sqrt2 = std::f64::consts::SQRT_2;
        let n = self.n_sites();
        let mut out = vec![Array1::from_elem(1, 1.0); n + 1];
        for j in (0..n).rev() {
            out[j] = self.chain.tensors()[j].index_axis(ndarray::Axis(1), 0).dot(&out[j + 1]) * sqrt2;
        }
        out
    }

    fn site_matrix(&self, site: usize, weights: &[C64; 4]) -> (Array2<f64>, Array2<f64>) {
        let t = &self.chain.tensors()[site];
        let (l, _, r) = t.dim();
        let mut re = Array2::zeros((l, r));
        let mut im = Array2::zeros((l, r));
        for (a, w) in weights.iter().enumerate() {
            let slab = t.index_axis(ndarray::Axis(1), a);
            if w.re != 0.0 {
                re.scaled_add(w.re, &slab);
            }
            if w.im != 0.0 {
                im.scaled_add(w.im, &slab);
            }
        }
        (re, im)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() })
        }
    }

    /// `Tr(O_site ρ) / Tr ρ`, complex for non-Hermitian `O`.
    pub fn expectation(&self, op: LocalOp, site: usize) -> Result<C64> {
        self.check_site(site)?;
        self.expectation_matrix(&op.matrix(), site)
    }

    fn expectation_matrix(&self, m: &Mat2, site: usize) -> Result<C64> {
        let left = self.left_environments();
        let right = self.right_environments();
        let tr = self.checked_trace(left[self.n_sites()][0])?;
        let (re, im) = self.site_matrix(site, &pauli::coefficients(m));
        let lr = &left[site];
        let rr = &right[site + 1];
        Ok(C64::new(lr.dot(&re.dot(rr)), lr.dot(&im.dot(rr))) / tr)
    }

    fn checked_trace(&self, tr: f64) -> Result<f64> {
        if !tr.is_finite() || tr.abs() < TRACE_COLLAPSE * self.hs_norm() {
            return Err(Error::Numerical(format!("trace vanishes: {tr:e}")));
        }
        Ok(tr)
    }

    /// Real part of `Tr(O ρ)/Tr ρ`.
    pub fn expectation_local(&self, op: LocalOp, site: usize) -> Result<f64> {
        Ok(self.expectation(op, site)?.re)
    }

    /// All single-site expectation values of a Hermitian operator.
    pub fn local_profile(&self, op: LocalOp) -> Result<Vec<f64>> {
        let left = self.left_environments();
        let right = self.right_environments();
        let tr = self.checked_trace(left[self.n_sites()][0])?;
        let w = pauli::trace_weights(op);
        Ok((0..self.n_sites())
            .map(|j| {
                let (re, _) = self.site_matrix(j, &w);
                left[j].dot(&re.dot(&right[j + 1])) / tr
            })
            .collect())
    }

    pub fn densities(&self) -> Result<Vec<f64>> {
        self.local_profile(LocalOp::Number)
    }

    /// `Tr(A_j B_k ρ)/Tr ρ` for sites `j ≠ k` or `j == k` (operator product).
    pub fn two_point(&self, a: LocalOp, j: usize, b: LocalOp, k: usize) -> Result<C64> {
        self.check_site(j)?;
        self.check_site(k)?;
        if j == k {
            let (ma, mb) = (a.matrix(), b.matrix());
            let prod: Mat2 = std::array::from_fn(|x| std::array::from_fn(|y| (0..2).map(|z| ma[x][z] * mb[z][y]).sum()));
            return self.expectation_matrix(&prod, j);
        }
        let ((lo, op_lo), (hi, op_hi)) = if j < k { ((j, a), (k, b)) } else { ((k, b), (j, a)) };
        let left = self.left_environments();
        let right = self.right_environments();
        let tr = self.checked_trace(left[self.n_sites()][0])?;
        let (lre, lim) = self.site_matrix(lo, &pauli::trace_weights(op_lo));
        let mut vre = left[lo].dot(&lre);
        let mut vim = left[lo].dot(&lim);
        let sqrt2 = std::f64::consts::SQRT_2;
        for site in lo + 1..hi {
            let t = self.chain.tensors()[site].index_axis(ndarray::Axis(1), 0);
            vre = vre.dot(&t) * sqrt2;
            vim = vim.dot(&t) * sqrt2;
        }
        let (hre, him) = self.site_matrix(hi, &pauli::trace_weights(op_hi));
        let rr = &right[hi + 1];
        let (a_re, a_im) = (hre.dot(rr), him.dot(rr));
        let re = vre.dot(&a_re) - vim.dot(&a_im);
        let im = vre.dot(&a_im) + vim.dot(&a_re);
        Ok(C64::new(re, im) / tr)
    }

    /// `⟨σᶻ_j σᶻ_{j+r}⟩ / (⟨σᶻ_j⟩⟨σᶻ_{j+r}⟩)`.
    pub fn correlation(&self, j: usize, r: usize) -> Result<Correlation> {
        let k = j + r;
        self.check_site(k)?;
        let zz = self.two_point(LocalOp::SigmaZ, j, LocalOp::SigmaZ, k)?.re;
        let zj = self.expectation_local(LocalOp::SigmaZ, j)?;
        let zk = self.expectation_local(LocalOp::SigmaZ, k)?;
        let den = zj * zk;
        let singular = zj.abs() < SINGULAR_DENOMINATOR || zk.abs() < SINGULAR_DENOMINATOR;
        Ok(Correlation { value: if singular { f64::NAN } else { zz / den }, singular })
    }

    /// `(1 + ⟨σᶻ_j⟩ + ⟨σᶻ_k⟩ + ⟨σᶻ_j σᶻ_k⟩) / ((1 + ⟨σᶻ_j⟩)(1 + ⟨σᶻ_k⟩))`.
    pub fn g2(&self, j: usize, k: usize) -> Result<Correlation> {
        let zz = self.two_point(LocalOp::SigmaZ, j, LocalOp::SigmaZ, k)?.re;
        let zj = self.expectation_local(LocalOp::SigmaZ, j)?;
        let zk = self.expectation_local(LocalOp::SigmaZ, k)?;
        let den = (1.0 + zj) * (1.0 + zk);
        let singular = den.abs() < SINGULAR_DENOMINATOR;
        Ok(Correlation { value: if singular { f64::NAN } else { (1.0 + zj + zk + zz) / den }, singular })
    }

    /// Operator-Schmidt values across the bond after site `bond`.
    pub fn schmidt_values(&self, bond: usize) -> Result<Vec<f64>> {
        self.chain.schmidt_values(bond)
    }

    /// `−Σ λ² log₂ λ²` of the Schmidt values across the bond after site
    /// `bond`, normalized so that the largest is 1.
    pub fn operator_entropy(&self, bond: usize) -> Result<f64> {
        Ok(entropy_of_schmidt(&self.schmidt_values(bond)?))
    }

    /// The bond after the central site `⌈N/2⌉`.
    pub fn central_bond(&self) -> Option<usize> {
        let n = self.n_sites();
        (n >= 2).then(|| n.div_ceil(2) - 1)
    }

    pub fn central_site(&self) -> usize {
        self.n_sites().div_ceil(2) - 1
    }

    /// Coefficients of the full operator in the product Pauli basis (site 0
    /// most significant). Intended for small chains.
    pub fn to_coefficients(&self) -> Result<Vec<f64>> {
        let n = self.n_sites();
        if n > 8 {
            return Err(Error::Capacity(format!("dense MPO contraction limited to 8 sites, got {n}")));
        }
        let mut acc = Array2::from_elem((1, 1), 1.0);
        for t in self.chain.tensors() {
            let (l, d, r) = t.dim();
            let rows = acc.nrows();
            let m = acc.dot(&super::chain::to_matrix(t, l, d * r));
            acc = super::chain::to_matrix(&super::chain::to_tensor(&m, (rows, d, r)), rows * d, r);
        }
        Ok(acc.iter().copied().collect())
    }

    /// Dense density matrix, normalized to unit trace. Intended for small
    /// chains.
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let coeffs = self.to_coefficients()?;
        let rho = pauli::operator_from_coefficients(self.n_sites(), &coeffs);
        let tr: C64 = rho.diag().iter().sum();
        Ok(rho / tr)
    }
}

/// Entropy of Schmidt values normalized by the largest one.
pub fn entropy_of_schmidt(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0.0;
    }
    values
        .iter()
        .map(|&v| {
            let p = (v / top).powi(2);
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        })
        .sum()
}
