//! Open-boundary matrix-product chain in mixed canonical form, shared by the
//! vectorized density operator (real, local dimension 4) and the trajectory
//! wave function (complex, local dimension 2).

use ndarray::{s, Array1, Array2, Array3, Axis};
use ndarray_linalg::{JobSvd, Lapack, Scalar, QR, SVD, SVDDC};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bond-dimension cap and relative singular-value floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationPolicy {
    pub chi_max: usize,
    /// Singular values with `s/s_max` below this are dropped.
    pub sv_cutoff: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { chi_max: 64, sv_cutoff: 1e-10 }
    }
}

impl TruncationPolicy {
    pub fn new(chi_max: usize, sv_cutoff: f64) -> Result<Self> {
        let p = Self { chi_max, sv_cutoff };
        p.validate()?;
        Ok(p)
    }

    pub fn with_chi(chi_max: usize) -> Self {
        Self { chi_max, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(invalid("chi_max must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.sv_cutoff) {
            return Err(invalid(format!("sv_cutoff must lie in [0, 1), got {}", self.sv_cutoff)));
        }
        Ok(())
    }
}

/// Sites `0..N` with tensors `(χ_left, d, χ_right)`. Tensors left of
/// `center` are left isometries, tensors right of it right isometries.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<A> {
    pub(crate) tensors: Vec<Array3<A>>,
    pub(crate) center: usize,
}

pub(crate) fn to_matrix<A: Clone>(t: &Array3<A>, rows: usize, cols: usize) -> Array2<A> {
    Array2::from_shape_vec((rows, cols), t.iter().cloned().collect()).expect("tensor reshape")
}

pub(crate) fn to_tensor<A: Clone>(m: &Array2<A>, shape: (usize, usize, usize)) -> Array3<A> {
    Array3::from_shape_vec(shape, m.iter().cloned().collect()).expect("matrix reshape")
}

/// Truncated SVD: `(U, s, Vᵀ, discarded fraction of Σ s²)`.
pub(crate) fn truncated_svd<A>(
    m: &Array2<A>,
    policy: &TruncationPolicy,
) -> Result<(Array2<A>, Array1<f64>, Array2<A>, f64)>
where
    A: Scalar<Real = f64> + Lapack,
{
    let (u, s, vt) = match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        _ => {
            let (u, s, vt) = m.svd(true, true)?;
            let (u, vt) = (u.expect("left vectors requested"), vt.expect("right vectors requested"));
            let k = s.len();
            (u.slice(s![.., ..k]).to_owned(), s, vt.slice(s![..k, ..]).to_owned())
        }
    };
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite singular values".into()));
    }
    let total: f64 = s.iter().map(|x| x * x).sum();
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = s
        .iter()
        .take(policy.chi_max)
        .take_while(|&&x| x > 0.0 && x > policy.sv_cutoff * smax)
        .count()
        .max(1);
    let kept: f64 = s.iter().take(keep).map(|x| x * x).sum();
    let discarded = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };
    Ok((
        u.slice(s![.., ..keep]).to_owned(),
        s.slice(s![..keep]).to_owned(),
        vt.slice(s![..keep, ..]).to_owned(),
        discarded,
    ))
}

impl<A> Chain<A>
where
    A: Scalar<Real = f64> + Lapack,
{
    /// Chain from arbitrary tensors, brought into canonical form at `center`.
    pub(crate) fn from_tensors(tensors: Vec<Array3<A>>, center: usize) -> Result<Self> {
        let n = tensors.len();
        let mut c = Self { tensors, center: 0 };
        c.check_shapes()?;
        c.canonicalize(center.min(n - 1))?;
        Ok(c)
    }

    /// Takes tensors that are already canonical at `center`, falling back to
    /// a fresh canonicalization when the isometry conditions fail.
    pub(crate) fn from_canonical(tensors: Vec<Array3<A>>, center: usize) -> Result<Self> {
        let mut c = Self::from_parts_unchecked(tensors, center)?;
        if c.isometry_error() > 1e-10 {
            c.canonicalize(center)?;
        }
        Ok(c)
    }

    fn from_parts_unchecked(tensors: Vec<Array3<A>>, center: usize) -> Result<Self> {
        if center >= tensors.len() {
            return Err(invalid("orthogonality center out of range"));
        }
        let c = Self { tensors, center };
        c.check_shapes()?;
        Ok(c)
    }

    fn check_shapes(&self) -> Result<()> {
        let t = &self.tensors;
        if t.is_empty() {
            return Err(invalid("chain needs at least one site"));
        }
        for w in t.windows(2) {
            if w[0].dim().2 != w[1].dim().0 {
                return Err(invalid("bond dimensions of neighbouring tensors differ"));
            }
        }
        if t[0].dim().0 != 1 || t[t.len() - 1].dim().2 != 1 {
            return Err(invalid("boundary bonds must have dimension 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn local_dim(&self) -> usize {
        self.tensors[0].dim().1
    }

    /// Dimensions of the `N − 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn tensors(&self) -> &[Array3<A>] {
        &self.tensors
    }

    /// Full left-to-right then right-to-left orthogonalization.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.center = 0;
        for j in 0..self.len() - 1 {
            self.shift_right(j)?;
        }
        self.center = self.len() - 1;
        self.move_center(center)
    }

    pub fn move_center(&mut self, target: usize) -> Result<()> {
        while self.center < target {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > target {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    fn shift_right(&mut self, j: usize) -> Result<()> {
        let (l, d, r) = self.tensors[j].dim();
        let m = to_matrix(&self.tensors[j], l * d, r);
        let (q, rr) = m.qr()?;
        let k = q.ncols();
        self.tensors[j] = to_tensor(&q, (l, d, k));
        let (_, d2, r2) = self.tensors[j + 1].dim();
        let next = rr.dot(&to_matrix(&self.tensors[j + 1], r, d2 * r2));
        self.tensors[j + 1] = to_tensor(&next, (k, d2, r2));
        Ok(())
    }

    fn shift_left(&mut self, j: usize) -> Result<()> {
        let (l, d, r) = self.tensors[j].dim();
        let mt = to_matrix(&self.tensors[j], l, d * r).t().to_owned();
        let (q, rr) = mt.qr()?;
        let k = q.ncols();
        self.tensors[j] = to_tensor(&q.t().to_owned(), (k, d, r));
        let (l0, d0, _) = self.tensors[j - 1].dim();
        let prev = to_matrix(&self.tensors[j - 1], l0 * d0, l).dot(&rr.t());
        self.tensors[j - 1] = to_tensor(&prev, (l0, d0, k));
        Ok(())
    }

    /// Frobenius norm of the represented vector (the norm of the center).
    pub fn norm(&self) -> f64 {
        self.tensors[self.center].iter().map(|x| x.abs() * x.abs()).sum::<f64>().sqrt()
    }

    pub(crate) fn scale_center(&mut self, factor: A) {
        self.tensors[self.center].mapv_inplace(|x| x * factor);
    }

    /// Largest deviation from the left/right isometry conditions.
    pub fn isometry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, t) in self.tensors.iter().enumerate() {
            let (l, d, r) = t.dim();
            let gram = if j < self.center {
                let m = to_matrix(t, l * d, r);
                m.t().mapv(|x| x.conj()).dot(&m)
            } else if j > self.center {
                let m = to_matrix(t, l, d * r);
                m.dot(&m.t().mapv(|x| x.conj()))
            } else {
                continue;
            };
            for ((a, b), x) in gram.indexed_iter() {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((*x - A::from_real(want)).abs());
            }
        }
        worst
    }

    /// Applies a local operator `g` (`d × d`) to one site.
    pub(crate) fn apply_one_site(&mut self, site: usize, g: &Array2<A>) {
        let t = &self.tensors[site];
        let mut out = Array3::<A>::zeros(t.dim());
        for (lidx, slab) in t.axis_iter(Axis(0)).enumerate() {
            out.index_axis_mut(Axis(0), lidx).assign(&g.dot(&slab));
        }
        self.tensors[site] = out;
    }

    /// Applies `g` (`d² × d²`, row index `s₁·d + s₂`) to sites `(j, j+1)`
    /// and splits with truncation. The center must be at `j` or `j + 1` and
    /// ends at `j + 1` when `rightward`, else at `j`. Returns the discarded
    /// fraction of the squared singular values.
    pub(crate) fn apply_two_site(
        &mut self,
        j: usize,
        g: &Array2<A>,
        policy: &TruncationPolicy,
        rightward: bool,
    ) -> Result<f64> {
        debug_assert!(self.center == j || self.center == j + 1);
        let (l, d, m) = self.tensors[j].dim();
        let (_, _, r) = self.tensors[j + 1].dim();
        let theta = to_matrix(&self.tensors[j], l * d, m).dot(&to_matrix(&self.tensors[j + 1], m, d * r));
        let theta = to_tensor(&theta, (l, d * d, r));
        let mut gated = Array3::<A>::zeros((l, d * d, r));
        for (lidx, slab) in theta.axis_iter(Axis(0)).enumerate() {
            gated.index_axis_mut(Axis(0), lidx).assign(&g.dot(&slab));
        }
        let gated = to_matrix(&gated, l * d, d * r);
        let (mut u, s, mut vt, discarded) = truncated_svd(&gated, policy)?;
        let k = s.len();
        if rightward {
            for (mut row, &sv) in vt.axis_iter_mut(Axis(0)).zip(s.iter()) {
                row.mapv_inplace(|x| x * A::from_real(sv));
            }
            self.center = j + 1;
        } else {
            for (mut col, &sv) in u.axis_iter_mut(Axis(1)).zip(s.iter()) {
                col.mapv_inplace(|x| x * A::from_real(sv));
            }
            self.center = j;
        }
        self.tensors[j] = to_tensor(&u, (l, d, k));
        self.tensors[j + 1] = to_tensor(&vt, (k, d, r));
        Ok(discarded)
    }

    /// Singular values across the bond after site `bond`, descending.
    pub fn schmidt_values(&self, bond: usize) -> Result<Vec<f64>> {
        if bond + 1 >= self.len() {
            return Err(invalid(format!("bond {bond} out of range for {} sites", self.len())));
        }
        let mut c = self.clone();
        c.move_center(bond)?;
        let (l, d, r) = c.tensors[bond].dim();
        let m = to_matrix(&c.tensors[bond], l * d, r);
        let (_, s, _) = m.svd(false, false)?;
        Ok(s.to_vec())
    }
}
