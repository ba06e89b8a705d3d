//! Small dense linear-algebra helpers shared by the solvers.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Lapack, Scalar};

use crate::C64;

/// 2×2 complex matrix, `m[a][b] = ⟨a|m|b⟩`.
pub type Mat2 = [[C64; 2]; 2];

/// 4×4 complex matrix.
pub type Mat4 = [[C64; 4]; 4];

const TAYLOR_MAX_TERMS: usize = 40;

/// Computes `exp(m)·v` for a small fixed-size matrix to machine precision.
///
/// The exponent is split into substeps with infinity norm ≤ 1/2 and each
/// substep is summed as a Taylor series until the terms stop contributing.
/// Unlike an eigendecomposition this stays accurate at exceptional points of
/// non-Hermitian generators.
pub fn expm_action<const D: usize>(m: &[[C64; D]; D], v: &[C64; D]) -> [C64; D] {
    let norm = m
        .iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let substeps = (norm / 0.5).ceil().max(1.0) as usize;
    let scale = 1.0 / substeps as f64;
    let mut out = *v;
    for _ in 0..substeps {
        let mut term = out;
        let mut acc = out;
        for k in 1..=TAYLOR_MAX_TERMS {
            let mut next = [C64::new(0.0, 0.0); D];
            for (i, slot) in next.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for (j, t) in term.iter().enumerate() {
                    s += m[i][j] * t;
                }
                *slot = s * (scale / k as f64);
            }
            term = next;
            let mut tn = 0.0f64;
            let mut an = 0.0f64;
            for i in 0..D {
                acc[i] += term[i];
                tn = tn.max(term[i].norm());
                an = an.max(acc[i].norm());
            }
            if tn <= 1e-18 * an.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Closed-form exponential of a 2×2 matrix.
///
/// Writing `m = μ·1 + K` with `K` traceless gives `K² = q·1` and
/// `exp(m) = e^μ [cosh(√q) 1 + sinh(√q)/√q K]`. Both series are even in
/// `√q`, so the result is regular at `q = 0`, where `K` may be a nonzero
/// nilpotent matrix.
pub fn expm2(m: &Mat2) -> Mat2 {
    let mu = (m[0][0] + m[1][1]) * 0.5;
    let (k, [ch, shc]) = traceless_exp_coefficients(m);
    let e = mu.exp();
    [
        [e * (ch + shc * k[0][0]), e * shc * k[0][1]],
        [e * shc * k[1][0], e * (ch + shc * k[1][1])],
    ]
}

/// `exp(m)·v` up to the scalar factor `e^{Tr m/2}`.
pub fn expm2_action_traceless(m: &Mat2, v: &[C64; 2]) -> [C64; 2] {
    let (k, [ch, shc]) = traceless_exp_coefficients(m);
    [
        ch * v[0] + shc * (k[0][0] * v[0] + k[0][1] * v[1]),
        ch * v[1] + shc * (k[1][0] * v[0] + k[1][1] * v[1]),
    ]
}

/// `1/((2n)(2n−1))` and `1/((2n)(2n+1))` for `n = 1..=7`.
const COSH_RATIOS: [f64; 7] = [
    1.0 / 2.0,
    1.0 / 12.0,
    1.0 / 30.0,
    1.0 / 56.0,
    1.0 / 90.0,
    1.0 / 132.0,
    1.0 / 182.0,
];
const SINHC_RATIOS: [f64; 7] = [
    1.0 / 6.0,
    1.0 / 20.0,
    1.0 / 42.0,
    1.0 / 72.0,
    1.0 / 110.0,
    1.0 / 156.0,
    1.0 / 210.0,
];

/// Traceless part `K` of `m` with `cosh(√q)` and `sinh(√q)/√q`, `K² = q·1`.
fn traceless_exp_coefficients(m: &Mat2) -> (Mat2, [C64; 2]) {
    let half = (m[0][0] - m[1][1]) * 0.5;
    let k = [[half, m[0][1]], [m[1][0], -half]];
    let q = half * half + m[0][1] * m[1][0];
    let q2 = q.norm_sqr();
    let (ch, shc) = if q2 < 1e-4 {
        // cosh(√q) = Σ qⁿ/(2n)!, sinh(√q)/√q = Σ qⁿ/(2n+1)!, truncated far
        // below machine precision for |q| < 1e-2.
        let terms = if q2 < 1e-8 { 4 } else { 7 };
        let mut ch = C64::new(1.0, 0.0);
        let mut shc = C64::new(1.0, 0.0);
        for n in (0..terms).rev() {
            ch = 1.0 + ch * q * COSH_RATIOS[n];
            shc = 1.0 + shc * q * SINHC_RATIOS[n];
        }
        (ch, shc)
    } else {
        let s = q.sqrt();
        (s.cosh(), s.sinh() / s)
    };
    (k, [ch, shc])
}

/// Matrix exponential of a dense square matrix by scaling and squaring with
/// a Taylor kernel summed to machine precision.
pub fn expm<A>(a: &Array2<A>) -> Array2<A>
where
    A: Scalar + Lapack,
{
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = A::from_real(A::real(2f64.powi(-squarings)));
    let b = a.mapv(|x| x * scale);

    let mut acc = Array2::<A>::eye(n);
    let mut term = Array2::<A>::eye(n);
    for k in 1..=TAYLOR_MAX_TERMS {
        term = term.dot(&b);
        let inv_k = A::from_real(A::real(1.0 / k as f64));
        term.mapv_inplace(|x| x * inv_k);
        acc += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&acc) {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc.dot(&acc);
    }
    acc
}

/// Computes `exp(a)·v` without forming the exponential.
pub fn expm_action_dense(a: &Array2<C64>, v: &Array1<C64>) -> Array1<C64> {
    let norm = one_norm(a);
    let substeps = (norm / 0.5).ceil().max(1.0) as usize;
    let scale = 1.0 / substeps as f64;
    let mut out = v.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=TAYLOR_MAX_TERMS {
            term = a.dot(&term) * C64::new(scale / k as f64, 0.0);
            acc += &term;
            let tn = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let an = acc.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if tn <= 1e-18 * an.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Maximum absolute column sum.
pub fn one_norm<A: Scalar>(a: &Array2<A>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| A::from_real(x.abs()).to_f64().unwrap_or(f64::INFINITY)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Kronecker product `a ⊗ b`.
pub fn kron<A: Scalar>(a: &Array2<A>, b: &Array2<A>) -> Array2<A> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<A>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == A::zero() {
                continue;
            }
            let mut blk = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            blk.zip_mut_with(b, |o, &x| *o = s * x);
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Converts a fixed-size 2×2 matrix to an ndarray.
pub fn mat2_to_array(m: &Mat2) -> Array2<C64> {
    Array2::from_shape_fn((2, 2), |(a, b)| m[a][b])
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 2.7;
        let a = ndarray::array![[0.0, -theta], [theta, 0.0]];
        let e = expm(&a);
        assert_abs_diff_eq!(e[[0, 0]], theta.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 0]], theta.sin(), epsilon = 1e-14);
    }

    #[test]
    fn expm_action_matches_dense_expm() {
        let m: Mat4 = std::array::from_fn(|i| {
            std::array::from_fn(|j| C64::new((i as f64 - j as f64) * 0.7, (i * j) as f64 * 0.3 - 0.4))
        });
        let v = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-0.5, 0.2), C64::new(0.3, 0.0)];
        let got = expm_action(&m, &v);
        let dense = expm(&Array2::from_shape_fn((4, 4), |(i, j)| m[i][j]));
        for i in 0..4 {
            let want: C64 = (0..4).map(|j| dense[[i, j]] * v[j]).sum();
            assert!((got[i] - want).norm() < 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn expm_handles_defective_matrix() {
        // Jordan block: exp([[a,1],[0,a]]) = e^a [[1,1],[0,1]].
        let a = 0.3;
        let m: Mat2 = [[C64::new(a, 0.0), C64::new(1.0, 0.0)], [C64::new(0.0, 0.0), C64::new(a, 0.0)]];
        let out = expm_action(&m, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert_abs_diff_eq!(out[0].re, a.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(out[1].re, a.exp(), epsilon = 1e-14);
    }

    #[test]
    fn closed_form_2x2_matches_series() {
        let cases: [Mat2; 4] = [
            [[C64::new(0.1, -0.3), C64::new(0.7, 0.2)], [C64::new(-0.4, 0.5), C64::new(-0.2, 0.9)]],
            // Nilpotent part at an exceptional point.
            [[C64::new(0.0, 0.5), C64::new(0.5, 0.0)], [C64::new(0.5, 0.0), C64::new(0.0, -0.5)]],
            [[C64::new(1e-4, 0.0), C64::new(2e-4, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]],
            [[C64::new(0.0, -0.006), C64::new(0.0, 0.08)], [C64::new(0.0, 0.05), C64::new(0.002, 0.0)]],
        ];
        for m in cases {
            let got = expm2(&m);
            let want = expm(&mat2_to_array(&m));
            for a in 0..2 {
                for b in 0..2 {
                    assert!((got[a][b] - want[[a, b]]).norm() < 1e-14, "{m:?}");
                }
            }
        }
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let b = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], 1.0);
        assert_eq!(k[[3, 2]], 4.0);
        assert_eq!(k[[2, 3]], 4.0);
    }
}
