//! Normalized Pauli operator basis `{1, X, Y, Z}/√2`.
//!
//! The basis is orthonormal under `⟨A, B⟩ = Tr(A†B)`, so a Hermitian density
//! operator has real coefficients and a Hermiticity-preserving superoperator
//! has a real matrix.

use ndarray::Array2;

use crate::dense::site_operator;
use crate::linalg::Mat2;
use crate::lattice::LocalOp;
use crate::C64;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Basis element `a` as a 2×2 matrix; `Z = 2n − 1`.
pub fn basis(a: usize) -> Mat2 {
    let o = C64::new(0.0, 0.0);
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    match a {
        0 => [[r, o], [o, r]],
        1 => [[o, r], [r, o]],
        2 => [[o, -i], [i, o]],
        3 => [[-r, o], [o, r]],
        _ => panic!("Pauli index {a} out of range"),
    }
}

/// `Tr(P_a m)` for each basis element.
pub fn coefficients(m: &Mat2) -> [C64; 4] {
    std::array::from_fn(|a| {
        let p = basis(a);
        let mut s = C64::new(0.0, 0.0);
        for x in 0..2 {
            for y in 0..2 {
                s += p[x][y] * m[y][x];
            }
        }
        s
    })
}

/// Real coefficients of a Hermitian 2×2 matrix.
pub fn real_coefficients(m: &Mat2) -> [f64; 4] {
    coefficients(m).map(|c| c.re)
}

pub fn from_coefficients(c: &[f64; 4]) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (a, &ca) in c.iter().enumerate() {
        let p = basis(a);
        for x in 0..2 {
            for y in 0..2 {
                out[x][y] += p[x][y] * ca;
            }
        }
    }
    out
}

/// Functional `c ↦ Tr(O·Σ c_a P_a)` for a local operator.
pub fn trace_weights(op: LocalOp) -> [C64; 4] {
    coefficients(&op.matrix())
}

/// Trace functional `(√2, 0, 0, 0)`.
pub fn trace_vector() -> [f64; 4] {
    [std::f64::consts::SQRT_2, 0.0, 0.0, 0.0]
}

/// Matrix of a superoperator on `n` sites in the product Pauli basis, with
/// site 0 the most significant index: `M[a][b] = Tr(P_a f(P_b))`.
///
/// Panics if the result has an imaginary part above `1e-12`, which would mean
/// `f` does not preserve Hermiticity.
pub fn superoperator(n: usize, f: impl Fn(&Array2<C64>) -> Array2<C64>) -> Array2<f64> {
    let dim = 4usize.pow(n as u32);
    let products: Vec<Array2<C64>> = (0..dim).map(|idx| product_basis(n, idx)).collect();
    let mut out = Array2::<f64>::zeros((dim, dim));
    for (b, pb) in products.iter().enumerate() {
        let img = f(pb);
        for (a, pa) in products.iter().enumerate() {
            // Basis elements are Hermitian: Tr(P_a† X) = Σ conj(P_a) ∘ X.
            let v: C64 = pa.iter().zip(img.iter()).map(|(p, x)| p.conj() * x).sum();
            assert!(v.im.abs() < 1e-12, "superoperator is not Hermiticity preserving");
            out[[a, b]] = v.re;
        }
    }
    out
}

fn product_basis(n: usize, idx: usize) -> Array2<C64> {
    let mut m = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for s in 0..n {
        let a = (idx >> (2 * (n - 1 - s))) & 3;
        m = crate::linalg::kron(&m, &crate::linalg::mat2_to_array(&basis(a)));
    }
    m
}

/// Full-register operator from Pauli coefficients (`n` sites, site 0 most
/// significant).
pub fn operator_from_coefficients(n: usize, coeffs: &[f64]) -> Array2<C64> {
    let d = 1usize << n;
    let mut out = Array2::<C64>::zeros((d, d));
    for (idx, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            out = out + product_basis(n, idx) * C64::new(c, 0.0);
        }
    }
    out
}

/// Single-site operator `op` at `site` of an `n`-site register.
pub fn embed(op: LocalOp, site: usize, n: usize) -> Array2<C64> {
    site_operator(&op.matrix(), site, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_hermitian() {
        for a in 0..4 {
            let pa = basis(a);
            for b in 0..4 {
                let pb = basis(b);
                let mut ip = C64::new(0.0, 0.0);
                for x in 0..2 {
                    for y in 0..2 {
                        ip += pa[y][x].conj() * pb[y][x];
                    }
                }
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).norm() < 1e-15);
            }
            assert!((pa[0][1] - pa[1][0].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_and_number_weights() {
        let m = [[C64::new(0.7, 0.0), C64::new(0.1, -0.2)], [C64::new(0.1, 0.2), C64::new(0.3, 0.0)]];
        let back = from_coefficients(&real_coefficients(&m));
        for x in 0..2 {
            for y in 0..2 {
                assert!((back[x][y] - m[x][y]).norm() < 1e-15);
            }
        }
        let w = trace_weights(LocalOp::Number);
        assert!((w[0].re - FRAC_1_SQRT_2).abs() < 1e-15 && (w[3].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(w[1].norm() < 1e-15 && w[2].norm() < 1e-15);
    }
}
