//! Kronecker-family products.
//!
//! All products index the first factor slowest: for `kron`, row
//! `i1 * n2 + i2` and column `j1 * d2 + j2` hold `A[i1, j1] * B[i2, j2]`.
//! The same convention drives [`Matrix::vec`] and [`Tensor3::tensorize`],
//! which is what makes the mixed-product identities below hold verbatim.
//! The alternative "first index fastest" layout is a fixed row/column
//! permutation of this one.

use crate::error::{validation, Result};
use crate::matrix::{Matrix, Tensor3};

/// Kronecker product `A ⊗ B`, shape `(n1*n2) x (d1*d2)`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n1, d1) = a.shape();
    let (n2, d2) = b.shape();
    Matrix::from_row_fn(n1 * n2, d1 * d2, |r, out| {
        let (i1, i2) = (r / n2, r % n2);
        let ar = a.row(i1);
        let br = b.row(i2);
        for (j1, &x) in ar.iter().enumerate() {
            for (j2, &y) in br.iter().enumerate() {
                out[j1 * d2 + j2] = x * y;
            }
        }
    })
}

/// Column-wise Kronecker (Khatri-Rao) product `A ⊘ B`, shape `(n1*n2) x d`.
pub fn col_kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return validation(format!(
            "column-wise Kronecker needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        ));
    }
    let n2 = b.rows();
    Ok(Matrix::from_row_fn(a.rows() * n2, a.cols(), |r, out| {
        let ar = a.row(r / n2);
        let br = b.row(r % n2);
        for ((o, &x), &y) in out.iter_mut().zip(ar).zip(br) {
            *o = x * y;
        }
    }))
}

/// Row-wise Kronecker (face-splitting) product `A ⊖ B`, shape `n x (d1*d2)`.
pub fn row_kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return validation(format!(
            "row-wise Kronecker needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        ));
    }
    let d2 = b.cols();
    Ok(Matrix::from_row_fn(a.rows(), a.cols() * d2, |i, out| {
        let br = b.row(i);
        for (j1, &x) in a.row(i).iter().enumerate() {
            for (o, &y) in out[j1 * d2..(j1 + 1) * d2].iter_mut().zip(br) {
                *o = x * y;
            }
        }
    }))
}

/// `(A1 ⊘ A2)ᵀ (B1 ⊘ B2)` computed as `(A1ᵀB1) ∘ (A2ᵀB2)`.
///
/// Never forms the `n1*n2`-row operands; cost is two `d1 x max(n1, n2) x d2`
/// products and one entrywise product.
pub fn gram_col_kron(a1: &Matrix, a2: &Matrix, b1: &Matrix, b2: &Matrix) -> Result<Matrix> {
    if a1.cols() != a2.cols() || b1.cols() != b2.cols() {
        return validation(format!(
            "gram_col_kron column mismatch: A1 {:?}, A2 {:?}, B1 {:?}, B2 {:?}",
            a1.shape(),
            a2.shape(),
            b1.shape(),
            b2.shape()
        ));
    }
    if a1.rows() != b1.rows() || a2.rows() != b2.rows() {
        return validation(format!(
            "gram_col_kron row mismatch: A1 {:?}, A2 {:?}, B1 {:?}, B2 {:?}",
            a1.shape(),
            a2.shape(),
            b1.shape(),
            b2.shape()
        ));
    }
    let c1 = a1.t_matmul(b1)?;
    let c2 = a2.t_matmul(b2)?;
    c1.hadamard(&c2)
}

/// `U (V ⊘ W)ᵀ`: entry `[i, j*n3 + l] = Σ_a U[i,a] V[j,a] W[l,a]`.
///
/// This is the matricization of the rank-`k` tensor `U ⊙ V ⊙ W`.
pub fn odot3_matricized(u: &Matrix, v: &Matrix, w: &Matrix) -> Result<Matrix> {
    let k = u.cols();
    if v.cols() != k || w.cols() != k {
        return validation(format!(
            "odot3 needs equal column counts, got {}, {}, {}",
            k,
            v.cols(),
            w.cols()
        ));
    }
    let (n2, n3) = (v.rows(), w.rows());
    Ok(Matrix::from_row_fn(u.rows(), n2 * n3, |i, out| {
        let ur = u.row(i);
        let mut uv = vec![0.0; k];
        for j in 0..n2 {
            for ((t, &x), &y) in uv.iter_mut().zip(ur).zip(v.row(j)) {
                *t = x * y;
            }
            let dst = &mut out[j * n3..(j + 1) * n3];
            for (l, o) in dst.iter_mut().enumerate() {
                *o = uv.iter().zip(w.row(l)).map(|(&x, &y)| x * y).sum();
            }
        }
    }))
}

/// The tensor `U ⊙ V ⊙ W`.
pub fn odot3(u: &Matrix, v: &Matrix, w: &Matrix) -> Result<Tensor3> {
    let m = odot3_matricized(u, v, w)?;
    Tensor3::tensorize(&m, v.rows(), w.rows())
}

/// Third-mode product `X(A1, A2, A3)[i,j,l] = Σ_{a,b,c} X[a,b,c] A1[i,a] A2[j,b] A3[l,c]`.
///
/// Dense `O(n³ d³)` evaluation, for oracles only: `n` must not exceed `cap`.
pub fn third_mode_product(
    x: &Tensor3,
    a1: &Matrix,
    a2: &Matrix,
    a3: &Matrix,
    cap: usize,
) -> Result<Tensor3> {
    let (d1, d2, d3) = x.dims();
    if a1.cols() != d1 || a2.cols() != d2 || a3.cols() != d3 {
        return validation(format!(
            "third-mode product: tensor {:?} incompatible with factors {:?}, {:?}, {:?}",
            x.dims(),
            a1.shape(),
            a2.shape(),
            a3.shape()
        ));
    }
    let (n1, n2, n3) = (a1.rows(), a2.rows(), a3.rows());
    let n = n1.max(n2).max(n3);
    if n > cap {
        return validation(format!(
            "third-mode product is oracle-only: n = {n} exceeds the oracle cap {cap}"
        ));
    }
    let mut out = Tensor3::zeros(n1, n2, n3);
    for i in 0..n1 {
        for j in 0..n2 {
            for l in 0..n3 {
                let mut s = 0.0;
                for a in 0..d1 {
                    for b in 0..d2 {
                        for c in 0..d3 {
                            s += x.get(a, b, c) * a1.get(i, a) * a2.get(j, b) * a3.get(l, c);
                        }
                    }
                }
                out.set(i, j, l, s);
            }
        }
    }
    Ok(out)
}
