//! Exact dense engine.
//!
//! Materializes the `n x n²` attention matrix `F`, the residual
//! `Vres = F H - E`, `W = Vres Hᵀ` and `P = F ∘ W - diag(⟨F_j, W_j⟩) F`,
//! then forms the gradient `(1/d) A1ᵀ P (A2 ⊗ A3)`. Cost is cubic in `n`;
//! this engine is the reference the low-rank engine is checked against.
//!
//! Softmax arguments carry the `1/d` normalization, so the gradient carries
//! one more global `1/d` from the chain rule.

use crate::error::{numerical, validation, Result};
use crate::instance::AttnInstance;
use crate::kron::kron;
use crate::limits::Limits;
use crate::matrix::Matrix;

/// Largest softmax argument accepted before `exp` is considered overflowing.
pub const MAX_EXP_ARG: f64 = 700.0;

/// Dense intermediates of one exact evaluation.
#[derive(Clone, Debug)]
pub struct ExactIntermediates {
    /// Row-normalized attention, `n x n²`.
    pub f: Matrix,
    /// `H = (A4 ⊗ A5) Y`, `n² x d`.
    pub h: Matrix,
    /// Residual `F H - E`, `n x d`.
    pub vres: Matrix,
    /// `Vres Hᵀ`, `n x n²`.
    pub w: Matrix,
    /// Row `j` is `(diag(F_j) - F_j F_jᵀ) W_j`, `n x n²`.
    pub p: Matrix,
    /// Softmax row normalizers `Σ_k exp(arg_{j,k})`.
    pub d_diag: Vec<f64>,
}

impl ExactIntermediates {
    /// `Pa = F ∘ W`.
    pub fn pa(&self) -> Matrix {
        self.f.hadamard(&self.w).expect("same shape")
    }

    /// Per-row inner products `R_j = ⟨F_j, W_j⟩`.
    pub fn r(&self) -> Vec<f64> {
        (0..self.f.rows())
            .map(|j| dot(self.f.row(j), self.w.row(j)))
            .collect()
    }

    /// `Pb`, row `j` equal to `F_j F_jᵀ W_j = R_j F_j`.
    pub fn pb(&self) -> Matrix {
        self.f.scale_rows(&self.r()).expect("row count")
    }
}

fn check_cap(inst: &AttnInstance, limits: &Limits) -> Result<()> {
    inst.validate()?;
    if inst.n > limits.exact_cap {
        return validation(format!(
            "n = {} exceeds the exact-engine cap {} (override with TAT_EXACT_CAP)",
            inst.n, limits.exact_cap
        ));
    }
    Ok(())
}

fn check_x(inst: &AttnInstance, x: &Matrix) -> Result<()> {
    let d = inst.d;
    if x.shape() != (d, d * d) {
        return validation(format!(
            "weight matrix X must be {}x{}, got {:?}",
            d,
            d * d,
            x.shape()
        ));
    }
    Ok(())
}

/// Softmax arguments `A1 X (A2 ⊗ A3)ᵀ / d`, `n x n²`.
pub fn attention_logits(inst: &AttnInstance, x: &Matrix, limits: &Limits) -> Result<Matrix> {
    check_cap(inst, limits)?;
    check_x(inst, x)?;
    let ax = inst.a1.matmul(x)?;
    let keys = kron(&inst.a2, &inst.a3);
    let inv_d = 1.0 / inst.d as f64;
    let n2 = inst.n * inst.n;
    let logits = Matrix::from_row_fn(inst.n, n2, |j, out| {
        let q = ax.row(j);
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(q, keys.row(k)) * inv_d;
        }
    });
    let (mut worst, mut at) = (f64::NEG_INFINITY, (0, 0));
    for j in 0..inst.n {
        for (k, &v) in logits.row(j).iter().enumerate() {
            if v > worst {
                worst = v;
                at = (j, k);
            }
        }
    }
    if worst > MAX_EXP_ARG {
        return numerical(format!(
            "softmax argument {worst:.3e} at ({}, {}) exceeds the exp bound {MAX_EXP_ARG}",
            at.0, at.1
        ));
    }
    Ok(logits)
}

/// Row-normalized attention `F = D⁻¹ exp(A1 X (A2 ⊗ A3)ᵀ / d)` and its normalizers.
pub fn attention_matrix(
    inst: &AttnInstance,
    x: &Matrix,
    limits: &Limits,
) -> Result<(Matrix, Vec<f64>)> {
    let mut f = attention_logits(inst, x, limits)?;
    let cols = f.cols();
    let mut d_diag = Vec::with_capacity(inst.n);
    for row in f.data_mut().chunks_mut(cols) {
        row.iter_mut().for_each(|v| *v = v.exp());
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        d_diag.push(s);
    }
    Ok((f, d_diag))
}

/// `H = (A4 ⊗ A5)(Y1 ⊘ Y2)`, `n² x d`.
pub fn value_matrix(inst: &AttnInstance) -> Matrix {
    kron(&inst.a4, &inst.a5)
        .matmul(&inst.y())
        .expect("validated shapes")
}

/// Attention output `F H` for the instance's own weights.
pub fn forward(inst: &AttnInstance, limits: &Limits) -> Result<Matrix> {
    forward_at(inst, &inst.x(), limits)
}

/// Attention output `F H` for an arbitrary composite weight `X`.
pub fn forward_at(inst: &AttnInstance, x: &Matrix, limits: &Limits) -> Result<Matrix> {
    let (f, _) = attention_matrix(inst, x, limits)?;
    f.matmul(&value_matrix(inst))
}

/// `0.5 ‖F H - E‖_F²`.
pub fn loss(inst: &AttnInstance, limits: &Limits) -> Result<f64> {
    loss_at(inst, &inst.x(), limits)
}

pub fn loss_at(inst: &AttnInstance, x: &Matrix, limits: &Limits) -> Result<f64> {
    let out = forward_at(inst, x, limits)?;
    Ok(0.5 * out.sub(&inst.e)?.frobenius_sq())
}

pub fn compute_intermediates(inst: &AttnInstance, limits: &Limits) -> Result<ExactIntermediates> {
    intermediates_at(inst, &inst.x(), limits)
}

pub fn intermediates_at(
    inst: &AttnInstance,
    x: &Matrix,
    limits: &Limits,
) -> Result<ExactIntermediates> {
    let (f, d_diag) = attention_matrix(inst, x, limits)?;
    let h = value_matrix(inst);
    let vres = f.matmul(&h)?.sub(&inst.e)?;
    let n2 = h.rows();
    let w = Matrix::from_row_fn(inst.n, n2, |j, out| {
        let v = vres.row(j);
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(v, h.row(k));
        }
    });
    let p = Matrix::from_row_fn(inst.n, n2, |j, out| {
        let fr = f.row(j);
        let wr = w.row(j);
        let r = dot(fr, wr);
        for ((o, &fk), &wk) in out.iter_mut().zip(fr).zip(wr) {
            *o = fk * wk - fk * r;
        }
    });
    Ok(ExactIntermediates {
        f,
        h,
        vres,
        w,
        p,
        d_diag,
    })
}

/// Closed-form gradient `dLoss/dX = (1/d) A1ᵀ P (A2 ⊗ A3)`, shape `d x d²`.
pub fn grad_exact(inst: &AttnInstance, limits: &Limits) -> Result<Matrix> {
    grad_exact_at(inst, &inst.x(), limits)
}

pub fn grad_exact_at(inst: &AttnInstance, x: &Matrix, limits: &Limits) -> Result<Matrix> {
    let it = intermediates_at(inst, x, limits)?;
    grad_from_p(inst, &it.p)
}

/// `(1/d) A1ᵀ P (A2 ⊗ A3)` for a given dense `P`.
pub fn grad_from_p(inst: &AttnInstance, p: &Matrix) -> Result<Matrix> {
    let left = inst.a1.t_matmul(p)?;
    Ok(left
        .matmul(&kron(&inst.a2, &inst.a3))?
        .scale(1.0 / inst.d as f64))
}

/// Central finite differences of the loss over every entry of `X`.
pub fn grad_fd(inst: &AttnInstance, step: f64, limits: &Limits) -> Result<Matrix> {
    if !(step.is_finite() && step > 0.0) {
        return validation(format!(
            "finite-difference step must be positive, got {step}"
        ));
    }
    if inst.n > limits.fd_max_n || inst.d > limits.fd_max_d {
        return validation(format!(
            "finite differences limited to n <= {} and d <= {}, got n = {}, d = {}",
            limits.fd_max_n, limits.fd_max_d, inst.n, inst.d
        ));
    }
    let x = inst.x();
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for a in 0..x.rows() {
        for bc in 0..x.cols() {
            let mut plus = x.clone();
            plus.set(a, bc, x.get(a, bc) + step);
            let mut minus = x.clone();
            minus.set(a, bc, x.get(a, bc) - step);
            let diff = loss_at(inst, &plus, limits)? - loss_at(inst, &minus, limits)?;
            g.set(a, bc, diff / (2.0 * step));
        }
    }
    Ok(g)
}

/// Analytic derivative of attention row `F_j` with respect to `X[a, b*d + c]`:
/// `s ∘ F_j - ⟨s, F_j⟩ F_j` with `s[(l1, l2)] = A1[j,a] A2[l1,b] A3[l2,c] / d`.
pub fn attention_row_derivative(
    inst: &AttnInstance,
    x: &Matrix,
    row: usize,
    coord: (usize, usize, usize),
    limits: &Limits,
) -> Result<Vec<f64>> {
    let (a, b, c) = coord;
    let d = inst.d;
    if row >= inst.n || a >= d || b >= d || c >= d {
        return validation(format!(
            "row {row} / coordinate {coord:?} out of range for n = {}, d = {d}",
            inst.n
        ));
    }
    let (f, _) = attention_matrix(inst, x, limits)?;
    let fr = f.row(row);
    let n = inst.n;
    let scale = inst.a1.get(row, a) / d as f64;
    let s: Vec<f64> = (0..n * n)
        .map(|k| scale * inst.a2.get(k / n, b) * inst.a3.get(k % n, c))
        .collect();
    let sf = dot(&s, fr);
    Ok(s.iter()
        .zip(fr)
        .map(|(&sk, &fk)| sk * fk - sf * fk)
        .collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
