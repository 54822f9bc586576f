//! Almost-linear-time gradient.
//!
//! Every `n x n²` matrix of the exact pipeline (`F`, `W`, `Pa`, `Pb`, `P`) is
//! carried as a [`LowRankTriple`]. Products against `(A2 ⊗ A3)` and
//! `(A4 ⊗ A5) Y` reduce to `k x d` Gram matrices, so the largest buffer is
//! `n x k5`.

use crate::clock::Stopwatch;
use crate::error::{validation, Result};
use crate::exact::dot;
use crate::instance::AttnInstance;
use crate::kron::{gram_col_kron, odot3_matricized, row_kron};
use crate::limits::Limits;
use crate::lowrank::{build_f_factors_with_range, ForwardFactors, LowRankTriple};
use crate::matrix::Matrix;
use crate::par;

/// Wall time of one pipeline stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FastGradientReport {
    /// Approximate gradient, `d x d²`, laid out like `X`.
    pub g_tilde: Matrix,
    pub degree: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub k4: usize,
    pub k5: usize,
    pub stage_timings: Vec<StageTiming>,
    /// `eps` as passed in.
    pub eps_requested: f64,
    /// Relative accuracy handed to the attention factorization.
    pub eps_internal: f64,
    /// Certified bound on `‖g̃ - grad‖∞` for this instance.
    pub eps_target: f64,
}

/// `U2 = F̃ H - E`, the residual with the approximate attention.
///
/// `(V1 ⊘ W1)ᵀ ((A4Y1) ⊘ (A5Y2))` is a `k1 x d` Gram product.
pub fn build_residual_u2(inst: &AttnInstance, f: &ForwardFactors) -> Result<Matrix> {
    let t = &f.factors;
    if t.rows() != inst.n {
        return validation(format!(
            "attention factors have {} rows, instance has n = {}",
            t.rows(),
            inst.n
        ));
    }
    let gram = gram_col_kron(&t.v, &t.w, &inst.v1(), &inst.v2())?;
    t.u.matmul(&gram)?.sub(&inst.e)
}

/// Factors of `W = Vres Hᵀ`: `(U2, A4Y1, A5Y2)`, rank `d`.
pub fn build_w_factors(inst: &AttnInstance, u2: Matrix) -> Result<LowRankTriple> {
    if u2.shape() != (inst.n, inst.d) {
        return validation(format!(
            "residual must be {}x{}, got {:?}",
            inst.n,
            inst.d,
            u2.shape()
        ));
    }
    LowRankTriple::new(u2, inst.v1(), inst.v2())
}

/// Factors of `Pa = F ∘ W`: row-wise Kronecker of the two triples, rank `k1 · k2`.
pub fn build_pa_factors(
    f: &LowRankTriple,
    w: &LowRankTriple,
    limits: &Limits,
) -> Result<LowRankTriple> {
    let k3 = f.rank() * w.rank();
    if k3 > limits.rank_cap {
        return validation(format!(
            "rank k3 = {} x {} = {k3} exceeds the rank cap {}",
            f.rank(),
            w.rank(),
            limits.rank_cap
        ));
    }
    LowRankTriple::new(
        row_kron(&f.u, &w.u)?,
        row_kron(&f.v, &w.v)?,
        row_kron(&f.w, &w.w)?,
    )
}

/// Factors of `Pb = diag(R̃) F` and the per-row scalars `R̃_j = ⟨F̃_j, W̃_j⟩`.
///
/// `R̃_j = U1_j ((V1ᵀV2) ∘ (W1ᵀW2)) U2_jᵀ`.
pub fn build_pb_factors(f: &LowRankTriple, w: &LowRankTriple) -> Result<(LowRankTriple, Vec<f64>)> {
    if f.rows() != w.rows() {
        return validation(format!(
            "factor row counts differ: {} and {}",
            f.rows(),
            w.rows()
        ));
    }
    let mixed = gram_col_kron(&f.v, &f.w, &w.v, &w.w)?;
    let um = f.u.matmul(&mixed)?;
    let r = par::map_indices(f.rows(), |j| dot(um.row(j), w.u.row(j)));
    let u4 = f.u.scale_rows(&r)?;
    Ok((LowRankTriple::new(u4, f.v.clone(), f.w.clone())?, r))
}

/// Factors of `P = Pa - Pb`: `([U3, -U4], [V3, V4], [W3, W4])`.
pub fn assemble_p_factors(pa: &LowRankTriple, pb: &LowRankTriple) -> Result<LowRankTriple> {
    LowRankTriple::new(
        pa.u.hstack(&pb.u.scale(-1.0))?,
        pa.v.hstack(&pb.v)?,
        pa.w.hstack(&pb.w)?,
    )
}

/// `(1/d) A1ᵀ P (A2 ⊗ A3)` for `P = U (V ⊘ W)ᵀ`: the matricized
/// `(A1ᵀU) ⊙ (A2ᵀV) ⊙ (A3ᵀW)`.
pub fn grad_from_factors(inst: &AttnInstance, p: &LowRankTriple) -> Result<Matrix> {
    let g = odot3_matricized(
        &inst.a1.t_matmul(&p.u)?,
        &inst.a2.t_matmul(&p.v)?,
        &inst.a3.t_matmul(&p.w)?,
    )?;
    Ok(g.scale(1.0 / inst.d as f64))
}

/// Approximate gradient of the loss in near-linear time.
///
/// Half of `eps` goes to the attention factorization. The rest of the error
/// is propagated stage by stage with the instance's own magnitudes into
/// [`FastGradientReport::eps_target`].
pub fn grad_fast(inst: &AttnInstance, eps: f64, limits: &Limits) -> Result<FastGradientReport> {
    inst.validate()?;
    grad_fast_with_range(inst, eps, inst.exp_arg_bound(), limits)
}

/// [`grad_fast`] with a shared softmax argument bound; see
/// [`build_f_factors_with_range`].
pub fn grad_fast_with_range(
    inst: &AttnInstance,
    eps: f64,
    range: f64,
    limits: &Limits,
) -> Result<FastGradientReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return validation(format!("eps must lie in (0, 1), got {eps}"));
    }
    if eps < 1e-12 {
        log::warn!("eps = {eps:e} is below 1e-12; rounding error will dominate");
    }
    let eps_internal = eps / 2.0;
    let mut clock = Stopwatch::start();
    let mut timings = Vec::with_capacity(5);

    let ff = build_f_factors_with_range(inst, eps_internal, range, limits)?;
    timings.push(StageTiming {
        stage: "attention",
        seconds: clock.lap(),
    });

    let u2 = build_residual_u2(inst, &ff)?;
    let wf = build_w_factors(inst, u2)?;
    timings.push(StageTiming {
        stage: "residual",
        seconds: clock.lap(),
    });

    let pa = build_pa_factors(&ff.factors, &wf, limits)?;
    timings.push(StageTiming {
        stage: "pa",
        seconds: clock.lap(),
    });

    let (pb, r_tilde) = build_pb_factors(&ff.factors, &wf)?;
    timings.push(StageTiming {
        stage: "pb",
        seconds: clock.lap(),
    });

    let p = assemble_p_factors(&pa, &pb)?;
    let (k1, k2, k3, k4, k5) = (ff.rank(), wf.rank(), pa.rank(), pb.rank(), p.rank());
    drop((pa, pb));
    let g_tilde = grad_from_factors(inst, &p)?;
    timings.push(StageTiming {
        stage: "gradient",
        seconds: clock.lap(),
    });

    let eps_target = error_bound(inst, ff.rel_error, &wf.u, &r_tilde, &g_tilde);
    Ok(FastGradientReport {
        g_tilde,
        degree: ff.degree(),
        k1,
        k2,
        k3,
        k4,
        k5,
        stage_timings: timings,
        eps_requested: eps,
        eps_internal,
        eps_target,
    })
}

/// Bound on `‖g̃ - g‖∞` given `|F̃ - F| <= τ F`.
///
/// With `h = ‖A4Y1‖∞ ‖A5Y2‖∞` bounding `|H|`, and using that rows of `F`
/// sum to one:
/// - residual: `τ h`; `W`: `d τ h²`;
/// - each row of `Pa` in ℓ1: `τ max|W̃| + d τ h²`, which also bounds `|R̃ - R|`;
/// - each row of `Pb` in ℓ1: `τ max|R̃| + |R̃ - R|`.
///
/// The sandwich `(1/d) A1ᵀ · (A2 ⊗ A3)` adds `n ‖A1‖∞ ‖A2‖∞ ‖A3‖∞ / d`.
/// A small rounding allowance is added on top.
fn error_bound(inst: &AttnInstance, tau: f64, u2: &Matrix, r_tilde: &[f64], g: &Matrix) -> f64 {
    let d = inst.d as f64;
    let h = inst.v1().max_abs() * inst.v2().max_abs();
    let w_err = d * tau * h * h;
    let w_tilde = d * u2.max_abs() * h;
    let pa_row = tau * w_tilde + w_err;
    let r_max = r_tilde.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let pb_row = tau * r_max + pa_row;
    let sandwich = inst.n as f64 * inst.a1.max_abs() * inst.a2.max_abs() * inst.a3.max_abs() / d;
    let rounding = 1e-12 * (1.0 + g.max_abs() + sandwich * (w_tilde + r_max));
    sandwich * (pa_row + pb_row) + rounding
}
