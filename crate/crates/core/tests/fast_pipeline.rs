//! Each stage of the fast pipeline against the dense intermediates.

use tat_core::exact::{compute_intermediates, forward, grad_exact};
use tat_core::fast::{
    assemble_p_factors, build_pa_factors, build_pb_factors, build_residual_u2, build_w_factors,
};
use tat_core::{build_f_factors, grad_fast, AttnInstance, Limits, Matrix};

const STAGE_TOL: f64 = 1e-7;

#[test]
fn stages_match_dense_seed_13() {
    let limits = Limits::default();
    let inst = AttnInstance::random(8, 2, 0.8, 13).unwrap();
    let it = compute_intermediates(&inst, &limits).unwrap();
    let ff = build_f_factors(&inst, 1e-8, &limits).unwrap();

    let u2 = build_residual_u2(&inst, &ff).unwrap();
    assert!(u2.max_abs_diff(&it.vres).unwrap() <= STAGE_TOL);

    let wf = build_w_factors(&inst, u2).unwrap();
    assert_eq!(wf.rank(), 2);
    let w = wf.materialize(32).unwrap();
    assert!(w.max_abs_diff(&it.w).unwrap() <= STAGE_TOL);

    let pa = build_pa_factors(&ff.factors, &wf, &limits).unwrap();
    let pa_dense = pa.materialize(32).unwrap();
    let f_tilde = ff.factors.materialize(32).unwrap();
    let product = f_tilde.hadamard(&w).unwrap();
    assert!(pa_dense.max_abs_diff(&product).unwrap() <= 1e-12);
    assert!(pa_dense.max_abs_diff(&it.pa()).unwrap() <= STAGE_TOL);

    let (pb, r_tilde) = build_pb_factors(&ff.factors, &wf).unwrap();
    for (a, b) in r_tilde.iter().zip(it.r()) {
        assert!((a - b).abs() <= STAGE_TOL);
    }
    assert!(pb.materialize(32).unwrap().max_abs_diff(&it.pb()).unwrap() <= STAGE_TOL);

    let p = assemble_p_factors(&pa, &pb).unwrap();
    assert_eq!(p.rank(), pa.rank() + pb.rank());
    assert!(p.materialize(32).unwrap().max_abs_diff(&it.p).unwrap() <= STAGE_TOL);
}

#[test]
fn fitted_target_gives_near_zero_residual_and_gradient() {
    let limits = Limits::default();
    let inst = AttnInstance::random(6, 2, 0.8, 21).unwrap();
    let fitted = inst.with_target(forward(&inst, &limits).unwrap()).unwrap();
    let eps = 1e-8;
    let ff = build_f_factors(&fitted, eps, &limits).unwrap();
    let u2 = build_residual_u2(&fitted, &ff).unwrap();
    assert!(u2.max_abs() <= 10.0 * eps);
    let w = build_w_factors(&fitted, u2)
        .unwrap()
        .materialize(32)
        .unwrap();
    assert!(w.max_abs() <= 10.0 * eps);
    let rep = grad_fast(&fitted, eps, &limits).unwrap();
    assert!(rep.g_tilde.max_abs() <= rep.eps_target);
}

#[test]
fn single_token_r_is_the_inner_product() {
    let limits = Limits::default();
    let inst = AttnInstance::random(1, 2, 0.8, 5).unwrap();
    let it = compute_intermediates(&inst, &limits).unwrap();
    let ff = build_f_factors(&inst, 1e-10, &limits).unwrap();
    let wf = build_w_factors(&inst, build_residual_u2(&inst, &ff).unwrap()).unwrap();
    let (_, r) = build_pb_factors(&ff.factors, &wf).unwrap();
    assert!((r[0] - it.r()[0]).abs() <= 1e-12);
}

#[test]
fn uniform_case_w_matches_dense() {
    let limits = Limits::default();
    let mut inst = AttnInstance::random(2, 1, 1.0, 3).unwrap();
    inst.x1 = Matrix::zeros(1, 1);
    let it = compute_intermediates(&inst, &limits).unwrap();
    let ff = build_f_factors(&inst, 1e-8, &limits).unwrap();
    let wf = build_w_factors(&inst, build_residual_u2(&inst, &ff).unwrap()).unwrap();
    assert!(wf.materialize(32).unwrap().max_abs_diff(&it.w).unwrap() <= 1e-13);
}

#[test]
fn gradient_seed_17_within_1e6() {
    let limits = Limits::default();
    let inst = AttnInstance::random(16, 2, 0.8, 17).unwrap();
    let rep = grad_fast(&inst, 1e-8, &limits).unwrap();
    let err = rep
        .g_tilde
        .max_abs_diff(&grad_exact(&inst, &limits).unwrap())
        .unwrap();
    assert!(err <= 1e-6);
    assert!(err <= rep.eps_target);
    assert_eq!(rep.eps_requested, 1e-8);
    assert_eq!(rep.eps_internal, 5e-9);
}

#[test]
fn serial_and_parallel_runs_agree_bitwise() {
    let limits = Limits::default();
    let inst = AttnInstance::random(64, 2, 0.8, 3).unwrap();
    let parallel = grad_fast(&inst, 1e-6, &limits).unwrap().g_tilde;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let serial = pool.install(|| grad_fast(&inst, 1e-6, &limits).unwrap().g_tilde);
    assert_eq!(parallel, serial);
}
