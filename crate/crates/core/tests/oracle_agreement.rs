//! Matrix-free operators and iterative solvers against the dense oracle.

mod common;

use common::*;
use kktfwi::forward::DataVector;
use kktfwi::kkt::{
    fsgn_gmres_step, kkt_apply, kkt_rhs, FsgnOptions, KktOperator, KktPreconditioner,
};
use kktfwi::reduced::rsgn_cg_step;
use kktfwi::sparse::{exact_fill_level, scalar::cdot, KrylovVector};
use kktfwi::C64;
use kktfwi_oracle::nalgebra::DVector;

#[test]
fn jacobian_and_adjoint_match_dense() {
    let fx = Fixture::standard();
    let st = fx.state();
    let dense = fx.dense();
    let mut rng = rng(1);
    for _ in 0..5 {
        let v = random_real(&mut rng, st.n_nodes());
        let jv = st.jacobian_apply(&v).unwrap();
        let vc = DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)));
        let jv_dense = &dense.jacobian * vc;
        assert!(rel_err_complex(&jv.values, jv_dense.as_slice()) < 1e-10);

        let w = random_complex(&mut rng, st.survey.n_data());
        let jw = st
            .jacobian_adjoint_apply_complex(&DataVector { values: w.clone() })
            .unwrap();
        let jw_dense = dense.jacobian.adjoint() * DVector::from_column_slice(&w);
        assert!(rel_err_complex(&jw, jw_dense.as_slice()) < 1e-10);
    }
}

#[test]
fn hessian_and_gradient_match_dense() {
    let fx = Fixture::standard();
    let st = fx.state();
    let dense = fx.dense();
    let g = st.gradient().unwrap();
    assert!(rel_err_real(&g, dense.gradient.as_slice()) < 1e-10);
    let mut rng = rng(2);
    for _ in 0..5 {
        let v = random_real(&mut rng, st.n_nodes());
        let hv = st.hessian_apply(&v).unwrap();
        let hv_dense = &dense.hessian * DVector::from_column_slice(&v);
        assert!(rel_err_real(&hv, hv_dense.as_slice()) < 1e-10);
    }
}

#[test]
fn kkt_operator_and_rhs_match_dense() {
    let fx = Fixture::standard();
    let st = fx.state();
    let dense = fx.dense();
    let b = kkt_rhs(&st);
    let b_dense = from_blocks(&dense.unpack(&dense.kkt_rhs()));
    assert!(kkt_rel_err(&b, &b_dense) < 1e-12);
    let mut rng = rng(3);
    for _ in 0..5 {
        let xi = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
        let m = kkt_apply(&st, &xi).unwrap();
        let m_dense = from_blocks(&dense.kkt_apply(&to_blocks(&xi)));
        assert!(kkt_rel_err(&m, &m_dense) < 1e-10);
    }
}

#[test]
fn kkt_operator_is_self_adjoint_in_the_real_inner_product() {
    let fx = Fixture::standard();
    let st = fx.state();
    let mut rng = rng(4);
    for _ in 0..10 {
        let x = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
        let y = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
        let mx = kkt_apply(&st, &x).unwrap();
        let my = kkt_apply(&st, &y).unwrap();
        let lhs = mx.dot(&y);
        let rhs = x.dot(&my);
        assert!((lhs - rhs).abs() <= 1e-12 * mx.norm() * y.norm());
    }
}

#[test]
fn f_block_is_positive_semidefinite() {
    let fx = Fixture::standard();
    let st = fx.state();
    let mut rng = rng(5);
    for _ in 0..20 {
        let mut xi = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
        for l in &mut xi.lambda {
            l.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
        xi.ds.iter_mut().for_each(|s| *s = 0.0);
        let m = kkt_apply(&st, &xi).unwrap();
        let quad: f64 = (0..st.n_sources())
            .map(|k| cdot(&xi.du[k], &m.du[k]).re)
            .sum();
        assert!(quad >= 0.0);
    }
}

#[test]
fn reduced_and_full_space_steps_match_dense_solution() {
    let fx = Fixture::standard();
    let st = fx.state();
    let ds_dense = fx.dense().normal_solve().unwrap();

    let cg = rsgn_cg_step(&st, 1e-12, 500).unwrap();
    assert!(cg.converged);
    assert!(rel_err_real(&cg.delta_s, ds_dense.as_slice()) < 1e-6);

    let gm = fsgn_gmres_step(
        &st,
        &KktPreconditioner::Exact,
        &FsgnOptions {
            tol: 1e-12,
            max_iter: 400,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(gm.converged);
    assert!(rel_err_real(&gm.delta_s, ds_dense.as_slice()) < 1e-6);
}

#[test]
fn preconditioner_inverts_the_f_free_operator() {
    let fx = Fixture::standard();
    let st = fx.state();
    let mut rng = rng(6);
    let xi = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
    let m = KktOperator::without_f(&st).apply(&xi).unwrap();
    let back = KktPreconditioner::Exact.apply(&st, &m).unwrap();
    assert!(kkt_rel_err(&back, &xi) < 1e-10);
}

#[test]
fn full_fill_ilu_preconditioner_equals_exact() {
    let fx = Fixture::standard();
    let st = fx.state();
    let level = exact_fill_level(&st.op.a).unwrap();
    let (ilu, _) = KktPreconditioner::ilu(&st, level).unwrap();
    let mut rng = rng(7);
    let v = random_kkt(&mut rng, st.n_sources(), st.n_nodes());
    let a = KktPreconditioner::Exact.apply(&st, &v).unwrap();
    let b = ilu.apply(&st, &v).unwrap();
    assert!(kkt_rel_err(&b, &a) < 1e-10);
}

#[test]
fn cost_accounting() {
    let fx = Fixture::standard();
    let st = fx.state();
    let k = st.n_sources();
    let v = random_real(&mut rng(8), st.n_nodes());
    st.lu.reset_solve_count();
    st.hessian_apply(&v).unwrap();
    assert_eq!(st.lu.solve_count(), 2 * k);

    let xi = random_kkt(&mut rng(9), k, st.n_nodes());
    st.lu.reset_solve_count();
    KktPreconditioner::Exact.apply(&st, &xi).unwrap();
    assert_eq!(st.lu.solve_count(), 2 * k);

    st.lu.reset_solve_count();
    kkt_apply(&st, &xi).unwrap();
    assert_eq!(st.lu.solve_count(), 0);
}

#[test]
fn zero_receiver_survey() {
    let fx = Fixture::standard().without_receivers();
    let st = fx.state();
    // H v = eps v with no data.
    let v = random_real(&mut rng(10), st.n_nodes());
    let hv = st.hessian_apply(&v).unwrap();
    for (a, b) in hv.iter().zip(&v) {
        assert!((a - fx.epsilon * b).abs() < 1e-15);
    }
    let out = fsgn_gmres_step(
        &st,
        &KktPreconditioner::Exact,
        &FsgnOptions {
            tol: 1e-10,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.log.iterations(), 1);
    assert!(out.log.last().unwrap().residual_norm < 1e-10);
}
