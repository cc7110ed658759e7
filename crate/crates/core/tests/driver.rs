mod common;

use common::*;
use kktfwi::driver::{fwi_run, gn_step, EpsilonSchedule, FwiConfig, FwiProblem, InnerSolver};
use kktfwi::forward::{observe, solve_forward, DataVector};
use kktfwi::helmholtz::{assemble_helmholtz, SlownessModel};
use kktfwi::sparse::lu_factor;
use kktfwi::Error;

fn simulate(fx: &Fixture, model: &SlownessModel, freq: f64) -> DataVector {
    let op = assemble_helmholtz(
        &fx.grid,
        &fx.profile,
        model,
        2.0 * std::f64::consts::PI * freq,
    )
    .unwrap();
    let lu = lu_factor(&op.a).unwrap();
    observe(&solve_forward(&op, &lu, &fx.survey).unwrap(), &fx.survey).unwrap()
}

fn perturbed(fx: &Fixture) -> SlownessModel {
    let v: Vec<f64> = fx
        .model
        .values()
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let (i, j) = fx.grid.coords(m);
            let bump = if (5..8).contains(&i) && (5..8).contains(&j) {
                0.9
            } else {
                1.0
            };
            s * bump
        })
        .collect();
    SlownessModel::new(&fx.grid, v).unwrap()
}

fn config(solver: InnerSolver) -> FwiConfig {
    FwiConfig {
        solver,
        inner_iterations: 400,
        inner_tol: 1e-12,
        epsilon: EpsilonSchedule::Values { values: vec![1e-2] },
        ..Default::default()
    }
}

#[test]
fn zero_residual_is_a_fixed_point() {
    let mut fx = Fixture::standard();
    fx.drop_model_term = true;
    fx.d_obs = simulate(&fx, &fx.model, fx.freq_hz);
    let step = gn_step(fx.setup(), &fx.model, &config(InnerSolver::FsgnGmresExact)).unwrap();
    let rel = step.delta_s.iter().map(|x| x * x).sum::<f64>().sqrt()
        / fx.model.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(rel < 1e-8, "{rel}");
    assert_eq!(step.misfit_before, 0.0);
}

#[test]
fn reduced_and_full_space_steps_give_the_same_model() {
    let mut fx = Fixture::standard();
    fx.drop_model_term = true;
    fx.d_obs = simulate(&fx, &perturbed(&fx), fx.freq_hz);
    let a = gn_step(fx.setup(), &fx.model, &config(InnerSolver::RsgnCg)).unwrap();
    let b = gn_step(fx.setup(), &fx.model, &config(InnerSolver::FsgnGmresExact)).unwrap();
    assert!(a.converged && b.converged);
    assert!(rel_err_real(b.model.values(), a.model.values()) < 1e-5);
    assert!(rel_err_real(&b.delta_s, &a.delta_s) < 1e-5);
}

#[test]
fn updates_are_clamped_to_the_bounds() {
    let fx = Fixture::standard();
    let (lo, hi) = fx
        .model
        .values()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let (lo, hi) = (0.999 * lo, 1.001 * hi);
    let model = fx.model.clone().with_bounds(lo, hi).unwrap();
    let step = gn_step(fx.setup(), &model, &config(InnerSolver::RsgnCg)).unwrap();
    let v = step.model.values();
    assert!(v.iter().all(|&s| (lo..=hi).contains(&s)));
    let clamped = v.iter().filter(|&&s| s == lo || s == hi).count();
    assert!(clamped > 0);
    for (m, (&new, &old)) in v.iter().zip(model.values()).enumerate() {
        let raw = old + step.delta_s[m];
        if raw < lo {
            assert_eq!(new, lo);
        } else if raw > hi {
            assert_eq!(new, hi);
        }
    }
}

#[test]
fn inversion_reports_every_frequency_in_order() {
    let fx = Fixture::standard();
    let truth = perturbed(&fx);
    let freqs = vec![0.1, 0.125];
    let survey = fx.survey.with_frequencies(freqs.clone());
    let observed: Vec<DataVector> = freqs.iter().map(|&f| simulate(&fx, &truth, f)).collect();
    let problem = FwiProblem {
        grid: &fx.grid,
        profile: &fx.profile,
        survey: &survey,
        observed: &observed,
    };
    let cfg = FwiConfig {
        epsilon: EpsilonSchedule::Ramp {
            start: 1e-3,
            end: 1e-2,
        },
        drop_model_term: true,
        ..Default::default()
    };
    let mut seen = Vec::new();
    let report = fwi_run(&problem, &cfg, &fx.model, |s| {
        seen.push(s.freq_hz);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, freqs);
    assert_eq!(report.steps.len(), 2);
    assert_eq!(report.steps[1].epsilon, 1e-2);
    for (a, b) in report.resid_norm_ini.iter().zip(&report.resid_norm_fin) {
        assert!(b < a, "{b} >= {a}");
    }
}

#[test]
fn matching_data_gives_zero_misfit() {
    let fx = Fixture::standard();
    let observed = vec![simulate(&fx, &fx.model, fx.freq_hz)];
    let problem = FwiProblem {
        grid: &fx.grid,
        profile: &fx.profile,
        survey: &fx.survey,
        observed: &observed,
    };
    let cfg = FwiConfig {
        epsilon: EpsilonSchedule::Values { values: vec![1e-2] },
        drop_model_term: true,
        ..Default::default()
    };
    let report = fwi_run(&problem, &cfg, &fx.model, |_| Ok(())).unwrap();
    assert_eq!(report.resid_norm_ini, vec![0.0]);
    assert_eq!(report.resid_norm_fin, vec![0.0]);
}

#[test]
fn step_failures_name_the_frequency() {
    let fx = Fixture::standard();
    let freqs = vec![0.1, 0.125];
    let survey = fx.survey.with_frequencies(freqs.clone());
    let observed = vec![simulate(&fx, &fx.model, 0.1), DataVector::zeros(2)];
    let problem = FwiProblem {
        grid: &fx.grid,
        profile: &fx.profile,
        survey: &survey,
        observed: &observed,
    };
    let cfg = FwiConfig {
        epsilon: EpsilonSchedule::Values {
            values: vec![1e-2, 1e-2],
        },
        drop_model_term: true,
        ..Default::default()
    };
    match fwi_run(&problem, &cfg, &fx.model, |_| Ok(())) {
        Err(Error::AtFrequency { index, freq_hz, .. }) => {
            assert_eq!(index, 1);
            assert_eq!(freq_hz, 0.125);
        }
        other => panic!("unexpected {other:?}"),
    }
}
