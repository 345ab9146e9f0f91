//! Score-function gradients on an all-finite problem, with exact oracles.
//!
//! The classifier is a chain of two logit-table kernels trained to match its
//! input. On finite problems the expected objective and its gradient are
//! computable by full enumeration, which gives three cross-checks of the
//! sampling estimator: finite differences, the enumerated estimator
//! expectation (unbiasedness), and per-coordinate standard-error bands.
//!
//! Run with: cargo run --example score_gradient

use polykern::learn::{
    expected_objective_exact, grad_exact_enumeration, grad_reverse_mode_mc,
    score_estimator_expectation, GradOptions,
};
use polykern::numeric::{central_diff_grad, max_rel_err, FD_STEP};
use polykern::project::ProjectFile;
use polykern::stream::StreamSeed;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/finite_learn.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();
    let pd = project.param_diagram("classifier").unwrap();
    let obj = &project.objective("matching").unwrap().spec;
    let is = &project.interfaces;

    let theta = vec![
        0.3, -0.2, 0.5, -0.4, 0.1, 0.2, // encoder logits (2 x 3)
        0.6, -0.3, -0.2, 0.4, 0.1, -0.5, // decoder logits (3 x 2)
    ];

    let loss = expected_objective_exact(pd, is, &theta, obj).unwrap();
    println!("exact expected mismatch at theta: {loss:.6}");

    let exact = grad_exact_enumeration(pd, is, &theta, obj).unwrap();
    let (pd2, is2, obj2) = (pd.clone(), is.clone(), obj.clone());
    let fd = central_diff_grad(
        &move |t: &[f64]| expected_objective_exact(&pd2, &is2, t, &obj2).unwrap(),
        &theta,
        FD_STEP,
    );
    println!(
        "enumeration gradient vs finite differences: max rel err {:.3e}",
        max_rel_err(&exact, &fd)
    );

    // the enumerated expectation of the per-sample estimator is the gradient
    let expectation = score_estimator_expectation(pd, is, &theta, obj, 0.0).unwrap();
    let bias = exact
        .iter()
        .zip(&expectation)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("estimator expectation vs gradient: max deviation {bias:.3e}");

    // and a constant baseline does not move it
    let shifted = score_estimator_expectation(pd, is, &theta, obj, 0.37).unwrap();
    let baseline_dev = expectation
        .iter()
        .zip(&shifted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("baseline invariance: max deviation {baseline_dev:.3e}");

    let est = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        50_000,
        StreamSeed(17),
        "score-example",
        GradOptions::default(),
    )
    .unwrap();
    let mut worst_sigmas = 0.0f64;
    for ((g, e), se) in est.flat.iter().zip(&exact).zip(&est.flat_std_err) {
        if *se > 0.0 {
            worst_sigmas = worst_sigmas.max((g - e).abs() / se);
        }
    }
    println!(
        "monte carlo gradient ({} samples): worst coordinate at {:.2} standard errors",
        est.n_samples, worst_sigmas
    );
}
