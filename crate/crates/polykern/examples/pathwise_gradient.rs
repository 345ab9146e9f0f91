//! Pathwise (reparameterized) gradients through a Gaussian chain.
//!
//! Both vertices draw by a deterministic map of their parameters, inputs,
//! and standard normal noise. At fixed noise, the objective is an ordinary
//! differentiable function of the parameters, so the per-sample gradient is
//! checked against frozen-noise finite differences via common random
//! numbers, and the averaged gradient against the closed-form expected
//! objective.
//!
//! Run with: cargo run --example pathwise_gradient

use polykern::learn::{expected_objective_mc, grad_reverse_mode_mc, GradOptions};
use polykern::numeric::{central_diff_grad, max_rel_err, FD_STEP};
use polykern::project::ProjectFile;
use polykern::stream::StreamSeed;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pathwise_learn.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();
    let pd = project.param_diagram("gauss-chain").unwrap();
    let obj = &project.objective("fit").unwrap().spec;
    let is = &project.interfaces;

    // theta per vertex: (weight, bias); noise scales are fixed at 0.1
    let theta = vec![1.2, 0.3, 0.8, -0.2];

    // frozen-noise check: same seed means the same noise draws, so the
    // estimator mean must equal finite differences of the sampled objective
    let n = 8;
    let seed = StreamSeed(2);
    let est = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        n,
        seed,
        "frozen",
        GradOptions::default(),
    )
    .unwrap();
    let (pd2, is2, obj2) = (pd.clone(), is.clone(), obj.clone());
    let fd = central_diff_grad(
        &move |t: &[f64]| {
            expected_objective_mc(&pd2, &is2, t, &obj2, n, seed, "frozen", false)
                .unwrap()
                .0
        },
        &theta,
        FD_STEP,
    );
    println!(
        "frozen-noise gradient vs finite differences ({n} common samples): max rel err {:.3e}",
        max_rel_err(&est.flat, &fd)
    );

    // averaged gradient vs the closed-form expected objective
    // L = (w2 (w1 x + b1) + b2 - r)^2 + w2^2 s1^2 + s2^2 at x = 1, r = -4
    let closed_form = |t: &[f64]| -> f64 {
        let m = t[2] * (t[0] + t[1]) + t[3];
        (m + 4.0) * (m + 4.0) + t[2] * t[2] * 0.01 + 0.01
    };
    let est = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        100_000,
        StreamSeed(3),
        "averaged",
        GradOptions::default(),
    )
    .unwrap();
    let fd = central_diff_grad(&closed_form, &theta, FD_STEP);
    println!("averaged gradient over 1e5 samples:");
    for (c, (g, f)) in est.flat.iter().zip(&fd).enumerate() {
        println!("  theta[{c}]: estimate {g:+.5}  closed form {f:+.5}");
    }
    println!("max rel err {:.3e}", max_rel_err(&est.flat, &fd));
}
