//! Gradient-descent training of a parameterized diagram.
//!
//! Runs exact-gradient descent (the all-finite problem enumerates its
//! gradient) next to seed-pinned Monte Carlo training with the
//! score-function estimator, and compares the endpoints.
//!
//! Run with: cargo run --example train_classifier

use polykern::learn::{expected_objective_exact, train_sgd, TrainMode};
use polykern::project::ProjectFile;
use polykern::stream::StreamSeed;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/finite_learn.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();
    let pd = project.param_diagram("classifier").unwrap();
    let obj = &project.objective("matching").unwrap().spec;
    let is = &project.interfaces;

    let theta0 = vec![
        0.3, -0.2, 0.5, -0.4, 0.1, 0.2, 0.6, -0.3, -0.2, 0.4, 0.1, -0.5,
    ];

    let exact = train_sgd(
        pd,
        is,
        &theta0,
        obj,
        50,
        0.1,
        TrainMode::Exact,
        StreamSeed(0),
    )
    .unwrap();
    let mc = train_sgd(
        pd,
        is,
        &theta0,
        obj,
        50,
        0.1,
        TrainMode::Mc {
            n_per_step: 2000,
            baseline: 0.0,
        },
        StreamSeed(42),
    )
    .unwrap();

    println!("step   exact-descent   mc-descent (estimate)");
    for i in (0..=50).step_by(10) {
        println!(
            "{i:4}   {:+.6}      {:+.6}",
            exact.objectives[i], mc.objectives[i]
        );
    }
    let mc_end_exact = expected_objective_exact(pd, is, mc.thetas.last().unwrap(), obj).unwrap();
    println!(
        "endpoints: exact descent {:.6}, mc descent {:.6} (exact objective at mc endpoint)",
        exact.objectives.last().unwrap(),
        mc_end_exact
    );
}
