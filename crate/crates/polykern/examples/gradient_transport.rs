//! Pulling gradients back along a parameter pushforward.
//!
//! A nonlinear transport maps the source-state parameters into the
//! target-state space, where an expected objective is defined. The chain
//! rule transports the target gradient back through the transpose of the
//! pushforward Jacobian; the result matches finite differences of the
//! pulled-back objective, and composite transports factor through
//! sequential ones.
//!
//! Run with: cargo run --example gradient_transport

use polykern::builtin::build_param_pushforward;
use polykern::ccmp::{pullback_gradient, MorId, ParamPushforward};
use polykern::numeric::{central_diff_grad, max_rel_err, FD_STEP};
use polykern::project::ProjectFile;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dynamic_graph.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();
    let ccmp = project.ccmp.as_ref().unwrap();
    let warp = ccmp.param_push(&MorId::new("warp")).unwrap();
    println!(
        "transport {} : dim {} -> dim {} (Jacobian vs FD: {:.3e})",
        warp.name,
        warp.in_dim,
        warp.out_dim,
        warp.check_jacobian(&[vec![0.3, -0.4]]).unwrap()
    );

    // a quadratic objective on the target parameter space
    let target_objective = |t: &[f64]| -> f64 {
        (t[0] - 1.0).powi(2) + 2.0 * (t[1] + 0.5).powi(2) + 0.5 * t[2].powi(2)
    };
    let target_gradient =
        |t: &[f64]| -> Vec<f64> { vec![2.0 * (t[0] - 1.0), 4.0 * (t[1] + 0.5), t[2]] };

    let theta_src = vec![0.35, -0.6];
    let theta_dst = warp.apply(&theta_src).unwrap();
    let pulled = pullback_gradient(warp, &theta_src, &target_gradient(&theta_dst)).unwrap();

    let warp2 = warp.clone();
    let fd = central_diff_grad(
        &move |t: &[f64]| target_objective(&warp2.apply(t).unwrap()),
        &theta_src,
        FD_STEP,
    );
    println!("pulled-back gradient {pulled:?}");
    println!("finite differences   {fd:?}");
    println!("max rel err {:.3e}", max_rel_err(&pulled, &fd));

    // composite transports pull back in reverse order
    let second = build_param_pushforward(
        "second",
        "tanh-affine",
        &[
            3.0, 3.0, 0.5, -0.2, 0.1, 0.3, 0.7, -0.4, -0.6, 0.2, 0.5, 0.05, -0.1, 0.2,
        ],
    )
    .unwrap();
    let composite = ParamPushforward::compose(warp, &second);
    let g = vec![0.4, -0.7, 0.3];
    let direct = pullback_gradient(&composite, &theta_src, &g).unwrap();
    let mid = warp.apply(&theta_src).unwrap();
    let sequential = pullback_gradient(
        warp,
        &theta_src,
        &pullback_gradient(&second, &mid, &g).unwrap(),
    )
    .unwrap();
    let dev = direct
        .iter()
        .zip(&sequential)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("composite vs sequential pullback: max deviation {dev:.3e}");
}
