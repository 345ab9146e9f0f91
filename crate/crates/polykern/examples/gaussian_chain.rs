//! Slotwise composition of Gaussian kernels.
//!
//! A kernel with two outputs (a noisy reading and a passthrough copy of its
//! input) is wired into an adder along one slot. The composite stays in the
//! Gaussian-linear class: the connected wire is integrated out, the unused
//! output passes through, and the composite mean and variance come out in
//! closed form. A Monte Carlo run over the same diagram agrees.
//!
//! Run with: cargo run --example gaussian_chain

use polykern::diagram::compose_slotwise;
use polykern::kernel::KernelRep;
use polykern::project::{CompiledDiagram, ProjectFile};
use polykern::space::Value;
use polykern::stream::{mean_and_std_error, StreamSeed};
use polykern::trace::trace_sample;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/gaussian_chain.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();

    let spread = &project.kernels["spread"]; // (A) -> (B1, B2), B2 = A exactly
    let add = &project.kernels["add"]; // (B1, C2) -> (D)

    // wire output 1 of `spread` into input 1 of `add`
    let composite = compose_slotwise(spread, add, 1, 1)
        .unwrap()
        .kernel()
        .unwrap();
    println!("composite: {} -> {}", composite.source, composite.target);
    if let KernelRep::GaussianLinear(g) = &composite.rep {
        println!(
            "  mean map    d = {:.1}*a + {:.1}*c2",
            g.weight.at(0, 0),
            g.weight.at(1, 0)
        );
        println!(
            "  passthrough b2 = {:.1}*a + {:.1}*c2",
            g.weight.at(0, 1),
            g.weight.at(1, 1)
        );
        println!("  variances   ({:.2}, {:.2})", g.cov_diag[0], g.cov_diag[1]);
    }

    // the same composite evaluated by sampling the two-vertex diagram
    let diagram = match project.diagram("chain").unwrap() {
        CompiledDiagram::Plain(d) => d.clone(),
        _ => unreachable!(),
    };
    let (a, c2) = (0.7, -0.3);
    let x = vec![Value::real(a), Value::real(c2)];
    let seed = StreamSeed(1);
    let n = 100_000;
    let mut ds = Vec::with_capacity(n);
    for s in 0..n {
        let mut rng = seed.substream("gaussian-example", s as u64);
        let t = trace_sample(&diagram, &x, &mut rng).unwrap();
        assert_eq!(t.external_output[1], Value::real(a), "passthrough is exact");
        ds.push(t.external_output[0].as_scalar().unwrap());
    }
    let (mean, se) = mean_and_std_error(&ds);
    let var = ds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    println!("monte carlo at (a, c2) = ({a}, {c2}) over {n} traces:");
    println!("  mean {mean:.4} +- {se:.4}   (closed form {:.4})", a + c2);
    println!(
        "  var  {var:.4}            (closed form {:.4})",
        0.64 + 0.36
    );
}
