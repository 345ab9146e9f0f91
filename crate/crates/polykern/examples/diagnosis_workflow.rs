//! A typed stochastic workflow composed through an interface kernel.
//!
//! The biomarker kernel emits a real-valued score; the treatment kernel
//! consumes a diagnosis. Their connection is licensed by an interface
//! witness whose kernel converts scores to diagnoses through a logistic
//! curve. Interface expansion inserts that kernel as an explicit vertex, and
//! by the symmetry of the score distribution the antibiotic probability is
//! exactly one half.
//!
//! Run with: cargo run --example diagnosis_workflow

use polykern::color::interface_expand;
use polykern::project::{CompiledDiagram, ProjectFile};
use polykern::space::Value;
use polykern::stream::StreamSeed;
use polykern::trace::trace_sample;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/diagnosis.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();

    let workflow = match project.diagram("workflow").unwrap() {
        CompiledDiagram::Colored(cd) => cd.clone(),
        _ => unreachable!(),
    };
    println!(
        "colored diagram: {} vertices, {} typed wire(s)",
        workflow.vertices.len(),
        workflow.internal_wires.len()
    );
    for (wire, witness) in &workflow.internal_wires {
        println!(
            "  wire {}:{} -> {}:{} through witness {witness}",
            wire.from.0, wire.from.1, wire.to.0, wire.to.1
        );
    }

    let expanded = interface_expand(&workflow, &project.interfaces).unwrap();
    println!("interface expansion: {} vertices", expanded.vertices.len());
    for v in expanded.vertices.keys() {
        println!("  {v}");
    }

    // estimate P(antibiotic | patient) over 1e5 traces
    let n = 100_000;
    let seed = StreamSeed(7);
    let mut hits = 0usize;
    for s in 0..n {
        let mut rng = seed.substream("diagnosis-example", s as u64);
        let t = trace_sample(&expanded, &[Value::FiniteIdx(0)], &mut rng).unwrap();
        if t.external_output[0] == Value::FiniteIdx(0) {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    println!("P(antibiotic) = {p:.4} over {n} traces (exact value 1/2)");
}
