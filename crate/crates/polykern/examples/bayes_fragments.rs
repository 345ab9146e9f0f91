//! Exact trace semantics on finite Bayesian-network fragments.
//!
//! The chain marginalizes two intermediate variables; the v-structure
//! marginalizes two parents into a common child. Both reduce by binary
//! slotwise compositions in any order, and every order denotes the same
//! trace kernel.
//!
//! Run with: cargo run --example bayes_fragments

use polykern::color::{reduce_in_order, reduction_vs_trace};
use polykern::diagram::Wire;
use polykern::project::{CompiledDiagram, ProjectFile};
use polykern::space::Value;
use polykern::trace::trace_exact;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bayes_fragments.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();

    for name in ["chain", "vstructure"] {
        let d = match project.diagram(name).unwrap() {
            CompiledDiagram::Plain(d) => d.clone(),
            _ => unreachable!(),
        };
        println!(
            "{name}: {} -> {}",
            d.input_profile().unwrap(),
            d.output_profile().unwrap()
        );

        let in_profile = d.input_profile().unwrap();
        let n = in_profile.space().cardinality().unwrap();
        for i in 0..n {
            let x = in_profile.values_at(i).unwrap();
            let (_, marginal) = trace_exact(&d, &x).unwrap();
            let label = polykern::space::format_value(&Value::Tuple(x), &in_profile.space());
            println!("  K(. | {label}) = {:?}", marginal.probs);
        }

        // both bracketing orders reduce to the same kernel
        let wires: Vec<Wire> = d.internal_wires.iter().cloned().collect();
        let forward = reduce_in_order(&d, &wires).unwrap();
        let reversed: Vec<Wire> = wires.iter().rev().cloned().collect();
        let backward = reduce_in_order(&d, &reversed).unwrap();
        let dev_f = reduction_vs_trace(&d, &forward).unwrap();
        let dev_b = reduction_vs_trace(&d, &backward).unwrap();
        println!("  reduction orders vs trace: deviations {dev_f:.3e}, {dev_b:.3e}");
    }
}
