//! Transporting diagrams and parameters along a growing graph.
//!
//! Three states related by inclusions each carry a registry of typed objects
//! and kernels. State pushforwards relabel a diagram into the larger state;
//! parameter pushforwards copy persistent coordinates and zero-initialize
//! the blocks of new edges. Both are strictly functorial, and pushing a
//! diagram preserves its trace kernel.
//!
//! Run with: cargo run --example dynamic_graph

use polykern::ccmp::{check_strict_functoriality, pushforward_diagram, MorId, StateId};
use polykern::color::colored_trace_exact;
use polykern::project::{CompiledDiagram, ProjectFile};
use polykern::space::Value;
use std::collections::BTreeMap;
use std::path::Path;

fn main() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dynamic_graph.json");
    let project = ProjectFile::load(&fixture).unwrap().compile().unwrap();
    let ccmp = project.ccmp.as_ref().unwrap();

    println!("states and parameter dimensions:");
    for (t, dim) in &ccmp.param_dims {
        let reg = ccmp.state(t).unwrap();
        println!(
            "  {t}: {} objects, {} kernels, dim Theta = {dim}",
            reg.objects.len(),
            reg.kernels.len()
        );
    }

    // strict functoriality of both assignments over the index category
    let thetas: BTreeMap<StateId, Vec<Vec<f64>>> = ccmp
        .param_dims
        .iter()
        .map(|(t, &d)| (t.clone(), vec![(0..d).map(|i| 0.1 * i as f64).collect()]))
        .collect();
    let report = check_strict_functoriality(ccmp, &thetas);
    println!(
        "strict functoriality: {}",
        if report.is_empty() { "ok" } else { "VIOLATED" }
    );

    // push the observation diagram from g0 to g2, directly and in two steps
    let cd = match project.diagram("g0/obs-chain").unwrap() {
        CompiledDiagram::Colored(cd) => cd.clone(),
        _ => unreachable!(),
    };
    let g1 = ccmp.state(&StateId::new("g1")).unwrap();
    let g2 = ccmp.state(&StateId::new("g2")).unwrap();
    let step = pushforward_diagram(ccmp.state_push(&MorId::new("a01")).unwrap(), g1, &cd).unwrap();
    let twice =
        pushforward_diagram(ccmp.state_push(&MorId::new("a12")).unwrap(), g2, &step).unwrap();
    let direct =
        pushforward_diagram(ccmp.state_push(&MorId::new("a02")).unwrap(), g2, &cd).unwrap();
    println!("pushing g0/obs-chain along a02:");
    for (v, k) in &direct.vertices {
        println!("  vertex {v} now labelled {}", k.name);
        assert_eq!(k.name, twice.vertices[v].name, "composite = sequential");
    }

    // trace preservation: the image diagram has the same trace kernel
    let g0 = ccmp.state(&StateId::new("g0")).unwrap();
    let mut worst = 0.0f64;
    for x in 0..2usize {
        let (_, before) = colored_trace_exact(&cd, &g0.interfaces, &[Value::FiniteIdx(x)]).unwrap();
        let (_, after) =
            colored_trace_exact(&direct, &g2.interfaces, &[Value::FiniteIdx(x)]).unwrap();
        worst = worst.max(before.max_abs_diff(&after));
    }
    println!("trace preservation under the pushforward: max deviation {worst:.3e}");

    // parameter transport: copy the persistent block, zero-init new edges
    let theta_g0 = vec![0.11, 0.22, 0.33, 0.44];
    let pushed = ccmp
        .param_push(&MorId::new("a02"))
        .unwrap()
        .apply(&theta_g0)
        .unwrap();
    println!("theta at g0 {theta_g0:?} transports to g2 {pushed:?}");
}
