//! Color systems and interface coherence.
//!
//! Builds a three-color system with two generator witnesses and their
//! composite, realizes each witness by a stochastic table, and verifies the
//! category axioms plus path coherence: the kernel of a composed witness
//! equals the composition of the step kernels under every bracketing.
//!
//! Run with: cargo run --example typed_interfaces

use polykern::color::{
    check_color_system, check_interface_coherence, ColorSystem, InterfaceSystem, KMorId,
};
use polykern::kernel::{compose_unary, finite_table_kernel, Kernel};
use polykern::space::{Object, Profile};
use polykern::stream::StreamSeed;
use std::collections::BTreeMap;

fn main() {
    // colors raw -> features -> labels, with witnesses extract and classify
    let mut cs = ColorSystem::default();
    cs.add_color("raw");
    cs.add_color("features");
    cs.add_color("labels");
    let extract = cs.add_generator("extract", "raw", "features");
    let classify = cs.add_generator("classify", "features", "labels");
    cs.add_composite(&classify, &extract, "pipeline").unwrap();
    cs.close_identities();

    let report = check_color_system(&cs);
    println!(
        "color-system axioms: {}",
        if report.is_empty() { "ok" } else { "VIOLATED" }
    );
    println!("  iota(pipeline) = {:?}", cs.iota[&KMorId::new("pipeline")]);

    // concrete objects and interface kernels
    let r = Object::finite("R", &["r0", "r1"]).with_color("raw");
    let f = Object::finite("F", &["f0", "f1", "f2"]).with_color("features");
    let l = Object::finite("L", &["yes", "no"]).with_color("labels");

    let kappa_extract = finite_table_kernel(
        "kappa_extract",
        Profile::single(r.clone()),
        Profile::single(f.clone()),
        vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.2, 0.7]],
    )
    .unwrap();
    let kappa_classify = finite_table_kernel(
        "kappa_classify",
        Profile::single(f.clone()),
        Profile::single(l.clone()),
        vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.2, 0.8]],
    )
    .unwrap();
    // the composite witness must carry the composite kernel
    let chained = compose_unary(&kappa_extract, &kappa_classify).unwrap();
    let kappa_pipeline = Kernel::new(
        "kappa_pipeline",
        chained.source.clone(),
        chained.target.clone(),
        chained.rep.clone(),
    )
    .unwrap();

    let mut is = InterfaceSystem::new();
    for o in [&r, &f, &l] {
        is.add_identity(&cs, o).unwrap();
    }
    is.add_witness(&extract, &r, &f, kappa_extract).unwrap();
    is.add_witness(&classify, &f, &l, kappa_classify).unwrap();
    is.add_witness(&KMorId::new("pipeline"), &r, &l, kappa_pipeline)
        .unwrap();

    let objects: BTreeMap<String, Object> =
        [r, f, l].into_iter().map(|o| (o.name.clone(), o)).collect();
    let outcome = check_interface_coherence(
        &is,
        &cs,
        &objects,
        3,
        &BTreeMap::new(),
        10_000,
        0.01,
        StreamSeed(0),
    );
    println!(
        "interface coherence: {} paths checked, max exact deviation {:.3e}",
        outcome.paths_checked, outcome.max_exact_deviation
    );
    println!(
        "  report: {}",
        if outcome.report.is_empty() {
            "ok"
        } else {
            "VIOLATED"
        }
    );
}
