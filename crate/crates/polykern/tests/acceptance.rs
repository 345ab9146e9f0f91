//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Every tolerance is pinned in code. The suite runs against the bundled
//! fixtures plus randomized structures generated from fixed seeds.

use polykern::ccmp::{
    check_cmp_functor, check_strict_functoriality, pullback_gradient, pushforward_diagram,
    CompositeFixture, MorId, StateId,
};
use polykern::color::{
    check_interface_coherence, colored_trace_exact, interface_expand, reduce_colored_in_order,
    reduce_in_order, reduction_vs_trace, ColorSystem, ColoredDiagram, InterfaceSystem,
};
use polykern::diagram::{compose_slotwise, Diagram, VertexId, Wire};
use polykern::kernel::{finite_table_kernel, identity_kernel, table_max_diff, KernelRep};
use polykern::learn::{
    exact_q_expectation, expected_objective_exact, expected_objective_mc, grad_exact_enumeration,
    grad_reverse_mode_mc, score_estimator_expectation, train_sgd, GradOptions, TrainMode,
};
use polykern::numeric::{central_diff_grad, max_rel_err, FD_STEP};
use polykern::project::{CompiledDiagram, CompiledProject, ProjectFile};
use polykern::space::{Object, Profile, SpaceDesc, Value};
use polykern::stream::{mean_and_std_error, StreamSeed};
use polykern::trace::{trace_exact, trace_sample};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn fixture(name: &str) -> CompiledProject {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"));
    ProjectFile::load(&path).unwrap().compile().unwrap()
}

fn plain_diagram(p: &CompiledProject, name: &str) -> Diagram {
    match p.diagram(name).unwrap() {
        CompiledDiagram::Plain(d) => d.clone(),
        CompiledDiagram::Colored(_) => panic!("{name} is colored"),
    }
}

fn colored_diagram(p: &CompiledProject, name: &str) -> ColoredDiagram {
    match p.diagram(name).unwrap() {
        CompiledDiagram::Colored(cd) => cd.clone(),
        CompiledDiagram::Plain(_) => panic!("{name} is plain"),
    }
}

fn pass(criterion: &str, detail: String) {
    println!("PASS {criterion}: {detail}");
}

/// Gaussian slotwise composition: exact composite mean `a + c2` and variance
/// `sigma1^2 + sigma2^2` to 1e-12; Monte Carlo agreement within 5 standard
/// errors; the passthrough output equals the input exactly.
#[test]
fn criterion_01_gaussian_slotwise() {
    let p = fixture("gaussian_chain");
    let spread = p.kernels["spread"].clone();
    let add = p.kernels["add"].clone();
    let (s1sq, s2sq) = (0.64, 0.36);

    // exact composition stays in the Gaussian-linear class
    let composite = compose_slotwise(&spread, &add, 1, 1)
        .unwrap()
        .kernel()
        .unwrap();
    let g = match &composite.rep {
        KernelRep::GaussianLinear(g) => g.clone(),
        other => panic!("composite is {other:?}"),
    };
    // mean map: d = a + c2, b2 = a; variance (s1^2 + s2^2, 0)
    let tol = 1e-12;
    assert!((g.weight.at(0, 0) - 1.0).abs() <= tol); // a -> d
    assert!((g.weight.at(0, 1) - 1.0).abs() <= tol); // a -> b2
    assert!((g.weight.at(1, 0) - 1.0).abs() <= tol); // c2 -> d
    assert!((g.weight.at(1, 1) - 0.0).abs() <= tol);
    assert!(g.bias.iter().all(|b| b.abs() <= tol));
    assert!((g.cov_diag[0] - (s1sq + s2sq)).abs() <= tol);
    assert!(g.cov_diag[1].abs() <= tol);

    // Monte Carlo over the two-vertex diagram
    let d = plain_diagram(&p, "chain");
    let (a, c2) = (0.7, -0.3);
    let x = vec![Value::real(a), Value::real(c2)];
    let n = 100_000;
    let seed = StreamSeed(20260810);
    let mut ds = Vec::with_capacity(n);
    for s in 0..n {
        let mut rng = seed.substream("gaussian-mc", s as u64);
        let t = trace_sample(&d, &x, &mut rng).unwrap();
        let dv = t.external_output[0].as_scalar().unwrap();
        let b2 = t.external_output[1].as_scalar().unwrap();
        assert_eq!(b2, a, "passthrough output must equal the input exactly");
        ds.push(dv);
    }
    let (mean, se_mean) = mean_and_std_error(&ds);
    assert!(
        (mean - (a + c2)).abs() <= 5.0 * se_mean,
        "mean {mean} vs {}",
        a + c2
    );
    let var = ds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
    let target_var = s1sq + s2sq;
    assert!(
        (var - target_var).abs() <= 5.0 * se_var,
        "var {var} vs {target_var}"
    );
    pass(
        "criterion 1 (gaussian slotwise composition)",
        format!("exact params to 1e-12; MC mean {mean:.4} var {var:.4} in 5-sigma bands"),
    );
}

/// Diagnosis workflow: P(antibiotic) estimated over 1e5 samples lies within
/// 0.5 +- 5 * sqrt(0.25/1e5).
#[test]
fn criterion_02_diagnosis_workflow() {
    let p = fixture("diagnosis");
    let cd = colored_diagram(&p, "workflow");
    let d = interface_expand(&cd, &p.interfaces).unwrap();
    let n = 100_000;
    let seed = StreamSeed(55);
    let mut hits = 0usize;
    for s in 0..n {
        let mut rng = seed.substream("diagnosis-mc", s as u64);
        let t = trace_sample(&d, &[Value::FiniteIdx(0)], &mut rng).unwrap();
        if t.external_output[0] == Value::FiniteIdx(0) {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / n as f64;
    let band = 5.0 * (0.25f64 / n as f64).sqrt();
    assert!(
        (p_hat - 0.5).abs() <= band,
        "P(antibiotic) = {p_hat}, band {band}"
    );
    pass(
        "criterion 2 (diagnosis workflow)",
        format!("P(antibiotic) = {p_hat:.4} in 0.5 +- {band:.4}"),
    );
}

/// Bayesian-network fragments: exact traces equal independent hand-coded
/// sums to 1e-12, and both bracketing orders of each fragment reduce to the
/// same table.
#[test]
fn criterion_03_bayes_fragments() {
    let p = fixture("bayes_fragments");
    let m1 = [[0.9, 0.1], [0.3, 0.7]];
    let m2 = [[0.5, 0.5], [0.2, 0.8]];
    let m3 = [[0.6, 0.4], [0.1, 0.9]];

    let chain = plain_diagram(&p, "chain");
    for a in 0..2usize {
        let (_, marg) = trace_exact(&chain, &[Value::FiniteIdx(a)]).unwrap();
        for d in 0..2usize {
            let mut expect = 0.0;
            for b in 0..2 {
                for c in 0..2 {
                    expect += m3[c][d] * m2[b][c] * m1[a][b];
                }
            }
            assert!((marg.probs[d] - expect).abs() <= 1e-12);
        }
    }

    let n1 = [[0.6, 0.4], [0.1, 0.9]];
    let n2 = [[0.7, 0.3], [0.4, 0.6]];
    let n3 = [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1], [0.3, 0.7]];
    let v = plain_diagram(&p, "vstructure");
    for a in 0..2usize {
        for c in 0..2usize {
            let x = vec![Value::FiniteIdx(a), Value::FiniteIdx(c)];
            let (_, marg) = trace_exact(&v, &x).unwrap();
            for e in 0..2usize {
                let mut expect = 0.0;
                for b in 0..2 {
                    for dd in 0..2 {
                        expect += n3[2 * b + dd][e] * n1[a][b] * n2[c][dd];
                    }
                }
                assert!((marg.probs[e] - expect).abs() <= 1e-12);
            }
        }
    }

    // both bracketing orders of each fragment agree
    for name in ["chain", "vstructure"] {
        let d = plain_diagram(&p, name);
        let wires: Vec<Wire> = d.internal_wires.iter().cloned().collect();
        let fwd = reduce_in_order(&d, &wires).unwrap();
        let rev: Vec<Wire> = wires.iter().rev().cloned().collect();
        let bwd = reduce_in_order(&d, &rev).unwrap();
        assert_eq!(fwd.inputs, bwd.inputs);
        assert_eq!(fwd.outputs, bwd.outputs);
        assert!(table_max_diff(&fwd.kernel, &bwd.kernel).unwrap() <= 1e-12);
        assert!(reduction_vs_trace(&d, &fwd).unwrap() <= 1e-12);
    }
    pass(
        "criterion 3 (bayes fragments)",
        "exact traces match hand sums to 1e-12; bracketings agree".into(),
    );
}

/// Build a random all-finite diagram: up to `max_v` vertices with 1-2 slots
/// per side, spaces of 2-4 points, random acyclic wiring.
fn random_finite_diagram(rng: &mut rand_chacha::ChaCha12Rng, max_v: usize, tree: bool) -> Diagram {
    loop {
        let n = rng.gen_range(2..=max_v);
        let n_in: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=2)).collect();
        let n_out: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=2)).collect();

        // wires: inputs of later vertices pull from free outputs of earlier ones
        let mut wires: Vec<((usize, usize), (usize, usize))> = Vec::new();
        let mut used_out: Vec<(usize, usize)> = Vec::new();
        for v in 1..n {
            let mut attached = false;
            for q in 1..=n_in[v] {
                let connect = if tree { !attached } else { rng.gen_bool(0.6) };
                if !connect {
                    continue;
                }
                let free: Vec<(usize, usize)> = (0..v)
                    .flat_map(|u| (1..=n_out[u]).map(move |p| (u, p)))
                    .filter(|s| !used_out.contains(s))
                    .collect();
                if let Some(&(u, p)) = free.choose(rng) {
                    wires.push(((u, p), (v, q)));
                    used_out.push((u, p));
                    attached = true;
                }
            }
            if tree && !attached {
                // a tree needs every vertex attached; retry the whole draw
                wires.clear();
                break;
            }
        }
        if tree && wires.len() != n - 1 {
            continue;
        }

        // spaces: wires share a size; free slots get their own
        let mut out_sizes: Vec<Vec<usize>> = n_out
            .iter()
            .map(|&k| (0..k).map(|_| rng.gen_range(2..=4)).collect())
            .collect();
        let mut in_sizes: Vec<Vec<usize>> = n_in
            .iter()
            .map(|&k| (0..k).map(|_| rng.gen_range(2..=4)).collect())
            .collect();
        for ((u, p), (v, q)) in &wires {
            let size = rng.gen_range(2..=4);
            out_sizes[*u][*p - 1] = size;
            in_sizes[*v][*q - 1] = size;
        }

        // joint outcome guard
        let joint: u128 = (0..n)
            .map(|v| out_sizes[v].iter().product::<usize>() as u128)
            .product();
        if joint > 4096 {
            continue;
        }

        let mut d = Diagram::new();
        for v in 0..n {
            let source = Profile(
                in_sizes[v]
                    .iter()
                    .enumerate()
                    .map(|(q, &s)| Object::new(format!("v{v}i{q}"), SpaceDesc::finite_n(s)))
                    .collect(),
            );
            let target = Profile(
                out_sizes[v]
                    .iter()
                    .enumerate()
                    .map(|(p, &s)| Object::new(format!("v{v}o{p}"), SpaceDesc::finite_n(s)))
                    .collect(),
            );
            let rows = source.space().cardinality().unwrap();
            let cols = target.space().cardinality().unwrap();
            let table: Vec<Vec<f64>> = (0..rows)
                .map(|_| {
                    let raw: Vec<f64> = (0..cols).map(|_| -rng.gen::<f64>().ln()).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / sum).collect()
                })
                .collect();
            let k = finite_table_kernel(format!("k{v}"), source, target, table).unwrap();
            d.add_vertex(format!("v{v}"), k);
        }
        for ((u, p), (v, q)) in &wires {
            d.add_wire(
                &VertexId::new(format!("v{u}")),
                *p,
                &VertexId::new(format!("v{v}")),
                *q,
            );
        }
        d.autofill_external();
        if d.validate().is_empty() {
            return d;
        }
    }
}

/// Order independence: 100 random finite diagrams, every topological order
/// enumerated, max joint deviation at or below 1e-12.
#[test]
fn criterion_04_order_independence() {
    let seed = StreamSeed(404);
    let mut worst = 0.0f64;
    let mut total_orders = 0usize;
    for i in 0..100 {
        let mut rng = seed.substream("order-diagrams", i);
        let d = random_finite_diagram(&mut rng, 6, false);
        let orders = d.all_topo_orders().unwrap();
        total_orders += orders.len();
        let profile = d.input_profile().unwrap();
        let n_inputs = profile.space().cardinality().unwrap();
        let x = profile.values_at(rng.gen_range(0..n_inputs)).unwrap();
        let dev = polykern::trace::order_invariance_check(&d, &x, &orders).unwrap();
        worst = worst.max(dev);
        assert!(dev <= 1e-12, "diagram {i}: deviation {dev}");
        // marginals stay normalized
        let (_, marginal) = trace_exact(&d, &x).unwrap();
        let total: f64 = marginal.probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "diagram {i}: total {total}");
    }
    pass(
        "criterion 4 (order independence)",
        format!("100 diagrams, {total_orders} orders total, max deviation {worst:.3e}"),
    );
}

/// Unit, associativity, and interchange laws for plain and colored slotwise
/// composition, over randomized finite fixtures and all reduction orders.
#[test]
fn criterion_05_structural_laws() {
    let seed = StreamSeed(505);

    // unit laws on random kernels, every slot
    for i in 0..10u64 {
        let mut rng = seed.substream("units", i);
        let d = random_finite_diagram(&mut rng, 2, false);
        for k in d.vertices.values() {
            for j in 1..=k.source.arity() {
                let id = identity_kernel(k.source.slot(j).unwrap());
                let pre = compose_slotwise(&id, k, 1, j).unwrap().kernel().unwrap();
                assert!(table_max_diff(&pre, k).unwrap() <= 1e-12);
            }
            for i in 1..=k.target.arity() {
                let id = identity_kernel(k.target.slot(i).unwrap());
                let post = compose_slotwise(k, &id, i, 1).unwrap().kernel().unwrap();
                assert!(table_max_diff(&post, k).unwrap() <= 1e-12);
            }
        }
    }

    // associativity and interchange: every reduction order of a random tree
    // denotes the diagram's trace kernel (comparison aligns the generated
    // slot orders with the diagram's declared external orderings, since
    // orders that attach sibling consumers differently generate permuted
    // external profiles)
    let mut orders_checked = 0usize;
    for i in 0..10u64 {
        let mut rng = seed.substream("trees", i);
        let d = random_finite_diagram(&mut rng, 5, true);
        let wires: Vec<Wire> = d.internal_wires.iter().cloned().collect();
        let perms = permutations(&wires);
        orders_checked += perms.len();
        for order in &perms {
            let r = reduce_in_order(&d, order).unwrap();
            let dev = reduction_vs_trace(&d, &r).unwrap();
            assert!(dev <= 1e-12, "tree {i}: deviation {dev}");
        }
    }

    // colored: all reduction orders of 5-vertex colored fixtures denote the
    // trace of the interface expansion
    let mut colored_orders = 0usize;
    for i in 0..5u64 {
        let mut rng = seed.substream("colored-trees", i);
        let (cd, cs, is) = random_colored_tree(&mut rng);
        let wires: Vec<Wire> = cd.internal_wires.keys().cloned().collect();
        let perms = permutations(&wires);
        colored_orders += perms.len();
        let expanded = interface_expand(&cd, &is).unwrap();
        for order in &perms {
            let r = reduce_colored_in_order(&cd, &cs, &is, order).unwrap();
            let dev = reduction_vs_trace(&expanded, &r).unwrap();
            assert!(dev <= 1e-12, "colored tree {i}: deviation {dev}");
        }
    }
    pass(
        "criterion 5 (unit/associativity/interchange)",
        format!("{orders_checked} plain and {colored_orders} colored reduction orders agree"),
    );
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

/// 5-vertex colored tree whose wires all cross a nontrivial interface.
fn random_colored_tree(
    rng: &mut rand_chacha::ChaCha12Rng,
) -> (ColoredDiagram, ColorSystem, InterfaceSystem) {
    let mut cs = ColorSystem::default();
    cs.add_color("c0");
    cs.add_color("c1");
    let w = cs.add_generator("w", "c0", "c1");
    cs.close_identities();

    let out_obj = Object::finite("Out2", &["o0", "o1"]).with_color("c0");
    let in_obj = Object::finite("In3", &["i0", "i1", "i2"]).with_color("c1");
    let mut is = InterfaceSystem::new();
    is.add_identity(&cs, &out_obj).unwrap();
    is.add_identity(&cs, &in_obj).unwrap();
    let kappa_rows: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let raw: Vec<f64> = (0..3).map(|_| -rng.gen::<f64>().ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let kappa = finite_table_kernel(
        "kappa_w",
        Profile::single(out_obj.clone()),
        Profile::single(in_obj.clone()),
        kappa_rows,
    )
    .unwrap();
    is.add_witness(&w, &out_obj, &in_obj, kappa).unwrap();

    let rand_table = |rng: &mut rand_chacha::ChaCha12Rng, rows: usize, cols: usize| {
        (0..rows)
            .map(|_| {
                let raw: Vec<f64> = (0..cols).map(|_| -rng.gen::<f64>().ln()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect::<Vec<Vec<f64>>>()
    };
    let leaf = |rng: &mut rand_chacha::ChaCha12Rng, name: &str| {
        finite_table_kernel(
            name,
            Profile::single(Object::finite("X2", &["x0", "x1"]).with_color("c0")),
            Profile::single(out_obj.clone()),
            rand_table(rng, 2, 2),
        )
        .unwrap()
    };
    // k0, k1 feed k3; k2 feeds k4; k3 feeds k4
    let k0 = leaf(rng, "k0");
    let k1 = leaf(rng, "k1");
    let k2 = leaf(rng, "k2");
    let k3 = finite_table_kernel(
        "k3",
        Profile::of(vec![in_obj.clone(), in_obj.clone()]),
        Profile::single(out_obj.clone()),
        rand_table(rng, 9, 2),
    )
    .unwrap();
    let k4 = finite_table_kernel(
        "k4",
        Profile::of(vec![in_obj.clone(), in_obj.clone()]),
        Profile::single(Object::finite("E2", &["e0", "e1"]).with_color("c0")),
        rand_table(rng, 9, 2),
    )
    .unwrap();

    let mut cd = ColoredDiagram::new();
    let v0 = cd.add_vertex("k0", k0);
    let v1 = cd.add_vertex("k1", k1);
    let v2 = cd.add_vertex("k2", k2);
    let v3 = cd.add_vertex("k3", k3);
    let v4 = cd.add_vertex("k4", k4);
    cd.add_wire(&v0, 1, &v3, 1, &w);
    cd.add_wire(&v1, 1, &v3, 2, &w);
    cd.add_wire(&v2, 1, &v4, 1, &w);
    cd.add_wire(&v3, 1, &v4, 2, &w);
    cd.autofill_external();
    assert!(cd.validate(&is).is_empty(), "{}", cd.validate(&is));
    (cd, cs, is)
}

/// Interface coherence on the bundled color fixtures: exact table equalities
/// on finite witness paths up to length 3, and a statistical total-variation
/// check for the continuous path.
#[test]
fn criterion_06_interface_coherence() {
    let p = fixture("diagnosis");
    let outcome = check_interface_coherence(
        &p.interfaces,
        &p.colors,
        &p.objects,
        3,
        &p.coherence_grids,
        100_000,
        0.01,
        StreamSeed(606),
    );
    assert!(outcome.report.is_empty(), "{}", outcome.report);
    assert!(outcome.max_exact_deviation <= 1e-12);
    assert!(
        !outcome.statistical_paths.is_empty(),
        "the continuous interface path must be checked statistically"
    );
    assert!(outcome.max_tv <= 0.01, "TV {}", outcome.max_tv);

    // an all-finite witness system checks exactly on every path
    let dg = fixture("dynamic_graph");
    let outcome2 = check_interface_coherence(
        &dg.interfaces,
        &dg.colors,
        &dg.objects,
        3,
        &dg.coherence_grids,
        10_000,
        0.01,
        StreamSeed(607),
    );
    assert!(outcome2.report.is_empty(), "{}", outcome2.report);
    pass(
        "criterion 6 (interface coherence)",
        format!(
            "{} paths exact dev {:.3e}; continuous path TV {:.4} at 1e5 samples",
            outcome.paths_checked, outcome.max_exact_deviation, outcome.max_tv
        ),
    );
}

fn finite_learn_theta() -> Vec<f64> {
    vec![
        0.3, -0.2, 0.5, -0.4, 0.1, 0.2, // encoder logits
        0.6, -0.3, -0.2, 0.4, 0.1, -0.5, // decoder logits
    ]
}

/// Score-function gradients on the all-finite fixture: enumeration matches
/// finite differences (1e-6 relative), the per-sample estimator expectation
/// matches enumeration (1e-12), the exact-Q local rule matches (1e-12), and
/// the Monte Carlo estimate at 5e4 samples sits within 5 standard errors
/// per coordinate.
#[test]
fn criterion_07_score_function_gradients() {
    let p = fixture("finite_learn");
    let pd = p.param_diagram("classifier").unwrap();
    let obj = &p.objective("matching").unwrap().spec;
    let is = &p.interfaces;
    let theta = finite_learn_theta();

    let exact = grad_exact_enumeration(pd, is, &theta, obj).unwrap();
    let (pd2, is2, obj2) = (pd.clone(), is.clone(), obj.clone());
    let fd = central_diff_grad(
        &move |t: &[f64]| expected_objective_exact(&pd2, &is2, t, &obj2).unwrap(),
        &theta,
        FD_STEP,
    );
    let fd_err = max_rel_err(&exact, &fd);
    assert!(fd_err <= 1e-6, "enumeration vs fd: {fd_err}");

    let est_exp = score_estimator_expectation(pd, is, &theta, obj, 0.0).unwrap();
    let bias = exact
        .iter()
        .zip(&est_exp)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(bias <= 1e-12, "estimator expectation bias {bias}");

    // the local rule with the exact conditional expected future objective
    let q_exp = exact_q_expectation(pd, is, &theta, obj).unwrap();
    let q_dev = est_exp
        .iter()
        .zip(&q_exp)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(q_dev <= 1e-12, "exact-Q vs realized-J deviation {q_dev}");

    // baseline invariance in expectation
    let with_baseline = score_estimator_expectation(pd, is, &theta, obj, 0.42).unwrap();
    let base_dev = est_exp
        .iter()
        .zip(&with_baseline)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(
        base_dev <= 1e-12,
        "baseline shifts the expectation by {base_dev}"
    );

    let est = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        50_000,
        StreamSeed(707),
        "criterion7",
        GradOptions::default(),
    )
    .unwrap();
    for (c, ((g, e), se)) in est
        .flat
        .iter()
        .zip(&exact)
        .zip(&est.flat_std_err)
        .enumerate()
    {
        assert!(
            (g - e).abs() <= (5.0 * se).max(1e-9),
            "coordinate {c}: {g} vs {e} (se {se})"
        );
    }
    pass(
        "criterion 7 (score-function gradients)",
        format!(
            "fd rel err {fd_err:.3e}; unbiasedness {bias:.3e}; exact-Q {q_dev:.3e}; MC within 5 se"
        ),
    );
}

/// Pathwise gradients on the Gaussian reparameterized chain: per-sample
/// frozen-noise finite differences agree to 1e-6 relative, and the averaged
/// estimate at 1e5 samples matches the gradient of the closed-form expected
/// objective to 1e-3 relative per coordinate.
#[test]
fn criterion_08_pathwise_gradients() {
    let p = fixture("pathwise_learn");
    let pd = p.param_diagram("gauss-chain").unwrap();
    let obj = &p.objective("fit").unwrap().spec;
    let is = &p.interfaces;
    let theta = vec![1.2, 0.3, 0.8, -0.2];

    // frozen-noise: estimator mean over a small common-random-number sample
    // equals finite differences of the same-seed objective mean
    let n = 8;
    let seed = StreamSeed(808);
    let est_small = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        n,
        seed,
        "criterion8-frozen",
        GradOptions::default(),
    )
    .unwrap();
    let (pd2, is2, obj2) = (pd.clone(), is.clone(), obj.clone());
    let fd_frozen = central_diff_grad(
        &move |t: &[f64]| {
            expected_objective_mc(&pd2, &is2, t, &obj2, n, seed, "criterion8-frozen", false)
                .unwrap()
                .0
        },
        &theta,
        FD_STEP,
    );
    let frozen_err = max_rel_err(&est_small.flat, &fd_frozen);
    assert!(frozen_err <= 1e-6, "frozen-noise rel err {frozen_err}");

    // averaged estimate against the closed-form expected objective
    // L = (w2 (w1 x + b1) + b2 - r)^2 + w2^2 s1^2 + s2^2 at x = 1, r = -4
    let closed_form = |t: &[f64]| -> f64 {
        let (w1, b1, w2, b2) = (t[0], t[1], t[2], t[3]);
        let (x, r, s1, s2) = (1.0, -4.0, 0.1, 0.1);
        let m = w2 * (w1 * x + b1) + b2;
        (m - r) * (m - r) + w2 * w2 * s1 * s1 + s2 * s2
    };
    let est = grad_reverse_mode_mc(
        pd,
        is,
        &theta,
        obj,
        100_000,
        StreamSeed(809),
        "criterion8-avg",
        GradOptions::default(),
    )
    .unwrap();
    let fd_exact = central_diff_grad(&closed_form, &theta, FD_STEP);
    let avg_err = max_rel_err(&est.flat, &fd_exact);
    assert!(avg_err <= 1e-3, "averaged rel err {avg_err}");
    pass(
        "criterion 8 (pathwise gradients)",
        format!("frozen-noise rel err {frozen_err:.3e}; averaged rel err {avg_err:.3e} at 1e5"),
    );
}

/// Co-indexed functoriality on the dynamic-graph fixture: identity and
/// composite equalities of both pushforwards, functor preservation checks,
/// and trace-of-image equal to image-of-trace on the finite sub-fixtures.
#[test]
fn criterion_09_ccmp_functoriality() {
    let p = fixture("dynamic_graph");
    let ccmp = p.ccmp.as_ref().unwrap();

    let thetas: BTreeMap<StateId, Vec<Vec<f64>>> = ccmp
        .param_dims
        .iter()
        .map(|(t, &d)| {
            (
                t.clone(),
                vec![
                    (0..d).map(|i| 0.1 * (i as f64 + 1.0)).collect::<Vec<f64>>(),
                    (0..d).map(|i| (0.7 * (i as f64 + 1.0)).sin()).collect(),
                ],
            )
        })
        .collect();
    let report = check_strict_functoriality(ccmp, &thetas);
    assert!(report.is_empty(), "{report}");

    // every inclusion is a CMP-functor preserving the observation composite
    for m in ["a01", "a12", "a02"] {
        let mor = MorId::new(m);
        let (src, dst) = ccmp.index.typing(&mor).unwrap().clone();
        let g = ccmp.state_push(&mor).unwrap();
        let src_reg = ccmp.state(&src).unwrap();
        let dst_reg = ccmp.state(&dst).unwrap();
        let fixtures = vec![CompositeFixture {
            k: format!("{src}/flip1"),
            l: format!("{src}/flip2"),
            i: 1,
            j: 1,
            witness: None,
        }];
        let report = check_cmp_functor(g, src_reg, dst_reg, &p.colors, &fixtures);
        assert!(report.is_empty(), "{m}: {report}");
    }

    // diagram pushforwards: identity, composite, and trace preservation
    let cd = colored_diagram(&p, "g0/obs-chain");
    let id_g0 = MorId::new("id_g0");
    let g0 = ccmp.state(&StateId::new("g0")).unwrap();
    let same = pushforward_diagram(ccmp.state_push(&id_g0).unwrap(), g0, &cd).unwrap();
    for (v, k) in &same.vertices {
        assert_eq!(k.name, cd.vertices[v].name);
    }

    let a01 = ccmp.state_push(&MorId::new("a01")).unwrap();
    let a12 = ccmp.state_push(&MorId::new("a12")).unwrap();
    let a02 = ccmp.state_push(&MorId::new("a02")).unwrap();
    let g1 = ccmp.state(&StateId::new("g1")).unwrap();
    let g2 = ccmp.state(&StateId::new("g2")).unwrap();
    let step = pushforward_diagram(a01, g1, &cd).unwrap();
    let sequential = pushforward_diagram(a12, g2, &step).unwrap();
    let direct = pushforward_diagram(a02, g2, &cd).unwrap();
    for (v, k) in &direct.vertices {
        assert_eq!(k.name, sequential.vertices[v].name);
    }

    // trace of the image equals the image of the trace (equal tables here,
    // since the pushforward relabels kernels with identical numerics)
    let mut worst = 0.0f64;
    for x in 0..2usize {
        let (_, src_marg) =
            colored_trace_exact(&cd, &g0.interfaces, &[Value::FiniteIdx(x)]).unwrap();
        let (_, img_marg) =
            colored_trace_exact(&direct, &g2.interfaces, &[Value::FiniteIdx(x)]).unwrap();
        worst = worst.max(src_marg.max_abs_diff(&img_marg));
    }
    assert!(worst <= 1e-12, "trace preservation deviation {worst}");
    pass(
        "criterion 9 (co-indexed functoriality)",
        format!("identity/composite equalities exact; trace preservation {worst:.3e}"),
    );
}

/// Gradient transport: pull the target-state gradient back along a nonlinear
/// parameter pushforward and compare with finite differences of the
/// pulled-back objective; composite pullbacks factor through sequential ones.
#[test]
fn criterion_10_gradient_transport() {
    let p = fixture("dynamic_graph");
    let ccmp = p.ccmp.as_ref().unwrap();
    let warp = ccmp.param_push(&MorId::new("warp")).unwrap();
    assert!(warp.check_jacobian(&[vec![0.3, -0.4]]).unwrap() <= 1e-4);

    // objective at the target state: a single three-way logit vertex
    let cs = {
        let mut cs = ColorSystem::discrete(&["t"]);
        cs.close_identities();
        cs
    };
    let unit = Object::finite("U", &["u"]).with_color("t");
    let tri = Object::finite("T", &["t0", "t1", "t2"]).with_color("t");
    let mut is = InterfaceSystem::new();
    is.add_identity(&cs, &unit).unwrap();
    is.add_identity(&cs, &tri).unwrap();
    let mut pd = polykern::learn::ParamDiagram::new();
    let v = pd.add_param(
        "head",
        polykern::learn::ParamKernel::logit_table(
            "head",
            Profile::single(unit.clone()),
            Profile::single(tri.clone()),
        )
        .unwrap(),
    );
    pd.external_inputs = vec![(v.clone(), 1)];
    pd.external_outputs = vec![(v.clone(), 1)];
    let obj = polykern::learn::ObjectiveSpec {
        name: "pick-t1".into(),
        ref_profile: Profile::empty(),
        rho_sampler: std::sync::Arc::new(|_rng: &mut rand_chacha::ChaCha12Rng| {
            (vec![Value::FiniteIdx(0)], vec![])
        }),
        rho_exact: Some(
            polykern::kernel::FiniteDist::point_mass(
                Profile::single(unit.clone()).space(),
                &Value::Tuple(vec![Value::FiniteIdx(0)]),
            )
            .unwrap(),
        ),
        f: std::sync::Arc::new(|y: &[Value], _| {
            if y[0] == Value::FiniteIdx(1) {
                0.0
            } else {
                1.0
            }
        }),
        grad_output_f: None,
    };

    let theta_t = vec![0.35, -0.6];
    let theta_target = warp.apply(&theta_t).unwrap();
    let grad_target = grad_exact_enumeration(&pd, &is, &theta_target, &obj).unwrap();
    let pulled = pullback_gradient(warp, &theta_t, &grad_target).unwrap();

    let (pd2, is2, obj2) = (pd.clone(), is.clone(), obj.clone());
    let warp2 = warp.clone();
    let fd = central_diff_grad(
        &move |t: &[f64]| {
            let img = warp2.apply(t).unwrap();
            expected_objective_exact(&pd2, &is2, &img, &obj2).unwrap()
        },
        &theta_t,
        FD_STEP,
    );
    let rel = max_rel_err(&pulled, &fd);
    assert!(rel <= 1e-4, "pullback vs fd rel err {rel}");

    // composite pullback equals sequential pullbacks
    let second = polykern::builtin::build_param_pushforward(
        "warp2",
        "tanh-affine",
        &[
            3.0, 3.0, 0.5, -0.2, 0.1, 0.3, 0.7, -0.4, -0.6, 0.2, 0.5, 0.05, -0.1, 0.2,
        ],
    )
    .unwrap();
    let composite = polykern::ccmp::ParamPushforward::compose(warp, &second);
    let theta_mid = warp.apply(&theta_t).unwrap();
    let g2 = vec![0.4, -0.7, 0.3];
    let direct = pullback_gradient(&composite, &theta_t, &g2).unwrap();
    let step = pullback_gradient(&second, &theta_mid, &g2).unwrap();
    let sequential = pullback_gradient(warp, &theta_t, &step).unwrap();
    let comp_dev = direct
        .iter()
        .zip(&sequential)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(comp_dev <= 1e-9, "composite pullback deviation {comp_dev}");
    pass(
        "criterion 10 (gradient transport)",
        format!("pullback vs fd rel err {rel:.3e}; composite deviation {comp_dev:.3e}"),
    );
}

/// Training sanity: exact-gradient descent decreases the exact objective
/// monotonically over 50 steps, and seed-pinned Monte Carlo training lands
/// within 0.05 of the exact-descent endpoint.
#[test]
fn criterion_11_training() {
    let p = fixture("finite_learn");
    let pd = p.param_diagram("classifier").unwrap();
    let obj = &p.objective("matching").unwrap().spec;
    let is = &p.interfaces;
    let theta0 = finite_learn_theta();

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
    for w in exact.objectives.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "objective increased: {} -> {}",
            w[0],
            w[1]
        );
    }

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
        StreamSeed(1111),
    )
    .unwrap();
    let exact_end = *exact.objectives.last().unwrap();
    let mc_end = expected_objective_exact(pd, is, mc.thetas.last().unwrap(), obj).unwrap();
    assert!(
        (mc_end - exact_end).abs() <= 0.05,
        "mc endpoint {mc_end} vs exact {exact_end}"
    );
    pass(
        "criterion 11 (training sanity)",
        format!(
            "exact descent {:.4} -> {:.4} monotone; MC endpoint {mc_end:.4}",
            exact.objectives[0], exact_end
        ),
    );
}
