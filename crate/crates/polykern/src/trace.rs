//! Trace semantics for finite acyclic diagrams.
//!
//! Evaluation follows a topological ordering: each vertex's input tuple is
//! assembled from the external input and earlier vertex outputs, the vertex
//! kernel is applied, and internal wires are integrated out. For all-finite
//! diagrams the joint law over vertex outputs is enumerated exactly; otherwise
//! diagrams are sampled. The joint law is keyed by vertex id, not by order
//! position, so it is independent of the ordering used to compute it.

use crate::diagram::{Diagram, VertexId};
use crate::error::{Error, Result};
use crate::kernel::FiniteDist;
use crate::space::{SpaceDesc, Value};
use crate::stream::{mean_and_std_error, StreamSeed};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Refuse exact enumeration above this many joint outcomes.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// One sampled trace: the external input, every vertex's output tuple, and
/// the external output selected from them.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample {
    pub external_input: Vec<Value>,
    pub vertex_outputs: BTreeMap<VertexId, Vec<Value>>,
    pub external_output: Vec<Value>,
}

/// Exact joint law of all vertex outputs, keyed by vertex id.
#[derive(Clone, Debug)]
pub struct FiniteJointDist {
    /// Vertex ids in ascending order; keys align with this list.
    pub vertices: Vec<VertexId>,
    /// Joint target space of each vertex.
    pub spaces: Vec<SpaceDesc>,
    /// Probability per joint outcome (one enumerated index per vertex).
    pub probs: BTreeMap<Vec<usize>, f64>,
}

impl FiniteJointDist {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Max absolute probability difference over the union of joint outcomes.
    pub fn max_abs_diff(&self, other: &FiniteJointDist) -> Result<f64> {
        if self.vertices != other.vertices {
            return Err(Error::invalid("joint laws over different vertex sets"));
        }
        let mut max = 0.0f64;
        for (k, &p) in &self.probs {
            let q = other.probs.get(k).copied().unwrap_or(0.0);
            max = max.max((p - q).abs());
        }
        for (k, &q) in &other.probs {
            if !self.probs.contains_key(k) {
                max = max.max(q.abs());
            }
        }
        Ok(max)
    }
}

/// Assemble the ordered input tuple of the vertex at position `pos`
/// (1-based) of a topological order, from the external input and the outputs
/// of earlier vertices.
pub fn input_assembly(
    d: &Diagram,
    order: &[VertexId],
    pos: usize,
    x: &[Value],
    prior_outputs: &BTreeMap<VertexId, Vec<Value>>,
) -> Result<Vec<Value>> {
    if pos < 1 || pos > order.len() {
        return Err(Error::SlotOutOfRange {
            index: pos,
            len: order.len(),
        });
    }
    let u = &order[pos - 1];
    let kernel = d.kernel(u)?;
    let mut input = Vec::with_capacity(kernel.source.arity());
    for q in 1..=kernel.source.arity() {
        let slot = (u.clone(), q);
        if let Some(w) = d.wire_into(&slot) {
            let outs = prior_outputs.get(&w.from.0).ok_or_else(|| {
                Error::invalid(format!(
                    "output of {} not available when assembling {}",
                    w.from.0, u
                ))
            })?;
            input.push(outs[w.from.1 - 1].clone());
        } else {
            let idx = d
                .external_inputs
                .iter()
                .position(|s| s == &slot)
                .ok_or_else(|| {
                    Error::invalid(format!("input slot {u}:{q} neither wired nor external"))
                })?;
            input.push(x[idx].clone());
        }
    }
    Ok(input)
}

fn check_enumeration_size(d: &Diagram) -> Result<()> {
    let mut size: u128 = 1;
    for k in d.vertices.values() {
        let n = k.target.space().cardinality()? as u128;
        size = size.saturating_mul(n);
        if size > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
    }
    Ok(())
}

/// Exact trace of an all-finite diagram: the joint law over all vertex
/// outputs and its pushforward to the external output profile.
pub fn trace_exact(d: &Diagram, x: &[Value]) -> Result<(FiniteJointDist, FiniteDist)> {
    let order = d.topo_sort()?;
    trace_exact_with_order(d, x, &order)
}

/// Exact trace evaluated along a caller-chosen topological order.
pub fn trace_exact_with_order(
    d: &Diagram,
    x: &[Value],
    order: &[VertexId],
) -> Result<(FiniteJointDist, FiniteDist)> {
    d.check_order(order)?;
    d.input_profile()?.check_values(x)?;
    check_enumeration_size(d)?;

    let sorted: Vec<VertexId> = d.vertices.keys().cloned().collect();
    let spaces: Vec<SpaceDesc> = sorted
        .iter()
        .map(|v| d.vertices[v].target.space())
        .collect();
    // position of each order entry in the sorted key list
    let sorted_pos: Vec<usize> = order
        .iter()
        .map(|v| sorted.binary_search(v).expect("order checked"))
        .collect();

    let out_profile = d.output_profile()?;
    let out_space = out_profile.space();
    let mut marginal = vec![0.0; out_space.cardinality()?];
    let mut joint: BTreeMap<Vec<usize>, f64> = BTreeMap::new();

    struct Ctx<'a> {
        d: &'a Diagram,
        order: &'a [VertexId],
        sorted_pos: &'a [usize],
        x: &'a [Value],
    }

    fn rec(
        ctx: &Ctx,
        pos: usize,
        prob: f64,
        outputs: &mut BTreeMap<VertexId, Vec<Value>>,
        key: &mut Vec<usize>,
        joint: &mut BTreeMap<Vec<usize>, f64>,
        marginal: &mut [f64],
        out_space: &SpaceDesc,
    ) -> Result<()> {
        if pos > ctx.order.len() {
            *joint.entry(key.clone()).or_insert(0.0) += prob;
            let mut ext = Vec::with_capacity(ctx.d.external_outputs.len());
            for (v, p) in &ctx.d.external_outputs {
                ext.push(outputs[v][p - 1].clone());
            }
            let idx = out_space.index_of(&Value::Tuple(ext))?;
            marginal[idx] += prob;
            return Ok(());
        }
        let u = &ctx.order[pos - 1];
        let kernel = ctx.d.kernel(u)?;
        let input = input_assembly(ctx.d, ctx.order, pos, ctx.x, outputs)?;
        let row = kernel.apply_exact(&input)?;
        for (i, &p) in row.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            outputs.insert(u.clone(), kernel.target.values_at(i)?);
            key[ctx.sorted_pos[pos - 1]] = i;
            rec(
                ctx,
                pos + 1,
                prob * p,
                outputs,
                key,
                joint,
                marginal,
                out_space,
            )?;
        }
        outputs.remove(u);
        Ok(())
    }

    let ctx = Ctx {
        d,
        order,
        sorted_pos: &sorted_pos,
        x,
    };
    let mut outputs = BTreeMap::new();
    let mut key = vec![0usize; order.len()];
    rec(
        &ctx,
        1,
        1.0,
        &mut outputs,
        &mut key,
        &mut joint,
        &mut marginal,
        &out_space,
    )?;

    let joint = FiniteJointDist {
        vertices: sorted,
        spaces,
        probs: joint,
    };
    let marginal = FiniteDist {
        space: out_space,
        probs: marginal,
    };
    Ok((joint, marginal))
}

/// One point of the enumerated joint trace law, with the assembled input of
/// every vertex alongside its output.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub prob: f64,
    pub vertex_inputs: BTreeMap<VertexId, Vec<Value>>,
    pub vertex_outputs: BTreeMap<VertexId, Vec<Value>>,
    pub external_output: Vec<Value>,
}

/// Enumerate every positive-probability trace of an all-finite diagram.
pub fn enumerate_traces(d: &Diagram, x: &[Value]) -> Result<Vec<TracePoint>> {
    let order = d.topo_sort()?;
    d.input_profile()?.check_values(x)?;
    check_enumeration_size(d)?;
    let mut points = Vec::new();

    fn rec(
        d: &Diagram,
        order: &[VertexId],
        x: &[Value],
        pos: usize,
        prob: f64,
        inputs: &mut BTreeMap<VertexId, Vec<Value>>,
        outputs: &mut BTreeMap<VertexId, Vec<Value>>,
        points: &mut Vec<TracePoint>,
    ) -> Result<()> {
        if pos > order.len() {
            let mut ext = Vec::with_capacity(d.external_outputs.len());
            for (v, p) in &d.external_outputs {
                ext.push(outputs[v][p - 1].clone());
            }
            points.push(TracePoint {
                prob,
                vertex_inputs: inputs.clone(),
                vertex_outputs: outputs.clone(),
                external_output: ext,
            });
            return Ok(());
        }
        let u = &order[pos - 1];
        let kernel = d.kernel(u)?;
        let input = input_assembly(d, order, pos, x, outputs)?;
        let row = kernel.apply_exact(&input)?;
        inputs.insert(u.clone(), input);
        for (i, &p) in row.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            outputs.insert(u.clone(), kernel.target.values_at(i)?);
            rec(d, order, x, pos + 1, prob * p, inputs, outputs, points)?;
        }
        outputs.remove(u);
        inputs.remove(u);
        Ok(())
    }

    let mut inputs = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    rec(d, &order, x, 1, 1.0, &mut inputs, &mut outputs, &mut points)?;
    Ok(points)
}

/// Sample one trace of the diagram at external input `x`.
pub fn trace_sample(d: &Diagram, x: &[Value], rng: &mut ChaCha12Rng) -> Result<TraceSample> {
    let order = d.topo_sort()?;
    d.input_profile()?.check_values(x)?;
    let mut outputs: BTreeMap<VertexId, Vec<Value>> = BTreeMap::new();
    for pos in 1..=order.len() {
        let u = &order[pos - 1];
        let input = input_assembly(d, &order, pos, x, &outputs)?;
        let out = d.kernel(u)?.sample(rng, &input)?;
        outputs.insert(u.clone(), out);
    }
    let mut external_output = Vec::with_capacity(d.external_outputs.len());
    for (v, p) in &d.external_outputs {
        external_output.push(outputs[v][p - 1].clone());
    }
    Ok(TraceSample {
        external_input: x.to_vec(),
        vertex_outputs: outputs,
        external_output,
    })
}

/// Monte Carlo estimate of `E[f(external output)]`: sample mean and standard
/// error over `n` independent traces.
///
/// Sample `s` draws from substream `(label, s)` of the seed, so the estimate
/// is reproducible; with `parallel` the same samples are combined in an
/// unspecified order.
pub fn trace_expectation_mc(
    d: &Diagram,
    x: &[Value],
    f: &(dyn Fn(&[Value]) -> f64 + Sync),
    n: usize,
    seed: StreamSeed,
    label: &str,
    parallel: bool,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let sample_one = |s: usize| -> Result<f64> {
        let mut rng = seed.substream(label, s as u64);
        let t = trace_sample(d, x, &mut rng)?;
        Ok(f(&t.external_output))
    };
    let values: Result<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(sample_one).collect()
    } else {
        (0..n).map(sample_one).collect()
    };
    Ok(mean_and_std_error(&values?))
}

/// Evaluate the exact trace under every given topological order and return
/// the maximum absolute deviation over joint outcomes.
pub fn order_invariance_check(d: &Diagram, x: &[Value], orders: &[Vec<VertexId>]) -> Result<f64> {
    let mut joints = Vec::with_capacity(orders.len());
    for order in orders {
        let (j, _) = trace_exact_with_order(d, x, order)?;
        joints.push(j);
    }
    let mut max = 0.0f64;
    for i in 0..joints.len() {
        for j in i + 1..joints.len() {
            max = max.max(joints[i].max_abs_diff(&joints[j])?);
        }
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{compose_slotwise, connect, Diagram};
    use crate::kernel::{dirac_of_map, finite_table_kernel, table_max_diff, Kernel};
    use crate::space::{Object, Profile, SpaceDesc};
    use std::sync::Arc;

    fn obj(name: &str, n: usize) -> Object {
        Object::new(name, SpaceDesc::finite_n(n))
    }

    fn table(name: &str, src: &[usize], tgt: &[usize], rows: Vec<Vec<f64>>) -> Kernel {
        let source = Profile(
            src.iter()
                .enumerate()
                .map(|(i, &n)| obj(&format!("{name}_in{i}"), n))
                .collect(),
        );
        let target = Profile(
            tgt.iter()
                .enumerate()
                .map(|(i, &n)| obj(&format!("{name}_out{i}"), n))
                .collect(),
        );
        finite_table_kernel(name, source, target, rows).unwrap()
    }

    /// Chain a -> b -> c -> d of three 2x2 stochastic matrices.
    fn chain_fixture() -> (Diagram, [Vec<Vec<f64>>; 3]) {
        let m1 = vec![vec![0.9, 0.1], vec![0.3, 0.7]];
        let m2 = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
        let m3 = vec![vec![0.6, 0.4], vec![0.1, 0.9]];
        let k1 = table("k1", &[2], &[2], m1.clone());
        let k2 = table("k2", &[2], &[2], m2.clone());
        let k3 = table("k3", &[2], &[2], m3.clone());
        let mut d = Diagram::new();
        let v1 = d.add_vertex("k1", k1);
        let v2 = d.add_vertex("k2", k2);
        let v3 = d.add_vertex("k3", k3);
        d.add_wire(&v1, 1, &v2, 1);
        d.add_wire(&v2, 1, &v3, 1);
        d.autofill_external();
        (d, [m1, m2, m3])
    }

    #[test]
    fn chain_matches_double_sum() {
        let (d, [m1, m2, m3]) = chain_fixture();
        for a in 0..2 {
            let (_, marginal) = trace_exact(&d, &[Value::FiniteIdx(a)]).unwrap();
            for dd in 0..2 {
                let mut expect = 0.0;
                for b in 0..2 {
                    for c in 0..2 {
                        expect += m3[c][dd] * m2[b][c] * m1[a][b];
                    }
                }
                assert!((marginal.probs[dd] - expect).abs() <= 1e-12);
            }
            assert!((marginal.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirac_diagram_is_deterministic() {
        let a = obj("a", 3);
        let swap = dirac_of_map(
            "inc",
            Profile::single(a.clone()),
            Profile::single(a.clone()),
            Arc::new(|v: &[Value]| {
                let i = v[0].as_finite_idx().unwrap();
                vec![Value::FiniteIdx((i + 1) % 3)]
            }),
            None,
        )
        .unwrap();
        let mut d = Diagram::new();
        let v1 = d.add_vertex("s1", swap.clone());
        let v2 = d.add_vertex("s2", swap);
        d.add_wire(&v1, 1, &v2, 1);
        d.autofill_external();
        let (_, marginal) = trace_exact(&d, &[Value::FiniteIdx(1)]).unwrap();
        assert_eq!(marginal.probs, vec![1.0, 0.0, 0.0]);

        let mut rng = StreamSeed(1).stream("t");
        let s = trace_sample(&d, &[Value::FiniteIdx(1)], &mut rng).unwrap();
        assert_eq!(s.external_output, vec![Value::FiniteIdx(0)]);
    }

    #[test]
    fn input_assembly_chain_positions() {
        let (d, _) = chain_fixture();
        let order = d.topo_sort().unwrap();
        let x = vec![Value::FiniteIdx(1)];
        let empty = BTreeMap::new();
        assert_eq!(input_assembly(&d, &order, 1, &x, &empty).unwrap(), x);
        let mut outs = BTreeMap::new();
        outs.insert(VertexId::new("k1"), vec![Value::FiniteIdx(0)]);
        assert_eq!(
            input_assembly(&d, &order, 2, &x, &outs).unwrap(),
            vec![Value::FiniteIdx(0)]
        );
    }

    #[test]
    fn mc_marginal_matches_exact() {
        let (d, _) = chain_fixture();
        let x = vec![Value::FiniteIdx(0)];
        let (_, exact) = trace_exact(&d, &x).unwrap();
        let n = 100_000;
        let (mean, se) = trace_expectation_mc(
            &d,
            &x,
            &|out: &[Value]| {
                if out[0] == Value::FiniteIdx(1) {
                    1.0
                } else {
                    0.0
                }
            },
            n,
            StreamSeed(12345),
            "test-mc",
            false,
        )
        .unwrap();
        assert!(
            (mean - exact.probs[1]).abs() <= 5.0 * se,
            "mean {mean} exact {} se {se}",
            exact.probs[1]
        );
    }

    #[test]
    fn parallel_mc_equals_sequential_samples() {
        let (d, _) = chain_fixture();
        let x = vec![Value::FiniteIdx(0)];
        let f = |out: &[Value]| {
            if out[0] == Value::FiniteIdx(1) {
                1.0
            } else {
                0.0
            }
        };
        let (m1, _) = trace_expectation_mc(&d, &x, &f, 5000, StreamSeed(7), "par", false).unwrap();
        let (m2, _) = trace_expectation_mc(&d, &x, &f, 5000, StreamSeed(7), "par", true).unwrap();
        // same samples, order-only difference
        assert!((m1 - m2).abs() < 1e-9);
    }

    #[test]
    fn constant_function_normalizes() {
        let (d, _) = chain_fixture();
        let (mean, se) = trace_expectation_mc(
            &d,
            &[Value::FiniteIdx(0)],
            &|_| 1.0,
            100,
            StreamSeed(0),
            "const",
            false,
        )
        .unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn v_structure_order_invariance_and_interchange() {
        let m1 = vec![vec![0.6, 0.4], vec![0.1, 0.9]];
        let m2 = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let m3 = vec![
            vec![0.5, 0.5],
            vec![0.2, 0.8],
            vec![0.9, 0.1],
            vec![0.3, 0.7],
        ];
        let k1 = table("k1", &[2], &[2], m1.clone());
        let k2 = table("k2", &[2], &[2], m2.clone());
        let k3 = table("k3", &[2, 2], &[2], m3.clone());
        let mut d = Diagram::new();
        let v1 = d.add_vertex("k1", k1.clone());
        let v2 = d.add_vertex("k2", k2.clone());
        let v3 = d.add_vertex("k3", k3.clone());
        d.add_wire(&v1, 1, &v3, 1);
        d.add_wire(&v2, 1, &v3, 2);
        d.autofill_external();

        // exact trace equals the hand-coded double sum
        for a in 0..2 {
            for c in 0..2 {
                let x = vec![Value::FiniteIdx(a), Value::FiniteIdx(c)];
                let (_, marg) = trace_exact(&d, &x).unwrap();
                for e in 0..2 {
                    let mut expect = 0.0;
                    for b in 0..2 {
                        for dd in 0..2 {
                            expect += m3[2 * b + dd][e] * m1[a][b] * m2[c][dd];
                        }
                    }
                    assert!((marg.probs[e] - expect).abs() <= 1e-12);
                }
            }
        }

        // both topological orders agree on the labelled joint law
        let orders = d.all_topo_orders().unwrap();
        assert_eq!(orders.len(), 2);
        let dev = order_invariance_check(&d, &[Value::FiniteIdx(0), Value::FiniteIdx(1)], &orders)
            .unwrap();
        assert!(dev <= 1e-12);

        // interchange: the two bracketings of the binary reductions agree
        let left = compose_slotwise(&k1, &k3, 1, 1).unwrap().kernel().unwrap();
        let left = compose_slotwise(&k2, &left, 1, 2)
            .unwrap()
            .kernel()
            .unwrap();
        let right = compose_slotwise(&k2, &k3, 1, 2).unwrap().kernel().unwrap();
        let right = compose_slotwise(&k1, &right, 1, 1)
            .unwrap()
            .kernel()
            .unwrap();
        assert!(table_max_diff(&left, &right).unwrap() <= 1e-12);
    }

    #[test]
    fn connect_then_trace_equals_compose_slotwise_of_traces() {
        let (d1, _) = chain_fixture();
        let (d2, _) = chain_fixture();
        let joined = connect(&d1, 1, &d2, 1).unwrap();
        assert!(joined.validate().is_empty());

        // trace kernels as finite tables over the 2-point input space
        let table_of = |d: &Diagram| -> Vec<Vec<f64>> {
            (0..2)
                .map(|a| trace_exact(d, &[Value::FiniteIdx(a)]).unwrap().1.probs)
                .collect()
        };
        let t1 = table_of(&d1);
        let t2 = table_of(&d2);
        let tj = table_of(&joined);
        for a in 0..2 {
            for c in 0..2 {
                let mut expect = 0.0;
                for b in 0..2 {
                    expect += t1[a][b] * t2[b][c];
                }
                assert!((tj[a][c] - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_vertex_order_deviation_zero() {
        let k = table("k", &[2], &[2], vec![vec![0.5, 0.5], vec![0.1, 0.9]]);
        let mut d = Diagram::new();
        d.add_vertex("k", k);
        d.autofill_external();
        let orders = d.all_topo_orders().unwrap();
        let dev = order_invariance_check(&d, &[Value::FiniteIdx(0)], &orders).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn enumeration_guard_triggers() {
        // 9 vertices with 8-point outputs exceed 1e7 joint outcomes
        let mut d = Diagram::new();
        for i in 0..9 {
            let k = table(&format!("k{i}"), &[1], &[8], vec![vec![0.125; 8]]);
            d.add_vertex(format!("k{i}"), k);
        }
        d.autofill_external();
        let x: Vec<Value> = (0..9).map(|_| Value::FiniteIdx(0)).collect();
        match trace_exact(&d, &x) {
            Err(Error::EnumerationTooLarge { .. }) => {}
            other => panic!("expected enumeration guard, got {other:?}"),
        }
    }
}
