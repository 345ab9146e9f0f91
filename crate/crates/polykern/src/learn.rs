//! Parameterized diagrams, expected objectives, and gradient estimation.
//!
//! A parameterized diagram fixes its shape and interface witnesses and lets
//! each vertex kernel vary over a per-vertex parameter space. The expected
//! objective averages a deterministic scalar of the external outputs and
//! reference variables over the data distribution and the trace law.
//!
//! Gradients assemble from local per-vertex rules applied to sampled traces:
//! density-bearing vertices contribute `(J - baseline) * grad log p`, and
//! reparameterized or deterministic vertices contribute the downstream
//! objective adjoint pulled back through their parameter Jacobian. The
//! adjoint is computed by reverse accumulation through the input Jacobians
//! of every differentiable kernel on paths to the external outputs. On
//! all-finite problems, full enumeration provides exact values for both the
//! objective and its gradient, used as oracles by the test suites.

use crate::color::{ColoredDiagram, InterfaceSystem, KMorId};
use crate::diagram::{Diagram, SlotRef, VertexId, Wire};
use crate::error::{Error, Result};
use crate::kernel::{
    finite_table_kernel, slot_offsets, FiniteDist, Kernel, KernelRep, Mat, RefMeasure,
    SamplerDensity,
};
use crate::numeric::{central_diff_grad, central_diff_jacobian, max_rel_err, FD_STEP};
use crate::report::Report;
use crate::space::{Profile, Value};
use crate::stream::{standard_normal_vec, StreamSeed};
use crate::trace::{enumerate_traces, input_assembly};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub type ScoreSampleFn =
    Arc<dyn Fn(&mut ChaCha12Rng, &[f64], &[Value]) -> Vec<Value> + Send + Sync>;
pub type ScoreLogDensityFn = Arc<dyn Fn(&[f64], &[Value], &[Value]) -> f64 + Send + Sync>;
pub type ScoreGradFn = Arc<dyn Fn(&[f64], &[Value], &[Value]) -> Vec<f64> + Send + Sync>;
pub type PathwiseForwardFn = Arc<dyn Fn(&[f64], &[Value], &[f64]) -> Vec<Value> + Send + Sync>;
pub type PathwiseJacFn = Arc<dyn Fn(&[f64], &[Value], &[f64]) -> Mat + Send + Sync>;

/// Density-bearing family: sampling plus `grad_theta log p(b | a)`.
#[derive(Clone)]
pub struct ScoreFamily {
    pub sample: ScoreSampleFn,
    /// `(theta, b, a) -> log p(b | a)` w.r.t. `reference`.
    pub log_density: ScoreLogDensityFn,
    /// `(theta, b, a) -> grad_theta log p(b | a)`.
    pub grad_theta_log_density: ScoreGradFn,
    pub reference: RefMeasure,
}

/// Reparameterized family: `b = forward(theta, a, eps)` with `eps` drawn from
/// a fixed standard normal of dimension `noise_dim`.
#[derive(Clone)]
pub struct PathwiseFamily {
    pub noise_dim: usize,
    pub forward: PathwiseForwardFn,
    /// Jacobian of the output coordinates w.r.t. theta at fixed noise.
    pub jac_theta: PathwiseJacFn,
    /// Jacobian of the output coordinates w.r.t. the input coordinates at
    /// fixed noise.
    pub jac_input: PathwiseJacFn,
}

#[derive(Clone)]
pub enum ParamFamily {
    Score(ScoreFamily),
    Pathwise(PathwiseFamily),
    /// Logits reshaped as one row per enumerated source point, mapped through
    /// normalized exponentials; probabilities are positive everywhere and
    /// `grad_theta log p` is exact.
    Logit,
}

/// A kernel family indexed by a finite-dimensional real parameter.
#[derive(Clone)]
pub struct ParamKernel {
    pub name: String,
    pub theta_dim: usize,
    pub source: Profile,
    pub target: Profile,
    pub family: ParamFamily,
}

impl std::fmt::Debug for ParamKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let fam = match self.family {
            ParamFamily::Score(_) => "score",
            ParamFamily::Pathwise(_) => "pathwise",
            ParamFamily::Logit => "logit",
        };
        write!(
            f,
            "ParamKernel({} {fam}, dim {})",
            self.name, self.theta_dim
        )
    }
}

/// Softmax of one logit row.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl ParamKernel {
    /// A logit-table family over finite source and target profiles.
    pub fn logit_table(
        name: impl Into<String>,
        source: Profile,
        target: Profile,
    ) -> Result<ParamKernel> {
        let n_src = source.space().cardinality()?;
        let n_tgt = target.space().cardinality()?;
        Ok(ParamKernel {
            name: name.into(),
            theta_dim: n_src * n_tgt,
            source,
            target,
            family: ParamFamily::Logit,
        })
    }

    /// Gaussian affine family on real profiles: the output is
    /// `W a + bias + sigma .* eps` with `theta = (W row-major, bias)` and
    /// fixed per-coordinate noise scales.
    pub fn gaussian_affine(
        name: impl Into<String>,
        source: Profile,
        target: Profile,
        sigmas: Vec<f64>,
    ) -> Result<ParamKernel> {
        let m = source.real_dim();
        let n = target.real_dim();
        if sigmas.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                found: sigmas.len(),
            });
        }
        let tgt = target.clone();
        let sig = sigmas.clone();
        let forward: PathwiseForwardFn =
            Arc::new(move |theta: &[f64], a: &[Value], eps: &[f64]| {
                let x: Vec<f64> = a.iter().flat_map(value_coords).collect();
                let mut out = vec![0.0; n];
                for (o, item) in out.iter_mut().enumerate() {
                    let row = &theta[o * m..(o + 1) * m];
                    *item = theta[n * m + o]
                        + row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>()
                        + sig[o] * eps[o];
                }
                crate::kernel::unflatten_real(&tgt, &out).expect("real target")
            });
        let jac_theta: PathwiseJacFn =
            Arc::new(move |_theta: &[f64], a: &[Value], _eps: &[f64]| {
                let x: Vec<f64> = a.iter().flat_map(value_coords).collect();
                let mut jac = Mat::zeros(n, n * m + n);
                for o in 0..n {
                    for (i, xi) in x.iter().enumerate() {
                        *jac.at_mut(o, o * m + i) = *xi;
                    }
                    *jac.at_mut(o, n * m + o) = 1.0;
                }
                jac
            });
        let jac_input: PathwiseJacFn =
            Arc::new(move |theta: &[f64], _a: &[Value], _eps: &[f64]| {
                let mut jac = Mat::zeros(n, m);
                for o in 0..n {
                    for i in 0..m {
                        *jac.at_mut(o, i) = theta[o * m + i];
                    }
                }
                jac
            });
        Ok(ParamKernel {
            name: name.into(),
            theta_dim: n * m + n,
            source,
            target,
            family: ParamFamily::Pathwise(PathwiseFamily {
                noise_dim: n,
                forward,
                jac_theta,
                jac_input,
            }),
        })
    }

    /// Probabilities of the logit row for the enumerated source point.
    pub fn logit_row(&self, theta: &[f64], row: usize) -> Result<Vec<f64>> {
        let n_tgt = self.target.space().cardinality()?;
        Ok(softmax(&theta[row * n_tgt..(row + 1) * n_tgt]))
    }

    /// Exact `grad_theta log p(col | row)` of the logit family.
    pub fn logit_grad_log_prob(&self, theta: &[f64], row: usize, col: usize) -> Result<Vec<f64>> {
        let n_tgt = self.target.space().cardinality()?;
        let probs = self.logit_row(theta, row)?;
        let mut g = vec![0.0; self.theta_dim];
        for c in 0..n_tgt {
            g[row * n_tgt + c] = (if c == col { 1.0 } else { 0.0 }) - probs[c];
        }
        Ok(g)
    }

    /// The concrete kernel at parameter value `theta`.
    pub fn instantiate(&self, theta: &[f64]) -> Result<Kernel> {
        if theta.len() != self.theta_dim {
            return Err(Error::DimMismatch {
                expected: self.theta_dim,
                found: theta.len(),
            });
        }
        match &self.family {
            ParamFamily::Logit => {
                let n_src = self.source.space().cardinality()?;
                let n_tgt = self.target.space().cardinality()?;
                let rows: Vec<Vec<f64>> = (0..n_src)
                    .map(|r| softmax(&theta[r * n_tgt..(r + 1) * n_tgt]))
                    .collect();
                finite_table_kernel(
                    self.name.clone(),
                    self.source.clone(),
                    self.target.clone(),
                    rows,
                )
            }
            ParamFamily::Score(fam) => {
                let th = theta.to_vec();
                let sample = fam.sample.clone();
                let ld = fam.log_density.clone();
                let th2 = th.clone();
                Kernel::new(
                    self.name.clone(),
                    self.source.clone(),
                    self.target.clone(),
                    KernelRep::Sampler(SamplerDensity {
                        sample: Arc::new(move |rng: &mut ChaCha12Rng, a: &[Value]| {
                            sample(rng, &th, a)
                        }),
                        log_density: Some(Arc::new(move |b: &[Value], a: &[Value]| ld(&th2, b, a))),
                        reference: fam.reference,
                    }),
                )
            }
            ParamFamily::Pathwise(fam) => {
                let th = theta.to_vec();
                let forward = fam.forward.clone();
                let noise_dim = fam.noise_dim;
                Kernel::new(
                    self.name.clone(),
                    self.source.clone(),
                    self.target.clone(),
                    KernelRep::Sampler(SamplerDensity {
                        sample: Arc::new(move |rng: &mut ChaCha12Rng, a: &[Value]| {
                            let eps = standard_normal_vec(rng, noise_dim);
                            forward(&th, a, &eps)
                        }),
                        log_density: None,
                        reference: RefMeasure::Lebesgue,
                    }),
                )
            }
        }
    }

    /// Worst relative error of `grad_theta_log_density` against central
    /// finite differences of `log_density`, over the given evaluation points.
    pub fn check_score_gradient(
        &self,
        points: &[(Vec<f64>, Vec<Value>, Vec<Value>)],
    ) -> Result<f64> {
        let fam = match &self.family {
            ParamFamily::Score(f) => f,
            _ => return Err(Error::invalid("not a score family")),
        };
        let mut worst = 0.0f64;
        for (theta, b, a) in points {
            let g = (fam.grad_theta_log_density)(theta, b, a);
            let ld = fam.log_density.clone();
            let (b2, a2) = (b.clone(), a.clone());
            let fd = central_diff_grad(&move |t: &[f64]| ld(t, &b2, &a2), theta, FD_STEP);
            worst = worst.max(max_rel_err(&g, &fd));
        }
        Ok(worst)
    }

    /// Worst relative error of the pathwise Jacobians against central finite
    /// differences of `forward` at fixed noise.
    pub fn check_pathwise_jacobians(
        &self,
        points: &[(Vec<f64>, Vec<Value>, Vec<f64>)],
    ) -> Result<f64> {
        let fam = match &self.family {
            ParamFamily::Pathwise(f) => f,
            _ => return Err(Error::invalid("not a pathwise family")),
        };
        let mut worst = 0.0f64;
        for (theta, a, eps) in points {
            let jt = (fam.jac_theta)(theta, a, eps);
            let fwd = fam.forward.clone();
            let (a2, e2) = (a.clone(), eps.clone());
            let fd_t = central_diff_jacobian(
                &move |t: &[f64]| flatten_values(&fwd(t, &a2, &e2)),
                theta,
                FD_STEP,
            );
            worst = worst.max(max_rel_err(&jt.data, &fd_t.data));

            let ji = (fam.jac_input)(theta, a, eps);
            let fwd = fam.forward.clone();
            let (t2, e2) = (theta.clone(), eps.clone());
            let src = self.source.clone();
            let x0 = flatten_values(a);
            let fd_i = central_diff_jacobian(
                &move |x: &[f64]| {
                    let vals = crate::kernel::unflatten_real(&src, x).expect("real source");
                    flatten_values(&fwd(&t2, &vals, &e2))
                },
                &x0,
                FD_STEP,
            );
            worst = worst.max(max_rel_err(&ji.data, &fd_i.data));
        }
        Ok(worst)
    }
}

fn value_coords(v: &Value) -> Vec<f64> {
    let mut out = Vec::new();
    v.flat_coords(&mut out);
    out
}

fn flatten_values(vals: &[Value]) -> Vec<f64> {
    let mut out = Vec::new();
    for v in vals {
        v.flat_coords(&mut out);
    }
    out
}

/// A vertex of a parameterized diagram: fixed kernel or parameterized family.
#[derive(Clone, Debug)]
pub enum VertexSpec {
    Fixed(Kernel),
    Param(ParamKernel),
}

impl VertexSpec {
    pub fn source(&self) -> &Profile {
        match self {
            VertexSpec::Fixed(k) => &k.source,
            VertexSpec::Param(p) => &p.source,
        }
    }

    pub fn target(&self) -> &Profile {
        match self {
            VertexSpec::Fixed(k) => &k.target,
            VertexSpec::Param(p) => &p.target,
        }
    }
}

/// A diagram with fixed shape and interface witnesses whose vertex kernels
/// vary over a product parameter space (parameterized vertices in vertex-id
/// order).
#[derive(Clone, Debug, Default)]
pub struct ParamDiagram {
    pub vertices: BTreeMap<VertexId, VertexSpec>,
    pub internal_wires: BTreeMap<Wire, KMorId>,
    pub external_inputs: Vec<SlotRef>,
    pub external_outputs: Vec<SlotRef>,
}

impl ParamDiagram {
    pub fn new() -> ParamDiagram {
        ParamDiagram::default()
    }

    pub fn add_fixed(&mut self, id: impl Into<String>, kernel: Kernel) -> VertexId {
        let id = VertexId::new(id);
        self.vertices.insert(id.clone(), VertexSpec::Fixed(kernel));
        id
    }

    pub fn add_param(&mut self, id: impl Into<String>, pk: ParamKernel) -> VertexId {
        let id = VertexId::new(id);
        self.vertices.insert(id.clone(), VertexSpec::Param(pk));
        id
    }

    pub fn add_wire(&mut self, u: &VertexId, p: usize, v: &VertexId, q: usize, witness: &KMorId) {
        self.internal_wires
            .insert(Wire::new(u, p, v, q), witness.clone());
    }

    /// Parameterized vertices in vertex-id order, with their dimensions.
    pub fn param_layout(&self) -> Vec<(VertexId, usize)> {
        self.vertices
            .iter()
            .filter_map(|(v, s)| match s {
                VertexSpec::Param(p) => Some((v.clone(), p.theta_dim)),
                VertexSpec::Fixed(_) => None,
            })
            .collect()
    }

    pub fn theta_dim(&self) -> usize {
        self.param_layout().iter().map(|(_, d)| d).sum()
    }

    /// Split a flat parameter vector by the layout.
    pub fn split_theta<'a>(&self, theta: &'a [f64]) -> Result<BTreeMap<VertexId, &'a [f64]>> {
        let layout = self.param_layout();
        let total: usize = layout.iter().map(|(_, d)| d).sum();
        if theta.len() != total {
            return Err(Error::DimMismatch {
                expected: total,
                found: theta.len(),
            });
        }
        let mut out = BTreeMap::new();
        let mut off = 0;
        for (v, d) in layout {
            out.insert(v, &theta[off..off + d]);
            off += d;
        }
        Ok(out)
    }

    /// Instantiate the colored diagram at parameter value `theta`.
    pub fn instantiate(&self, theta: &[f64]) -> Result<ColoredDiagram> {
        let split = self.split_theta(theta)?;
        let mut cd = ColoredDiagram::new();
        for (v, spec) in &self.vertices {
            let kernel = match spec {
                VertexSpec::Fixed(k) => k.clone(),
                VertexSpec::Param(p) => p.instantiate(split[v])?,
            };
            cd.add_vertex(v.0.clone(), kernel);
        }
        cd.internal_wires = self.internal_wires.clone();
        cd.external_inputs = self.external_inputs.clone();
        cd.external_outputs = self.external_outputs.clone();
        Ok(cd)
    }

    /// The instantiated interface expansion at `theta`.
    pub fn expanded(&self, is: &InterfaceSystem, theta: &[f64]) -> Result<Diagram> {
        crate::color::interface_expand(&self.instantiate(theta)?, is)
    }

    /// The expansion at zero parameters; wiring and profiles do not depend on
    /// `theta`, so this carries the structure used by the estimators.
    pub fn skeleton(&self, is: &InterfaceSystem) -> Result<Diagram> {
        self.expanded(is, &vec![0.0; self.theta_dim()])
    }

    pub fn input_profile(&self, is: &InterfaceSystem) -> Result<Profile> {
        self.skeleton(is)?.input_profile()
    }

    pub fn output_profile(&self, is: &InterfaceSystem) -> Result<Profile> {
        self.skeleton(is)?.output_profile()
    }
}

pub type RhoSampleFn = Arc<dyn Fn(&mut ChaCha12Rng) -> (Vec<Value>, Vec<Value>) + Send + Sync>;
pub type ObjectiveFn = Arc<dyn Fn(&[Value], &[Value]) -> f64 + Send + Sync>;
pub type ObjectiveGradFn = Arc<dyn Fn(&[Value], &[Value]) -> Vec<f64> + Send + Sync>;

/// The data distribution and scalar objective of a learning problem.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    /// Reference profile (empty when no reference variables are needed).
    pub ref_profile: Profile,
    /// Draw `(external input, reference)` from the data distribution.
    pub rho_sampler: RhoSampleFn,
    /// Exact data distribution over the joint (input, reference) space, for
    /// all-finite problems.
    pub rho_exact: Option<FiniteDist>,
    /// `f(output, reference) -> scalar`.
    pub f: ObjectiveFn,
    /// Gradient of `f` in the real coordinates of the output profile.
    pub grad_output_f: Option<ObjectiveGradFn>,
}

impl std::fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ObjectiveSpec({})", self.name)
    }
}

impl ObjectiveSpec {
    /// Check `grad_output_f` against finite differences at the given points;
    /// worst relative error.
    pub fn check_output_gradient(
        &self,
        out_profile: &Profile,
        points: &[(Vec<Value>, Vec<Value>)],
    ) -> Result<f64> {
        let g = self
            .grad_output_f
            .as_ref()
            .ok_or_else(|| Error::invalid("objective has no output gradient"))?;
        let mut worst = 0.0f64;
        for (y, r) in points {
            let grad = g(y, r);
            let f = self.f.clone();
            let (r2, prof) = (r.clone(), out_profile.clone());
            let y0 = flatten_values(y);
            let fd = central_diff_grad(
                &move |coords: &[f64]| {
                    let vals = crate::kernel::unflatten_real(&prof, coords).expect("real output");
                    f(&vals, &r2)
                },
                &y0,
                FD_STEP,
            );
            worst = worst.max(max_rel_err(&grad, &fd));
        }
        Ok(worst)
    }
}

/// One forward evaluation of a parameterized diagram under the trace law.
#[derive(Clone, Debug)]
struct ForwardTrace {
    vertex_inputs: BTreeMap<VertexId, Vec<Value>>,
    vertex_outputs: BTreeMap<VertexId, Vec<Value>>,
    vertex_noise: BTreeMap<VertexId, Vec<f64>>,
    external_output: Vec<Value>,
    reference: Vec<Value>,
    objective: f64,
}

/// Context shared by the sampling estimators.
struct EstimatorCtx<'a> {
    pd: &'a ParamDiagram,
    skel: &'a Diagram,
    order: &'a [VertexId],
    split: &'a BTreeMap<VertexId, &'a [f64]>,
    obj: &'a ObjectiveSpec,
}

fn forward_sample(ctx: &EstimatorCtx, rng: &mut ChaCha12Rng) -> Result<ForwardTrace> {
    let (x, r) = (ctx.obj.rho_sampler)(rng);
    let mut inputs: BTreeMap<VertexId, Vec<Value>> = BTreeMap::new();
    let mut outputs: BTreeMap<VertexId, Vec<Value>> = BTreeMap::new();
    let mut noise: BTreeMap<VertexId, Vec<f64>> = BTreeMap::new();
    for pos in 1..=ctx.order.len() {
        let u = &ctx.order[pos - 1];
        let a = input_assembly(ctx.skel, ctx.order, pos, &x, &outputs)?;
        let b = match vertex_behavior(ctx, u)? {
            Behavior::Fixed(k) => k.sample(rng, &a)?,
            Behavior::Score(fam) => (fam.sample)(rng, ctx.split[u], &a),
            Behavior::Pathwise(fam) => {
                let eps = standard_normal_vec(rng, fam.noise_dim);
                let b = (fam.forward)(ctx.split[u], &a, &eps);
                noise.insert(u.clone(), eps);
                b
            }
            Behavior::Logit(pk) => {
                let row = pk.source.index_of(&a)?;
                let probs = pk.logit_row(ctx.split[u], row)?;
                let dist = FiniteDist {
                    space: pk.target.space(),
                    probs,
                };
                match dist.sample(rng)? {
                    Value::Tuple(items) => items,
                    _ => unreachable!("profile space is a product"),
                }
            }
        };
        inputs.insert(u.clone(), a);
        outputs.insert(u.clone(), b);
    }
    let mut y = Vec::with_capacity(ctx.skel.external_outputs.len());
    for (v, p) in &ctx.skel.external_outputs {
        y.push(outputs[v][p - 1].clone());
    }
    let objective = (ctx.obj.f)(&y, &r);
    Ok(ForwardTrace {
        vertex_inputs: inputs,
        vertex_outputs: outputs,
        vertex_noise: noise,
        external_output: y,
        reference: r,
        objective,
    })
}

enum Behavior<'a> {
    Fixed(&'a Kernel),
    Score(&'a ScoreFamily),
    Pathwise(&'a PathwiseFamily),
    Logit(&'a ParamKernel),
}

fn vertex_behavior<'a>(ctx: &'a EstimatorCtx, u: &VertexId) -> Result<Behavior<'a>> {
    if let Some(spec) = ctx.pd.vertices.get(u) {
        return Ok(match spec {
            VertexSpec::Fixed(k) => Behavior::Fixed(k),
            VertexSpec::Param(pk) => match &pk.family {
                ParamFamily::Score(f) => Behavior::Score(f),
                ParamFamily::Pathwise(f) => Behavior::Pathwise(f),
                ParamFamily::Logit => Behavior::Logit(pk),
            },
        });
    }
    // interface vertices exist only in the expansion
    Ok(Behavior::Fixed(ctx.skel.kernel(u)?))
}

/// Monte Carlo estimate of the expected objective: sample mean and standard
/// error over `n` traces, drawing `(input, reference)` from the data
/// distribution each time.
pub fn expected_objective_mc(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
    n: usize,
    seed: StreamSeed,
    label: &str,
    parallel: bool,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let skel = pd.skeleton(is)?;
    let order = skel.topo_sort()?;
    let split = pd.split_theta(theta)?;
    let ctx = EstimatorCtx {
        pd,
        skel: &skel,
        order: &order,
        split: &split,
        obj,
    };
    let sample_one = |s: usize| -> Result<f64> {
        let mut rng = seed.substream(label, s as u64);
        Ok(forward_sample(&ctx, &mut rng)?.objective)
    };
    let values: Result<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(sample_one).collect()
    } else {
        (0..n).map(sample_one).collect()
    };
    Ok(crate::stream::mean_and_std_error(&values?))
}

/// Split the joint `(input, reference)` point of the exact data distribution.
fn split_xr(point: Vec<Value>, n_inputs: usize) -> (Vec<Value>, Vec<Value>) {
    let mut x = point;
    let r = x.split_off(n_inputs);
    (x, r)
}

/// Exact expected objective of an all-finite problem by full enumeration.
pub fn expected_objective_exact(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
) -> Result<f64> {
    let rho = obj
        .rho_exact
        .as_ref()
        .ok_or_else(|| Error::invalid("objective has no exact data distribution"))?;
    let d = pd.expanded(is, theta)?;
    let n_inputs = d.external_inputs.len();
    let mut total = 0.0;
    for (i, &w) in rho.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let point = match rho.space.point_at(i)? {
            Value::Tuple(items) => items,
            v => vec![v],
        };
        let (x, r) = split_xr(point, n_inputs);
        let (_, marginal) = crate::trace::trace_exact(&d, &x)?;
        let out_profile = d.output_profile()?;
        for (oi, &p) in marginal.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let y = out_profile.values_at(oi)?;
            total += w * p * (obj.f)(&y, &r);
        }
    }
    Ok(total)
}

/// Per-vertex gradient covectors of the expected objective.
#[derive(Clone, Debug)]
pub struct GradEstimate {
    pub per_vertex: BTreeMap<VertexId, Vec<f64>>,
    pub per_vertex_std_err: BTreeMap<VertexId, Vec<f64>>,
    /// Concatenation of per-vertex blocks in vertex-id order.
    pub flat: Vec<f64>,
    pub flat_std_err: Vec<f64>,
    pub n_samples: usize,
}

impl GradEstimate {
    fn from_samples(
        layout: &[(VertexId, usize)],
        sums: BTreeMap<VertexId, Vec<f64>>,
        sumsq: BTreeMap<VertexId, Vec<f64>>,
        n: usize,
    ) -> GradEstimate {
        let mut per_vertex = BTreeMap::new();
        let mut per_vertex_std_err = BTreeMap::new();
        let mut flat = Vec::new();
        let mut flat_std_err = Vec::new();
        for (v, dim) in layout {
            let s = &sums[v];
            let s2 = &sumsq[v];
            let mut mean = vec![0.0; *dim];
            let mut se = vec![0.0; *dim];
            for c in 0..*dim {
                let m = s[c] / n as f64;
                mean[c] = m;
                if n >= 2 {
                    let var = (s2[c] - n as f64 * m * m) / (n as f64 - 1.0);
                    se[c] = (var.max(0.0) / n as f64).sqrt();
                } else {
                    se[c] = f64::INFINITY;
                }
            }
            flat.extend_from_slice(&mean);
            flat_std_err.extend_from_slice(&se);
            per_vertex.insert(v.clone(), mean);
            per_vertex_std_err.insert(v.clone(), se);
        }
        GradEstimate {
            per_vertex,
            per_vertex_std_err,
            flat,
            flat_std_err,
            n_samples: n,
        }
    }
}

/// Options for the Monte Carlo reverse-mode estimator.
#[derive(Clone, Copy, Debug)]
pub struct GradOptions {
    /// Constant baseline subtracted from the realized objective in
    /// score-function contributions.
    pub baseline: f64,
    pub parallel: bool,
}

impl Default for GradOptions {
    fn default() -> Self {
        GradOptions {
            baseline: 0.0,
            parallel: false,
        }
    }
}

/// Walk every directed path from each pathwise vertex to the external
/// outputs; every traversed kernel must expose an input Jacobian and the
/// objective must expose an output gradient. The report lists blockers.
pub fn validate_pathwise_admissibility(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    obj: &ObjectiveSpec,
) -> Result<Report> {
    let mut report = Report::new();
    let skel = pd.skeleton(is)?;
    let pathwise: Vec<VertexId> = pd
        .vertices
        .iter()
        .filter(|(_, s)| matches!(s, VertexSpec::Param(p) if matches!(p.family, ParamFamily::Pathwise(_))))
        .map(|(v, _)| v.clone())
        .collect();
    if pathwise.is_empty() {
        return Ok(report);
    }

    // differentiability of a vertex's input side, for the reverse sweep
    let has_input_jac = |v: &VertexId| -> bool {
        match pd.vertices.get(v) {
            Some(VertexSpec::Param(p)) => matches!(p.family, ParamFamily::Pathwise(_)),
            Some(VertexSpec::Fixed(k)) => kernel_has_input_jac(k),
            None => skel.kernel(v).map(kernel_has_input_jac).unwrap_or(false),
        }
    };

    for start in &pathwise {
        let mut frontier = vec![start.clone()];
        let mut seen: BTreeSet<VertexId> = BTreeSet::new();
        let mut reaches_external = false;
        while let Some(u) = frontier.pop() {
            if !seen.insert(u.clone()) {
                continue;
            }
            let k_target_arity = skel.kernel(&u)?.target.arity();
            for p in 1..=k_target_arity {
                let slot = (u.clone(), p);
                match skel.internal_wires.iter().find(|w| w.from == slot) {
                    None => {
                        reaches_external = true;
                    }
                    Some(w) => {
                        let v = w.to.0.clone();
                        if !has_input_jac(&v) {
                            report.push(
                                "pathwise-blocked",
                                format!(
                                    "pathwise vertex {start}: downstream vertex {v} exposes no input Jacobian"
                                ),
                            );
                        } else {
                            frontier.push(v);
                        }
                    }
                }
            }
        }
        if reaches_external && obj.grad_output_f.is_none() {
            report.push(
                "pathwise-blocked",
                format!(
                    "pathwise vertex {start}: objective {} has no output gradient",
                    obj.name
                ),
            );
        }
    }
    Ok(report)
}

fn kernel_has_input_jac(k: &Kernel) -> bool {
    match &k.rep {
        KernelRep::Deterministic(d) => d.jac.is_some(),
        KernelRep::GaussianLinear(_) => true,
        _ => false,
    }
}

/// Per-sample gradient contributions for one forward trace.
fn per_sample_contributions(
    ctx: &EstimatorCtx,
    layout: &[(VertexId, usize)],
    tr: &ForwardTrace,
    baseline: f64,
) -> Result<BTreeMap<VertexId, Vec<f64>>> {
    let mut out: BTreeMap<VertexId, Vec<f64>> = BTreeMap::new();
    let needs_adjoint = layout.iter().any(|(v, _)| {
        matches!(
            ctx.pd.vertices.get(v),
            Some(VertexSpec::Param(p)) if matches!(p.family, ParamFamily::Pathwise(_))
        )
    });
    let adjoints = if needs_adjoint {
        Some(reverse_adjoints(ctx, tr)?)
    } else {
        None
    };

    for (v, dim) in layout {
        let spec = match ctx.pd.vertices.get(v) {
            Some(VertexSpec::Param(p)) => p,
            _ => unreachable!("layout lists parameterized vertices"),
        };
        let a = &tr.vertex_inputs[v];
        let b = &tr.vertex_outputs[v];
        let theta_u = ctx.split[v];
        let contrib = match &spec.family {
            ParamFamily::Score(fam) => {
                let ld = (fam.log_density)(theta_u, b, a);
                if !ld.is_finite() {
                    return Err(Error::ZeroDensity(format!(
                        "score vertex {v} sampled an outcome with zero density"
                    )));
                }
                let g = (fam.grad_theta_log_density)(theta_u, b, a);
                g.iter().map(|gi| (tr.objective - baseline) * gi).collect()
            }
            ParamFamily::Logit => {
                let row = spec.source.index_of(a)?;
                let col = spec.target.index_of(b)?;
                let g = spec.logit_grad_log_prob(theta_u, row, col)?;
                g.iter().map(|gi| (tr.objective - baseline) * gi).collect()
            }
            ParamFamily::Pathwise(fam) => {
                let adj = adjoints.as_ref().expect("adjoints computed");
                let adj_v = adj
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| vec![0.0; spec.target.real_dim()]);
                let eps = &tr.vertex_noise[v];
                let jt = (fam.jac_theta)(theta_u, a, eps);
                // covector: adj^T . d b / d theta
                let mut g = vec![0.0; *dim];
                for o in 0..jt.rows {
                    let w = adj_v[o];
                    if w == 0.0 {
                        continue;
                    }
                    for c in 0..jt.cols {
                        g[c] += w * jt.at(o, c);
                    }
                }
                g
            }
        };
        out.insert(v.clone(), contrib);
    }
    Ok(out)
}

/// Reverse accumulation of `d objective / d vertex-output-coords` through the
/// input Jacobians of differentiable kernels, at the sampled trace values.
fn reverse_adjoints(ctx: &EstimatorCtx, tr: &ForwardTrace) -> Result<BTreeMap<VertexId, Vec<f64>>> {
    let grad_f =
        ctx.obj.grad_output_f.as_ref().ok_or_else(|| {
            Error::PathwiseInadmissible("objective has no output gradient".into())
        })?;
    let mut adj: BTreeMap<VertexId, Vec<f64>> = BTreeMap::new();
    for (v, _) in &ctx.skel.external_outputs {
        adj.entry(v.clone())
            .or_insert_with(|| vec![0.0; ctx.skel.kernel(v).unwrap().target.real_dim()]);
    }

    // seed with the objective gradient at the external outputs
    let gy = grad_f(&tr.external_output, &tr.reference);
    let out_profile = ctx.skel.output_profile()?;
    let offsets = slot_offsets(&out_profile);
    for (slot_idx, (v, p)) in ctx.skel.external_outputs.iter().enumerate() {
        let (off, dim) = offsets[slot_idx];
        if dim == 0 {
            continue;
        }
        let target = ctx.skel.kernel(v)?.target.clone();
        let v_offsets = slot_offsets(&target);
        let (voff, vdim) = v_offsets[p - 1];
        debug_assert_eq!(dim, vdim);
        let entry = adj
            .entry(v.clone())
            .or_insert_with(|| vec![0.0; target.real_dim()]);
        for c in 0..dim {
            entry[voff + c] += gy[off + c];
        }
    }

    // sweep vertices in reverse topological order
    let order = ctx.skel.topo_sort()?;
    for u in order.iter().rev() {
        let adj_out = match adj.get(u) {
            Some(a) if a.iter().any(|&x| x != 0.0) => a.clone(),
            _ => continue,
        };
        let a = &tr.vertex_inputs[u];
        let jac = match vertex_behavior(ctx, u)? {
            Behavior::Fixed(k) => k.jac_input(a),
            Behavior::Pathwise(fam) => Some((fam.jac_input)(ctx.split[u], a, &tr.vertex_noise[u])),
            Behavior::Score(_) | Behavior::Logit(_) => None,
        };
        let jac = match jac {
            Some(j) => j,
            None => continue, // adjoint stops at non-differentiable kernels
        };
        // adj_in = adj_out^T . d out / d in
        let mut adj_in = vec![0.0; jac.cols];
        for o in 0..jac.rows {
            let w = adj_out[o];
            if w == 0.0 {
                continue;
            }
            for i in 0..jac.cols {
                adj_in[i] += w * jac.at(o, i);
            }
        }
        // route per input slot across the incoming wires
        let source = ctx.skel.kernel(u)?.source.clone();
        let in_offsets = slot_offsets(&source);
        for q in 1..=source.arity() {
            let (off, dim) = in_offsets[q - 1];
            if dim == 0 {
                continue;
            }
            let slot = (u.clone(), q);
            if let Some(w) = ctx.skel.wire_into(&slot) {
                let src_kernel = ctx.skel.kernel(&w.from.0)?;
                let src_offsets = slot_offsets(&src_kernel.target);
                let (soff, sdim) = src_offsets[w.from.1 - 1];
                debug_assert_eq!(dim, sdim);
                let entry = adj
                    .entry(w.from.0.clone())
                    .or_insert_with(|| vec![0.0; src_kernel.target.real_dim()]);
                for c in 0..dim {
                    entry[soff + c] += adj_in[off + c];
                }
            }
        }
    }
    Ok(adj)
}

/// Monte Carlo reverse-mode gradient of the expected objective.
///
/// Each sampled trace contributes, per parameterized vertex:
/// score and logit vertices `(J - baseline) * grad_theta log p(b | a)`, and
/// pathwise vertices the output adjoint (reverse-accumulated from the
/// objective gradient through downstream input Jacobians at fixed noise)
/// times their parameter Jacobian.
pub fn grad_reverse_mode_mc(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
    n: usize,
    seed: StreamSeed,
    label: &str,
    options: GradOptions,
) -> Result<GradEstimate> {
    let admissibility = validate_pathwise_admissibility(pd, is, obj)?;
    if !admissibility.is_empty() {
        return Err(Error::PathwiseInadmissible(admissibility.to_string()));
    }
    let skel = pd.skeleton(is)?;
    let order = skel.topo_sort()?;
    let split = pd.split_theta(theta)?;
    let layout = pd.param_layout();
    let ctx = EstimatorCtx {
        pd,
        skel: &skel,
        order: &order,
        split: &split,
        obj,
    };

    let sample_one = |s: usize| -> Result<BTreeMap<VertexId, Vec<f64>>> {
        let mut rng = seed.substream(label, s as u64);
        let tr = forward_sample(&ctx, &mut rng)?;
        per_sample_contributions(&ctx, &layout, &tr, options.baseline)
    };

    let contributions: Result<Vec<BTreeMap<VertexId, Vec<f64>>>> = if options.parallel {
        (0..n).into_par_iter().map(sample_one).collect()
    } else {
        (0..n).map(sample_one).collect()
    };
    let contributions = contributions?;

    let mut sums: BTreeMap<VertexId, Vec<f64>> = layout
        .iter()
        .map(|(v, d)| (v.clone(), vec![0.0; *d]))
        .collect();
    let mut sumsq = sums.clone();
    for c in &contributions {
        for (v, g) in c {
            let s = sums.get_mut(v).unwrap();
            let s2 = sumsq.get_mut(v).unwrap();
            for (i, gi) in g.iter().enumerate() {
                s[i] += gi;
                s2[i] += gi * gi;
            }
        }
    }
    Ok(GradEstimate::from_samples(&layout, sums, sumsq, n))
}

/// Exact gradient of the expected objective on an all-finite problem, by
/// full enumeration: the product rule over the trace factorization turns
/// into `sum rho * P(trace) * J * grad_theta log p_u(b_u | a_u)` per
/// parameterized vertex, which this computes term by term.
pub fn grad_exact_enumeration(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
) -> Result<Vec<f64>> {
    enumeration_gradient(pd, is, theta, obj, QWeighting::ProductRule)
}

/// Full-enumeration expectation of the per-sample score estimator with an
/// arbitrary constant baseline (the estimator whose Monte Carlo version
/// [`grad_reverse_mode_mc`] runs).
pub fn score_estimator_expectation(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
    baseline: f64,
) -> Result<Vec<f64>> {
    enumeration_gradient(
        pd,
        is,
        theta,
        obj,
        QWeighting::RealizedObjective { baseline },
    )
}

/// Full-enumeration expectation of the local rule with the exact conditional
/// expected future objective in place of the realized objective: `Q_u` is
/// computed by enumerating the conditional law given the vertex input,
/// output, and the admissible local context (reference variables plus all
/// non-descendant trace variables).
pub fn exact_q_expectation(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
) -> Result<Vec<f64>> {
    enumeration_gradient(pd, is, theta, obj, QWeighting::ExactConditional)
}

enum QWeighting {
    /// Differentiate the trace product directly:
    /// `sum rho * J * (P / p_v) * d p_v / d theta_v`.
    ProductRule,
    /// Expectation of the sampling estimator:
    /// `sum rho * P * (J - baseline) * grad log p_v`.
    RealizedObjective { baseline: f64 },
    /// Expectation of the local rule with the exact conditional expected
    /// future objective in place of `J`.
    ExactConditional,
}

fn enumeration_gradient(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta: &[f64],
    obj: &ObjectiveSpec,
    weighting: QWeighting,
) -> Result<Vec<f64>> {
    let rho = obj
        .rho_exact
        .as_ref()
        .ok_or_else(|| Error::invalid("objective has no exact data distribution"))?;
    let d = pd.expanded(is, theta)?;
    let n_inputs = d.external_inputs.len();
    let split = pd.split_theta(theta)?;
    let layout = pd.param_layout();

    // descendant sets for the admissible local context
    let mut descendants: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
    for (v, _) in &layout {
        let mut seen = BTreeSet::new();
        let mut frontier = vec![v.clone()];
        while let Some(u) = frontier.pop() {
            for w in &d.internal_wires {
                if w.from.0 == u && !seen.contains(&w.to.0) {
                    seen.insert(w.to.0.clone());
                    frontier.push(w.to.0.clone());
                }
            }
        }
        descendants.insert(v.clone(), seen);
    }

    let param_of = |v: &VertexId| -> &ParamKernel {
        match pd.vertices.get(v) {
            Some(VertexSpec::Param(p)) => p,
            _ => unreachable!("layout lists parameterized vertices"),
        }
    };

    // grad log p of one parameterized vertex at a trace point
    let grad_log = |v: &VertexId, a: &[Value], b: &[Value]| -> Result<Vec<f64>> {
        let spec = param_of(v);
        match &spec.family {
            ParamFamily::Logit => {
                let row = spec.source.index_of(a)?;
                let col = spec.target.index_of(b)?;
                spec.logit_grad_log_prob(split[v], row, col)
            }
            ParamFamily::Score(fam) => Ok((fam.grad_theta_log_density)(split[v], b, a)),
            ParamFamily::Pathwise(_) => Err(Error::NotFinite(format!(
                "pathwise vertex {v} has no enumerable density"
            ))),
        }
    };

    // (p_v(b | a), d p_v / d theta_v) for the product-rule route
    let prob_and_dprob = |v: &VertexId, a: &[Value], b: &[Value]| -> Result<(f64, Vec<f64>)> {
        let spec = param_of(v);
        match &spec.family {
            ParamFamily::Logit => {
                let n_tgt = spec.target.space().cardinality()?;
                let row = spec.source.index_of(a)?;
                let col = spec.target.index_of(b)?;
                let probs = spec.logit_row(split[v], row)?;
                let mut dp = vec![0.0; spec.theta_dim];
                for c in 0..n_tgt {
                    let delta = if c == col { 1.0 } else { 0.0 };
                    dp[row * n_tgt + c] = probs[col] * (delta - probs[c]);
                }
                Ok((probs[col], dp))
            }
            ParamFamily::Score(fam) => {
                let p = (fam.log_density)(split[v], b, a).exp();
                let gl = (fam.grad_theta_log_density)(split[v], b, a);
                Ok((p, gl.iter().map(|g| p * g).collect()))
            }
            ParamFamily::Pathwise(_) => Err(Error::NotFinite(format!(
                "pathwise vertex {v} has no enumerable density"
            ))),
        }
    };

    // enumerate all (x, r, trace) triples once
    struct Entry {
        weight: f64,
        objective: f64,
        point: crate::trace::TracePoint,
        x_idx: usize,
        r_idx: usize,
    }
    let mut entries: Vec<Entry> = Vec::new();
    for (xi, &w) in rho.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let point = match rho.space.point_at(xi)? {
            Value::Tuple(items) => items,
            v => vec![v],
        };
        let (x, r) = split_xr(point, n_inputs);
        let x_idx = d.input_profile()?.index_of(&x)?;
        let r_idx = obj.ref_profile.index_of(&r)?;
        for tp in enumerate_traces(&d, &x)? {
            let j = (obj.f)(&tp.external_output, &r);
            entries.push(Entry {
                weight: w * tp.prob,
                objective: j,
                point: tp,
                x_idx,
                r_idx,
            });
        }
    }

    let mut flat = Vec::with_capacity(pd.theta_dim());
    for (v, dim) in &layout {
        let mut g = vec![0.0; *dim];
        match &weighting {
            QWeighting::ProductRule => {
                for e in &entries {
                    let a = &e.point.vertex_inputs[v];
                    let b = &e.point.vertex_outputs[v];
                    let (p, dp) = prob_and_dprob(v, a, b)?;
                    if p <= 0.0 {
                        return Err(Error::ZeroDensity(format!(
                            "vertex {v} has zero probability on an enumerated trace"
                        )));
                    }
                    let rest = e.weight / p;
                    for (gi, dpi) in g.iter_mut().zip(&dp) {
                        *gi += rest * e.objective * dpi;
                    }
                }
            }
            QWeighting::RealizedObjective { baseline } => {
                for e in &entries {
                    let a = &e.point.vertex_inputs[v];
                    let b = &e.point.vertex_outputs[v];
                    let gl = grad_log(v, a, b)?;
                    for (gi, gli) in g.iter_mut().zip(&gl) {
                        *gi += e.weight * (e.objective - baseline) * gli;
                    }
                }
            }
            QWeighting::ExactConditional => {
                // group traces by (x, r, a_u, b_u, non-descendant outputs)
                let desc = &descendants[v];
                let spec_source = pd.vertices[v].source().clone();
                let spec_target = pd.vertices[v].target().clone();
                let key_of = |e: &Entry| -> Result<Vec<usize>> {
                    let mut key = vec![e.x_idx, e.r_idx];
                    key.push(spec_source.index_of(&e.point.vertex_inputs[v])?);
                    key.push(spec_target.index_of(&e.point.vertex_outputs[v])?);
                    for (u, outs) in &e.point.vertex_outputs {
                        if u == v || desc.contains(u) {
                            continue;
                        }
                        key.push(d.kernel(u)?.target.index_of(outs)?);
                    }
                    Ok(key)
                };
                let mut groups: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
                for e in &entries {
                    let k = key_of(e)?;
                    let slot = groups.entry(k).or_insert((0.0, 0.0));
                    slot.0 += e.weight;
                    slot.1 += e.weight * e.objective;
                }
                for e in &entries {
                    let k = key_of(e)?;
                    let (wsum, wjsum) = groups[&k];
                    let q = wjsum / wsum;
                    let a = &e.point.vertex_inputs[v];
                    let b = &e.point.vertex_outputs[v];
                    let gl = grad_log(v, a, b)?;
                    for (gi, gli) in g.iter_mut().zip(&gl) {
                        *gi += e.weight * q * gli;
                    }
                }
            }
        }
        flat.extend_from_slice(&g);
    }
    Ok(flat)
}

/// How the training loop obtains gradients and objective readings.
#[derive(Clone, Copy, Debug)]
pub enum TrainMode {
    /// Exact enumeration gradients (all-finite problems).
    Exact,
    /// Monte Carlo reverse-mode gradients with the given per-step sample count.
    Mc { n_per_step: usize, baseline: f64 },
}

/// Trajectory of a gradient-descent run.
#[derive(Clone, Debug)]
pub struct TrainTrace {
    /// Parameter iterates, including the initial point (`steps + 1` entries).
    pub thetas: Vec<Vec<f64>>,
    /// Expected-objective readings aligned with `thetas`.
    pub objectives: Vec<f64>,
}

/// Plain stochastic gradient descent:
/// `theta_{k+1} = theta_k - step_size * grad_estimate`.
pub fn train_sgd(
    pd: &ParamDiagram,
    is: &InterfaceSystem,
    theta0: &[f64],
    obj: &ObjectiveSpec,
    steps: usize,
    step_size: f64,
    mode: TrainMode,
    seed: StreamSeed,
) -> Result<TrainTrace> {
    let mut theta = theta0.to_vec();
    let mut thetas = vec![theta.clone()];
    let objective_at = |theta: &[f64], step: usize| -> Result<f64> {
        match mode {
            TrainMode::Exact => expected_objective_exact(pd, is, theta, obj),
            TrainMode::Mc { n_per_step, .. } => Ok(expected_objective_mc(
                pd,
                is,
                theta,
                obj,
                n_per_step,
                seed,
                &format!("train-eval-{step}"),
                false,
            )?
            .0),
        }
    };
    let mut objectives = vec![objective_at(&theta, 0)?];
    for step in 0..steps {
        let grad = match mode {
            TrainMode::Exact => grad_exact_enumeration(pd, is, &theta, obj)?,
            TrainMode::Mc {
                n_per_step,
                baseline,
            } => {
                grad_reverse_mode_mc(
                    pd,
                    is,
                    &theta,
                    obj,
                    n_per_step,
                    seed,
                    &format!("train-grad-{step}"),
                    GradOptions {
                        baseline,
                        parallel: false,
                    },
                )?
                .flat
            }
        };
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step_size * g;
        }
        thetas.push(theta.clone());
        objectives.push(objective_at(&theta, step + 1)?);
    }
    Ok(TrainTrace { thetas, objectives })
}
