//! Registered builtin kernels, objectives, data distributions, and parameter
//! pushforwards.
//!
//! Project files reference deterministic and sampler kernels by builtin name
//! plus numeric arguments; this module is the registry that resolves them.

use crate::ccmp::ParamPushforward;
use crate::error::{Error, Result};
use crate::kernel::{
    dirac_of_map, DetMap, GaussianLinear, Kernel, KernelRep, Mat, RefMeasure, SamplerDensity,
};
use crate::learn::{ObjectiveFn, ObjectiveGradFn, RhoSampleFn};
use crate::space::{Profile, SpaceDesc, Value};
use crate::stream::standard_normal;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

const LN_2PI: f64 = 1.8378770664093453;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Construct a builtin kernel by registered name.
///
/// Registered names:
/// * `identity` — the identity kernel (no args).
/// * `affine` — deterministic affine map on real profiles; args are the
///   weight matrix row-major by output followed by the bias.
/// * `softmax-table` — finite table from logit rows; args are the logits
///   row-major by enumerated source point.
/// * `logistic-interface` — real scalar to a two-point space;
///   `P(first label | z) = logistic(scale * (z - shift))` with optional args
///   `[scale, shift]` (defaults 1, 0).
/// * `treatment-rule` — deterministic finite-to-finite map; args list the
///   target index per enumerated source point (defaults to the identity
///   assignment).
/// * `gaussian-noise` — input-independent Gaussian scalar draw; args
///   `[mean, sigma]`.
pub fn build_kernel(
    name: impl Into<String>,
    builtin: &str,
    args: &[f64],
    source: Profile,
    target: Profile,
) -> Result<Kernel> {
    let name = name.into();
    match builtin {
        "identity" => {
            if source.arity() != 1 || !source.same_spaces(&target) {
                return Err(Error::invalid("identity needs one matching slot"));
            }
            let mut k = crate::kernel::identity_kernel(&source.0[0]);
            k.name = name;
            k.source = source;
            k.target = target;
            Ok(k)
        }
        "affine" => {
            let m = source.real_dim();
            let n = target.real_dim();
            if args.len() != n * m + n {
                return Err(Error::DimMismatch {
                    expected: n * m + n,
                    found: args.len(),
                });
            }
            let weight = args[..n * m].to_vec();
            let bias = args[n * m..].to_vec();
            let tgt = target.clone();
            let (w2, b2) = (weight.clone(), bias.clone());
            let map = Arc::new(move |v: &[Value]| {
                let x = flatten(v);
                let mut out = vec![0.0; n];
                for (o, item) in out.iter_mut().enumerate() {
                    *item = b2[o]
                        + w2[o * m..(o + 1) * m]
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                }
                crate::kernel::unflatten_real(&tgt, &out).expect("real target")
            });
            let jac = Arc::new(move |_: &[Value]| {
                let mut j = Mat::zeros(n, m);
                for o in 0..n {
                    for i in 0..m {
                        *j.at_mut(o, i) = weight[o * m + i];
                    }
                }
                j
            });
            dirac_of_map(name, source, target, map, Some(jac))
        }
        "softmax-table" => {
            let n_src = source.space().cardinality()?;
            let n_tgt = target.space().cardinality()?;
            if args.len() != n_src * n_tgt {
                return Err(Error::DimMismatch {
                    expected: n_src * n_tgt,
                    found: args.len(),
                });
            }
            let rows: Vec<Vec<f64>> = (0..n_src)
                .map(|r| {
                    let logits = &args[r * n_tgt..(r + 1) * n_tgt];
                    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = logits.iter().map(|&z| (z - mx).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    exps.into_iter().map(|e| e / sum).collect()
                })
                .collect();
            crate::kernel::finite_table_kernel(name, source, target, rows)
        }
        "logistic-interface" => {
            let scale = args.first().copied().unwrap_or(1.0);
            let shift = args.get(1).copied().unwrap_or(0.0);
            if source.real_dim() != 1 {
                return Err(Error::invalid("logistic-interface needs a scalar source"));
            }
            let n_tgt = target.space().cardinality()?;
            if n_tgt != 2 {
                return Err(Error::invalid(
                    "logistic-interface needs a two-point target",
                ));
            }
            let tgt_space = target.space();
            let sample: crate::kernel::SampleFn = {
                let tgt_space = tgt_space.clone();
                Arc::new(move |rng: &mut ChaCha12Rng, v: &[Value]| {
                    let z = flatten(v)[0];
                    let p0 = logistic(scale * (z - shift));
                    let idx = if rng.gen::<f64>() < p0 { 0 } else { 1 };
                    match tgt_space.point_at(idx).expect("two points") {
                        Value::Tuple(items) => items,
                        v => vec![v],
                    }
                })
            };
            let log_density: crate::kernel::LogDensityFn = {
                let tgt_space = tgt_space.clone();
                Arc::new(move |out: &[Value], inp: &[Value]| {
                    let z = flatten(inp)[0];
                    let p0 = logistic(scale * (z - shift));
                    let idx = tgt_space
                        .index_of(&Value::Tuple(out.to_vec()))
                        .expect("two points");
                    let p = if idx == 0 { p0 } else { 1.0 - p0 };
                    if p > 0.0 {
                        p.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
            };
            Kernel::new(
                name,
                source,
                target,
                KernelRep::Sampler(SamplerDensity {
                    sample,
                    log_density: Some(log_density),
                    reference: RefMeasure::Counting,
                }),
            )
        }
        "treatment-rule" => {
            let n_src = source.space().cardinality()?;
            let n_tgt = target.space().cardinality()?;
            let assignment: Vec<usize> = if args.is_empty() {
                (0..n_src).map(|i| i.min(n_tgt - 1)).collect()
            } else {
                args.iter().map(|&a| a as usize).collect()
            };
            if assignment.len() != n_src || assignment.iter().any(|&t| t >= n_tgt) {
                return Err(Error::invalid("treatment-rule assignment out of range"));
            }
            let src_space = source.space();
            let tgt_space = target.space();
            let map = Arc::new(move |v: &[Value]| {
                let idx = src_space
                    .index_of(&Value::Tuple(v.to_vec()))
                    .expect("finite source");
                match tgt_space.point_at(assignment[idx]).expect("finite target") {
                    Value::Tuple(items) => items,
                    v => vec![v],
                }
            });
            dirac_of_map(name, source, target, map, None)
        }
        "gaussian-noise" => {
            let mean = args.first().copied().unwrap_or(0.0);
            let sigma = args.get(1).copied().unwrap_or(1.0);
            if sigma <= 0.0 {
                return Err(Error::invalid("gaussian-noise needs sigma > 0"));
            }
            if target.real_dim() != 1 {
                return Err(Error::invalid("gaussian-noise needs a scalar target"));
            }
            let tgt = target.clone();
            let sample: crate::kernel::SampleFn =
                Arc::new(move |rng: &mut ChaCha12Rng, _: &[Value]| {
                    let z = mean + sigma * standard_normal(rng);
                    crate::kernel::unflatten_real(&tgt, &[z]).expect("scalar target")
                });
            let log_density: crate::kernel::LogDensityFn =
                Arc::new(move |out: &[Value], _: &[Value]| {
                    let z = flatten(out)[0];
                    let d = (z - mean) / sigma;
                    -0.5 * (d * d + LN_2PI) - sigma.ln()
                });
            Kernel::new(
                name,
                source,
                target,
                KernelRep::Sampler(SamplerDensity {
                    sample,
                    log_density: Some(log_density),
                    reference: RefMeasure::Lebesgue,
                }),
            )
        }
        other => Err(Error::UnknownRef(format!("builtin kernel {other}"))),
    }
}

fn flatten(vals: &[Value]) -> Vec<f64> {
    let mut out = Vec::new();
    for v in vals {
        v.flat_coords(&mut out);
    }
    out
}

/// Construct a builtin objective function and, when differentiable in its
/// output argument, its gradient.
///
/// Registered names: `squared-error` (sum of squared coordinate differences
/// between output and reference), `mismatch` (0/1 disagreement of finite
/// outputs), `indicator` (1 when the single finite output equals
/// `args[0]`).
pub fn build_objective_fn(
    builtin: &str,
    args: &[f64],
) -> Result<(ObjectiveFn, Option<ObjectiveGradFn>)> {
    match builtin {
        "squared-error" => {
            let f: ObjectiveFn = Arc::new(|y: &[Value], r: &[Value]| {
                let yv = flatten(y);
                let rv = flatten(r);
                yv.iter().zip(&rv).map(|(a, b)| (a - b) * (a - b)).sum()
            });
            let g: ObjectiveGradFn = Arc::new(|y: &[Value], r: &[Value]| {
                let yv = flatten(y);
                let rv = flatten(r);
                yv.iter().zip(&rv).map(|(a, b)| 2.0 * (a - b)).collect()
            });
            Ok((f, Some(g)))
        }
        "mismatch" => {
            let f: ObjectiveFn =
                Arc::new(|y: &[Value], r: &[Value]| if y == r { 0.0 } else { 1.0 });
            Ok((f, None))
        }
        "indicator" => {
            let idx = args.first().copied().unwrap_or(0.0) as usize;
            let f: ObjectiveFn = Arc::new(move |y: &[Value], _: &[Value]| match y.first() {
                Some(Value::FiniteIdx(i)) if *i == idx => 1.0,
                _ => 0.0,
            });
            Ok((f, None))
        }
        other => Err(Error::UnknownRef(format!("builtin objective {other}"))),
    }
}

/// Construct a builtin data-distribution sampler.
///
/// Registered names: `uniform-match` (uniform draw over a finite input
/// space, reference equal to the input) and `point` (a fixed input/reference
/// pair, supplied directly rather than through args).
pub fn build_rho_uniform_match(input_space: SpaceDesc) -> Result<RhoSampleFn> {
    let n = input_space.cardinality()?;
    Ok(Arc::new(move |rng: &mut ChaCha12Rng| {
        let i = rng.gen_range(0..n);
        let v = match input_space.point_at(i).expect("finite input") {
            Value::Tuple(items) => items,
            v => vec![v],
        };
        (v.clone(), v)
    }))
}

pub fn build_rho_point(input: Vec<Value>, reference: Vec<Value>) -> RhoSampleFn {
    Arc::new(move |_rng: &mut ChaCha12Rng| (input.clone(), reference.clone()))
}

/// Sampler for an explicit finite data distribution over the joint
/// `(input, reference)` space.
pub fn build_rho_exact_sampler(dist: crate::kernel::FiniteDist, n_inputs: usize) -> RhoSampleFn {
    Arc::new(move |rng: &mut ChaCha12Rng| {
        let point = dist.sample(rng).expect("finite rho");
        let mut items = match point {
            Value::Tuple(items) => items,
            v => vec![v],
        };
        let r = items.split_off(n_inputs);
        (items, r)
    })
}

/// Construct a builtin parameter pushforward.
///
/// Registered names:
/// * `identity` — args `[dim]`.
/// * `matrix` — linear map; args `[out_dim, in_dim, entries row-major]`.
/// * `copy-extend` — copy the source coordinates and zero-initialize the
///   rest; args `[out_dim, in_dim]` with `out_dim >= in_dim`.
/// * `tanh-affine` — `theta' = tanh(A theta + b)` elementwise; args
///   `[out_dim, in_dim, A row-major, b]`.
pub fn build_param_pushforward(
    name: &str,
    builtin: &str,
    args: &[f64],
) -> Result<ParamPushforward> {
    match builtin {
        "identity" => {
            let dim = args.first().copied().unwrap_or(0.0) as usize;
            let mut p = ParamPushforward::identity(dim);
            p.name = name.to_string();
            Ok(p)
        }
        "matrix" => {
            let (m, rest) = split_dims(args)?;
            let mut p = ParamPushforward::linear(name, m);
            if !rest.is_empty() {
                return Err(Error::invalid("matrix pushforward has trailing args"));
            }
            p.name = name.to_string();
            Ok(p)
        }
        "copy-extend" => {
            if args.len() != 2 {
                return Err(Error::invalid("copy-extend needs [out_dim, in_dim]"));
            }
            let out_dim = args[0] as usize;
            let in_dim = args[1] as usize;
            if out_dim < in_dim {
                return Err(Error::invalid("copy-extend cannot shrink"));
            }
            let mut m = Mat::zeros(out_dim, in_dim);
            for i in 0..in_dim {
                *m.at_mut(i, i) = 1.0;
            }
            let mut p = ParamPushforward::linear(name, m);
            p.name = name.to_string();
            Ok(p)
        }
        "tanh-affine" => {
            if args.len() < 2 {
                return Err(Error::invalid("tanh-affine needs dims"));
            }
            let out_dim = args[0] as usize;
            let in_dim = args[1] as usize;
            if args.len() != 2 + out_dim * in_dim + out_dim {
                return Err(Error::DimMismatch {
                    expected: 2 + out_dim * in_dim + out_dim,
                    found: args.len(),
                });
            }
            let a = args[2..2 + out_dim * in_dim].to_vec();
            let b = args[2 + out_dim * in_dim..].to_vec();
            let (a2, b2) = (a.clone(), b.clone());
            Ok(ParamPushforward {
                name: name.to_string(),
                in_dim,
                out_dim,
                map: Arc::new(move |x: &[f64]| {
                    (0..out_dim)
                        .map(|o| {
                            (b[o]
                                + a[o * in_dim..(o + 1) * in_dim]
                                    .iter()
                                    .zip(x)
                                    .map(|(w, xi)| w * xi)
                                    .sum::<f64>())
                            .tanh()
                        })
                        .collect()
                }),
                jacobian: Arc::new(move |x: &[f64]| {
                    let mut j = Mat::zeros(out_dim, in_dim);
                    for o in 0..out_dim {
                        let z: f64 = b2[o]
                            + a2[o * in_dim..(o + 1) * in_dim]
                                .iter()
                                .zip(x)
                                .map(|(w, xi)| w * xi)
                                .sum::<f64>();
                        let d = 1.0 - z.tanh().powi(2);
                        for i in 0..in_dim {
                            *j.at_mut(o, i) = d * a2[o * in_dim + i];
                        }
                    }
                    j
                }),
            })
        }
        other => Err(Error::UnknownRef(format!("builtin pushforward {other}"))),
    }
}

fn split_dims(args: &[f64]) -> Result<(Mat, &[f64])> {
    if args.len() < 2 {
        return Err(Error::invalid("matrix args need [out_dim, in_dim, ...]"));
    }
    let rows = args[0] as usize;
    let cols = args[1] as usize;
    if args.len() < 2 + rows * cols {
        return Err(Error::DimMismatch {
            expected: 2 + rows * cols,
            found: args.len(),
        });
    }
    let data = args[2..2 + rows * cols].to_vec();
    Ok((Mat { rows, cols, data }, &args[2 + rows * cols..]))
}

/// Gaussian-linear kernel constructor used by project files.
pub fn gaussian_linear_kernel(
    name: impl Into<String>,
    source: Profile,
    target: Profile,
    weight_rows_by_source: Vec<Vec<f64>>,
    bias: Vec<f64>,
    cov_diag: Vec<f64>,
) -> Result<Kernel> {
    let weight = Mat::from_rows(weight_rows_by_source)?;
    Kernel::new(
        name,
        source,
        target,
        KernelRep::GaussianLinear(GaussianLinear {
            weight,
            bias,
            cov_diag,
        }),
    )
}

/// Deterministic kernel from an explicit closure (used by fixtures).
pub fn det_kernel(
    name: impl Into<String>,
    source: Profile,
    target: Profile,
    map: crate::kernel::MapFn,
    jac: Option<crate::kernel::JacFn>,
) -> Result<Kernel> {
    Kernel::new(
        name,
        source,
        target,
        KernelRep::Deterministic(DetMap { map, jac }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Object;

    #[test]
    fn logistic_interface_normalizes_and_samples() {
        let bio = Object::real("Bio", 1);
        let diag = Object::finite("Diag", &["bacterial", "viral"]);
        let k = build_kernel(
            "iface",
            "logistic-interface",
            &[],
            Profile::single(bio),
            Profile::single(diag),
        )
        .unwrap();
        let z = vec![Value::real(0.7)];
        let d = k.apply_exact(&z).unwrap();
        assert!((d.probs[0] - logistic(0.7)).abs() < 1e-15);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn treatment_rule_maps_by_index() {
        let diag = Object::finite("Diag", &["bacterial", "viral"]);
        let treat = Object::finite("Treat", &["antibiotic", "supportive"]);
        let k = build_kernel(
            "rule",
            "treatment-rule",
            &[],
            Profile::single(diag),
            Profile::single(treat),
        )
        .unwrap();
        let out = k.apply_exact(&[Value::FiniteIdx(0)]).unwrap();
        assert_eq!(out.probs, vec![1.0, 0.0]);
        let out = k.apply_exact(&[Value::FiniteIdx(1)]).unwrap();
        assert_eq!(out.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn gaussian_noise_density_integrates_on_grid() {
        let pat = Object::finite("Pat", &["p"]);
        let bio = Object::real("Bio", 1);
        let k = build_kernel(
            "biomarker",
            "gaussian-noise",
            &[0.0, 1.0],
            Profile::single(pat),
            Profile::single(bio),
        )
        .unwrap();
        // trapezoid rule over [-10, 10]
        let n = 20_000;
        let h = 20.0 / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let z = -10.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let ld = k
                .log_density(&[Value::real(z)], &[Value::FiniteIdx(0)])
                .unwrap();
            total += w * h * ld.exp();
        }
        assert!((total - 1.0).abs() <= 1e-3, "integral {total}");
    }

    #[test]
    fn affine_builtin_matches_hand_map() {
        let k = build_kernel(
            "aff",
            "affine",
            &[2.0, -1.0, 0.5, 0.1], // weight [[2,-1],[0.5? no: n=1? ...
            Profile::single(Object::real("A", 2)),
            Profile::single(Object::real("B", 2)),
        );
        // wrong arg count: n*m+n = 2*2+2 = 6
        assert!(k.is_err());
        let k = build_kernel(
            "aff",
            "affine",
            &[2.0, -1.0, 0.0, 0.5, 0.1, -0.2],
            Profile::single(Object::real("A", 2)),
            Profile::single(Object::real("B", 2)),
        )
        .unwrap();
        let mut rng = crate::stream::StreamSeed(0).stream("x");
        let out = k.sample(&mut rng, &[Value::reals(&[1.0, 2.0])]).unwrap();
        let coords = out[0].as_coords().unwrap();
        assert!((coords[0] - (2.0 - 2.0 + 0.1)).abs() < 1e-15);
        assert!((coords[1] - (0.0 + 1.0 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn tanh_affine_pushforward_jacobian() {
        let p = build_param_pushforward(
            "warp",
            "tanh-affine",
            &[2.0, 2.0, 0.5, -0.3, 0.2, 0.8, 0.1, -0.4],
        )
        .unwrap();
        let worst = p.check_jacobian(&[vec![0.4, -0.9]]).unwrap();
        assert!(worst <= 1e-4, "worst {worst}");
    }
}
