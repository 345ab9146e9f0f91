//! Bundled example projects.
//!
//! These are the fixtures exercised by the examples, the CLI, and the
//! acceptance suite: a Gaussian two-kernel chain, finite Bayesian-network
//! fragments, a typed diagnosis-treatment workflow, finite and Gaussian
//! learning problems, and a dynamic-graph family of states.

use crate::project::*;
use crate::space::{SpaceDesc, Value};
use std::collections::BTreeMap;

fn obj(space: SpaceRef, color: Option<&str>) -> ObjectDef {
    ObjectDef {
        space,
        color: color.map(|c| c.to_string()),
    }
}

fn named(s: &str) -> SpaceRef {
    SpaceRef::Named(s.to_string())
}

fn real1() -> SpaceRef {
    SpaceRef::Inline(SpaceDesc::real_vec(1))
}

fn slot(v: &str, s: usize) -> SlotDef {
    (v.to_string(), s)
}

fn wire(from: SlotDef, to: SlotDef, witness: Option<&str>) -> WireDef {
    WireDef {
        from,
        to,
        witness: witness.map(|w| w.to_string()),
    }
}

/// Two Gaussian kernels composed along one slot: the first emits a noisy
/// reading and a passthrough copy of its input, the second adds its two
/// inputs with fresh noise.
pub fn gaussian_chain() -> ProjectFile {
    let mut f = ProjectFile::default();
    for name in ["A", "B1", "B2", "C2", "D"] {
        f.objects.insert(name.into(), obj(real1(), None));
    }
    f.kernels.insert(
        "spread".into(),
        KernelDef {
            source: vec!["A".into()],
            target: vec!["B1".into(), "B2".into()],
            rep: KernelRepDef::Gaussian {
                weight: vec![vec![1.0, 1.0]],
                bias: vec![0.0, 0.0],
                cov: vec![0.64, 0.0],
            },
        },
    );
    f.kernels.insert(
        "add".into(),
        KernelDef {
            source: vec!["B1".into(), "C2".into()],
            target: vec!["D".into()],
            rep: KernelRepDef::Gaussian {
                weight: vec![vec![1.0], vec![1.0]],
                bias: vec![0.0],
                cov: vec![0.36],
            },
        },
    );
    f.diagrams.insert(
        "chain".into(),
        DiagramDef {
            vertices: [
                ("k".to_string(), "spread".to_string()),
                ("l".to_string(), "add".to_string()),
            ]
            .into_iter()
            .collect(),
            wires: vec![wire(slot("k", 1), slot("l", 1), None)],
            external_inputs: vec![slot("k", 1), slot("l", 2)],
            external_outputs: vec![slot("l", 1), slot("k", 2)],
        },
    );
    f
}

/// Finite Bayesian-network fragments: a three-kernel chain and a v-structure.
pub fn bayes_fragments() -> ProjectFile {
    let mut f = ProjectFile::default();
    f.spaces
        .insert("bit".into(), SpaceDesc::finite(&["lo", "hi"]).unwrap());
    for name in ["A", "B", "C", "D", "A2", "B2", "C2", "D2", "E2"] {
        f.objects.insert(name.into(), obj(named("bit"), None));
    }
    let table = |src: &str, tgt: &str, rows: Vec<Vec<f64>>| KernelDef {
        source: vec![src.into()],
        target: vec![tgt.into()],
        rep: KernelRepDef::Table { rows },
    };
    f.kernels.insert(
        "m1".into(),
        table("A", "B", vec![vec![0.9, 0.1], vec![0.3, 0.7]]),
    );
    f.kernels.insert(
        "m2".into(),
        table("B", "C", vec![vec![0.5, 0.5], vec![0.2, 0.8]]),
    );
    f.kernels.insert(
        "m3".into(),
        table("C", "D", vec![vec![0.6, 0.4], vec![0.1, 0.9]]),
    );
    f.kernels.insert(
        "n1".into(),
        table("A2", "B2", vec![vec![0.6, 0.4], vec![0.1, 0.9]]),
    );
    f.kernels.insert(
        "n2".into(),
        table("C2", "D2", vec![vec![0.7, 0.3], vec![0.4, 0.6]]),
    );
    f.kernels.insert(
        "n3".into(),
        KernelDef {
            source: vec!["B2".into(), "D2".into()],
            target: vec!["E2".into()],
            rep: KernelRepDef::Table {
                rows: vec![
                    vec![0.5, 0.5],
                    vec![0.2, 0.8],
                    vec![0.9, 0.1],
                    vec![0.3, 0.7],
                ],
            },
        },
    );
    f.diagrams.insert(
        "chain".into(),
        DiagramDef {
            vertices: [
                ("k1".to_string(), "m1".to_string()),
                ("k2".to_string(), "m2".to_string()),
                ("k3".to_string(), "m3".to_string()),
            ]
            .into_iter()
            .collect(),
            wires: vec![
                wire(slot("k1", 1), slot("k2", 1), None),
                wire(slot("k2", 1), slot("k3", 1), None),
            ],
            external_inputs: vec![slot("k1", 1)],
            external_outputs: vec![slot("k3", 1)],
        },
    );
    f.diagrams.insert(
        "vstructure".into(),
        DiagramDef {
            vertices: [
                ("k1".to_string(), "n1".to_string()),
                ("k2".to_string(), "n2".to_string()),
                ("k3".to_string(), "n3".to_string()),
            ]
            .into_iter()
            .collect(),
            wires: vec![
                wire(slot("k1", 1), slot("k3", 1), None),
                wire(slot("k2", 1), slot("k3", 2), None),
            ],
            external_inputs: vec![slot("k1", 1), slot("k2", 1)],
            external_outputs: vec![slot("k3", 1)],
        },
    );
    f
}

/// The typed diagnosis-treatment workflow: a continuous biomarker converted
/// through a logistic interface into a diagnosis, then mapped to a treatment.
pub fn diagnosis() -> ProjectFile {
    let mut f = ProjectFile::default();
    f.colors = Some(ColorsDef {
        object_colors: vec![
            "cbio".into(),
            "cdiag".into(),
            "cpat".into(),
            "ctreat".into(),
        ],
        k_morphisms: [
            (
                "to-diag".to_string(),
                KMorDef {
                    src: "cbio".into(),
                    dst: "cdiag".into(),
                },
            ),
            (
                "to-treat".to_string(),
                KMorDef {
                    src: "cdiag".into(),
                    dst: "ctreat".into(),
                },
            ),
        ]
        .into_iter()
        .collect(),
        k_compose: vec![[
            "to-treat".to_string(),
            "to-diag".to_string(),
            "to-plan".to_string(),
        ]],
        iota: BTreeMap::new(),
    });
    f.objects.insert(
        "Pat".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["patient"]).unwrap()),
            Some("cpat"),
        ),
    );
    f.objects.insert("Bio".into(), obj(real1(), Some("cbio")));
    f.objects.insert(
        "Diag".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["bacterial", "viral"]).unwrap()),
            Some("cdiag"),
        ),
    );
    f.objects.insert(
        "Treat".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["antibiotic", "supportive"]).unwrap()),
            Some("ctreat"),
        ),
    );
    f.kernels.insert(
        "biomarker".into(),
        KernelDef {
            source: vec!["Pat".into()],
            target: vec!["Bio".into()],
            rep: KernelRepDef::Builtin {
                name: "gaussian-noise".into(),
                args: vec![0.0, 1.0],
            },
        },
    );
    f.kernels.insert(
        "kappa-diag".into(),
        KernelDef {
            source: vec!["Bio".into()],
            target: vec!["Diag".into()],
            rep: KernelRepDef::Builtin {
                name: "logistic-interface".into(),
                args: vec![],
            },
        },
    );
    f.kernels.insert(
        "kappa-treat".into(),
        KernelDef {
            source: vec!["Diag".into()],
            target: vec!["Treat".into()],
            rep: KernelRepDef::Builtin {
                name: "treatment-rule".into(),
                args: vec![],
            },
        },
    );
    f.kernels.insert(
        "kappa-plan".into(),
        KernelDef {
            source: vec!["Bio".into()],
            target: vec!["Treat".into()],
            rep: KernelRepDef::Builtin {
                name: "logistic-interface".into(),
                args: vec![],
            },
        },
    );
    f.kernels.insert(
        "treat".into(),
        KernelDef {
            source: vec!["Diag".into()],
            target: vec!["Treat".into()],
            rep: KernelRepDef::Builtin {
                name: "treatment-rule".into(),
                args: vec![],
            },
        },
    );
    f.interfaces = vec![
        InterfaceDef {
            witness: "to-diag".into(),
            from: "Bio".into(),
            to: "Diag".into(),
            kernel: "kappa-diag".into(),
        },
        InterfaceDef {
            witness: "to-treat".into(),
            from: "Diag".into(),
            to: "Treat".into(),
            kernel: "kappa-treat".into(),
        },
        InterfaceDef {
            witness: "to-plan".into(),
            from: "Bio".into(),
            to: "Treat".into(),
            kernel: "kappa-plan".into(),
        },
    ];
    f.diagrams.insert(
        "workflow".into(),
        DiagramDef {
            vertices: [
                ("measure".to_string(), "biomarker".to_string()),
                ("prescribe".to_string(), "treat".to_string()),
            ]
            .into_iter()
            .collect(),
            wires: vec![wire(
                slot("measure", 1),
                slot("prescribe", 1),
                Some("to-diag"),
            )],
            external_inputs: vec![slot("measure", 1)],
            external_outputs: vec![slot("prescribe", 1)],
        },
    );
    f.coherence_grids.insert(
        "Bio".into(),
        vec![-2.0, -1.0, 0.0, 1.0, 2.0]
            .into_iter()
            .map(|z| vec![Value::real(z)])
            .collect(),
    );
    f
}

/// Finite learning problem: a two-stage logit-table classifier trained to
/// match its input.
pub fn finite_learn() -> ProjectFile {
    let mut f = ProjectFile::default();
    f.colors = Some(ColorsDef {
        object_colors: vec!["t".into()],
        ..ColorsDef::default()
    });
    f.objects.insert(
        "X".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["x0", "x1"]).unwrap()),
            Some("t"),
        ),
    );
    f.objects.insert(
        "H".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["h0", "h1", "h2"]).unwrap()),
            Some("t"),
        ),
    );
    f.objects.insert(
        "Y".into(),
        obj(
            SpaceRef::Inline(SpaceDesc::finite(&["y0", "y1"]).unwrap()),
            Some("t"),
        ),
    );
    f.param_diagrams.insert(
        "classifier".into(),
        ParamDiagramDef {
            vertices: [
                (
                    "u1".to_string(),
                    PVertexDef::Logit {
                        source: vec!["X".into()],
                        target: vec!["H".into()],
                    },
                ),
                (
                    "u2".to_string(),
                    PVertexDef::Logit {
                        source: vec!["H".into()],
                        target: vec!["Y".into()],
                    },
                ),
            ]
            .into_iter()
            .collect(),
            wires: vec![wire(slot("u1", 1), slot("u2", 1), Some("id_t"))],
            external_inputs: vec![slot("u1", 1)],
            external_outputs: vec![slot("u2", 1)],
        },
    );
    f.objectives.insert(
        "matching".into(),
        ObjectiveDef {
            input_objects: vec!["X".into()],
            ref_objects: vec!["X".into()],
            f: FnDef {
                name: "mismatch".into(),
                args: vec![],
            },
            rho: RhoDef::UniformMatch,
        },
    );
    f
}

/// Gaussian reparameterized chain with a squared-error objective against a
/// fixed target.
pub fn pathwise_learn() -> ProjectFile {
    let mut f = ProjectFile::default();
    f.colors = Some(ColorsDef {
        object_colors: vec!["r".into()],
        ..ColorsDef::default()
    });
    for name in ["Xr", "Hr", "Yr", "Rr"] {
        f.objects.insert(name.into(), obj(real1(), Some("r")));
    }
    f.param_diagrams.insert(
        "gauss-chain".into(),
        ParamDiagramDef {
            vertices: [
                (
                    "u1".to_string(),
                    PVertexDef::GaussianAffine {
                        source: vec!["Xr".into()],
                        target: vec!["Hr".into()],
                        sigmas: vec![0.1],
                    },
                ),
                (
                    "u2".to_string(),
                    PVertexDef::GaussianAffine {
                        source: vec!["Hr".into()],
                        target: vec!["Yr".into()],
                        sigmas: vec![0.1],
                    },
                ),
            ]
            .into_iter()
            .collect(),
            wires: vec![wire(slot("u1", 1), slot("u2", 1), Some("id_r"))],
            external_inputs: vec![slot("u1", 1)],
            external_outputs: vec![slot("u2", 1)],
        },
    );
    f.objectives.insert(
        "fit".into(),
        ObjectiveDef {
            input_objects: vec!["Xr".into()],
            ref_objects: vec!["Rr".into()],
            f: FnDef {
                name: "squared-error".into(),
                args: vec![],
            },
            rho: RhoDef::Point {
                input: vec![Value::real(1.0)],
                reference: vec![Value::real(-4.0)],
            },
        },
    );
    f
}

/// A growing-graph family of states: three graph states related by
/// inclusions, plus an auxiliary pair of states related by a nonlinear
/// parameter transport.
pub fn dynamic_graph() -> ProjectFile {
    let mut f = ProjectFile::default();
    f.colors = Some(ColorsDef {
        object_colors: vec!["cE".into(), "cS".into(), "cV".into()],
        ..ColorsDef::default()
    });
    f.spaces.insert("feat".into(), SpaceDesc::real_vec(2));
    f.spaces
        .insert("state".into(), SpaceDesc::finite(&["lo", "hi"]).unwrap());

    let states = ["g0", "g1", "g2"];
    let edges_of = |s: &str| -> Vec<&'static str> {
        match s {
            "g0" => vec!["e12"],
            "g1" => vec!["e12", "e23"],
            _ => vec!["e12", "e23", "e13"],
        }
    };
    let verts_of = |s: &str| -> Vec<&'static str> {
        match s {
            "g0" => vec!["v1", "v2"],
            _ => vec!["v1", "v2", "v3"],
        }
    };
    let ends = |e: &str| -> (&'static str, &'static str) {
        match e {
            "e12" => ("v1", "v2"),
            "e23" => ("v2", "v3"),
            _ => ("v1", "v3"),
        }
    };

    for s in states {
        for v in verts_of(s) {
            f.objects
                .insert(format!("{s}/x{v}"), obj(named("feat"), Some("cV")));
        }
        for e in edges_of(s) {
            f.objects
                .insert(format!("{s}/x{e}"), obj(named("feat"), Some("cE")));
        }
        for v in ["sv1", "sv2", "sv3"] {
            f.objects
                .insert(format!("{s}/{v}"), obj(named("state"), Some("cS")));
        }
        // edge update: (vertex, edge, vertex) features -> edge features
        for e in edges_of(s) {
            let (u, v) = ends(e);
            f.kernels.insert(
                format!("{s}/upd_{e}"),
                KernelDef {
                    source: vec![
                        format!("{s}/x{u}"),
                        format!("{s}/x{e}"),
                        format!("{s}/x{v}"),
                    ],
                    target: vec![format!("{s}/x{e}")],
                    rep: KernelRepDef::Gaussian {
                        weight: vec![
                            vec![0.3, 0.0],
                            vec![0.0, 0.3],
                            vec![0.5, 0.0],
                            vec![0.0, 0.5],
                            vec![0.2, 0.1],
                            vec![-0.1, 0.2],
                        ],
                        bias: vec![0.0, 0.0],
                        cov: vec![0.01, 0.01],
                    },
                },
            );
        }
        // finite observation chain, identical across states
        f.kernels.insert(
            format!("{s}/flip1"),
            KernelDef {
                source: vec![format!("{s}/sv1")],
                target: vec![format!("{s}/sv2")],
                rep: KernelRepDef::Table {
                    rows: vec![vec![0.8, 0.2], vec![0.25, 0.75]],
                },
            },
        );
        f.kernels.insert(
            format!("{s}/flip2"),
            KernelDef {
                source: vec![format!("{s}/sv2")],
                target: vec![format!("{s}/sv3")],
                rep: KernelRepDef::Table {
                    rows: vec![vec![0.6, 0.4], vec![0.35, 0.65]],
                },
            },
        );
    }

    // per-state registries with role labels shared across states
    for s in states {
        let mut objects: Vec<String> = Vec::new();
        for v in verts_of(s) {
            objects.push(format!("{s}/x{v}"));
        }
        for e in edges_of(s) {
            objects.push(format!("{s}/x{e}"));
        }
        for v in ["sv1", "sv2", "sv3"] {
            objects.push(format!("{s}/{v}"));
        }
        let mut kernels: Vec<String> = edges_of(s).iter().map(|e| format!("{s}/upd_{e}")).collect();
        kernels.push(format!("{s}/flip1"));
        kernels.push(format!("{s}/flip2"));
        let mut kernel_roles = BTreeMap::new();
        for e in edges_of(s) {
            kernel_roles.insert(format!("{s}/upd_{e}"), format!("edge-update-{e}"));
        }
        kernel_roles.insert(format!("{s}/flip1"), "obs-flip1".to_string());
        kernel_roles.insert(format!("{s}/flip2"), "obs-flip2".to_string());
        f.states.insert(
            s.to_string(),
            StateDef {
                objects,
                kernels,
                kernel_roles,
                // two shared coordinates plus two per edge
                param_dim: 2 + 2 * edges_of(s).len(),
            },
        );
    }

    f.index_category = Some(IndexCatDef {
        objects: vec![
            "g0".into(),
            "g1".into(),
            "g2".into(),
            "w0".into(),
            "w1".into(),
        ],
        morphisms: [
            (
                "a01".to_string(),
                MorDef {
                    src: "g0".into(),
                    dst: "g1".into(),
                },
            ),
            (
                "a12".to_string(),
                MorDef {
                    src: "g1".into(),
                    dst: "g2".into(),
                },
            ),
            (
                "a02".to_string(),
                MorDef {
                    src: "g0".into(),
                    dst: "g2".into(),
                },
            ),
            (
                "warp".to_string(),
                MorDef {
                    src: "w0".into(),
                    dst: "w1".into(),
                },
            ),
        ]
        .into_iter()
        .collect(),
        compose: vec![["a12".to_string(), "a01".to_string(), "a02".to_string()]],
    });
    f.states.insert(
        "w0".into(),
        StateDef {
            objects: vec![],
            kernels: vec![],
            kernel_roles: BTreeMap::new(),
            param_dim: 2,
        },
    );
    f.states.insert(
        "w1".into(),
        StateDef {
            objects: vec![],
            kernels: vec![],
            kernel_roles: BTreeMap::new(),
            param_dim: 3,
        },
    );

    let inclusion = |from: &str, to: &str| -> StatePushDef {
        let mut object_map = BTreeMap::new();
        let mut kernel_map = BTreeMap::new();
        for v in verts_of(from) {
            object_map.insert(format!("{from}/x{v}"), format!("{to}/x{v}"));
        }
        for e in edges_of(from) {
            object_map.insert(format!("{from}/x{e}"), format!("{to}/x{e}"));
            kernel_map.insert(format!("{from}/upd_{e}"), format!("{to}/upd_{e}"));
        }
        for v in ["sv1", "sv2", "sv3"] {
            object_map.insert(format!("{from}/{v}"), format!("{to}/{v}"));
        }
        kernel_map.insert(format!("{from}/flip1"), format!("{to}/flip1"));
        kernel_map.insert(format!("{from}/flip2"), format!("{to}/flip2"));
        StatePushDef {
            object_map,
            kernel_map,
        }
    };
    f.state_pushforwards
        .insert("a01".into(), inclusion("g0", "g1"));
    f.state_pushforwards
        .insert("a12".into(), inclusion("g1", "g2"));
    f.state_pushforwards
        .insert("a02".into(), inclusion("g0", "g2"));
    f.state_pushforwards
        .insert("warp".into(), StatePushDef::default());

    // linear transports are explicit matrices: copy the persistent block,
    // zero-initialize the new edge blocks
    let copy_extend = |out_dim: usize, in_dim: usize| -> ParamPushDef {
        let mut rows = vec![vec![0.0; in_dim]; out_dim];
        for (i, row) in rows.iter_mut().enumerate().take(in_dim) {
            row[i] = 1.0;
        }
        ParamPushDef::Matrix { matrix: rows }
    };
    f.param_pushforwards.insert("a01".into(), copy_extend(6, 4));
    f.param_pushforwards.insert("a12".into(), copy_extend(8, 6));
    f.param_pushforwards.insert("a02".into(), copy_extend(8, 4));
    f.param_pushforwards.insert(
        "warp".into(),
        ParamPushDef::Builtin {
            builtin: "tanh-affine".into(),
            args: vec![
                3.0, 2.0, // dims
                0.8, -0.3, 0.2, 0.9, -0.5, 0.4, // A row-major
                0.1, -0.2, 0.3, // b
            ],
        },
    );

    // grid points for coherence checks over the continuous feature objects
    let feat_grid: Vec<Vec<Value>> = vec![
        vec![Value::reals(&[0.0, 0.0])],
        vec![Value::reals(&[0.5, -0.5])],
        vec![Value::reals(&[1.0, 2.0])],
    ];
    for s in states {
        for v in verts_of(s) {
            f.coherence_grids
                .insert(format!("{s}/x{v}"), feat_grid.clone());
        }
        for e in edges_of(s) {
            f.coherence_grids
                .insert(format!("{s}/x{e}"), feat_grid.clone());
        }
    }

    // a pushable observation diagram per state
    for s in states {
        f.diagrams.insert(
            format!("{s}/obs-chain"),
            DiagramDef {
                vertices: [
                    ("obs1".to_string(), format!("{s}/flip1")),
                    ("obs2".to_string(), format!("{s}/flip2")),
                ]
                .into_iter()
                .collect(),
                wires: vec![wire(slot("obs1", 1), slot("obs2", 1), Some("id_cS"))],
                external_inputs: vec![slot("obs1", 1)],
                external_outputs: vec![slot("obs2", 1)],
            },
        );
    }
    f
}

/// Every bundled fixture by name.
pub fn all() -> BTreeMap<String, ProjectFile> {
    [
        ("gaussian_chain", gaussian_chain()),
        ("bayes_fragments", bayes_fragments()),
        ("diagnosis", diagnosis()),
        ("finite_learn", finite_learn()),
        ("pathwise_learn", pathwise_learn()),
        ("dynamic_graph", dynamic_graph()),
    ]
    .into_iter()
    .map(|(n, f)| (n.to_string(), f))
    .collect()
}

/// Write every fixture into `dir` as `<name>.json` in canonical form.
pub fn write_all(dir: &std::path::Path) -> crate::error::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, file) in all() {
        file.save(&dir.join(format!("{name}.json")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::check_color_system;

    #[test]
    fn all_fixtures_compile_and_validate() {
        for (name, file) in all() {
            let compiled = file.compile().unwrap_or_else(|e| panic!("{name}: {e}"));
            let report = check_color_system(&compiled.colors);
            assert!(report.is_empty(), "{name} colors: {report}");
            for (dname, d) in &compiled.diagrams {
                match d {
                    crate::project::CompiledDiagram::Plain(p) => {
                        let r = p.validate();
                        assert!(r.is_empty(), "{name}/{dname}: {r}");
                    }
                    crate::project::CompiledDiagram::Colored(cd) => {
                        let r = cd.validate(&compiled.interfaces);
                        assert!(r.is_empty(), "{name}/{dname}: {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn bundled_files_match_constructors() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        for (name, file) in all() {
            let path = dir.join(format!("{name}.json"));
            let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| {
                panic!(
                    "{}: {e} (regenerate with fixtures::write_all)",
                    path.display()
                )
            });
            assert_eq!(
                on_disk,
                file.canonical(),
                "{name}.json is stale; regenerate with fixtures::write_all"
            );
        }
    }

    #[test]
    fn canonical_round_trip_is_identity() {
        for (name, file) in all() {
            let text = file.canonical();
            let reloaded = ProjectFile::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(file, reloaded, "{name} round trip");
            assert_eq!(text, reloaded.canonical(), "{name} canonical bytes");
        }
    }
}
