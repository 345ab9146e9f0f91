//! The project file format: one self-contained JSON document declaring
//! spaces, objects, colors, interface witnesses, kernels, diagrams,
//! parameterized diagrams, objectives, and the co-indexed sections.
//!
//! Cross-references are by name. Loading resolves every reference into the
//! compiled in-memory structures; saving writes a canonical pretty-printed
//! form (sections and maps in sorted order), so load-then-save round-trips
//! byte-identically.

use crate::builtin;
use crate::ccmp::{Ccmp, CmpFunctor, CmpRegistry, IndexCat, MorId, ParamPushforward, StateId};
use crate::color::{ColorId, ColorSystem, ColorTerm, ColoredDiagram, InterfaceSystem, KMorId};
use crate::diagram::{Diagram, VertexId, Wire};
use crate::error::{Error, Result};
use crate::kernel::{FiniteDist, Kernel};
use crate::learn::{ObjectiveSpec, ParamDiagram, ParamKernel};
use crate::space::{Object, Profile, SpaceDesc, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

fn is_empty_map<K, V>(m: &BTreeMap<K, V>) -> bool {
    m.is_empty()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SpaceRef {
    Named(String),
    Inline(SpaceDesc),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ObjectDef {
    pub space: SpaceRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KMorDef {
    pub src: String,
    pub dst: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct ColorsDef {
    pub object_colors: Vec<String>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub k_morphisms: BTreeMap<String, KMorDef>,
    /// Composition entries `[g, f, h]` meaning `g . f = h`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_compose: Vec<[String; 3]>,
    /// Explicit color paths overriding the derived ones.
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub iota: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InterfaceDef {
    pub witness: String,
    pub from: String,
    pub to: String,
    pub kernel: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum KernelRepDef {
    Table {
        rows: Vec<Vec<f64>>,
    },
    Gaussian {
        /// Source-dim x target-dim layout: `weight[i][j]` multiplies source
        /// coordinate `i` into target coordinate `j`.
        weight: Vec<Vec<f64>>,
        bias: Vec<f64>,
        cov: Vec<f64>,
    },
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelDef {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub rep: KernelRepDef,
}

pub type SlotDef = (String, usize);

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WireDef {
    pub from: SlotDef,
    pub to: SlotDef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagramDef {
    /// Vertex id -> kernel name.
    pub vertices: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wires: Vec<WireDef>,
    pub external_inputs: Vec<SlotDef>,
    pub external_outputs: Vec<SlotDef>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum PVertexDef {
    Fixed {
        kernel: String,
    },
    Logit {
        source: Vec<String>,
        target: Vec<String>,
    },
    #[serde(rename = "gaussian-affine")]
    GaussianAffine {
        source: Vec<String>,
        target: Vec<String>,
        sigmas: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ParamDiagramDef {
    pub vertices: BTreeMap<String, PVertexDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wires: Vec<WireDef>,
    pub external_inputs: Vec<SlotDef>,
    pub external_outputs: Vec<SlotDef>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FnDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum RhoDef {
    /// Probabilities over the enumerated joint (input, reference) space.
    Exact { probs: Vec<f64> },
    /// Uniform over a finite input space with the reference equal to the
    /// input (requires matching input and reference profiles).
    #[serde(rename = "uniform-match")]
    UniformMatch,
    /// A fixed (input, reference) pair.
    Point {
        input: Vec<Value>,
        reference: Vec<Value>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ObjectiveDef {
    pub input_objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ref_objects: Vec<String>,
    pub f: FnDef,
    pub rho: RhoDef,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MorDef {
    pub src: String,
    pub dst: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct IndexCatDef {
    pub objects: Vec<String>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub morphisms: BTreeMap<String, MorDef>,
    /// Composition entries `[beta, alpha, result]` meaning
    /// `beta . alpha = result`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compose: Vec<[String; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateDef {
    pub objects: Vec<String>,
    pub kernels: Vec<String>,
    /// Role labels giving the morphism color shared across states
    /// (defaults to the kernel name).
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub kernel_roles: BTreeMap<String, String>,
    #[serde(default)]
    pub param_dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct StatePushDef {
    pub object_map: BTreeMap<String, String>,
    pub kernel_map: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ParamPushDef {
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
    Builtin {
        builtin: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<f64>,
    },
}

/// The on-disk project document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct ProjectFile {
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub spaces: BTreeMap<String, SpaceDesc>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub objects: BTreeMap<String, ObjectDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<ColorsDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interfaces: Vec<InterfaceDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub kernels: BTreeMap<String, KernelDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub diagrams: BTreeMap<String, DiagramDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub param_diagrams: BTreeMap<String, ParamDiagramDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub objectives: BTreeMap<String, ObjectiveDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_category: Option<IndexCatDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub states: BTreeMap<String, StateDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub state_pushforwards: BTreeMap<String, StatePushDef>,
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub param_pushforwards: BTreeMap<String, ParamPushDef>,
    /// Test inputs per object for statistical interface-coherence checks.
    #[serde(default, skip_serializing_if = "is_empty_map")]
    pub coherence_grids: BTreeMap<String, Vec<Vec<Value>>>,
}

impl ProjectFile {
    pub fn load(path: &Path) -> Result<ProjectFile> {
        let text = std::fs::read_to_string(path)?;
        ProjectFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ProjectFile> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Canonical serialized form.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.canonical())?;
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledProject> {
        compile(self)
    }
}

/// A loaded diagram: plain when no wire carries a witness.
#[derive(Clone, Debug)]
pub enum CompiledDiagram {
    Plain(Diagram),
    Colored(ColoredDiagram),
}

impl CompiledDiagram {
    /// The uncolored diagram that trace evaluation runs on.
    pub fn evaluable(&self, is: &InterfaceSystem) -> Result<Diagram> {
        match self {
            CompiledDiagram::Plain(d) => Ok(d.clone()),
            CompiledDiagram::Colored(cd) => crate::color::interface_expand(cd, is),
        }
    }
}

/// An objective with the profiles it was declared against.
#[derive(Clone, Debug)]
pub struct CompiledObjective {
    pub spec: ObjectiveSpec,
    pub input_profile: Profile,
}

/// Fully resolved project.
pub struct CompiledProject {
    pub objects: BTreeMap<String, Object>,
    pub colors: ColorSystem,
    pub interfaces: InterfaceSystem,
    pub kernels: BTreeMap<String, Kernel>,
    pub diagrams: BTreeMap<String, CompiledDiagram>,
    pub param_diagrams: BTreeMap<String, ParamDiagram>,
    pub objectives: BTreeMap<String, CompiledObjective>,
    pub ccmp: Option<Ccmp>,
    pub coherence_grids: BTreeMap<String, Vec<Vec<Value>>>,
}

impl CompiledProject {
    pub fn diagram(&self, name: &str) -> Result<&CompiledDiagram> {
        self.diagrams
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("diagram {name}")))
    }

    pub fn param_diagram(&self, name: &str) -> Result<&ParamDiagram> {
        self.param_diagrams
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("param diagram {name}")))
    }

    pub fn objective(&self, name: &str) -> Result<&CompiledObjective> {
        self.objectives
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("objective {name}")))
    }
}

fn compile(file: &ProjectFile) -> Result<CompiledProject> {
    // spaces and objects
    let resolve_space = |r: &SpaceRef| -> Result<SpaceDesc> {
        match r {
            SpaceRef::Inline(s) => Ok(s.clone()),
            SpaceRef::Named(n) => file
                .spaces
                .get(n)
                .cloned()
                .ok_or_else(|| Error::UnknownRef(format!("space {n}"))),
        }
    };
    let mut objects: BTreeMap<String, Object> = BTreeMap::new();
    for (name, def) in &file.objects {
        let mut o = Object::new(name.clone(), resolve_space(&def.space)?);
        o.color = def.color.clone();
        objects.insert(name.clone(), o);
    }

    // color system
    let mut colors = ColorSystem::default();
    if let Some(def) = &file.colors {
        for c in &def.object_colors {
            colors.add_color(c);
        }
        for (name, m) in &def.k_morphisms {
            colors.add_generator(name, &m.src, &m.dst);
        }
        for [g, f, h] in &def.k_compose {
            colors.add_composite(&KMorId::new(g.clone()), &KMorId::new(f.clone()), h)?;
        }
        for (name, path) in &def.iota {
            colors.iota.insert(
                KMorId::new(name.clone()),
                path.iter().map(|p| KMorId::new(p.clone())).collect(),
            );
        }
    } else {
        // implicit one-color system covering colored wiring by identities
        colors.add_color("default");
        for o in objects.values_mut() {
            if o.color.is_none() {
                o.color = Some("default".into());
            }
        }
    }
    colors.close_identities();

    let objects = objects; // frozen from here on
    let object = |name: &str| -> Result<Object> {
        objects
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownRef(format!("object {name}")))
    };
    let profile_of = |names: &[String]| -> Result<Profile> {
        Ok(Profile(
            names.iter().map(|n| object(n)).collect::<Result<_>>()?,
        ))
    };

    // kernels
    let mut kernels: BTreeMap<String, Kernel> = BTreeMap::new();
    for (name, def) in &file.kernels {
        let source = profile_of(&def.source)?;
        let target = profile_of(&def.target)?;
        let kernel = match &def.rep {
            KernelRepDef::Table { rows } => {
                crate::kernel::finite_table_kernel(name.clone(), source, target, rows.clone())?
            }
            KernelRepDef::Gaussian { weight, bias, cov } => builtin::gaussian_linear_kernel(
                name.clone(),
                source,
                target,
                weight.clone(),
                bias.clone(),
                cov.clone(),
            )?,
            KernelRepDef::Builtin { name: b, args } => {
                builtin::build_kernel(name.clone(), b, args, source, target)?
            }
        };
        kernels.insert(name.clone(), kernel);
    }
    let kernel = |name: &str| -> Result<Kernel> {
        kernels
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownRef(format!("kernel {name}")))
    };

    // interface system: identities for every colored object plus declared witnesses
    let mut interfaces = InterfaceSystem::new();
    for o in objects.values() {
        if o.color.is_some() {
            interfaces.add_identity(&colors, o)?;
        }
    }
    for def in &file.interfaces {
        let b = object(&def.from)?;
        let c = object(&def.to)?;
        interfaces.add_witness(
            &KMorId::new(def.witness.clone()),
            &b,
            &c,
            kernel(&def.kernel)?,
        )?;
    }

    // diagrams
    let mut diagrams: BTreeMap<String, CompiledDiagram> = BTreeMap::new();
    for (name, def) in &file.diagrams {
        let colored = def.wires.iter().any(|w| w.witness.is_some());
        if colored && def.wires.iter().any(|w| w.witness.is_none()) {
            return Err(Error::invalid(format!(
                "diagram {name}: mixed witnessed and unwitnessed wires"
            )));
        }
        if colored {
            let mut cd = ColoredDiagram::new();
            for (v, kname) in &def.vertices {
                cd.add_vertex(v.clone(), kernel(kname)?);
            }
            for w in &def.wires {
                cd.internal_wires.insert(
                    Wire {
                        from: (VertexId::new(w.from.0.clone()), w.from.1),
                        to: (VertexId::new(w.to.0.clone()), w.to.1),
                    },
                    KMorId::new(w.witness.clone().expect("checked")),
                );
            }
            cd.external_inputs = def
                .external_inputs
                .iter()
                .map(|(v, s)| (VertexId::new(v.clone()), *s))
                .collect();
            cd.external_outputs = def
                .external_outputs
                .iter()
                .map(|(v, s)| (VertexId::new(v.clone()), *s))
                .collect();
            diagrams.insert(name.clone(), CompiledDiagram::Colored(cd));
        } else {
            let mut d = Diagram::new();
            for (v, kname) in &def.vertices {
                d.add_vertex(v.clone(), kernel(kname)?);
            }
            for w in &def.wires {
                d.internal_wires.insert(Wire {
                    from: (VertexId::new(w.from.0.clone()), w.from.1),
                    to: (VertexId::new(w.to.0.clone()), w.to.1),
                });
            }
            d.external_inputs = def
                .external_inputs
                .iter()
                .map(|(v, s)| (VertexId::new(v.clone()), *s))
                .collect();
            d.external_outputs = def
                .external_outputs
                .iter()
                .map(|(v, s)| (VertexId::new(v.clone()), *s))
                .collect();
            diagrams.insert(name.clone(), CompiledDiagram::Plain(d));
        }
    }

    // parameterized diagrams
    let mut param_diagrams: BTreeMap<String, ParamDiagram> = BTreeMap::new();
    for (name, def) in &file.param_diagrams {
        let mut pd = ParamDiagram::new();
        for (v, vd) in &def.vertices {
            match vd {
                PVertexDef::Fixed { kernel: kname } => {
                    pd.add_fixed(v.clone(), kernel(kname)?);
                }
                PVertexDef::Logit { source, target } => {
                    pd.add_param(
                        v.clone(),
                        ParamKernel::logit_table(
                            v.clone(),
                            profile_of(source)?,
                            profile_of(target)?,
                        )?,
                    );
                }
                PVertexDef::GaussianAffine {
                    source,
                    target,
                    sigmas,
                } => {
                    pd.add_param(
                        v.clone(),
                        ParamKernel::gaussian_affine(
                            v.clone(),
                            profile_of(source)?,
                            profile_of(target)?,
                            sigmas.clone(),
                        )?,
                    );
                }
            }
        }
        for w in &def.wires {
            let witness = w.witness.clone().ok_or_else(|| {
                Error::invalid(format!("param diagram {name}: wire without witness"))
            })?;
            pd.internal_wires.insert(
                Wire {
                    from: (VertexId::new(w.from.0.clone()), w.from.1),
                    to: (VertexId::new(w.to.0.clone()), w.to.1),
                },
                KMorId::new(witness),
            );
        }
        pd.external_inputs = def
            .external_inputs
            .iter()
            .map(|(v, s)| (VertexId::new(v.clone()), *s))
            .collect();
        pd.external_outputs = def
            .external_outputs
            .iter()
            .map(|(v, s)| (VertexId::new(v.clone()), *s))
            .collect();
        param_diagrams.insert(name.clone(), pd);
    }

    // objectives
    let mut objectives: BTreeMap<String, CompiledObjective> = BTreeMap::new();
    for (name, def) in &file.objectives {
        let input_profile = profile_of(&def.input_objects)?;
        let ref_profile = profile_of(&def.ref_objects)?;
        let (f, grad_output_f) = builtin::build_objective_fn(&def.f.name, &def.f.args)?;
        let joint = Profile(
            input_profile
                .0
                .iter()
                .chain(ref_profile.0.iter())
                .cloned()
                .collect(),
        );
        let (rho_sampler, rho_exact) = match &def.rho {
            RhoDef::Exact { probs } => {
                let dist = FiniteDist::new(joint.space(), probs.clone())?;
                (
                    builtin::build_rho_exact_sampler(dist.clone(), input_profile.arity()),
                    Some(dist),
                )
            }
            RhoDef::UniformMatch => {
                if !input_profile.same_spaces(&ref_profile) {
                    return Err(Error::invalid(format!(
                        "objective {name}: uniform-match needs matching input and reference profiles"
                    )));
                }
                let n = input_profile.space().cardinality()?;
                let joint_space = joint.space();
                let mut probs = vec![0.0; joint_space.cardinality()?];
                for i in 0..n {
                    let x = input_profile.values_at(i)?;
                    let mut xr = x.clone();
                    xr.extend(x.clone());
                    probs[joint_space.index_of(&Value::Tuple(xr))?] = 1.0 / n as f64;
                }
                let dist = FiniteDist::new(joint_space, probs)?;
                (
                    builtin::build_rho_exact_sampler(dist.clone(), input_profile.arity()),
                    Some(dist),
                )
            }
            RhoDef::Point { input, reference } => {
                input_profile.check_values(input)?;
                ref_profile.check_values(reference)?;
                let rho_exact = if joint.space().is_finite() {
                    let mut xr = input.clone();
                    xr.extend(reference.clone());
                    Some(FiniteDist::point_mass(joint.space(), &Value::Tuple(xr))?)
                } else {
                    None
                };
                (
                    builtin::build_rho_point(input.clone(), reference.clone()),
                    rho_exact,
                )
            }
        };
        objectives.insert(
            name.clone(),
            CompiledObjective {
                spec: ObjectiveSpec {
                    name: name.clone(),
                    ref_profile,
                    rho_sampler,
                    rho_exact,
                    f,
                    grad_output_f,
                },
                input_profile,
            },
        );
    }

    // co-indexed sections
    let ccmp = match &file.index_category {
        None => None,
        Some(def) => {
            let mut cat = IndexCat::default();
            for t in &def.objects {
                cat.add_object(t);
            }
            for (m, t) in &def.morphisms {
                cat.add_morphism(m, &t.src, &t.dst);
            }
            for [beta, alpha, result] in &def.compose {
                cat.add_composite(
                    &MorId::new(beta.clone()),
                    &MorId::new(alpha.clone()),
                    result,
                );
            }
            cat.close_identities();

            let mut states: BTreeMap<StateId, CmpRegistry> = BTreeMap::new();
            let mut param_dims: BTreeMap<StateId, usize> = BTreeMap::new();
            for (t, sd) in &file.states {
                let mut reg = CmpRegistry::default();
                for oname in &sd.objects {
                    let o = object(oname)?;
                    if o.color.is_some() {
                        reg.interfaces.add_identity(&colors, &o)?;
                    }
                    reg.add_object(o);
                }
                for kname in &sd.kernels {
                    let k = kernel(kname)?;
                    let role = sd
                        .kernel_roles
                        .get(kname)
                        .cloned()
                        .unwrap_or_else(|| kname.clone());
                    let term = ColorTerm::atom(
                        role,
                        k.source
                            .0
                            .iter()
                            .map(|o| ColorId::new(o.color.clone().unwrap_or_default()))
                            .collect(),
                        k.target
                            .0
                            .iter()
                            .map(|o| ColorId::new(o.color.clone().unwrap_or_default()))
                            .collect(),
                    );
                    reg.add_kernel_with_term(k, term);
                }
                states.insert(StateId::new(t.clone()), reg);
                param_dims.insert(StateId::new(t.clone()), sd.param_dim);
            }

            let mut state_push: BTreeMap<MorId, CmpFunctor> = BTreeMap::new();
            for (m, def) in &file.state_pushforwards {
                state_push.insert(
                    MorId::new(m.clone()),
                    CmpFunctor {
                        object_map: def.object_map.clone(),
                        kernel_map: def.kernel_map.clone(),
                    },
                );
            }
            // identities default to identity functors
            for (t, id) in &cat.identities {
                if let Some(reg) = states.get(t) {
                    state_push
                        .entry(id.clone())
                        .or_insert_with(|| CmpFunctor::identity_on(reg));
                }
            }

            let mut param_push: BTreeMap<MorId, ParamPushforward> = BTreeMap::new();
            for (m, def) in &file.param_pushforwards {
                let p = match def {
                    ParamPushDef::Matrix { matrix } => ParamPushforward::linear(
                        m.clone(),
                        crate::kernel::Mat::from_rows(matrix.clone())?,
                    ),
                    ParamPushDef::Builtin { builtin: b, args } => {
                        builtin::build_param_pushforward(m, b, args)?
                    }
                };
                param_push.insert(MorId::new(m.clone()), p);
            }
            for (t, id) in &cat.identities {
                let dim = param_dims.get(t).copied().unwrap_or(0);
                param_push
                    .entry(id.clone())
                    .or_insert_with(|| ParamPushforward::identity(dim));
            }

            Some(Ccmp {
                index: cat,
                states,
                param_dims,
                state_push,
                param_push,
            })
        }
    };

    Ok(CompiledProject {
        objects,
        colors,
        interfaces,
        kernels,
        diagrams,
        param_diagrams,
        objectives,
        ccmp,
        coherence_grids: file.coherence_grids.clone(),
    })
}
