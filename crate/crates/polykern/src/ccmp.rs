//! Co-indexed structure: a finite indexing category, a typed kernel registry
//! per state, and structure-preserving pushforwards along transitions.
//!
//! State pushforwards relabel objects and kernels while preserving colors,
//! morphism-color terms, and interface kernels; parameter pushforwards are
//! differentiable maps between the per-state parameter spaces. Both are
//! required to be strictly functorial over the indexing category, which the
//! checks here verify exhaustively on the finite tables.

use crate::color::{ColorTerm, ColoredDiagram, InterfaceSystem, KMorId};
use crate::error::{Error, Result};
use crate::kernel::{table_max_diff, Kernel, Mat};
use crate::numeric::{central_diff_jacobian, max_rel_err, FD_STEP};
use crate::report::Report;
use crate::space::Object;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// State (object of the indexing category).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub String);

impl StateId {
    pub fn new(s: impl Into<String>) -> StateId {
        StateId(s.into())
    }
}

impl std::fmt::Display for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Transition (morphism of the indexing category).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MorId(pub String);

impl MorId {
    pub fn new(s: impl Into<String>) -> MorId {
        MorId(s.into())
    }
}

impl std::fmt::Display for MorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite, explicitly tabulated category of states and transitions.
#[derive(Clone, Debug, Default)]
pub struct IndexCat {
    pub objects: BTreeSet<StateId>,
    pub morphisms: BTreeMap<MorId, (StateId, StateId)>,
    /// `(beta, alpha) -> beta . alpha` (apply `alpha` first).
    pub compose: BTreeMap<(MorId, MorId), MorId>,
    pub identities: BTreeMap<StateId, MorId>,
}

impl IndexCat {
    pub fn add_object(&mut self, t: &str) -> StateId {
        let t = StateId::new(t);
        if self.objects.insert(t.clone()) {
            let id = MorId::new(format!("id_{t}"));
            self.morphisms.insert(id.clone(), (t.clone(), t.clone()));
            self.identities.insert(t.clone(), id);
        }
        t
    }

    pub fn add_morphism(&mut self, name: &str, src: &str, dst: &str) -> MorId {
        let m = MorId::new(name);
        self.morphisms
            .insert(m.clone(), (StateId::new(src), StateId::new(dst)));
        m
    }

    pub fn add_composite(&mut self, beta: &MorId, alpha: &MorId, name: &str) -> MorId {
        let m = MorId::new(name);
        self.compose
            .insert((beta.clone(), alpha.clone()), m.clone());
        m
    }

    /// Close the table over identities: `f . id = f`, `id . f = f`.
    pub fn close_identities(&mut self) {
        let entries: Vec<(MorId, (StateId, StateId))> = self
            .morphisms
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (f, (src, dst)) in entries {
            let id_src = self.identities[&src].clone();
            let id_dst = self.identities[&dst].clone();
            self.compose
                .entry((f.clone(), id_src))
                .or_insert_with(|| f.clone());
            self.compose
                .entry((id_dst, f.clone()))
                .or_insert_with(|| f.clone());
        }
    }

    pub fn typing(&self, m: &MorId) -> Result<&(StateId, StateId)> {
        self.morphisms
            .get(m)
            .ok_or_else(|| Error::UnknownRef(format!("transition {m}")))
    }

    /// Exhaustive category-axiom check on the finite tables.
    pub fn check(&self) -> Report {
        let mut report = Report::new();
        for (m, (s, t)) in &self.morphisms {
            if !self.objects.contains(s) || !self.objects.contains(t) {
                report.push("typing", format!("morphism {m} uses undeclared objects"));
            }
        }
        for t in &self.objects {
            match self.identities.get(t) {
                None => report.push("identity", format!("object {t} has no identity")),
                Some(id) => {
                    if self.morphisms.get(id) != Some(&(t.clone(), t.clone())) {
                        report.push("identity", format!("identity {id} is not typed {t} -> {t}"));
                    }
                }
            }
        }
        for (f, (fs, fd)) in &self.morphisms {
            for (g, (gs, gd)) in &self.morphisms {
                if fd != gs {
                    continue;
                }
                match self.compose.get(&(g.clone(), f.clone())) {
                    None => report.push(
                        "compose-missing",
                        format!("composable pair {g} . {f} has no table entry"),
                    ),
                    Some(h) => match self.morphisms.get(h) {
                        Some((hs, hd)) if hs == fs && hd == gd => {}
                        _ => report.push(
                            "compose-typing",
                            format!("composite {h} of {g} . {f} has wrong type"),
                        ),
                    },
                }
            }
        }
        // unit laws
        for (f, (fs, fd)) in &self.morphisms {
            if let (Some(id_s), Some(id_d)) = (self.identities.get(fs), self.identities.get(fd)) {
                if let Some(h) = self.compose.get(&(f.clone(), id_s.clone())) {
                    if h != f {
                        report.push("unit", format!("{f} . {id_s} = {h}, expected {f}"));
                    }
                }
                if let Some(h) = self.compose.get(&(id_d.clone(), f.clone())) {
                    if h != f {
                        report.push("unit", format!("{id_d} . {f} = {h}, expected {f}"));
                    }
                }
            }
        }
        // associativity
        for (f, (_, fd)) in &self.morphisms {
            for (g, (gs, gd)) in &self.morphisms {
                if fd != gs {
                    continue;
                }
                for (h, (hs, _)) in &self.morphisms {
                    if gd != hs {
                        continue;
                    }
                    let gf = self.compose.get(&(g.clone(), f.clone()));
                    let hg = self.compose.get(&(h.clone(), g.clone()));
                    if let (Some(gf), Some(hg)) = (gf, hg) {
                        let left = self.compose.get(&(h.clone(), gf.clone()));
                        let right = self.compose.get(&(hg.clone(), f.clone()));
                        match (left, right) {
                            (Some(a), Some(b)) if a != b => report.push(
                                "associativity",
                                format!("({h} . {g}) . {f} disagree: {a} vs {b}"),
                            ),
                            _ => {}
                        }
                    }
                }
            }
        }
        report
    }
}

/// A registered kernel with its morphism-color term.
#[derive(Clone, Debug)]
pub struct RegKernel {
    pub kernel: Kernel,
    pub term: ColorTerm,
}

/// The typed kernel registry of one state: named objects, named kernels, and
/// an interface system, all over one global color system.
#[derive(Clone, Debug, Default)]
pub struct CmpRegistry {
    pub objects: BTreeMap<String, Object>,
    pub kernels: BTreeMap<String, RegKernel>,
    pub interfaces: InterfaceSystem,
}

impl CmpRegistry {
    pub fn add_object(&mut self, o: Object) {
        self.objects.insert(o.name.clone(), o);
    }

    pub fn add_kernel(&mut self, k: Kernel) {
        let term = ColorTerm::of_kernel(&k);
        self.kernels
            .insert(k.name.clone(), RegKernel { kernel: k, term });
    }

    pub fn add_kernel_with_term(&mut self, k: Kernel, term: ColorTerm) {
        self.kernels
            .insert(k.name.clone(), RegKernel { kernel: k, term });
    }

    pub fn object(&self, name: &str) -> Result<&Object> {
        self.objects
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("object {name}")))
    }

    pub fn kernel(&self, name: &str) -> Result<&RegKernel> {
        self.kernels
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("kernel {name}")))
    }
}

/// A state pushforward: object and kernel renamings between registries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CmpFunctor {
    pub object_map: BTreeMap<String, String>,
    pub kernel_map: BTreeMap<String, String>,
}

impl CmpFunctor {
    pub fn identity_on(reg: &CmpRegistry) -> CmpFunctor {
        CmpFunctor {
            object_map: reg.objects.keys().map(|k| (k.clone(), k.clone())).collect(),
            kernel_map: reg.kernels.keys().map(|k| (k.clone(), k.clone())).collect(),
        }
    }

    /// Composite `second . first` on a common domain.
    pub fn compose(first: &CmpFunctor, second: &CmpFunctor) -> Result<CmpFunctor> {
        let mut object_map = BTreeMap::new();
        for (a, b) in &first.object_map {
            let c = second
                .object_map
                .get(b)
                .ok_or_else(|| Error::UnknownRef(format!("object {b} in second functor")))?;
            object_map.insert(a.clone(), c.clone());
        }
        let mut kernel_map = BTreeMap::new();
        for (a, b) in &first.kernel_map {
            let c = second
                .kernel_map
                .get(b)
                .ok_or_else(|| Error::UnknownRef(format!("kernel {b} in second functor")))?;
            kernel_map.insert(a.clone(), c.clone());
        }
        Ok(CmpFunctor {
            object_map,
            kernel_map,
        })
    }

    pub fn map_object<'a>(&self, dst: &'a CmpRegistry, name: &str) -> Result<&'a Object> {
        let mapped = self
            .object_map
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("object {name} not in functor domain")))?;
        dst.object(mapped)
    }

    pub fn map_kernel<'a>(&self, dst: &'a CmpRegistry, name: &str) -> Result<&'a RegKernel> {
        let mapped = self
            .kernel_map
            .get(name)
            .ok_or_else(|| Error::UnknownRef(format!("kernel {name} not in functor domain")))?;
        dst.kernel(mapped)
    }
}

/// A composite used as a slotwise-composition-preservation fixture: compose `l` after `k`
/// along `(i, j)`, through `witness` when colored.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositeFixture {
    pub k: String,
    pub l: String,
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<KMorId>,
}

/// Verify that a functor preserves identities, composition (on the fixture
/// composites), colors on the nose, and interface systems.
pub fn check_cmp_functor(
    g: &CmpFunctor,
    src: &CmpRegistry,
    dst: &CmpRegistry,
    cs: &crate::color::ColorSystem,
    fixtures: &[CompositeFixture],
) -> Report {
    let mut report = Report::new();

    // object mapping: exists, and preserves colors on the nose
    for (name, obj) in &src.objects {
        match g.map_object(dst, name) {
            Err(e) => report.push("object-map", e.to_string()),
            Ok(img) => {
                if obj.color != img.color {
                    report.push(
                        "color",
                        format!(
                            "object {name} has color {:?}, image {} has {:?}",
                            obj.color, img.name, img.color
                        ),
                    );
                }
                if obj.space != img.space {
                    report.push(
                        "space",
                        format!("object {name} and image {} have different spaces", img.name),
                    );
                }
            }
        }
    }

    // kernel mapping: profiles map objectwise, morphism colors preserved
    for (name, rk) in &src.kernels {
        match g.map_kernel(dst, name) {
            Err(e) => report.push("kernel-map", e.to_string()),
            Ok(img) => {
                if rk.term != img.term {
                    report.push(
                        "color",
                        format!("kernel {name} changes morphism color under the functor"),
                    );
                }
                let profiles_ok = rk.kernel.source.arity() == img.kernel.source.arity()
                    && rk.kernel.target.arity() == img.kernel.target.arity()
                    && rk
                        .kernel
                        .source
                        .0
                        .iter()
                        .zip(&img.kernel.source.0)
                        .chain(rk.kernel.target.0.iter().zip(&img.kernel.target.0))
                        .all(|(a, b)| g.object_map.get(&a.name) == Some(&b.name));
                if !profiles_ok {
                    report.push(
                        "kernel-map",
                        format!("kernel {name}: image profiles are not the mapped objects"),
                    );
                }
            }
        }
    }

    // identity preservation: images of identity-by-construction kernels
    // (interface identities) are identities; structural, via interfaces below.

    // interface preservation
    for ((f, b, c), kappa) in &src.interfaces.kernels {
        let gb = match g.object_map.get(b) {
            Some(x) => x.clone(),
            None => {
                report.push("interface", format!("object {b} not in functor domain"));
                continue;
            }
        };
        let gc = match g.object_map.get(c) {
            Some(x) => x.clone(),
            None => {
                report.push("interface", format!("object {c} not in functor domain"));
                continue;
            }
        };
        if !dst.interfaces.is_admissible(f, &gb, &gc) {
            report.push(
                "interface",
                format!("witness {f} not admissible from {gb} to {gc} in the image"),
            );
            continue;
        }
        match dst.interfaces.interface_kernel(f, &gb, &gc) {
            Err(e) => report.push("interface", e.to_string()),
            Ok(kappa_img) => match interface_kernels_agree(kappa, kappa_img) {
                Ok(true) => {}
                Ok(false) => report.push(
                    "interface",
                    format!("interface kernel {f}: image kernel differs"),
                ),
                Err(e) => report.push("interface", e.to_string()),
            },
        }
    }

    // slotwise-composition preservation on the fixture composites
    for fx in fixtures {
        let run = || -> Result<f64> {
            let k = src.kernel(&fx.k)?;
            let l = src.kernel(&fx.l)?;
            let gk = g.map_kernel(dst, &fx.k)?;
            let gl = g.map_kernel(dst, &fx.l)?;
            let (src_comp, dst_comp) = match &fx.witness {
                None => (
                    crate::diagram::compose_slotwise(&k.kernel, &l.kernel, fx.i, fx.j)?.kernel()?,
                    crate::diagram::compose_slotwise(&gk.kernel, &gl.kernel, fx.i, fx.j)?
                        .kernel()?,
                ),
                Some(f) => (
                    crate::color::compose_slotwise_colored(
                        &k.kernel,
                        &l.kernel,
                        fx.i,
                        fx.j,
                        f,
                        cs,
                        &src.interfaces,
                        Some(k.term.clone()),
                        Some(l.term.clone()),
                    )?
                    .kernel()?,
                    crate::color::compose_slotwise_colored(
                        &gk.kernel,
                        &gl.kernel,
                        fx.i,
                        fx.j,
                        f,
                        cs,
                        &dst.interfaces,
                        Some(gk.term.clone()),
                        Some(gl.term.clone()),
                    )?
                    .kernel()?,
                ),
            };
            table_max_diff(&src_comp, &dst_comp)
        };
        match run() {
            Ok(dev) if dev <= 1e-12 => {}
            Ok(dev) => report.push(
                "slotwise-preservation",
                format!("fixture {} . {}: deviation {dev:.3e}", fx.l, fx.k),
            ),
            Err(e) => report.push(
                "slotwise-preservation",
                format!("fixture {} . {}: {e}", fx.l, fx.k),
            ),
        }
    }

    report
}

/// Whether two interface kernels agree as kernels: exact tables for
/// finite-representable pairs, pointwise probe comparison for deterministic
/// pairs, and name equality as the last resort for samplers.
fn interface_kernels_agree(a: &Kernel, b: &Kernel) -> Result<bool> {
    if !a.source.same_spaces(&b.source) || !a.target.same_spaces(&b.target) {
        return Ok(false);
    }
    if a.is_finite_representable() && b.is_finite_representable() {
        return Ok(table_max_diff(a, b)? <= 1e-12);
    }
    if a.is_deterministic() && b.is_deterministic() {
        let mut rng = crate::stream::StreamSeed(0).stream("interface-agree");
        for point in a.source.space().probe_points() {
            let input = match point {
                crate::space::Value::Tuple(items) => items,
                v => vec![v],
            };
            if a.sample(&mut rng, &input)? != b.sample(&mut rng, &input)? {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    Ok(a.name == b.name)
}

/// Apply a state pushforward to a colored diagram: every vertex kernel and
/// object is relabelled through the functor, witnesses and external orderings
/// are unchanged.
pub fn pushforward_diagram(
    g: &CmpFunctor,
    dst: &CmpRegistry,
    cd: &ColoredDiagram,
) -> Result<ColoredDiagram> {
    let mut out = ColoredDiagram::new();
    for (v, k) in &cd.vertices {
        let img = g.map_kernel(dst, &k.name)?;
        out.vertices.insert(v.clone(), img.kernel.clone());
        out.vertex_terms.insert(v.clone(), img.term.clone());
    }
    out.internal_wires = cd.internal_wires.clone();
    out.external_inputs = cd.external_inputs.clone();
    out.external_outputs = cd.external_outputs.clone();
    Ok(out)
}

/// A differentiable parameter transport with a user-supplied Jacobian
/// (rows = target dimension, cols = source dimension).
#[derive(Clone)]
pub struct ParamPushforward {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub jacobian: Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>,
}

impl std::fmt::Debug for ParamPushforward {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ParamPushforward({}: {} -> {})",
            self.name, self.in_dim, self.out_dim
        )
    }
}

impl ParamPushforward {
    pub fn identity(dim: usize) -> ParamPushforward {
        ParamPushforward {
            name: "identity".into(),
            in_dim: dim,
            out_dim: dim,
            map: Arc::new(|x: &[f64]| x.to_vec()),
            jacobian: Arc::new(move |_: &[f64]| Mat::identity(dim)),
        }
    }

    /// Linear pushforward `theta' = M theta` (rows = out, cols = in).
    pub fn linear(name: impl Into<String>, m: Mat) -> ParamPushforward {
        let (out_dim, in_dim) = (m.rows, m.cols);
        let m2 = m.clone();
        ParamPushforward {
            name: name.into(),
            in_dim,
            out_dim,
            map: Arc::new(move |x: &[f64]| {
                (0..m.rows)
                    .map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect()
            }),
            jacobian: Arc::new(move |_: &[f64]| m2.clone()),
        }
    }

    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.in_dim {
            return Err(Error::DimMismatch {
                expected: self.in_dim,
                found: theta.len(),
            });
        }
        Ok((self.map)(theta))
    }

    /// Composite `second . first`.
    pub fn compose(first: &ParamPushforward, second: &ParamPushforward) -> ParamPushforward {
        let f1 = first.map.clone();
        let f2 = second.map.clone();
        let j1 = first.jacobian.clone();
        let j2 = second.jacobian.clone();
        let f1j = first.map.clone();
        ParamPushforward {
            name: format!("{}.{}", second.name, first.name),
            in_dim: first.in_dim,
            out_dim: second.out_dim,
            map: Arc::new(move |x: &[f64]| f2(&f1(x))),
            jacobian: Arc::new(move |x: &[f64]| {
                let mid = f1j(x);
                j2(&mid).matmul(&j1(x))
            }),
        }
    }

    /// Compare the declared Jacobian against central finite differences at
    /// the given points; max per-entry relative error.
    pub fn check_jacobian(&self, thetas: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for theta in thetas {
            let j = (self.jacobian)(theta);
            let map = self.map.clone();
            let fd = central_diff_jacobian(&move |x: &[f64]| map(x), theta, FD_STEP);
            if j.rows != fd.rows || j.cols != fd.cols {
                return Err(Error::DimMismatch {
                    expected: fd.rows * fd.cols,
                    found: j.rows * j.cols,
                });
            }
            worst = worst.max(max_rel_err(&j.data, &fd.data));
        }
        Ok(worst)
    }
}

/// Transport a gradient covector backwards along a parameter pushforward:
/// the dual map `J^T . grad` of the pushforward derivative.
pub fn pullback_gradient(
    push: &ParamPushforward,
    theta: &[f64],
    grad_at_target: &[f64],
) -> Result<Vec<f64>> {
    if theta.len() != push.in_dim {
        return Err(Error::DimMismatch {
            expected: push.in_dim,
            found: theta.len(),
        });
    }
    if grad_at_target.len() != push.out_dim {
        return Err(Error::DimMismatch {
            expected: push.out_dim,
            found: grad_at_target.len(),
        });
    }
    let j = (push.jacobian)(theta);
    let mut out = vec![0.0; push.in_dim];
    for o in 0..j.rows {
        let go = grad_at_target[o];
        if go == 0.0 {
            continue;
        }
        for i in 0..j.cols {
            out[i] += j.at(o, i) * go;
        }
    }
    Ok(out)
}

/// A co-indexed family: a CMP registry and parameter space per state, with
/// state and parameter pushforwards per transition.
#[derive(Clone, Debug, Default)]
pub struct Ccmp {
    pub index: IndexCat,
    pub states: BTreeMap<StateId, CmpRegistry>,
    pub param_dims: BTreeMap<StateId, usize>,
    pub state_push: BTreeMap<MorId, CmpFunctor>,
    pub param_push: BTreeMap<MorId, ParamPushforward>,
}

impl Ccmp {
    pub fn state(&self, t: &StateId) -> Result<&CmpRegistry> {
        self.states
            .get(t)
            .ok_or_else(|| Error::UnknownRef(format!("state {t}")))
    }

    pub fn state_push(&self, m: &MorId) -> Result<&CmpFunctor> {
        self.state_push
            .get(m)
            .ok_or_else(|| Error::UnknownRef(format!("state pushforward {m}")))
    }

    pub fn param_push(&self, m: &MorId) -> Result<&ParamPushforward> {
        self.param_push
            .get(m)
            .ok_or_else(|| Error::UnknownRef(format!("parameter pushforward {m}")))
    }
}

/// Verify strict functoriality of both assignments over the finite index
/// category: identities act as identities and every declared composite equals
/// the composition of its factors (state maps exactly; parameter maps
/// pointwise within 1e-9 on the given sample points).
pub fn check_strict_functoriality(
    ccmp: &Ccmp,
    thetas: &BTreeMap<StateId, Vec<Vec<f64>>>,
) -> Report {
    let mut report = ccmp.index.check();

    for (t, id) in &ccmp.index.identities {
        let reg = match ccmp.states.get(t) {
            Some(r) => r,
            None => {
                report.push("state", format!("state {t} has no registry"));
                continue;
            }
        };
        match ccmp.state_push.get(id) {
            None => report.push("identity", format!("no state pushforward for {id}")),
            Some(g) => {
                if g != &CmpFunctor::identity_on(reg) {
                    report.push(
                        "identity",
                        format!("state pushforward of {id} is not the identity functor"),
                    );
                }
            }
        }
        match ccmp.param_push.get(id) {
            None => report.push("identity", format!("no parameter pushforward for {id}")),
            Some(p) => {
                let dim = ccmp.param_dims.get(t).copied().unwrap_or(0);
                if p.in_dim != dim || p.out_dim != dim {
                    report.push(
                        "identity",
                        format!("parameter pushforward of {id} has wrong dimensions"),
                    );
                } else if let Some(points) = thetas.get(t) {
                    for theta in points {
                        match p.apply(theta) {
                            Ok(img) => {
                                let dev = img
                                    .iter()
                                    .zip(theta)
                                    .map(|(a, b)| (a - b).abs())
                                    .fold(0.0, f64::max);
                                if dev > 1e-9 {
                                    report.push(
                                        "identity",
                                        format!("parameter pushforward of {id} moves theta by {dev:.3e}"),
                                    );
                                }
                            }
                            Err(e) => report.push("identity", e.to_string()),
                        }
                    }
                }
            }
        }
    }

    for ((beta, alpha), gamma) in &ccmp.index.compose {
        // state composite equality as map equality on the registries
        if let (Some(ga), Some(gb), Some(gc)) = (
            ccmp.state_push.get(alpha),
            ccmp.state_push.get(beta),
            ccmp.state_push.get(gamma),
        ) {
            match CmpFunctor::compose(ga, gb) {
                Ok(comp) => {
                    if &comp != gc {
                        report.push(
                            "functoriality",
                            format!("state pushforward of {gamma} differs from {beta} . {alpha}"),
                        );
                    }
                }
                Err(e) => report.push("functoriality", e.to_string()),
            }
        }
        // parameter composite equality pointwise
        if let (Some(pa), Some(pb), Some(pc)) = (
            ccmp.param_push.get(alpha),
            ccmp.param_push.get(beta),
            ccmp.param_push.get(gamma),
        ) {
            let src_state = match ccmp.index.typing(alpha) {
                Ok((s, _)) => s.clone(),
                Err(e) => {
                    report.push("functoriality", e.to_string());
                    continue;
                }
            };
            if let Some(points) = thetas.get(&src_state) {
                for theta in points {
                    let seq = pa.apply(theta).and_then(|mid| pb.apply(&mid));
                    let direct = pc.apply(theta);
                    match (seq, direct) {
                        (Ok(a), Ok(b)) => {
                            let dev = a
                                .iter()
                                .zip(&b)
                                .map(|(x, y)| (x - y).abs())
                                .fold(0.0, f64::max);
                            if dev > 1e-9 {
                                report.push(
                                    "functoriality",
                                    format!(
                                        "parameter pushforward of {gamma} differs from {beta} . {alpha} by {dev:.3e}"
                                    ),
                                );
                            }
                        }
                        (Err(e), _) | (_, Err(e)) => report.push("functoriality", e.to_string()),
                    }
                }
            }
        }
    }

    report
}
