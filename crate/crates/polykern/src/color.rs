//! Color systems, interface kernels, and typed (colored) diagrams.
//!
//! Object colors live in a finite, explicitly tabulated category; morphism
//! colors are free composite terms over atomic labels, so color bookkeeping
//! of composites holds by construction. A typed connection between wires of
//! different objects is licensed by an admissible interface witness (a
//! morphism of the object-color category) and realized by its interface
//! kernel. Colored diagrams evaluate by interface expansion: every interface
//! kernel becomes an explicit unary vertex and the expanded diagram runs
//! through the ordinary trace semantics.

use crate::diagram::{compose_slotwise, Composed, Diagram, SlotRef, VertexId, Wire};
use crate::error::{Error, Result};
use crate::kernel::FiniteDist;
use crate::kernel::{identity_kernel, table_max_diff, Kernel};
use crate::report::Report;
use crate::space::{splice, Object, Value};
use crate::stream::StreamSeed;
use crate::trace::{trace_exact, trace_sample, FiniteJointDist, TraceSample};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Object color identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColorId(pub String);

impl ColorId {
    pub fn new(s: impl Into<String>) -> ColorId {
        ColorId(s.into())
    }
}

impl std::fmt::Display for ColorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Morphism of the object-color category (an interface witness name).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KMorId(pub String);

impl KMorId {
    pub fn new(s: impl Into<String>) -> KMorId {
        KMorId(s.into())
    }
}

impl std::fmt::Display for KMorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Typing of one object-color morphism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMorphism {
    pub src: ColorId,
    pub dst: ColorId,
}

/// The object-color category together with the unary morphism-color image.
///
/// `k_compose` maps `(g, f)` to `g . f` (apply `f` first). `iota` assigns to
/// every morphism its unary morphism-color path, a sequence of generator
/// names in application order; identities map to the empty path, and the
/// functor equations `iota(g.f) = iota(f) ++ iota(g)` are checked by
/// [`check_color_system`].
#[derive(Clone, Debug, Default)]
pub struct ColorSystem {
    pub object_colors: BTreeSet<ColorId>,
    pub k_morphisms: BTreeMap<KMorId, KMorphism>,
    pub k_compose: BTreeMap<(KMorId, KMorId), KMorId>,
    pub identities: BTreeMap<ColorId, KMorId>,
    pub iota: BTreeMap<KMorId, Vec<KMorId>>,
}

impl ColorSystem {
    /// A system with the given colors and only identity morphisms.
    pub fn discrete(colors: &[&str]) -> ColorSystem {
        let mut cs = ColorSystem::default();
        for c in colors {
            cs.add_color(c);
        }
        cs
    }

    pub fn add_color(&mut self, c: &str) -> ColorId {
        let color = ColorId::new(c);
        if self.object_colors.insert(color.clone()) {
            let id = KMorId::new(format!("id_{c}"));
            self.k_morphisms.insert(
                id.clone(),
                KMorphism {
                    src: color.clone(),
                    dst: color.clone(),
                },
            );
            self.identities.insert(color.clone(), id.clone());
            self.iota.insert(id, vec![]);
        }
        color
    }

    /// Declare a generator morphism; its color path is itself.
    pub fn add_generator(&mut self, name: &str, src: &str, dst: &str) -> KMorId {
        let id = KMorId::new(name);
        self.k_morphisms.insert(
            id.clone(),
            KMorphism {
                src: ColorId::new(src),
                dst: ColorId::new(dst),
            },
        );
        self.iota.insert(id.clone(), vec![id.clone()]);
        id
    }

    /// Declare the composite `g . f = h`, deriving `iota(h)` when absent.
    pub fn add_composite(&mut self, g: &KMorId, f: &KMorId, h: &str) -> Result<KMorId> {
        let tf = self
            .k_morphisms
            .get(f)
            .ok_or_else(|| Error::UnknownRef(format!("morphism {f}")))?
            .clone();
        let tg = self
            .k_morphisms
            .get(g)
            .ok_or_else(|| Error::UnknownRef(format!("morphism {g}")))?
            .clone();
        if tf.dst != tg.src {
            return Err(Error::invalid(format!(
                "{g} . {f} is not composable ({} vs {})",
                tf.dst, tg.src
            )));
        }
        let id = KMorId::new(h);
        self.k_morphisms.entry(id.clone()).or_insert(KMorphism {
            src: tf.src,
            dst: tg.dst,
        });
        if !self.iota.contains_key(&id) {
            let mut path = self.iota.get(f).cloned().unwrap_or_default();
            path.extend(self.iota.get(g).cloned().unwrap_or_default());
            self.iota.insert(id.clone(), path);
        }
        self.k_compose.insert((g.clone(), f.clone()), id.clone());
        Ok(id)
    }

    /// Close the composition table over identities: `f . id = f`, `id . f = f`.
    pub fn close_identities(&mut self) {
        let entries: Vec<(KMorId, KMorphism)> = self
            .k_morphisms
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (f, t) in entries {
            let id_src = self.identities[&t.src].clone();
            let id_dst = self.identities[&t.dst].clone();
            self.k_compose
                .entry((f.clone(), id_src))
                .or_insert_with(|| f.clone());
            self.k_compose
                .entry((id_dst, f.clone()))
                .or_insert_with(|| f.clone());
        }
    }

    pub fn identity_of(&self, c: &ColorId) -> Result<&KMorId> {
        self.identities
            .get(c)
            .ok_or_else(|| Error::UnknownRef(format!("identity at color {c}")))
    }

    pub fn is_identity(&self, f: &KMorId) -> bool {
        self.identities.values().any(|id| id == f)
    }

    pub fn typing(&self, f: &KMorId) -> Result<&KMorphism> {
        self.k_morphisms
            .get(f)
            .ok_or_else(|| Error::UnknownRef(format!("morphism {f}")))
    }

    /// Composite `g . f` from the table.
    pub fn compose(&self, g: &KMorId, f: &KMorId) -> Result<&KMorId> {
        self.k_compose
            .get(&(g.clone(), f.clone()))
            .ok_or_else(|| Error::UnknownRef(format!("composite {g} . {f}")))
    }
}

/// Verify the color-system axioms exhaustively on the finite tables.
pub fn check_color_system(cs: &ColorSystem) -> Report {
    let mut report = Report::new();

    for (f, t) in &cs.k_morphisms {
        if !cs.object_colors.contains(&t.src) || !cs.object_colors.contains(&t.dst) {
            report.push("typing", format!("morphism {f} uses undeclared colors"));
        }
    }
    for c in &cs.object_colors {
        match cs.identities.get(c) {
            None => report.push("identity", format!("color {c} has no identity morphism")),
            Some(id) => match cs.k_morphisms.get(id) {
                None => report.push("identity", format!("identity {id} is not a morphism")),
                Some(t) => {
                    if &t.src != c || &t.dst != c {
                        report.push("identity", format!("identity {id} is not typed {c} -> {c}"));
                    }
                }
            },
        }
    }

    // totality and typing of the composition table
    for (f, tf) in &cs.k_morphisms {
        for (g, tg) in &cs.k_morphisms {
            if tf.dst != tg.src {
                continue;
            }
            match cs.k_compose.get(&(g.clone(), f.clone())) {
                None => report.push(
                    "compose-missing",
                    format!("composable pair {g} . {f} has no table entry"),
                ),
                Some(h) => match cs.k_morphisms.get(h) {
                    None => report.push(
                        "compose-typing",
                        format!("composite {h} of {g} . {f} is not declared"),
                    ),
                    Some(th) => {
                        if th.src != tf.src || th.dst != tg.dst {
                            report.push(
                                "compose-typing",
                                format!("composite {h} of {g} . {f} has wrong type"),
                            );
                        }
                    }
                },
            }
        }
    }

    // unit laws
    for (f, t) in &cs.k_morphisms {
        if let (Some(id_src), Some(id_dst)) = (cs.identities.get(&t.src), cs.identities.get(&t.dst))
        {
            if let Some(h) = cs.k_compose.get(&(f.clone(), id_src.clone())) {
                if h != f {
                    report.push("unit", format!("{f} . {id_src} = {h}, expected {f}"));
                }
            }
            if let Some(h) = cs.k_compose.get(&(id_dst.clone(), f.clone())) {
                if h != f {
                    report.push("unit", format!("{id_dst} . {f} = {h}, expected {f}"));
                }
            }
        }
    }

    // associativity on all composable triples
    for (f, tf) in &cs.k_morphisms {
        for (g, tg) in &cs.k_morphisms {
            if tf.dst != tg.src {
                continue;
            }
            for (h, th) in &cs.k_morphisms {
                if tg.dst != th.src {
                    continue;
                }
                let gf = cs.k_compose.get(&(g.clone(), f.clone()));
                let hg = cs.k_compose.get(&(h.clone(), g.clone()));
                if let (Some(gf), Some(hg)) = (gf, hg) {
                    let left = cs.k_compose.get(&(h.clone(), gf.clone()));
                    let right = cs.k_compose.get(&(hg.clone(), f.clone()));
                    match (left, right) {
                        (Some(a), Some(b)) if a != b => report.push(
                            "associativity",
                            format!("({h} . {g}) . {f} = {b} but {h} . ({g} . {f}) = {a}"),
                        ),
                        _ => {}
                    }
                }
            }
        }
    }

    // iota functoriality as path equations
    for (f, t) in &cs.k_morphisms {
        match cs.iota.get(f) {
            None => report.push("iota", format!("morphism {f} has no color path")),
            Some(path) => {
                // path typing: consecutive generators compose src -> dst
                let mut at = t.src.clone();
                let mut ok = true;
                for gname in path {
                    match cs.k_morphisms.get(gname) {
                        Some(tg) if tg.src == at => at = tg.dst.clone(),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok || at != t.dst {
                    report.push("iota", format!("color path of {f} is not typed {t:?}"));
                }
            }
        }
    }
    for c in &cs.object_colors {
        if let Some(id) = cs.identities.get(c) {
            if cs.iota.get(id).map(|p| !p.is_empty()).unwrap_or(false) {
                report.push("iota", format!("iota({id}) is not the unit color at {c}"));
            }
        }
    }
    for ((g, f), h) in &cs.k_compose {
        if let (Some(pf), Some(pg), Some(ph)) = (cs.iota.get(f), cs.iota.get(g), cs.iota.get(h)) {
            let mut expect = pf.clone();
            expect.extend(pg.iter().cloned());
            if ph != &expect {
                report.push(
                    "iota",
                    format!("iota({h}) differs from iota({g}) . iota({f})"),
                );
            }
        }
    }

    report
}

/// A morphism color: a free composite term over atomic labels.
///
/// Slotwise composites record exactly how they were formed, so color
/// preservation of composition holds by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColorTerm {
    /// An atomic box label with its typed profile.
    Atom {
        label: String,
        src: Vec<ColorId>,
        dst: Vec<ColorId>,
    },
    /// A unary chain of object-color generators (empty = unit color).
    IotaPath {
        path: Vec<KMorId>,
        src: ColorId,
        dst: ColorId,
    },
    /// Slotwise composite: `outer` after `inner` along `(i, j)`.
    Slot {
        outer: Box<ColorTerm>,
        i: usize,
        j: usize,
        inner: Box<ColorTerm>,
    },
}

impl ColorTerm {
    pub fn atom(label: impl Into<String>, src: Vec<ColorId>, dst: Vec<ColorId>) -> ColorTerm {
        ColorTerm::Atom {
            label: label.into(),
            src,
            dst,
        }
    }

    /// The unit unary color at `c` (the color of an identity kernel).
    pub fn unit(c: ColorId) -> ColorTerm {
        ColorTerm::IotaPath {
            path: vec![],
            src: c.clone(),
            dst: c,
        }
    }

    /// The color of the interface kernel for witness `f`.
    pub fn iota(cs: &ColorSystem, f: &KMorId) -> Result<ColorTerm> {
        let t = cs.typing(f)?;
        Ok(ColorTerm::IotaPath {
            path: cs.iota.get(f).cloned().unwrap_or_else(|| vec![f.clone()]),
            src: t.src.clone(),
            dst: t.dst.clone(),
        })
    }

    /// Slotwise composition of color terms along `(i, j)`.
    pub fn slot(outer: ColorTerm, i: usize, j: usize, inner: ColorTerm) -> ColorTerm {
        ColorTerm::Slot {
            outer: Box::new(outer),
            i,
            j,
            inner: Box::new(inner),
        }
    }

    /// The recorded color of a colored slotwise composite:
    /// `psi(l) .(i,j) (iota(f) .(i,1) psi(k))`.
    pub fn colored_composite(
        psi_l: ColorTerm,
        i: usize,
        j: usize,
        iota_f: ColorTerm,
        psi_k: ColorTerm,
    ) -> ColorTerm {
        ColorTerm::slot(psi_l, i, j, ColorTerm::slot(iota_f, i, 1, psi_k))
    }

    pub fn src_colors(&self) -> Vec<ColorId> {
        match self {
            ColorTerm::Atom { src, .. } => src.clone(),
            ColorTerm::IotaPath { src, .. } => vec![src.clone()],
            ColorTerm::Slot {
                outer, j, inner, ..
            } => splice(&outer.src_colors(), *j, &inner.src_colors()).unwrap_or_default(),
        }
    }

    pub fn dst_colors(&self) -> Vec<ColorId> {
        match self {
            ColorTerm::Atom { dst, .. } => dst.clone(),
            ColorTerm::IotaPath { dst, .. } => vec![dst.clone()],
            ColorTerm::Slot {
                outer, i, inner, ..
            } => splice(&inner.dst_colors(), *i, &outer.dst_colors()).unwrap_or_default(),
        }
    }

    /// Default color term of a named kernel: an atom labelled by the kernel
    /// name over its profile colors.
    pub fn of_kernel(k: &Kernel) -> ColorTerm {
        let colors = |p: &crate::space::Profile| {
            p.0.iter()
                .map(|o| ColorId::new(o.color.clone().unwrap_or_else(|| o.space.to_string())))
                .collect()
        };
        ColorTerm::atom(k.name.clone(), colors(&k.source), colors(&k.target))
    }
}

/// Admissible interface witnesses and their kernels, keyed by object names.
#[derive(Clone, Debug, Default)]
pub struct InterfaceSystem {
    pub admissible: BTreeMap<(String, String), BTreeSet<KMorId>>,
    pub kernels: BTreeMap<(KMorId, String, String), Kernel>,
}

impl InterfaceSystem {
    pub fn new() -> InterfaceSystem {
        InterfaceSystem::default()
    }

    /// Register the identity witness of an object.
    pub fn add_identity(&mut self, cs: &ColorSystem, obj: &Object) -> Result<()> {
        let color = obj
            .color
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("object {} has no color", obj.name)))?;
        let id = cs.identity_of(&ColorId::new(color.clone()))?.clone();
        self.admissible
            .entry((obj.name.clone(), obj.name.clone()))
            .or_default()
            .insert(id.clone());
        self.kernels.insert(
            (id, obj.name.clone(), obj.name.clone()),
            identity_kernel(obj),
        );
        Ok(())
    }

    /// Register witness `f` from `b` to `c` with its interface kernel.
    pub fn add_witness(
        &mut self,
        f: &KMorId,
        b: &Object,
        c: &Object,
        kernel: Kernel,
    ) -> Result<()> {
        if !kernel
            .source
            .same_spaces(&crate::space::Profile::single(b.clone()))
            || !kernel
                .target
                .same_spaces(&crate::space::Profile::single(c.clone()))
        {
            return Err(Error::invalid(format!(
                "interface kernel for {f} is not typed {} -> {}",
                b.name, c.name
            )));
        }
        self.admissible
            .entry((b.name.clone(), c.name.clone()))
            .or_default()
            .insert(f.clone());
        self.kernels
            .insert((f.clone(), b.name.clone(), c.name.clone()), kernel);
        Ok(())
    }

    pub fn is_admissible(&self, f: &KMorId, b: &str, c: &str) -> bool {
        self.admissible
            .get(&(b.to_string(), c.to_string()))
            .map(|s| s.contains(f))
            .unwrap_or(false)
    }

    pub fn interface_kernel(&self, f: &KMorId, b: &str, c: &str) -> Result<&Kernel> {
        self.kernels
            .get(&(f.clone(), b.to_string(), c.to_string()))
            .ok_or_else(|| Error::InadmissibleWitness {
                witness: f.0.clone(),
                from: b.to_string(),
                to: c.to_string(),
            })
    }

    /// Witnesses admissible out of object `b`, with their targets.
    fn witnesses_from(&self, b: &str) -> Vec<(KMorId, String)> {
        self.admissible
            .iter()
            .filter(|((from, _), _)| from == b)
            .flat_map(|((_, to), fs)| fs.iter().map(move |f| (f.clone(), to.clone())))
            .collect()
    }
}

/// Outcome of the interface-coherence walk.
#[derive(Clone, Debug, Default)]
pub struct CoherenceOutcome {
    pub report: Report,
    /// Largest exact table deviation seen on finite paths.
    pub max_exact_deviation: f64,
    /// Largest total-variation estimate seen on statistical paths.
    pub max_tv: f64,
    /// Paths that could only be checked statistically.
    pub statistical_paths: Vec<String>,
    pub paths_checked: usize,
}

/// Check interface coherence on every composable witness path up to `max_len`.
///
/// Finite paths are compared exactly under every bracketing against the
/// kernel of the composed witness (tolerance 1e-12). Paths containing
/// kernels outside the exactly-composable classes are compared by a
/// total-variation estimate over `n_samples` draws on the supplied input
/// grid, and noted as statistical.
pub fn check_interface_coherence(
    is: &InterfaceSystem,
    cs: &ColorSystem,
    objects: &BTreeMap<String, Object>,
    max_len: usize,
    input_grid: &BTreeMap<String, Vec<Vec<Value>>>,
    n_samples: usize,
    tv_tol: f64,
    seed: StreamSeed,
) -> CoherenceOutcome {
    let mut out = CoherenceOutcome::default();

    // enumerate witness paths (f_1, ..., f_r) with objects X_0 ... X_r
    type Path = Vec<(KMorId, String, String)>;
    let mut paths: Vec<Path> = Vec::new();
    for ((b, c), fs) in &is.admissible {
        for f in fs {
            paths.push(vec![(f.clone(), b.clone(), c.clone())]);
        }
    }
    let mut frontier = paths.clone();
    for _ in 2..=max_len.max(1) {
        let mut next = Vec::new();
        for p in &frontier {
            let (_, _, last) = p.last().unwrap().clone();
            for (g, to) in is.witnesses_from(&last) {
                let mut q = p.clone();
                q.push((g, last.clone(), to));
                next.push(q);
            }
        }
        paths.extend(next.clone());
        frontier = next;
    }

    for path in paths.iter().filter(|p| p.len() >= 2) {
        out.paths_checked += 1;
        let x0 = path[0].1.clone();
        let xr = path.last().unwrap().2.clone();
        let label: Vec<String> = path.iter().map(|(f, _, _)| f.0.clone()).collect();
        let label = format!("{} : {} -> {}", label.join("."), x0, xr);

        // composed witness via the table, folding left
        let mut witness = path[0].0.clone();
        let mut ok = true;
        for (g, _, _) in &path[1..] {
            match cs.compose(g, &witness) {
                Ok(h) => witness = h.clone(),
                Err(_) => {
                    out.report.push(
                        "closure",
                        format!("path {label}: composite witness missing from the table"),
                    );
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if !is.is_admissible(&witness, &x0, &xr) {
            out.report.push(
                "closure",
                format!("path {label}: composed witness {witness} not admissible"),
            );
            continue;
        }
        let target = match is.interface_kernel(&witness, &x0, &xr) {
            Ok(k) => k.clone(),
            Err(e) => {
                out.report.push("closure", format!("path {label}: {e}"));
                continue;
            }
        };

        let step_kernels: Result<Vec<Kernel>> = path
            .iter()
            .map(|(f, b, c)| is.interface_kernel(f, b, c).cloned())
            .collect();
        let step_kernels = match step_kernels {
            Ok(v) => v,
            Err(e) => {
                out.report.push("closure", format!("path {label}: {e}"));
                continue;
            }
        };

        let all_finite = step_kernels.iter().all(|k| k.is_finite_representable())
            && target.is_finite_representable();
        let all_det =
            step_kernels.iter().all(|k| k.is_deterministic()) && target.is_deterministic();
        if all_finite {
            // compare the composed witness kernel against every bracketing
            for chain in bracketed_compositions(&step_kernels) {
                match chain {
                    Ok(k) => match table_max_diff(&k, &target) {
                        Ok(dev) => {
                            out.max_exact_deviation = out.max_exact_deviation.max(dev);
                            if dev > 1e-12 {
                                out.report.push(
                                    "coherence",
                                    format!("path {label}: deviation {dev:.3e}"),
                                );
                            }
                        }
                        Err(e) => out.report.push("coherence", format!("path {label}: {e}")),
                    },
                    Err(e) => out.report.push("coherence", format!("path {label}: {e}")),
                }
            }
            continue;
        }

        // non-finite paths need concrete inputs: the supplied grid, the
        // enumerated points of a finite source, or synthesized probe points
        let inputs: Vec<Vec<Value>> = match input_grid.get(&x0) {
            Some(g) => g.clone(),
            None => match objects.get(&x0).map(|o| o.space.clone()) {
                Some(s) => s.probe_points().into_iter().map(|v| vec![v]).collect(),
                None => {
                    out.report
                        .push("grid-missing", format!("path {label}: unknown object {x0}"));
                    continue;
                }
            },
        };

        if all_det {
            // deterministic chains compose as maps: compare pointwise
            let mut rng = seed.substream("coherence-det", 0);
            for x in &inputs {
                let mut v = x.clone();
                let mut chain_res = Ok(());
                for k in &step_kernels {
                    match k.sample(&mut rng, &v) {
                        Ok(next) => v = next,
                        Err(e) => {
                            chain_res = Err(e);
                            break;
                        }
                    }
                }
                if let Err(e) = chain_res {
                    out.report.push("coherence", format!("path {label}: {e}"));
                    continue;
                }
                match target.sample(&mut rng, x) {
                    Ok(w) if w == v => {}
                    Ok(w) => out.report.push(
                        "coherence",
                        format!(
                            "path {label}: deterministic composite disagrees at {x:?}: {v:?} vs {w:?}"
                        ),
                    ),
                    Err(e) => out.report.push("coherence", format!("path {label}: {e}")),
                }
            }
            continue;
        }

        out.statistical_paths
            .push(format!("{label} (skipped: statistical check only)"));
        let tgt_space = target.target.space();
        if !tgt_space.is_finite() {
            out.report.push(
                "statistical-unsupported",
                format!("path {label}: continuous target; no TV estimate"),
            );
            continue;
        }
        for (gi, x) in inputs.iter().enumerate() {
            let tv = match empirical_tv(&step_kernels, &target, x, n_samples, seed, gi) {
                Ok(tv) => tv,
                Err(e) => {
                    out.report
                        .push("statistical-failed", format!("path {label}: {e}"));
                    continue;
                }
            };
            out.max_tv = out.max_tv.max(tv);
            if tv > tv_tol {
                out.report.push(
                    "coherence-tv",
                    format!("path {label} at grid point {gi}: TV {tv:.4}"),
                );
            }
        }
    }
    out
}

/// All bracketings of a unary chain as exact table kernels.
fn bracketed_compositions(ks: &[Kernel]) -> Vec<Result<Kernel>> {
    fn rec(ks: &[Kernel]) -> Vec<Result<Kernel>> {
        if ks.len() == 1 {
            return vec![Ok(ks[0].clone())];
        }
        let mut out = Vec::new();
        for split in 1..ks.len() {
            for left in rec(&ks[..split]) {
                for right in rec(&ks[split..]) {
                    match (&left, &right) {
                        (Ok(a), Ok(b)) => out.push(crate::kernel::compose_unary(a, b)),
                        (Err(e), _) | (_, Err(e)) => out.push(Err(Error::invalid(e.to_string()))),
                    }
                }
            }
        }
        out
    }
    rec(ks)
}

/// Empirical total variation between the composed-witness kernel and the
/// step-by-step chain, over a finite target space.
fn empirical_tv(
    steps: &[Kernel],
    target: &Kernel,
    x: &[Value],
    n: usize,
    seed: StreamSeed,
    grid_index: usize,
) -> Result<f64> {
    let tgt_space = target.target.space();
    let m = tgt_space.cardinality()?;
    let mut count_chain = vec![0.0f64; m];
    let mut count_target = vec![0.0f64; m];
    let mut rng = seed.substream("coherence-tv", grid_index as u64);
    for _ in 0..n {
        let mut v = x.to_vec();
        for k in steps {
            v = k.sample(&mut rng, &v)?;
        }
        count_chain[tgt_space.index_of(&Value::Tuple(v))?] += 1.0;
        let w = target.sample(&mut rng, x)?;
        count_target[tgt_space.index_of(&Value::Tuple(w))?] += 1.0;
    }
    let n = n as f64;
    Ok(0.5
        * count_chain
            .iter()
            .zip(&count_target)
            .map(|(a, b)| (a / n - b / n).abs())
            .sum::<f64>())
}

/// A finite acyclic diagram whose internal wires carry interface witnesses.
#[derive(Clone, Debug, Default)]
pub struct ColoredDiagram {
    pub vertices: BTreeMap<VertexId, Kernel>,
    pub vertex_terms: BTreeMap<VertexId, ColorTerm>,
    pub internal_wires: BTreeMap<Wire, KMorId>,
    pub external_inputs: Vec<SlotRef>,
    pub external_outputs: Vec<SlotRef>,
}

impl ColoredDiagram {
    pub fn new() -> ColoredDiagram {
        ColoredDiagram::default()
    }

    pub fn add_vertex(&mut self, id: impl Into<String>, kernel: Kernel) -> VertexId {
        let id = VertexId::new(id);
        self.vertex_terms
            .insert(id.clone(), ColorTerm::of_kernel(&kernel));
        self.vertices.insert(id.clone(), kernel);
        id
    }

    pub fn add_wire(&mut self, u: &VertexId, p: usize, v: &VertexId, q: usize, witness: &KMorId) {
        self.internal_wires
            .insert(Wire::new(u, p, v, q), witness.clone());
    }

    /// Fill external slot lists with the unwired slots in (vertex, slot) order.
    pub fn autofill_external(&mut self) {
        let mut skeleton = self.skeleton();
        skeleton.autofill_external();
        self.external_inputs = skeleton.external_inputs;
        self.external_outputs = skeleton.external_outputs;
    }

    /// The underlying uncolored structure (wire witnesses dropped).
    pub(crate) fn skeleton(&self) -> Diagram {
        Diagram {
            vertices: self.vertices.clone(),
            internal_wires: self.internal_wires.keys().cloned().collect(),
            external_inputs: self.external_inputs.clone(),
            external_outputs: self.external_outputs.clone(),
        }
    }

    /// Validate structure and witness admissibility. The uncolored wire
    /// type-equality clause is replaced by interface admissibility.
    pub fn validate(&self, is: &InterfaceSystem) -> Report {
        let skeleton = self.skeleton();
        let base = skeleton.validate();
        let mut report = Report::new();
        for v in base.violations {
            if v.code != "type-mismatch" {
                report.violations.push(v);
            }
        }
        for (wire, witness) in &self.internal_wires {
            let from = match skeleton.output_object(&wire.from) {
                Ok(o) => o.clone(),
                Err(_) => continue,
            };
            let to = match skeleton.input_object(&wire.to) {
                Ok(o) => o.clone(),
                Err(_) => continue,
            };
            if !is.is_admissible(witness, &from.name, &to.name) {
                report.push(
                    "witness",
                    format!(
                        "wire {}:{} -> {}:{} carries inadmissible witness {witness} ({} -> {})",
                        wire.from.0, wire.from.1, wire.to.0, wire.to.1, from.name, to.name
                    ),
                );
                continue;
            }
            match is.interface_kernel(witness, &from.name, &to.name) {
                Ok(k) => {
                    if k.source.0[0].space != from.space || k.target.0[0].space != to.space {
                        report.push(
                            "witness",
                            format!("interface kernel for {witness} has mismatched spaces"),
                        );
                    }
                }
                Err(e) => report.push("witness", e.to_string()),
            }
        }
        report
    }

    pub fn input_profile(&self) -> Result<crate::space::Profile> {
        self.skeleton().input_profile()
    }

    pub fn output_profile(&self) -> Result<crate::space::Profile> {
        self.skeleton().output_profile()
    }
}

/// Connect external output `i` of `d1` to external input `j` of `d2`
/// through the interface witness `f` (1-based positions in the declared
/// external orderings). Vertex ids are namespaced on collision; external
/// profiles follow the insertion convention.
pub fn connect_colored(
    d1: &ColoredDiagram,
    i: usize,
    d2: &ColoredDiagram,
    j: usize,
    witness: &KMorId,
    is: &InterfaceSystem,
) -> Result<ColoredDiagram> {
    if i < 1 || i > d1.external_outputs.len() {
        return Err(Error::SlotOutOfRange {
            index: i,
            len: d1.external_outputs.len(),
        });
    }
    if j < 1 || j > d2.external_inputs.len() {
        return Err(Error::SlotOutOfRange {
            index: j,
            len: d2.external_inputs.len(),
        });
    }
    let out_obj = d1
        .skeleton()
        .output_object(&d1.external_outputs[i - 1])?
        .clone();
    let in_obj = d2
        .skeleton()
        .input_object(&d2.external_inputs[j - 1])?
        .clone();
    if !is.is_admissible(witness, &out_obj.name, &in_obj.name) {
        return Err(Error::InadmissibleWitness {
            witness: witness.0.clone(),
            from: out_obj.name,
            to: in_obj.name,
        });
    }

    let collision = d1.vertices.keys().any(|v| d2.vertices.contains_key(v));
    let namespaced = |d: &ColoredDiagram, prefix: &str| -> ColoredDiagram {
        let rename = |v: &VertexId| VertexId::new(format!("{prefix}{}", v.0));
        ColoredDiagram {
            vertices: d
                .vertices
                .iter()
                .map(|(v, k)| (rename(v), k.clone()))
                .collect(),
            vertex_terms: d
                .vertex_terms
                .iter()
                .map(|(v, t)| (rename(v), t.clone()))
                .collect(),
            internal_wires: d
                .internal_wires
                .iter()
                .map(|(w, f)| {
                    (
                        Wire {
                            from: (rename(&w.from.0), w.from.1),
                            to: (rename(&w.to.0), w.to.1),
                        },
                        f.clone(),
                    )
                })
                .collect(),
            external_inputs: d
                .external_inputs
                .iter()
                .map(|(v, q)| (rename(v), *q))
                .collect(),
            external_outputs: d
                .external_outputs
                .iter()
                .map(|(v, p)| (rename(v), *p))
                .collect(),
        }
    };
    let (left, right) = if collision {
        (namespaced(d1, "left/"), namespaced(d2, "right/"))
    } else {
        (d1.clone(), d2.clone())
    };

    let mut d = ColoredDiagram::new();
    d.vertices.extend(left.vertices.clone());
    d.vertices.extend(right.vertices.clone());
    d.vertex_terms.extend(left.vertex_terms.clone());
    d.vertex_terms.extend(right.vertex_terms.clone());
    d.internal_wires.extend(left.internal_wires.clone());
    d.internal_wires.extend(right.internal_wires.clone());
    d.internal_wires.insert(
        Wire {
            from: left.external_outputs[i - 1].clone(),
            to: right.external_inputs[j - 1].clone(),
        },
        witness.clone(),
    );
    d.external_inputs = splice(&right.external_inputs, j, &left.external_inputs)?;
    d.external_outputs = splice(&left.external_outputs, i, &right.external_outputs)?;
    Ok(d)
}

/// Vertex id used for the expansion of a wire's interface kernel.
pub fn interface_vertex_id(wire: &Wire) -> VertexId {
    VertexId::new(format!(
        "iface/{}.{}-{}.{}",
        wire.from.0, wire.from.1, wire.to.0, wire.to.1
    ))
}

/// Expand every interface witness into an explicit unary vertex, producing an
/// uncolored diagram with the same external profiles.
pub fn interface_expand(cd: &ColoredDiagram, is: &InterfaceSystem) -> Result<Diagram> {
    let mut d = Diagram::new();
    d.vertices = cd.vertices.clone();
    d.external_inputs = cd.external_inputs.clone();
    d.external_outputs = cd.external_outputs.clone();
    for (wire, witness) in &cd.internal_wires {
        let from = cd
            .vertices
            .get(&wire.from.0)
            .ok_or_else(|| Error::UnknownRef(format!("vertex {}", wire.from.0)))?
            .target
            .slot(wire.from.1)?
            .clone();
        let to = cd
            .vertices
            .get(&wire.to.0)
            .ok_or_else(|| Error::UnknownRef(format!("vertex {}", wire.to.0)))?
            .source
            .slot(wire.to.1)?
            .clone();
        let kappa = is.interface_kernel(witness, &from.name, &to.name)?.clone();
        let iv = interface_vertex_id(wire);
        d.vertices.insert(iv.clone(), kappa);
        d.internal_wires.insert(Wire {
            from: wire.from.clone(),
            to: (iv.clone(), 1),
        });
        d.internal_wires.insert(Wire {
            from: (iv, 1),
            to: wire.to.clone(),
        });
    }
    let report = d.validate();
    if !report.is_empty() {
        return Err(Error::InvalidDiagram(report.to_string()));
    }
    Ok(d)
}

/// Exact trace of a colored diagram via its interface expansion.
pub fn colored_trace_exact(
    cd: &ColoredDiagram,
    is: &InterfaceSystem,
    x: &[Value],
) -> Result<(FiniteJointDist, FiniteDist)> {
    trace_exact(&interface_expand(cd, is)?, x)
}

/// Sample one trace of a colored diagram via its interface expansion.
pub fn colored_trace_sample(
    cd: &ColoredDiagram,
    is: &InterfaceSystem,
    x: &[Value],
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Result<TraceSample> {
    trace_sample(&interface_expand(cd, is)?, x, rng)
}

/// Result of a colored binary composition.
#[derive(Clone, Debug)]
pub enum ColoredComposed {
    /// Exact kernel with the recorded morphism-color term.
    Kernel { kernel: Kernel, term: ColorTerm },
    /// The three-vertex interface expansion, to be evaluated by trace.
    Expanded(Diagram),
}

impl ColoredComposed {
    pub fn kernel(self) -> Result<Kernel> {
        match self {
            ColoredComposed::Kernel { kernel, .. } => Ok(kernel),
            ColoredComposed::Expanded(_) => Err(Error::NotClosed(
                "colored composite is a diagram to be evaluated by trace".into(),
            )),
        }
    }
}

/// Colored kernel slotwise composition `l .f(i,j) k`: route output slot `i`
/// of `k` through the interface kernel of `f` into input slot `j` of `l`.
///
/// Exact when the three kernels compose exactly; otherwise the three-vertex
/// expanded diagram is returned. `psi_k` / `psi_l` override the default
/// atomic color terms of the operands.
pub fn compose_slotwise_colored(
    k: &Kernel,
    l: &Kernel,
    i: usize,
    j: usize,
    f: &KMorId,
    cs: &ColorSystem,
    is: &InterfaceSystem,
    psi_k: Option<ColorTerm>,
    psi_l: Option<ColorTerm>,
) -> Result<ColoredComposed> {
    let b_i = k.target.slot(i)?.clone();
    let c_j = l.source.slot(j)?.clone();
    if !is.is_admissible(f, &b_i.name, &c_j.name) {
        return Err(Error::InadmissibleWitness {
            witness: f.0.clone(),
            from: b_i.name,
            to: c_j.name,
        });
    }
    let kappa = is.interface_kernel(f, &b_i.name, &c_j.name)?.clone();

    let term = ColorTerm::colored_composite(
        psi_l.unwrap_or_else(|| ColorTerm::of_kernel(l)),
        i,
        j,
        ColorTerm::iota(cs, f)?,
        psi_k.unwrap_or_else(|| ColorTerm::of_kernel(k)),
    );

    // l .(i,j) (kappa .(i,1) k), exactly when both steps stay closed
    if let Composed::Kernel(step) = compose_slotwise(k, &kappa, i, 1)? {
        if let Composed::Kernel(kernel) = compose_slotwise(&step, l, i, j)? {
            return Ok(ColoredComposed::Kernel { kernel, term });
        }
    }

    // fall back to the explicit three-vertex expansion
    let mut cd = ColoredDiagram::new();
    let vk = cd.add_vertex("k", k.clone());
    let vl = cd.add_vertex("l", l.clone());
    cd.add_wire(&vk, i, &vl, j, f);
    let mut inputs: Vec<SlotRef> = Vec::new();
    for q in 1..j {
        inputs.push((vl.clone(), q));
    }
    for p in 1..=k.source.arity() {
        inputs.push((vk.clone(), p));
    }
    for q in j + 1..=l.source.arity() {
        inputs.push((vl.clone(), q));
    }
    let mut outputs: Vec<SlotRef> = Vec::new();
    for p in 1..i {
        outputs.push((vk.clone(), p));
    }
    for s in 1..=l.target.arity() {
        outputs.push((vl.clone(), s));
    }
    for p in i + 1..=k.target.arity() {
        outputs.push((vk.clone(), p));
    }
    cd.external_inputs = inputs;
    cd.external_outputs = outputs;
    Ok(ColoredComposed::Expanded(interface_expand(&cd, is)?))
}

/// One reduced component of a diagram: a kernel plus the original slots its
/// profiles correspond to, in order.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub kernel: Kernel,
    pub inputs: Vec<SlotRef>,
    pub outputs: Vec<SlotRef>,
    pub term: Option<ColorTerm>,
}

/// Reduce a colored diagram to a single kernel by colored binary composition,
/// contracting internal wires in the given order. Fails if an order step
/// would contract a wire inside one component (the diagram is then not
/// binary-reducible in that order).
pub fn reduce_colored_in_order(
    cd: &ColoredDiagram,
    cs: &ColorSystem,
    is: &InterfaceSystem,
    wire_order: &[Wire],
) -> Result<Reduction> {
    if wire_order.len() != cd.internal_wires.len() {
        return Err(Error::invalid("wire order must list every internal wire"));
    }
    let mut comps: Vec<Option<Reduction>> = Vec::new();
    let mut comp_of: BTreeMap<VertexId, usize> = BTreeMap::new();
    for (v, k) in &cd.vertices {
        comp_of.insert(v.clone(), comps.len());
        comps.push(Some(Reduction {
            kernel: k.clone(),
            inputs: (1..=k.source.arity()).map(|q| (v.clone(), q)).collect(),
            outputs: (1..=k.target.arity()).map(|p| (v.clone(), p)).collect(),
            term: cd.vertex_terms.get(v).cloned(),
        }));
    }
    for wire in wire_order {
        let witness = cd
            .internal_wires
            .get(wire)
            .ok_or_else(|| Error::invalid(format!("unknown wire in order: {wire:?}")))?;
        let cu = comp_of[&wire.from.0];
        let cv = comp_of[&wire.to.0];
        if cu == cv {
            return Err(Error::invalid(
                "reduction order contracts a wire inside one component",
            ));
        }
        let left = comps[cu].take().expect("component live");
        let right = comps[cv].take().expect("component live");
        let i = left
            .outputs
            .iter()
            .position(|s| s == &wire.from)
            .expect("slot tracked")
            + 1;
        let j = right
            .inputs
            .iter()
            .position(|s| s == &wire.to)
            .expect("slot tracked")
            + 1;
        let composed = compose_slotwise_colored(
            &left.kernel,
            &right.kernel,
            i,
            j,
            witness,
            cs,
            is,
            left.term.clone(),
            right.term.clone(),
        )?;
        let (kernel, term) = match composed {
            ColoredComposed::Kernel { kernel, term } => (kernel, Some(term)),
            ColoredComposed::Expanded(_) => {
                return Err(Error::NotClosed(
                    "reduction needs exactly-composable kernels".into(),
                ))
            }
        };
        let merged = Reduction {
            kernel,
            inputs: splice(&right.inputs, j, &left.inputs)?,
            outputs: splice(&left.outputs, i, &right.outputs)?,
            term,
        };
        let idx = comps.len();
        comps.push(Some(merged));
        for c in comp_of.values_mut() {
            if *c == cu || *c == cv {
                *c = idx;
            }
        }
    }
    let live: Vec<Reduction> = comps.into_iter().flatten().collect();
    if live.len() != 1 {
        return Err(Error::invalid(format!(
            "diagram did not reduce to one component ({} remain)",
            live.len()
        )));
    }
    Ok(live.into_iter().next().unwrap())
}

/// Max absolute deviation between a reduced kernel and the exact trace of the
/// diagram it came from, aligning the reduction's slot orders with the
/// diagram's declared external orderings.
pub fn reduction_vs_trace(d: &Diagram, red: &Reduction) -> Result<f64> {
    let in_set: BTreeSet<&SlotRef> = d.external_inputs.iter().collect();
    let red_in: BTreeSet<&SlotRef> = red.inputs.iter().collect();
    if in_set != red_in {
        return Err(Error::invalid("reduction input slots differ from diagram"));
    }
    let out_set: BTreeSet<&SlotRef> = d.external_outputs.iter().collect();
    let red_out: BTreeSet<&SlotRef> = red.outputs.iter().collect();
    if out_set != red_out {
        return Err(Error::invalid("reduction output slots differ from diagram"));
    }
    // red position -> diagram position
    let perm_in: Vec<usize> = red
        .inputs
        .iter()
        .map(|s| d.external_inputs.iter().position(|t| t == s).unwrap())
        .collect();
    // diagram position -> red position
    let perm_out: Vec<usize> = d
        .external_outputs
        .iter()
        .map(|s| red.outputs.iter().position(|t| t == s).unwrap())
        .collect();

    let in_profile = d.input_profile()?;
    let out_space = d.output_profile()?.space();
    let n_in = in_profile.space().cardinality()?;
    let mut max = 0.0f64;
    for xi in 0..n_in {
        let x_d = in_profile.values_at(xi)?;
        let x_red: Vec<Value> = perm_in.iter().map(|&p| x_d[p].clone()).collect();
        let (_, marginal) = trace_exact(d, &x_d)?;
        let dist = red.kernel.apply_exact(&x_red)?;
        for (oi, &p_red) in dist.probs.iter().enumerate() {
            let o_red = red.kernel.target.values_at(oi)?;
            let o_d: Vec<Value> = perm_out.iter().map(|&p| o_red[p].clone()).collect();
            let p_trace = marginal.probs[out_space.index_of(&Value::Tuple(o_d))?];
            max = max.max((p_red - p_trace).abs());
        }
    }
    Ok(max)
}

/// Reduce an uncolored diagram by binary compositions in the given wire order.
pub fn reduce_in_order(d: &Diagram, wire_order: &[Wire]) -> Result<Reduction> {
    if wire_order.len() != d.internal_wires.len() {
        return Err(Error::invalid("wire order must list every internal wire"));
    }
    let mut comps: Vec<Option<Reduction>> = Vec::new();
    let mut comp_of: BTreeMap<VertexId, usize> = BTreeMap::new();
    for (v, k) in &d.vertices {
        comp_of.insert(v.clone(), comps.len());
        comps.push(Some(Reduction {
            kernel: k.clone(),
            inputs: (1..=k.source.arity()).map(|q| (v.clone(), q)).collect(),
            outputs: (1..=k.target.arity()).map(|p| (v.clone(), p)).collect(),
            term: None,
        }));
    }
    for wire in wire_order {
        if !d.internal_wires.contains(wire) {
            return Err(Error::invalid(format!("unknown wire in order: {wire:?}")));
        }
        let cu = comp_of[&wire.from.0];
        let cv = comp_of[&wire.to.0];
        if cu == cv {
            return Err(Error::invalid(
                "reduction order contracts a wire inside one component",
            ));
        }
        let left = comps[cu].take().expect("component live");
        let right = comps[cv].take().expect("component live");
        let i = left
            .outputs
            .iter()
            .position(|s| s == &wire.from)
            .expect("slot tracked")
            + 1;
        let j = right
            .inputs
            .iter()
            .position(|s| s == &wire.to)
            .expect("slot tracked")
            + 1;
        let kernel = compose_slotwise(&left.kernel, &right.kernel, i, j)?.kernel()?;
        let merged = Reduction {
            kernel,
            inputs: splice(&right.inputs, j, &left.inputs)?,
            outputs: splice(&left.outputs, i, &right.outputs)?,
            term: None,
        };
        let idx = comps.len();
        comps.push(Some(merged));
        for c in comp_of.values_mut() {
            if *c == cu || *c == cv {
                *c = idx;
            }
        }
    }
    let live: Vec<Reduction> = comps.into_iter().flatten().collect();
    if live.len() != 1 {
        return Err(Error::invalid(format!(
            "diagram did not reduce to one component ({} remain)",
            live.len()
        )));
    }
    Ok(live.into_iter().next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::finite_table_kernel;
    use crate::space::Profile;

    /// Three-color chain c0 -> c1 -> c2 with finite interface kernels.
    fn chain_system() -> (ColorSystem, InterfaceSystem, BTreeMap<String, Object>) {
        let mut cs = ColorSystem::default();
        cs.add_color("c0");
        cs.add_color("c1");
        cs.add_color("c2");
        let f = cs.add_generator("f", "c0", "c1");
        let g = cs.add_generator("g", "c1", "c2");
        cs.add_composite(&g, &f, "gf").unwrap();
        cs.close_identities();

        let x = Object::finite("X", &["x0", "x1"]).with_color("c0");
        let y = Object::finite("Y", &["y0", "y1", "y2"]).with_color("c1");
        let z = Object::finite("Z", &["z0", "z1"]).with_color("c2");

        let kf = finite_table_kernel(
            "kappa_f",
            Profile::single(x.clone()),
            Profile::single(y.clone()),
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]],
        )
        .unwrap();
        let kg = finite_table_kernel(
            "kappa_g",
            Profile::single(y.clone()),
            Profile::single(z.clone()),
            vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.25, 0.75]],
        )
        .unwrap();
        // kappa_{gf} = kappa_g . kappa_f, entered exactly
        let kgf = crate::kernel::compose_unary(&kf, &kg).unwrap();
        let kgf = Kernel::new(
            "kappa_gf",
            kgf.source.clone(),
            kgf.target.clone(),
            kgf.rep.clone(),
        )
        .unwrap();

        let mut is = InterfaceSystem::new();
        for o in [&x, &y, &z] {
            is.add_identity(&cs, o).unwrap();
        }
        is.add_witness(&KMorId::new("f"), &x, &y, kf).unwrap();
        is.add_witness(&KMorId::new("g"), &y, &z, kg).unwrap();
        is.add_witness(&KMorId::new("gf"), &x, &z, kgf).unwrap();

        let objects: BTreeMap<String, Object> =
            [x, y, z].into_iter().map(|o| (o.name.clone(), o)).collect();
        (cs, is, objects)
    }

    #[test]
    fn single_color_identity_system_checks() {
        let mut cs = ColorSystem::discrete(&["only"]);
        cs.close_identities();
        let report = check_color_system(&cs);
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn missing_composite_is_reported() {
        let mut cs = ColorSystem::default();
        cs.add_color("a");
        cs.add_color("b");
        cs.add_color("c");
        cs.add_generator("f", "a", "b");
        cs.add_generator("g", "b", "c");
        cs.close_identities();
        // (g, f) is composable but has no table entry
        let report = check_color_system(&cs);
        assert!(report.has_code("compose-missing"), "{report}");
    }

    #[test]
    fn chain_system_iota_functoriality() {
        let (cs, _, _) = chain_system();
        let report = check_color_system(&cs);
        assert!(report.is_empty(), "{report}");
        assert_eq!(
            cs.iota[&KMorId::new("gf")],
            vec![KMorId::new("f"), KMorId::new("g")]
        );
    }

    #[test]
    fn iota_fault_is_reported() {
        let (mut cs, _, _) = chain_system();
        cs.iota
            .insert(KMorId::new("gf"), vec![KMorId::new("g"), KMorId::new("f")]);
        let report = check_color_system(&cs);
        assert!(report.has_code("iota"), "{report}");
    }

    #[test]
    fn coherence_exact_on_finite_paths() {
        let (cs, is, objects) = chain_system();
        let out = check_interface_coherence(
            &is,
            &cs,
            &objects,
            3,
            &BTreeMap::new(),
            1000,
            0.01,
            StreamSeed(5),
        );
        assert!(out.report.is_empty(), "{}", out.report);
        assert!(out.max_exact_deviation <= 1e-12);
        assert!(out.paths_checked > 0);
    }

    #[test]
    fn coherence_fault_injection() {
        let (cs, mut is, objects) = chain_system();
        // corrupt kappa_{gf}
        let x = objects["X"].clone();
        let z = objects["Z"].clone();
        let bad = finite_table_kernel(
            "kappa_gf_bad",
            Profile::single(x.clone()),
            Profile::single(z.clone()),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        is.kernels
            .insert((KMorId::new("gf"), "X".into(), "Z".into()), bad);
        let out = check_interface_coherence(
            &is,
            &cs,
            &objects,
            2,
            &BTreeMap::new(),
            1000,
            0.01,
            StreamSeed(5),
        );
        assert!(out.report.has_code("coherence"), "{}", out.report);
    }

    #[test]
    fn colored_composition_with_identity_witness_reduces_to_plain() {
        let (cs, mut is, _) = chain_system();
        let b = Object::finite("B", &["b0", "b1"]).with_color("c1");
        is.add_identity(&cs, &b).unwrap();
        let k = finite_table_kernel(
            "k",
            Profile::single(Object::finite("A", &["a0", "a1"]).with_color("c0")),
            Profile::single(b.clone()),
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
        )
        .unwrap();
        let l = finite_table_kernel(
            "l",
            Profile::single(b.clone()),
            Profile::single(Object::finite("C", &["u", "v"]).with_color("c2")),
            vec![vec![0.6, 0.4], vec![0.1, 0.9]],
        )
        .unwrap();
        let id = cs.identity_of(&ColorId::new("c1")).unwrap().clone();
        let colored = compose_slotwise_colored(&k, &l, 1, 1, &id, &cs, &is, None, None)
            .unwrap()
            .kernel()
            .unwrap();
        let plain = compose_slotwise(&k, &l, 1, 1).unwrap().kernel().unwrap();
        assert!(table_max_diff(&colored, &plain).unwrap() <= 1e-12);
    }

    #[test]
    fn colored_unit_laws() {
        let (cs, mut is, _) = chain_system();
        let a = Object::finite("A", &["a0", "a1"]).with_color("c0");
        let b = Object::finite("B", &["b0", "b1", "b2"]).with_color("c1");
        is.add_identity(&cs, &a).unwrap();
        is.add_identity(&cs, &b).unwrap();
        let h = finite_table_kernel(
            "h",
            Profile::single(a.clone()),
            Profile::single(b.clone()),
            vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]],
        )
        .unwrap();
        let id_a = identity_kernel(&a);
        let id_b = identity_kernel(&b);
        let wa = cs.identity_of(&ColorId::new("c0")).unwrap().clone();
        let wb = cs.identity_of(&ColorId::new("c1")).unwrap().clone();

        // h .(1,j) id_{A_j} = h
        let pre = compose_slotwise_colored(&id_a, &h, 1, 1, &wa, &cs, &is, None, None)
            .unwrap()
            .kernel()
            .unwrap();
        assert!(table_max_diff(&pre, &h).unwrap() <= 1e-12);

        // id_{B_i} .(i,1) h = h
        let post = compose_slotwise_colored(&h, &id_b, 1, 1, &wb, &cs, &is, None, None)
            .unwrap()
            .kernel()
            .unwrap();
        assert!(table_max_diff(&post, &h).unwrap() <= 1e-12);
    }

    #[test]
    fn expansion_matches_colored_composite_and_counts_vertices() {
        let (cs, is, objects) = chain_system();
        let x = objects["X"].clone();
        let y = objects["Y"].clone();
        let z = objects["Z"].clone();
        let k = finite_table_kernel(
            "produce",
            Profile::single(Object::finite("P", &["p0"]).with_color("c0")),
            Profile::single(x.clone()),
            vec![vec![0.35, 0.65]],
        )
        .unwrap();
        let l = finite_table_kernel(
            "consume",
            Profile::single(y.clone()),
            Profile::single(z.clone()),
            vec![vec![0.8, 0.2], vec![0.5, 0.5], vec![0.05, 0.95]],
        )
        .unwrap();

        let mut cd = ColoredDiagram::new();
        let vk = cd.add_vertex("produce", k.clone());
        let vl = cd.add_vertex("consume", l.clone());
        cd.add_wire(&vk, 1, &vl, 1, &KMorId::new("f"));
        cd.autofill_external();
        assert!(cd.validate(&is).is_empty(), "{}", cd.validate(&is));

        let expanded = interface_expand(&cd, &is).unwrap();
        assert_eq!(expanded.vertices.len(), 3);
        assert!(expanded.validate().is_empty());
        assert!(expanded.topo_sort().is_ok());

        let composed =
            compose_slotwise_colored(&k, &l, 1, 1, &KMorId::new("f"), &cs, &is, None, None)
                .unwrap()
                .kernel()
                .unwrap();
        let x_in = vec![Value::FiniteIdx(0)];
        let (_, marginal) = colored_trace_exact(&cd, &is, &x_in).unwrap();
        let direct = composed.apply_exact(&x_in).unwrap();
        assert!(marginal.max_abs_diff(&direct) <= 1e-12);
    }

    #[test]
    fn inadmissible_witness_rejected() {
        let (cs, is, objects) = chain_system();
        let x = objects["X"].clone();
        let z = objects["Z"].clone();
        let k = finite_table_kernel(
            "k",
            Profile::single(z.clone()),
            Profile::single(x.clone()),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let l = finite_table_kernel(
            "l",
            Profile::single(z.clone()),
            Profile::single(x.clone()),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        // g is diag->treat; not admissible X -> Z
        let err = compose_slotwise_colored(&k, &l, 1, 1, &KMorId::new("g"), &cs, &is, None, None);
        assert!(matches!(err, Err(Error::InadmissibleWitness { .. })));
    }

    #[test]
    fn colored_reduction_orders_agree() {
        let (cs, mut is, objects) = chain_system();
        let x = objects["X"].clone();
        let y = objects["Y"].clone();
        let z = objects["Z"].clone();
        // tree: k1 -> k3 via f (X to Y), k2 -> k3 via id (W to W)
        let w = Object::finite("W", &["w0", "w1"]).with_color("c2");
        is.add_identity(&cs, &w).unwrap();
        let k1 = finite_table_kernel(
            "k1",
            Profile::single(Object::finite("A", &["a0", "a1"]).with_color("c0")),
            Profile::single(x.clone()),
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        )
        .unwrap();
        let k2 = finite_table_kernel(
            "k2",
            Profile::single(Object::finite("C", &["c0v", "c1v"]).with_color("c2")),
            Profile::single(w.clone()),
            vec![vec![0.3, 0.7], vec![0.6, 0.4]],
        )
        .unwrap();
        let k3 = finite_table_kernel(
            "k3",
            Profile::of(vec![y.clone(), w.clone()]),
            Profile::single(z.clone()),
            vec![
                vec![0.5, 0.5],
                vec![0.2, 0.8],
                vec![0.9, 0.1],
                vec![0.3, 0.7],
                vec![0.6, 0.4],
                vec![0.1, 0.9],
            ],
        )
        .unwrap();
        let mut cd = ColoredDiagram::new();
        let v1 = cd.add_vertex("k1", k1);
        let v2 = cd.add_vertex("k2", k2);
        let v3 = cd.add_vertex("k3", k3);
        cd.add_wire(&v1, 1, &v3, 1, &KMorId::new("f"));
        let id_c2 = cs.identity_of(&ColorId::new("c2")).unwrap().clone();
        cd.add_wire(&v2, 1, &v3, 2, &id_c2);
        cd.autofill_external();
        assert!(cd.validate(&is).is_empty(), "{}", cd.validate(&is));

        let wires: Vec<Wire> = cd.internal_wires.keys().cloned().collect();
        let order_a = vec![wires[0].clone(), wires[1].clone()];
        let order_b = vec![wires[1].clone(), wires[0].clone()];
        let ra = reduce_colored_in_order(&cd, &cs, &is, &order_a).unwrap();
        let rb = reduce_colored_in_order(&cd, &cs, &is, &order_b).unwrap();
        assert_eq!(ra.inputs, rb.inputs);
        assert_eq!(ra.outputs, rb.outputs);
        assert!(table_max_diff(&ra.kernel, &rb.kernel).unwrap() <= 1e-12);

        // reductions agree with the trace of the interface expansion
        let expanded = interface_expand(&cd, &is).unwrap();
        let dev = reduction_vs_trace(&expanded, &ra).unwrap();
        assert!(dev <= 1e-12, "dev {dev}");
    }

    #[test]
    fn connected_subdiagrams_trace_as_colored_composite() {
        // K_D = K_{D2} .f K_{D1} where D joins two 2-vertex chains through f
        let (cs, is, objects) = chain_system();
        let x = objects["X"].clone();
        let y = objects["Y"].clone();
        let z = objects["Z"].clone();
        let id_c0 = cs.identity_of(&ColorId::new("c0")).unwrap().clone();
        let id_c1 = cs.identity_of(&ColorId::new("c1")).unwrap().clone();

        // D1: two c0-typed vertices chained by an identity witness, ending at X
        let p = Object::finite("Pp", &["p0", "p1"]).with_color("c0");
        let mut is = is;
        is.add_identity(&cs, &p).unwrap();
        let a1 = finite_table_kernel(
            "a1",
            Profile::single(p.clone()),
            Profile::single(p.clone()),
            vec![vec![0.6, 0.4], vec![0.15, 0.85]],
        )
        .unwrap();
        let a2 = finite_table_kernel(
            "a2",
            Profile::single(p.clone()),
            Profile::single(x.clone()),
            vec![vec![0.7, 0.3], vec![0.25, 0.75]],
        )
        .unwrap();
        let mut d1 = ColoredDiagram::new();
        let va1 = d1.add_vertex("a1", a1);
        let va2 = d1.add_vertex("a2", a2);
        d1.add_wire(&va1, 1, &va2, 1, &id_c0);
        d1.autofill_external();

        // D2: two c1-typed vertices chained by an identity witness, Y to Z
        let b1 = finite_table_kernel(
            "b1",
            Profile::single(y.clone()),
            Profile::single(y.clone()),
            vec![
                vec![0.5, 0.3, 0.2],
                vec![0.1, 0.8, 0.1],
                vec![0.3, 0.3, 0.4],
            ],
        )
        .unwrap();
        let b2 = finite_table_kernel(
            "b2",
            Profile::single(y.clone()),
            Profile::single(z.clone()),
            vec![vec![0.9, 0.1], vec![0.45, 0.55], vec![0.2, 0.8]],
        )
        .unwrap();
        let mut d2 = ColoredDiagram::new();
        let vb1 = d2.add_vertex("b1", b1);
        let vb2 = d2.add_vertex("b2", b2);
        d2.add_wire(&vb1, 1, &vb2, 1, &id_c1);
        d2.autofill_external();

        // trace kernels of the sub-diagrams as finite tables
        let trace_kernel = |cd: &ColoredDiagram, name: &str| -> Kernel {
            let in_profile = cd.input_profile().unwrap();
            let out_profile = cd.output_profile().unwrap();
            let n = in_profile.space().cardinality().unwrap();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let xvals = in_profile.values_at(i).unwrap();
                    colored_trace_exact(cd, &is, &xvals).unwrap().1.probs
                })
                .collect();
            finite_table_kernel(name, in_profile, out_profile, rows).unwrap()
        };
        let k_d1 = trace_kernel(&d1, "K_D1");
        let k_d2 = trace_kernel(&d2, "K_D2");

        // connect D1's X output into D2's Y input through witness f
        let joined = connect_colored(&d1, 1, &d2, 1, &KMorId::new("f"), &is).unwrap();
        assert!(joined.validate(&is).is_empty(), "{}", joined.validate(&is));
        let k_joined = trace_kernel(&joined, "K_D");

        let composite =
            compose_slotwise_colored(&k_d1, &k_d2, 1, 1, &KMorId::new("f"), &cs, &is, None, None)
                .unwrap()
                .kernel()
                .unwrap();
        assert!(table_max_diff(&k_joined, &composite).unwrap() <= 1e-12);
    }

    #[test]
    fn psi_bookkeeping_records_slotwise_structure() {
        let (cs, is, objects) = chain_system();
        let x = objects["X"].clone();
        let y = objects["Y"].clone();
        let z = objects["Z"].clone();
        let k = finite_table_kernel(
            "k",
            Profile::single(Object::finite("P", &["p0"]).with_color("c0")),
            Profile::single(x),
            vec![vec![0.35, 0.65]],
        )
        .unwrap();
        let l = finite_table_kernel(
            "l",
            Profile::single(y),
            Profile::single(z),
            vec![vec![0.8, 0.2], vec![0.5, 0.5], vec![0.05, 0.95]],
        )
        .unwrap();
        let composed =
            compose_slotwise_colored(&k, &l, 1, 1, &KMorId::new("f"), &cs, &is, None, None)
                .unwrap();
        let term = match composed {
            ColoredComposed::Kernel { term, .. } => term,
            _ => panic!("expected exact kernel"),
        };
        let expect = ColorTerm::colored_composite(
            ColorTerm::of_kernel(&l),
            1,
            1,
            ColorTerm::iota(&cs, &KMorId::new("f")).unwrap(),
            ColorTerm::of_kernel(&k),
        );
        assert_eq!(term, expect);
        assert_eq!(term.src_colors(), vec![ColorId::new("c0")]);
        assert_eq!(term.dst_colors(), vec![ColorId::new("c2")]);
    }
}
