//! Markov kernel representations and exact composition.
//!
//! A kernel is stored in one of four representations, each supporting exactly
//! the capabilities the evaluation and gradient machinery needs:
//!
//! * [`FiniteTable`] — rows of probabilities over enumerated points; supports
//!   exact application, enumeration, and densities w.r.t. counting measure.
//! * `Deterministic` — a measurable map as a Dirac kernel; supports exact
//!   forward evaluation and (when a Jacobian is registered) pathwise
//!   differentiation. Deterministic kernels have no density.
//! * `Sampler` — a sampling procedure with an optional log-density w.r.t. a
//!   declared reference measure.
//! * [`GaussianLinear`] — affine mean with diagonal covariance on real
//!   coordinate spaces; zero covariance entries encode Dirac components.

use crate::error::{Error, Result};
use crate::space::{splice, Object, Profile, SpaceDesc, Value, EXACT_TOL};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::fmt;
use std::sync::Arc;

/// Reference measure against which densities are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefMeasure {
    Counting,
    Lebesgue,
}

/// A probability distribution over the enumerated points of a finite space.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDist {
    pub space: SpaceDesc,
    pub probs: Vec<f64>,
}

impl FiniteDist {
    pub fn new(space: SpaceDesc, probs: Vec<f64>) -> Result<FiniteDist> {
        let d = FiniteDist { space, probs };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.space.cardinality()?;
        if n != self.probs.len() {
            return Err(Error::DimMismatch {
                expected: n,
                found: self.probs.len(),
            });
        }
        if self.probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("negative or non-finite probability"));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > EXACT_TOL {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn point_mass(space: SpaceDesc, v: &Value) -> Result<FiniteDist> {
        let n = space.cardinality()?;
        let idx = space.index_of(v)?;
        let mut probs = vec![0.0; n];
        probs[idx] = 1.0;
        Ok(FiniteDist { space, probs })
    }

    pub fn uniform(space: SpaceDesc) -> Result<FiniteDist> {
        let n = space.cardinality()?;
        Ok(FiniteDist {
            space,
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn prob_of(&self, v: &Value) -> Result<f64> {
        Ok(self.probs[self.space.index_of(v)?])
    }

    /// Inverse-CDF sample, returning the enumerated point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Value> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.space.point_at(i);
            }
        }
        // numerical slack: fall back to the last point with positive mass
        let last = self
            .probs
            .iter()
            .rposition(|&p| p > 0.0)
            .ok_or_else(|| Error::invalid("distribution has no mass"))?;
        self.space.point_at(last)
    }

    pub fn max_abs_diff(&self, other: &FiniteDist) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance to another distribution on the same space.
    pub fn total_variation(&self, other: &FiniteDist) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Dense row-major matrix with named dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-vector product `x · M` (length `cols`).
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += xi * self.at(i, j);
            }
        }
        out
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j);
            }
        }
        out
    }
}

/// Exact table representation: one row per enumerated source point.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteTable {
    pub rows: Vec<FiniteDist>,
}

pub type MapFn = Arc<dyn Fn(&[Value]) -> Vec<Value> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&[Value]) -> Mat + Send + Sync>;
pub type SampleFn = Arc<dyn Fn(&mut ChaCha12Rng, &[Value]) -> Vec<Value> + Send + Sync>;
pub type LogDensityFn = Arc<dyn Fn(&[Value], &[Value]) -> f64 + Send + Sync>;

/// Deterministic map with an optionally registered Jacobian
/// (d out-coords / d in-coords, rows = output coordinates).
#[derive(Clone)]
pub struct DetMap {
    pub map: MapFn,
    pub jac: Option<JacFn>,
}

/// Sampler with optional log-density w.r.t. a declared reference measure.
#[derive(Clone)]
pub struct SamplerDensity {
    pub sample: SampleFn,
    pub log_density: Option<LogDensityFn>,
    pub reference: RefMeasure,
}

/// Affine-mean Gaussian with diagonal covariance on real coordinates.
///
/// `weight` is laid out source-dim x target-dim: `weight[i][j]` is the
/// coefficient of source coordinate `i` in target coordinate `j`, so the mean
/// is `bias + x · weight`. Zero `cov_diag` entries are Dirac components.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLinear {
    pub weight: Mat,
    pub bias: Vec<f64>,
    pub cov_diag: Vec<f64>,
}

#[derive(Clone)]
pub enum KernelRep {
    FiniteTable(FiniteTable),
    Deterministic(DetMap),
    Sampler(SamplerDensity),
    GaussianLinear(GaussianLinear),
}

impl fmt::Debug for KernelRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelRep::FiniteTable(t) => write!(f, "FiniteTable({} rows)", t.rows.len()),
            KernelRep::Deterministic(d) => {
                write!(f, "Deterministic(jac: {})", d.jac.is_some())
            }
            KernelRep::Sampler(s) => write!(
                f,
                "Sampler(density: {}, ref: {:?})",
                s.log_density.is_some(),
                s.reference
            ),
            KernelRep::GaussianLinear(g) => {
                write!(f, "GaussianLinear({}x{})", g.weight.rows, g.weight.cols)
            }
        }
    }
}

/// A Markov kernel from its source profile to its target profile.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub name: String,
    pub source: Profile,
    pub target: Profile,
    pub rep: KernelRep,
}

impl Kernel {
    pub fn new(
        name: impl Into<String>,
        source: Profile,
        target: Profile,
        rep: KernelRep,
    ) -> Result<Kernel> {
        let k = Kernel {
            name: name.into(),
            source,
            target,
            rep,
        };
        k.validate()?;
        Ok(k)
    }

    /// Structural invariants of the representation.
    pub fn validate(&self) -> Result<()> {
        match &self.rep {
            KernelRep::FiniteTable(t) => {
                let n = self.source.space().cardinality()?;
                if t.rows.len() != n {
                    return Err(Error::DimMismatch {
                        expected: n,
                        found: t.rows.len(),
                    });
                }
                let tgt = self.target.space();
                for row in &t.rows {
                    if row.space != tgt {
                        return Err(Error::SpaceMismatch {
                            expected: tgt.to_string(),
                            found: row.space.to_string(),
                        });
                    }
                    row.validate()?;
                }
            }
            KernelRep::Deterministic(d) => {
                // spot-check totality on enumerable sources
                if self.source.space().is_finite() {
                    for i in 0..self.source.space().cardinality()? {
                        let input = self.source.values_at(i)?;
                        let out = (d.map)(&input);
                        self.target.check_values(&out)?;
                    }
                }
            }
            KernelRep::Sampler(_) => {}
            KernelRep::GaussianLinear(g) => {
                let m = self.source.real_dim();
                let n = self.target.real_dim();
                let all_real = self
                    .source
                    .0
                    .iter()
                    .chain(self.target.0.iter())
                    .all(|o| matches!(o.space, SpaceDesc::RealVec { .. }));
                if !all_real {
                    return Err(Error::invalid(
                        "GaussianLinear kernels need RealVec source and target slots",
                    ));
                }
                if g.weight.rows != m || g.weight.cols != n {
                    return Err(Error::invalid(format!(
                        "weight is {}x{}, expected {}x{}",
                        g.weight.rows, g.weight.cols, m, n
                    )));
                }
                if g.bias.len() != n || g.cov_diag.len() != n {
                    return Err(Error::DimMismatch {
                        expected: n,
                        found: g.bias.len().max(g.cov_diag.len()),
                    });
                }
                if g.cov_diag.iter().any(|&c| c < 0.0) {
                    return Err(Error::invalid("negative covariance entry"));
                }
            }
        }
        Ok(())
    }

    /// True when the kernel can be converted to an exact [`FiniteTable`].
    pub fn is_finite_representable(&self) -> bool {
        if !(self.source.space().is_finite() && self.target.space().is_finite()) {
            return false;
        }
        match &self.rep {
            KernelRep::FiniteTable(_) | KernelRep::Deterministic(_) => true,
            KernelRep::Sampler(s) => s.log_density.is_some(),
            KernelRep::GaussianLinear(_) => false,
        }
    }

    /// Convert to an exact table (enumerating the source space).
    pub fn to_finite_table(&self) -> Result<FiniteTable> {
        if !self.source.space().is_finite() || !self.target.space().is_finite() {
            return Err(Error::NotFinite(self.name.clone()));
        }
        let n = self.source.space().cardinality()?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let input = self.source.values_at(i)?;
            rows.push(self.apply_exact(&input)?);
        }
        Ok(FiniteTable { rows })
    }

    /// The exact output distribution for one input (all-finite targets only).
    pub fn apply_exact(&self, input: &[Value]) -> Result<FiniteDist> {
        self.source.check_values(input)?;
        let tgt = self.target.space();
        match &self.rep {
            KernelRep::FiniteTable(t) => {
                let idx = self.source.index_of(input)?;
                Ok(t.rows[idx].clone())
            }
            KernelRep::Deterministic(d) => {
                let out = (d.map)(input);
                self.target.check_values(&out)?;
                FiniteDist::point_mass(tgt, &Value::Tuple(out))
            }
            KernelRep::Sampler(s) => {
                let ld = s.log_density.as_ref().ok_or(Error::NoDensity)?;
                if s.reference != RefMeasure::Counting || !tgt.is_finite() {
                    return Err(Error::NotFinite(self.name.clone()));
                }
                let n = tgt.cardinality()?;
                let mut probs = Vec::with_capacity(n);
                for i in 0..n {
                    let out = self.target.values_at(i)?;
                    probs.push(ld(&out, input).exp());
                }
                FiniteDist::new(tgt, probs)
            }
            KernelRep::GaussianLinear(_) => Err(Error::NotFinite(self.name.clone())),
        }
    }

    /// Draw one output tuple from `k(.|input)`.
    pub fn sample(&self, rng: &mut ChaCha12Rng, input: &[Value]) -> Result<Vec<Value>> {
        self.source.check_values(input)?;
        match &self.rep {
            KernelRep::FiniteTable(t) => {
                let idx = self.source.index_of(input)?;
                match t.rows[idx].sample(rng)? {
                    Value::Tuple(items) => Ok(items),
                    _ => unreachable!("profile space is a product"),
                }
            }
            KernelRep::Deterministic(d) => {
                let out = (d.map)(input);
                self.target.check_values(&out)?;
                Ok(out)
            }
            KernelRep::Sampler(s) => {
                let out = (s.sample)(rng, input);
                self.target.check_values(&out)?;
                Ok(out)
            }
            KernelRep::GaussianLinear(g) => {
                let x = self.source.flatten(input);
                let mut mean = g.weight.vec_mul(&x);
                for (m, b) in mean.iter_mut().zip(&g.bias) {
                    *m += b;
                }
                for (m, &c) in mean.iter_mut().zip(&g.cov_diag) {
                    if c > 0.0 {
                        *m += c.sqrt() * crate::stream::standard_normal(rng);
                    }
                }
                unflatten_real(&self.target, &mean)
            }
        }
    }

    /// Log-density of `output` given `input` w.r.t. the representation's
    /// reference measure. Zero-probability finite outcomes yield `-inf`.
    pub fn log_density(&self, output: &[Value], input: &[Value]) -> Result<f64> {
        self.source.check_values(input)?;
        self.target.check_values(output)?;
        match &self.rep {
            KernelRep::FiniteTable(t) => {
                let idx = self.source.index_of(input)?;
                let p = t.rows[idx].prob_of(&Value::Tuple(output.to_vec()))?;
                Ok(if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            }
            KernelRep::Deterministic(_) => Err(Error::NoDensity),
            KernelRep::Sampler(s) => {
                let ld = s.log_density.as_ref().ok_or(Error::NoDensity)?;
                Ok(ld(output, input))
            }
            KernelRep::GaussianLinear(g) => {
                if g.cov_diag.iter().any(|&c| c <= 0.0) {
                    return Err(Error::ZeroDensity(
                        "GaussianLinear density needs strictly positive covariance".into(),
                    ));
                }
                let x = self.source.flatten(input);
                let z = self.target.flatten(output);
                let mut mean = g.weight.vec_mul(&x);
                for (m, b) in mean.iter_mut().zip(&g.bias) {
                    *m += b;
                }
                let mut ll = 0.0;
                for ((zi, mi), &c) in z.iter().zip(&mean).zip(&g.cov_diag) {
                    let d = zi - mi;
                    ll += -0.5 * (d * d / c + (2.0 * std::f64::consts::PI * c).ln());
                }
                Ok(ll)
            }
        }
    }

    /// The reference measure of the representation's density, if any.
    pub fn reference(&self) -> Option<RefMeasure> {
        match &self.rep {
            KernelRep::FiniteTable(_) => Some(RefMeasure::Counting),
            KernelRep::Deterministic(_) => None,
            KernelRep::Sampler(s) => Some(s.reference),
            KernelRep::GaussianLinear(_) => Some(RefMeasure::Lebesgue),
        }
    }

    /// Jacobian of the output real coordinates w.r.t. the input real
    /// coordinates at fixed noise (rows = output coords). `None` when the
    /// representation does not support pathwise differentiation.
    pub fn jac_input(&self, input: &[Value]) -> Option<Mat> {
        match &self.rep {
            KernelRep::Deterministic(d) => d.jac.as_ref().map(|j| j(input)),
            KernelRep::GaussianLinear(g) => Some(g.weight.transpose()),
            _ => None,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.rep, KernelRep::Deterministic(_))
    }
}

/// Reconstruct slot values of an all-real profile from flat coordinates.
pub fn unflatten_real(profile: &Profile, coords: &[f64]) -> Result<Vec<Value>> {
    let mut out = Vec::with_capacity(profile.arity());
    let mut off = 0;
    for o in &profile.0 {
        match &o.space {
            SpaceDesc::RealVec { dim } => {
                if off + dim > coords.len() {
                    return Err(Error::DimMismatch {
                        expected: profile.real_dim(),
                        found: coords.len(),
                    });
                }
                out.push(Value::RealVecVal(coords[off..off + dim].to_vec()));
                off += dim;
            }
            _ => {
                return Err(Error::invalid(format!(
                    "slot {} is not real-valued",
                    o.name
                )))
            }
        }
    }
    if off != coords.len() {
        return Err(Error::DimMismatch {
            expected: off,
            found: coords.len(),
        });
    }
    Ok(out)
}

/// The identity kernel on one object.
pub fn identity_kernel(obj: &Object) -> Kernel {
    let dim = obj.space.real_dim();
    let name = format!("id_{}", obj.name);
    Kernel {
        name,
        source: Profile::single(obj.clone()),
        target: Profile::single(obj.clone()),
        rep: KernelRep::Deterministic(DetMap {
            map: Arc::new(|v: &[Value]| v.to_vec()),
            jac: Some(Arc::new(move |_: &[Value]| Mat::identity(dim))),
        }),
    }
}

/// The deterministic kernel of a measurable map.
pub fn dirac_of_map(
    name: impl Into<String>,
    source: Profile,
    target: Profile,
    map: MapFn,
    jac: Option<JacFn>,
) -> Result<Kernel> {
    Kernel::new(
        name,
        source,
        target,
        KernelRep::Deterministic(DetMap { map, jac }),
    )
}

/// Build a finite-table kernel from row-major probabilities.
pub fn finite_table_kernel(
    name: impl Into<String>,
    source: Profile,
    target: Profile,
    rows: Vec<Vec<f64>>,
) -> Result<Kernel> {
    let tgt_space = target.space();
    let rows = rows
        .into_iter()
        .map(|r| FiniteDist::new(tgt_space.clone(), r))
        .collect::<Result<Vec<_>>>()?;
    Kernel::new(
        name,
        source,
        target,
        KernelRep::FiniteTable(FiniteTable { rows }),
    )
}

/// Chapman-Kolmogorov composition `l . k` of unary-wired kernels.
///
/// Exact in the closed representation classes; pairs outside them are
/// rejected so callers fall back to a diagram evaluated by trace.
pub fn compose_unary(k: &Kernel, l: &Kernel) -> Result<Kernel> {
    if !k.target.same_spaces(&l.source) {
        return Err(Error::SpaceMismatch {
            expected: l.source.space().to_string(),
            found: k.target.space().to_string(),
        });
    }
    let name = format!("{}.{}", l.name, k.name);

    // deterministic . deterministic stays deterministic
    if let (KernelRep::Deterministic(dk), KernelRep::Deterministic(dl)) = (&k.rep, &l.rep) {
        let fk = dk.map.clone();
        let fl = dl.map.clone();
        let jac = match (&dk.jac, &dl.jac) {
            (Some(jk), Some(jl)) => {
                let (fk2, jk, jl) = (dk.map.clone(), jk.clone(), jl.clone());
                let j: JacFn = Arc::new(move |x: &[Value]| {
                    let mid = fk2(x);
                    jl(&mid).matmul(&jk(x))
                });
                Some(j)
            }
            _ => None,
        };
        return Kernel::new(
            name,
            k.source.clone(),
            l.target.clone(),
            KernelRep::Deterministic(DetMap {
                map: Arc::new(move |x: &[Value]| fl(&fk(x))),
                jac,
            }),
        );
    }

    // all-finite pairs compose as stochastic-matrix products
    if k.is_finite_representable() && l.is_finite_representable() {
        let tk = k.to_finite_table()?;
        let tl = l.to_finite_table()?;
        let n_out = l.target.space().cardinality()?;
        let mut rows = Vec::with_capacity(tk.rows.len());
        for row_k in &tk.rows {
            let mut probs = vec![0.0; n_out];
            for (b, &pk) in row_k.probs.iter().enumerate() {
                if pk == 0.0 {
                    continue;
                }
                for (c, &pl) in tl.rows[b].probs.iter().enumerate() {
                    probs[c] += pk * pl;
                }
            }
            rows.push(FiniteDist {
                space: l.target.space(),
                probs,
            });
        }
        return Kernel::new(
            name,
            k.source.clone(),
            l.target.clone(),
            KernelRep::FiniteTable(FiniteTable { rows }),
        );
    }

    // Gaussian-linear pairs compose affinely when the result stays diagonal
    if let (KernelRep::GaussianLinear(_), KernelRep::GaussianLinear(_)) = (&k.rep, &l.rep) {
        return gaussian_slotwise(k, l, 1, 1).map(|mut composed| {
            composed.name = name;
            composed
        });
    }

    // deterministic pre-composition substitutes the map into the density
    if let KernelRep::Deterministic(dk) = &k.rep {
        let fk = dk.map.clone();
        let l2 = l.clone();
        let sample: SampleFn = {
            let fk = fk.clone();
            let l2 = l2.clone();
            Arc::new(move |rng: &mut ChaCha12Rng, x: &[Value]| {
                l2.sample(rng, &fk(x)).expect("composite sample")
            })
        };
        let log_density: Option<LogDensityFn> = match l.reference() {
            Some(_) if !l.is_deterministic() => {
                let fk = fk.clone();
                let l2 = l.clone();
                Some(Arc::new(move |out: &[Value], x: &[Value]| {
                    l2.log_density(out, &fk(x)).unwrap_or(f64::NEG_INFINITY)
                }))
            }
            _ => None,
        };
        let reference = l.reference().unwrap_or(RefMeasure::Counting);
        return Kernel::new(
            name,
            k.source.clone(),
            l.target.clone(),
            KernelRep::Sampler(SamplerDensity {
                sample,
                log_density,
                reference,
            }),
        );
    }

    // deterministic post-composition: exact sampling; density only by
    // preimage sums over finite targets
    if let KernelRep::Deterministic(dl) = &l.rep {
        let fl = dl.map.clone();
        let k2 = k.clone();
        let sample: SampleFn = {
            let fl = fl.clone();
            let k2 = k2.clone();
            Arc::new(move |rng: &mut ChaCha12Rng, x: &[Value]| {
                fl(&k2.sample(rng, x).expect("composite sample"))
            })
        };
        let log_density: Option<LogDensityFn> = if k.target.space().is_finite()
            && l.target.space().is_finite()
            && k.reference() == Some(RefMeasure::Counting)
        {
            let k2 = k.clone();
            let fl = fl.clone();
            let mid = k.target.clone();
            Some(Arc::new(move |out: &[Value], x: &[Value]| {
                let n = mid.space().cardinality().expect("finite");
                let mut p = 0.0;
                for b in 0..n {
                    let bv = mid.values_at(b).expect("finite");
                    if fl(&bv) == out {
                        p += k2.log_density(&bv, x).map(f64::exp).unwrap_or(0.0);
                    }
                }
                if p > 0.0 {
                    p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }))
        } else {
            None
        };
        return Kernel::new(
            name,
            k.source.clone(),
            l.target.clone(),
            KernelRep::Sampler(SamplerDensity {
                sample,
                log_density,
                reference: RefMeasure::Counting,
            }),
        );
    }

    Err(Error::NotClosed(format!("{:?} then {:?}", k.rep, l.rep)))
}

/// Slot coordinate offsets `(offset, dim)` of a profile's real coordinates.
pub(crate) fn slot_offsets(profile: &Profile) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(profile.arity());
    let mut off = 0;
    for o in &profile.0 {
        let d = o.space.real_dim();
        out.push((off, d));
        off += d;
    }
    out
}

/// Exact slotwise composition of two Gaussian-linear kernels along
/// output slot `i` of `k` and input slot `j` of `l` (1-based).
///
/// Fails with [`Error::NotClosed`] when the composite covariance leaves the
/// diagonal class.
pub fn gaussian_slotwise(k: &Kernel, l: &Kernel, i: usize, j: usize) -> Result<Kernel> {
    let (gk, gl) = match (&k.rep, &l.rep) {
        (KernelRep::GaussianLinear(a), KernelRep::GaussianLinear(b)) => (a, b),
        _ => {
            return Err(Error::NotClosed(
                "gaussian_slotwise needs GaussianLinear pair".into(),
            ))
        }
    };
    let bi = k.target.slot(i)?;
    let cj = l.source.slot(j)?;
    if bi.space != cj.space {
        return Err(Error::SpaceMismatch {
            expected: cj.space.to_string(),
            found: bi.space.to_string(),
        });
    }

    let gamma = Profile(splice(&l.source.0, j, &k.source.0)?);
    let delta = Profile(splice(&k.target.0, i, &l.target.0)?);

    let b_off = slot_offsets(&k.target);
    let c_off = slot_offsets(&l.source);
    let (bi0, w) = b_off[i - 1];
    let (cj0, _) = c_off[j - 1];

    let dim_a = k.source.real_dim();
    let dim_b = k.target.real_dim();
    let dim_c = l.source.real_dim();
    let dim_d = l.target.real_dim();

    // gamma coordinates: l-source coords with slot j replaced by k-source coords
    let dim_gamma = dim_c - w + dim_a;
    // delta coordinates: k-target coords with slot i replaced by l-target coords
    let dim_delta = dim_b - w + dim_d;

    // index maps into the composite coordinate order
    let gamma_of_c = |t: usize| -> Option<usize> {
        if t < cj0 {
            Some(t)
        } else if t < cj0 + w {
            None
        } else {
            Some(t - w + dim_a)
        }
    };
    let gamma_of_a = |p: usize| -> usize { cj0 + p };
    let delta_of_b = |q: usize| -> Option<usize> {
        if q < bi0 {
            Some(q)
        } else if q < bi0 + w {
            None
        } else {
            Some(q - w + dim_d)
        }
    };
    let delta_of_d = |s: usize| -> usize { bi0 + s };

    let mut weight = Mat::zeros(dim_gamma, dim_delta);
    let mut bias = vec![0.0; dim_delta];
    let mut cov = vec![0.0; dim_delta];

    // retained k outputs pass through untouched
    for q in 0..dim_b {
        if let Some(dq) = delta_of_b(q) {
            bias[dq] = gk.bias[q];
            cov[dq] = gk.cov_diag[q];
            for p in 0..dim_a {
                *weight.at_mut(gamma_of_a(p), dq) = gk.weight.at(p, q);
            }
        }
    }

    // l outputs: external c coords plus the wired k-output coordinates
    for s in 0..dim_d {
        let ds = delta_of_d(s);
        bias[ds] += gl.bias[s];
        cov[ds] += gl.cov_diag[s];
        for t in 0..dim_c {
            match gamma_of_c(t) {
                Some(gt) => *weight.at_mut(gt, ds) += gl.weight.at(t, s),
                None => {
                    // wired coordinate: substitute the k-output row
                    let u = t - cj0;
                    let q = bi0 + u;
                    let wl = gl.weight.at(t, s);
                    if wl == 0.0 {
                        continue;
                    }
                    bias[ds] += wl * gk.bias[q];
                    cov[ds] += wl * wl * gk.cov_diag[q];
                    for p in 0..dim_a {
                        *weight.at_mut(gamma_of_a(p), ds) += wl * gk.weight.at(p, q);
                    }
                }
            }
        }
    }

    // off-diagonal covariance between two l outputs through shared wired noise
    for s in 0..dim_d {
        for s2 in s + 1..dim_d {
            let mut off = 0.0;
            for u in 0..w {
                off += gk.cov_diag[bi0 + u] * gl.weight.at(cj0 + u, s) * gl.weight.at(cj0 + u, s2);
            }
            if off != 0.0 {
                return Err(Error::NotClosed(
                    "composite Gaussian covariance is not diagonal".into(),
                ));
            }
        }
    }

    Kernel::new(
        format!("{}*{}", l.name, k.name),
        gamma,
        delta,
        KernelRep::GaussianLinear(GaussianLinear {
            weight,
            bias,
            cov_diag: cov,
        }),
    )
}

/// Exact slotwise composition of two finite-representable kernels by the
/// defining double sum over outcomes.
pub fn finite_slotwise(k: &Kernel, l: &Kernel, i: usize, j: usize) -> Result<Kernel> {
    let bi = k.target.slot(i)?;
    let cj = l.source.slot(j)?;
    if bi.space != cj.space {
        return Err(Error::SpaceMismatch {
            expected: cj.space.to_string(),
            found: bi.space.to_string(),
        });
    }
    if !(k.is_finite_representable() && l.is_finite_representable()) {
        return Err(Error::NotFinite(format!("{} or {}", k.name, l.name)));
    }
    let gamma = Profile(splice(&l.source.0, j, &k.source.0)?);
    let delta = Profile(splice(&k.target.0, i, &l.target.0)?);
    let delta_space = delta.space();
    let n_delta = delta_space.cardinality()?;

    let tk = k.to_finite_table()?;
    let m = k.source.arity();

    let n_gamma = gamma.space().cardinality()?;
    let mut rows = Vec::with_capacity(n_gamma);
    for g in 0..n_gamma {
        let gv = gamma.values_at(g)?;
        // split gamma values back into (a, c_minus_j)
        let a: Vec<Value> = gv[j - 1..j - 1 + m].to_vec();
        let mut c_minus: Vec<Value> = Vec::with_capacity(l.source.arity() - 1);
        c_minus.extend_from_slice(&gv[..j - 1]);
        c_minus.extend_from_slice(&gv[j - 1 + m..]);

        let a_idx = k.source.index_of(&a)?;
        let mut probs = vec![0.0; n_delta];
        for (b_idx, &pk) in tk.rows[a_idx].probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let b = k.target.values_at(b_idx)?;
            let b_i = b[i - 1].clone();
            let mut b_minus: Vec<Value> = Vec::with_capacity(b.len() - 1);
            b_minus.extend_from_slice(&b[..i - 1]);
            b_minus.extend_from_slice(&b[i..]);

            // T_j(c_{-j}, b_i)
            let mut c = Vec::with_capacity(l.source.arity());
            c.extend_from_slice(&c_minus[..j - 1]);
            c.push(b_i);
            c.extend_from_slice(&c_minus[j - 1..]);

            let row_l = l.apply_exact(&c)?;
            for (d_idx, &pl) in row_l.probs.iter().enumerate() {
                if pl == 0.0 {
                    continue;
                }
                let d = l.target.values_at(d_idx)?;
                // U_i(b_{-i}, d)
                let mut out = Vec::with_capacity(delta.arity());
                out.extend_from_slice(&b_minus[..i - 1]);
                out.extend_from_slice(&d);
                out.extend_from_slice(&b_minus[i - 1..]);
                probs[delta.index_of(&out)?] += pk * pl;
            }
        }
        rows.push(FiniteDist {
            space: delta_space.clone(),
            probs,
        });
    }
    Kernel::new(
        format!("{}*{}", l.name, k.name),
        gamma,
        delta,
        KernelRep::FiniteTable(FiniteTable { rows }),
    )
}

/// Max absolute entry difference between the finite tables of two kernels
/// with identical profiles.
pub fn table_max_diff(a: &Kernel, b: &Kernel) -> Result<f64> {
    if !a.source.same_spaces(&b.source) || !a.target.same_spaces(&b.target) {
        return Err(Error::SpaceMismatch {
            expected: format!("{} -> {}", a.source, a.target),
            found: format!("{} -> {}", b.source, b.target),
        });
    }
    let ta = a.to_finite_table()?;
    let tb = b.to_finite_table()?;
    let mut max = 0.0f64;
    for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
        max = max.max(ra.max_abs_diff(rb));
    }
    Ok(max)
}
