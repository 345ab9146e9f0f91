//! Measurable-space descriptors, typed values, and tuple surgery.
//!
//! The spaces handled here are finite label sets, real coordinate spaces, and
//! finite products of those. They cover every worked example in the crate and
//! admit either exact enumeration or sampling. Products of zero factors are
//! the one-point space.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance for exact finite-space arithmetic (sums and products of
/// probabilities in double precision).
pub const EXACT_TOL: f64 = 1e-12;

/// Descriptor of a concrete measurable space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceDesc {
    /// A finite set of `labels.len()` points, canonically indexed `0..n-1`.
    Finite { labels: Vec<String> },
    /// The real coordinate space of the given dimension.
    RealVec { dim: usize },
    /// A finite ordered product; zero factors is the one-point space.
    Product(Vec<SpaceDesc>),
}

impl SpaceDesc {
    pub fn finite(labels: &[&str]) -> Result<SpaceDesc> {
        let labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        if labels.is_empty() {
            return Err(Error::invalid("a finite space needs at least one label"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate label {a:?}")));
            }
        }
        Ok(SpaceDesc::Finite { labels })
    }

    /// A finite space with synthetic labels `s0..s{n-1}`.
    pub fn finite_n(n: usize) -> SpaceDesc {
        assert!(n >= 1, "finite space must have at least one point");
        SpaceDesc::Finite {
            labels: (0..n).map(|i| format!("s{i}")).collect(),
        }
    }

    pub fn real_vec(dim: usize) -> SpaceDesc {
        SpaceDesc::RealVec { dim }
    }

    /// The product of the given factors; the empty product is the one-point space.
    pub fn product(factors: Vec<SpaceDesc>) -> SpaceDesc {
        SpaceDesc::Product(factors)
    }

    /// The one-point space (the empty product).
    pub fn unit() -> SpaceDesc {
        SpaceDesc::Product(vec![])
    }

    /// True if the space has finitely many points (enumeration is possible).
    pub fn is_finite(&self) -> bool {
        match self {
            SpaceDesc::Finite { .. } => true,
            SpaceDesc::RealVec { dim } => *dim == 0,
            SpaceDesc::Product(factors) => factors.iter().all(|f| f.is_finite()),
        }
    }

    /// Number of points of a finite space.
    pub fn cardinality(&self) -> Result<usize> {
        match self {
            SpaceDesc::Finite { labels } => Ok(labels.len()),
            SpaceDesc::RealVec { dim } if *dim == 0 => Ok(1),
            SpaceDesc::RealVec { .. } => Err(Error::NotFinite(self.to_string())),
            SpaceDesc::Product(factors) => {
                let mut n: usize = 1;
                for f in factors {
                    n = n
                        .checked_mul(f.cardinality()?)
                        .ok_or(Error::EnumerationTooLarge {
                            size: u128::MAX,
                            limit: usize::MAX as u128,
                        })?;
                }
                Ok(n)
            }
        }
    }

    /// Total real dimension: the sum of `RealVec` dims over the tree.
    /// Finite components carry no real coordinates.
    pub fn real_dim(&self) -> usize {
        match self {
            SpaceDesc::Finite { .. } => 0,
            SpaceDesc::RealVec { dim } => *dim,
            SpaceDesc::Product(factors) => factors.iter().map(|f| f.real_dim()).sum(),
        }
    }

    /// The point at enumeration index `i`, in lexicographic order of component
    /// indices (first factor most significant).
    pub fn point_at(&self, i: usize) -> Result<Value> {
        match self {
            SpaceDesc::Finite { labels } => {
                if i < labels.len() {
                    Ok(Value::FiniteIdx(i))
                } else {
                    Err(Error::invalid(format!("point index {i} out of range")))
                }
            }
            SpaceDesc::RealVec { dim } if *dim == 0 && i == 0 => Ok(Value::RealVecVal(vec![])),
            SpaceDesc::RealVec { .. } => Err(Error::NotFinite(self.to_string())),
            SpaceDesc::Product(factors) => {
                let mut rem = i;
                let mut radices = Vec::with_capacity(factors.len());
                for f in factors {
                    radices.push(f.cardinality()?);
                }
                let total: usize = radices.iter().product();
                if i >= total {
                    return Err(Error::invalid(format!("point index {i} out of range")));
                }
                let mut items = vec![Value::FiniteIdx(0); factors.len()];
                for (pos, f) in factors.iter().enumerate().rev() {
                    let r = radices[pos];
                    items[pos] = f.point_at(rem % r)?;
                    rem /= r;
                }
                Ok(Value::Tuple(items))
            }
        }
    }

    /// The enumeration index of a point (inverse of [`SpaceDesc::point_at`]).
    pub fn index_of(&self, v: &Value) -> Result<usize> {
        match (self, v) {
            (SpaceDesc::Finite { labels }, Value::FiniteIdx(i)) => {
                if *i < labels.len() {
                    Ok(*i)
                } else {
                    Err(Error::ValueNotInSpace(format!("{v} in {self}")))
                }
            }
            (SpaceDesc::RealVec { dim }, Value::RealVecVal(c)) if *dim == 0 && c.is_empty() => {
                Ok(0)
            }
            (SpaceDesc::Product(factors), Value::Tuple(items)) => {
                if factors.len() != items.len() {
                    return Err(Error::ValueNotInSpace(format!("{v} in {self}")));
                }
                let mut idx = 0usize;
                for (f, item) in factors.iter().zip(items) {
                    idx = idx * f.cardinality()? + f.index_of(item)?;
                }
                Ok(idx)
            }
            _ => Err(Error::ValueNotInSpace(format!("{v} in {self}"))),
        }
    }

    /// Enumerate every point of a finite space, in index order.
    pub fn enumerate(&self) -> Result<Vec<Value>> {
        let n = self.cardinality()?;
        (0..n).map(|i| self.point_at(i)).collect()
    }

    /// A small set of concrete points for spot checks: every point of a
    /// finite space, three probe vectors of a real space, and a capped
    /// product of component probes.
    pub fn probe_points(&self) -> Vec<Value> {
        match self {
            SpaceDesc::Finite { labels } => (0..labels.len()).map(Value::FiniteIdx).collect(),
            SpaceDesc::RealVec { dim } => {
                let ramp: Vec<f64> = (0..*dim).map(|i| 0.5 * (i as f64 + 1.0) - 1.0).collect();
                let alt: Vec<f64> = (0..*dim)
                    .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                    .collect();
                vec![
                    Value::RealVecVal(vec![0.0; *dim]),
                    Value::RealVecVal(alt),
                    Value::RealVecVal(ramp),
                ]
            }
            SpaceDesc::Product(factors) => {
                let mut points = vec![Vec::new()];
                for f in factors {
                    let comps = f.probe_points();
                    let mut next = Vec::new();
                    for p in &points {
                        for c in &comps {
                            let mut q = p.clone();
                            q.push(c.clone());
                            next.push(q);
                            if next.len() >= 9 {
                                break;
                            }
                        }
                        if next.len() >= 9 {
                            break;
                        }
                    }
                    points = next;
                }
                points.into_iter().map(Value::Tuple).collect()
            }
        }
    }

    /// Human-readable name of the point at enumeration index `i`.
    pub fn label_of(&self, i: usize) -> Result<String> {
        match self {
            SpaceDesc::Finite { labels } => labels
                .get(i)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("point index {i} out of range"))),
            _ => Ok(format_value(&self.point_at(i)?, self)),
        }
    }
}

impl fmt::Display for SpaceDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceDesc::Finite { labels } => write!(f, "Finite({})", labels.len()),
            SpaceDesc::RealVec { dim } => write!(f, "RealVec({dim})"),
            SpaceDesc::Product(factors) => {
                write!(f, "Product[")?;
                for (i, x) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Construct the product space of the given factors.
///
/// The empty list returns the one-point space.
pub fn product_space(factors: Vec<SpaceDesc>) -> SpaceDesc {
    SpaceDesc::product(factors)
}

/// A typed point of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    FiniteIdx(usize),
    RealVecVal(Vec<f64>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn real(x: f64) -> Value {
        Value::RealVecVal(vec![x])
    }

    pub fn reals(xs: &[f64]) -> Value {
        Value::RealVecVal(xs.to_vec())
    }

    /// The single coordinate of a 1-dimensional real value.
    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Value::RealVecVal(c) if c.len() == 1 => Ok(c[0]),
            _ => Err(Error::invalid(format!("{self} is not a scalar"))),
        }
    }

    pub fn as_finite_idx(&self) -> Result<usize> {
        match self {
            Value::FiniteIdx(i) => Ok(*i),
            _ => Err(Error::invalid(format!("{self} is not a finite point"))),
        }
    }

    pub fn as_coords(&self) -> Result<&[f64]> {
        match self {
            Value::RealVecVal(c) => Ok(c),
            _ => Err(Error::invalid(format!("{self} has no coordinates"))),
        }
    }

    /// Real coordinates of the value, in component order; finite components
    /// contribute none.
    pub fn flat_coords(&self, out: &mut Vec<f64>) {
        match self {
            Value::FiniteIdx(_) => {}
            Value::RealVecVal(c) => out.extend_from_slice(c),
            Value::Tuple(items) => {
                for item in items {
                    item.flat_coords(out);
                }
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::FiniteIdx(i) => write!(f, "#{i}"),
            Value::RealVecVal(c) => {
                write!(f, "[")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Value::Tuple(items) => {
                write!(f, "(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Render a value using a space's labels where available.
pub fn format_value(v: &Value, space: &SpaceDesc) -> String {
    match (v, space) {
        (Value::FiniteIdx(i), SpaceDesc::Finite { labels }) if *i < labels.len() => {
            labels[*i].clone()
        }
        (Value::Tuple(items), SpaceDesc::Product(factors)) if items.len() == factors.len() => {
            let parts: Vec<String> = items
                .iter()
                .zip(factors)
                .map(|(x, s)| format_value(x, s))
                .collect();
            format!("({})", parts.join(", "))
        }
        _ => v.to_string(),
    }
}

/// True iff `v` structurally inhabits `s`.
pub fn value_in_space(v: &Value, s: &SpaceDesc) -> bool {
    match (v, s) {
        (Value::FiniteIdx(i), SpaceDesc::Finite { labels }) => *i < labels.len(),
        (Value::RealVecVal(c), SpaceDesc::RealVec { dim }) => c.len() == *dim,
        (Value::Tuple(items), SpaceDesc::Product(factors)) => {
            items.len() == factors.len()
                && items.iter().zip(factors).all(|(x, f)| value_in_space(x, f))
        }
        _ => false,
    }
}

/// Insert `v` at 1-based position `j` of a tuple value.
///
/// This is the insertion map written `T_j` in slotwise-composition formulas;
/// combined with concatenation it yields the profile splices `V_j` and `U_i`.
pub fn insert_at(ctx: &Value, j: usize, v: Value) -> Result<Value> {
    let items = match ctx {
        Value::Tuple(items) => items,
        _ => return Err(Error::invalid(format!("{ctx} is not a tuple"))),
    };
    if j < 1 || j > items.len() + 1 {
        return Err(Error::SlotOutOfRange {
            index: j,
            len: items.len() + 1,
        });
    }
    let mut out = Vec::with_capacity(items.len() + 1);
    out.extend_from_slice(&items[..j - 1]);
    out.push(v);
    out.extend_from_slice(&items[j - 1..]);
    Ok(Value::Tuple(out))
}

/// Project component `i` (1-based) out of a tuple value, returning the
/// component and the remaining tuple: `(π_i(t), π_{-i}(t))`.
pub fn project_at(t: &Value, i: usize) -> Result<(Value, Value)> {
    let items = match t {
        Value::Tuple(items) => items,
        _ => return Err(Error::invalid(format!("{t} is not a tuple"))),
    };
    if i < 1 || i > items.len() {
        return Err(Error::SlotOutOfRange {
            index: i,
            len: items.len(),
        });
    }
    let item = items[i - 1].clone();
    let mut rest = Vec::with_capacity(items.len() - 1);
    rest.extend_from_slice(&items[..i - 1]);
    rest.extend_from_slice(&items[i..]);
    Ok((item, Value::Tuple(rest)))
}

/// Splice `inner` into `outer` at 1-based position `j`, replacing the
/// element at `j`. This is the slice-level form of the profile splice.
pub fn splice<T: Clone>(outer: &[T], j: usize, inner: &[T]) -> Result<Vec<T>> {
    if j < 1 || j > outer.len() {
        return Err(Error::SlotOutOfRange {
            index: j,
            len: outer.len(),
        });
    }
    let mut out = Vec::with_capacity(outer.len() - 1 + inner.len());
    out.extend_from_slice(&outer[..j - 1]);
    out.extend_from_slice(inner);
    out.extend_from_slice(&outer[j..]);
    Ok(out)
}

/// A named object: an identity, its underlying space, and an optional color.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub name: String,
    pub space: SpaceDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

impl Object {
    pub fn new(name: impl Into<String>, space: SpaceDesc) -> Object {
        Object {
            name: name.into(),
            space,
            color: None,
        }
    }

    pub fn with_color(mut self, color: impl Into<String>) -> Object {
        self.color = Some(color.into());
        self
    }

    pub fn real(name: impl Into<String>, dim: usize) -> Object {
        Object::new(name, SpaceDesc::real_vec(dim))
    }

    pub fn finite(name: impl Into<String>, labels: &[&str]) -> Object {
        Object::new(name, SpaceDesc::finite(labels).expect("valid labels"))
    }
}

/// A finite ordered tuple of objects. Profile equality is ordered-tuple
/// equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile(pub Vec<Object>);

impl Profile {
    pub fn empty() -> Profile {
        Profile(vec![])
    }

    pub fn of(objects: Vec<Object>) -> Profile {
        Profile(objects)
    }

    pub fn single(obj: Object) -> Profile {
        Profile(vec![obj])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// The object at 1-based slot `i`.
    pub fn slot(&self, i: usize) -> Result<&Object> {
        if i < 1 || i > self.0.len() {
            return Err(Error::SlotOutOfRange {
                index: i,
                len: self.0.len(),
            });
        }
        Ok(&self.0[i - 1])
    }

    /// The underlying product space of the profile.
    pub fn space(&self) -> SpaceDesc {
        SpaceDesc::product(self.0.iter().map(|o| o.space.clone()).collect())
    }

    /// Slot spaces in order.
    pub fn slot_spaces(&self) -> Vec<SpaceDesc> {
        self.0.iter().map(|o| o.space.clone()).collect()
    }

    /// True iff the slot spaces of `self` and `other` are structurally equal.
    pub fn same_spaces(&self, other: &Profile) -> bool {
        self.arity() == other.arity()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.space == b.space)
    }

    /// Check a slot-value slice against this profile.
    pub fn check_values(&self, values: &[Value]) -> Result<()> {
        if values.len() != self.arity() {
            return Err(Error::DimMismatch {
                expected: self.arity(),
                found: values.len(),
            });
        }
        for (v, o) in values.iter().zip(&self.0) {
            if !value_in_space(v, &o.space) {
                return Err(Error::ValueNotInSpace(format!(
                    "{v} at slot {} ({})",
                    o.name, o.space
                )));
            }
        }
        Ok(())
    }

    /// Enumeration index of a slot-value slice in the profile's product space.
    pub fn index_of(&self, values: &[Value]) -> Result<usize> {
        self.space().index_of(&Value::Tuple(values.to_vec()))
    }

    /// Slot values of the point at enumeration index `i`.
    pub fn values_at(&self, i: usize) -> Result<Vec<Value>> {
        match self.space().point_at(i)? {
            Value::Tuple(items) => Ok(items),
            _ => unreachable!("profile space is always a product"),
        }
    }

    /// Total real dimension across slots (finite slots contribute none).
    pub fn real_dim(&self) -> usize {
        self.0.iter().map(|o| o.space.real_dim()).sum()
    }

    /// Flatten a slot-value slice to its real coordinates in slot order.
    pub fn flatten(&self, values: &[Value]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.real_dim());
        for v in values {
            v.flat_coords(&mut out);
        }
        out
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", o.name, o.space)?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f2() -> SpaceDesc {
        SpaceDesc::finite_n(2)
    }

    #[test]
    fn empty_product_is_one_point() {
        let s = product_space(vec![]);
        assert_eq!(s.cardinality().unwrap(), 1);
        assert_eq!(s.point_at(0).unwrap(), Value::Tuple(vec![]));
    }

    #[test]
    fn product_structure_and_count() {
        let s = product_space(vec![f2(), SpaceDesc::real_vec(1)]);
        assert_eq!(s, SpaceDesc::Product(vec![f2(), SpaceDesc::real_vec(1)]));
        let t = product_space(vec![SpaceDesc::finite_n(3)]);
        assert_eq!(t.enumerate().unwrap().len(), 3);
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let s = product_space(vec![f2(), SpaceDesc::finite_n(3)]);
        let pts = s.enumerate().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(
            pts[0],
            Value::Tuple(vec![Value::FiniteIdx(0), Value::FiniteIdx(0)])
        );
        assert_eq!(
            pts[1],
            Value::Tuple(vec![Value::FiniteIdx(0), Value::FiniteIdx(1)])
        );
        assert_eq!(
            pts[3],
            Value::Tuple(vec![Value::FiniteIdx(1), Value::FiniteIdx(0)])
        );
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(s.index_of(p).unwrap(), i);
        }
    }

    #[test]
    fn value_in_space_checks() {
        assert!(value_in_space(&Value::FiniteIdx(1), &f2()));
        assert!(!value_in_space(&Value::FiniteIdx(2), &f2()));
        let s = product_space(vec![f2(), SpaceDesc::real_vec(1)]);
        assert!(value_in_space(
            &Value::Tuple(vec![Value::FiniteIdx(0), Value::real(0.5)]),
            &s
        ));
        assert!(!value_in_space(
            &Value::Tuple(vec![Value::FiniteIdx(0)]),
            &s
        ));
    }

    #[test]
    fn insert_at_definition() {
        let ctx = Value::Tuple(vec![Value::FiniteIdx(1), Value::FiniteIdx(3)]);
        let out = insert_at(&ctx, 2, Value::FiniteIdx(9)).unwrap();
        assert_eq!(
            out,
            Value::Tuple(vec![
                Value::FiniteIdx(1),
                Value::FiniteIdx(9),
                Value::FiniteIdx(3)
            ])
        );
        let out = insert_at(&Value::Tuple(vec![]), 1, Value::real(2.0)).unwrap();
        assert_eq!(out, Value::Tuple(vec![Value::real(2.0)]));
        assert!(insert_at(&ctx, 4, Value::FiniteIdx(0)).is_err());
    }

    #[test]
    fn project_at_definition() {
        let t = Value::Tuple(vec![
            Value::FiniteIdx(0),
            Value::FiniteIdx(1),
            Value::FiniteIdx(2),
        ]);
        let (item, rest) = project_at(&t, 2).unwrap();
        assert_eq!(item, Value::FiniteIdx(1));
        assert_eq!(
            rest,
            Value::Tuple(vec![Value::FiniteIdx(0), Value::FiniteIdx(2)])
        );
        let (item, rest) = project_at(&Value::Tuple(vec![Value::real(1.0)]), 1).unwrap();
        assert_eq!(item, Value::real(1.0));
        assert_eq!(rest, Value::Tuple(vec![]));
        assert!(project_at(&t, 0).is_err());
        assert!(project_at(&t, 4).is_err());
    }

    // insert_at against direct index bookkeeping for all positions, arity <= 4
    #[test]
    fn insert_matches_index_bookkeeping() {
        for arity in 0..=4usize {
            let items: Vec<Value> = (0..arity).map(Value::FiniteIdx).collect();
            let ctx = Value::Tuple(items.clone());
            for j in 1..=arity + 1 {
                let v = Value::FiniteIdx(99);
                let out = insert_at(&ctx, j, v.clone()).unwrap();
                let mut expect = items.clone();
                expect.insert(j - 1, v);
                assert_eq!(out, Value::Tuple(expect));
            }
        }
    }

    // round trip exhaustively over arities <= 5
    #[test]
    fn project_insert_round_trip() {
        for arity in 1..=5usize {
            let t = Value::Tuple((0..arity).map(Value::FiniteIdx).collect());
            for i in 1..=arity {
                let (item, rest) = project_at(&t, i).unwrap();
                assert_eq!(insert_at(&rest, i, item).unwrap(), t);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_random(items in proptest::collection::vec(0usize..10, 1..6)) {
            let t = Value::Tuple(items.iter().map(|&i| Value::FiniteIdx(i)).collect());
            let arity = items.len();
            for i in 1..=arity {
                let (item, rest) = project_at(&t, i).unwrap();
                prop_assert_eq!(insert_at(&rest, i, item).unwrap(), t.clone());
            }
        }

        #[test]
        fn enumeration_indices_bijective(sizes in proptest::collection::vec(1usize..5, 0..4)) {
            let s = product_space(sizes.iter().map(|&n| SpaceDesc::finite_n(n)).collect());
            let n = s.cardinality().unwrap();
            prop_assert_eq!(n, sizes.iter().product::<usize>().max(1));
            for i in 0..n {
                let p = s.point_at(i).unwrap();
                prop_assert!(value_in_space(&p, &s));
                prop_assert_eq!(s.index_of(&p).unwrap(), i);
            }
        }
    }

    #[test]
    fn surgery_preserves_membership() {
        let prof = Profile::of(vec![
            Object::finite("a", &["x", "y"]),
            Object::real("b", 2),
            Object::finite("c", &["u", "v", "w"]),
        ]);
        let vals = vec![
            Value::FiniteIdx(1),
            Value::reals(&[0.0, 1.0]),
            Value::FiniteIdx(2),
        ];
        prof.check_values(&vals).unwrap();
        let t = Value::Tuple(vals);
        let (item, rest) = project_at(&t, 2).unwrap();
        // profile surgery in lockstep
        let smaller = Profile(vec![prof.0[0].clone(), prof.0[2].clone()]);
        if let Value::Tuple(items) = &rest {
            smaller.check_values(items).unwrap();
        }
        let back = insert_at(&rest, 2, item).unwrap();
        if let Value::Tuple(items) = &back {
            prof.check_values(items).unwrap();
        }
    }
}
