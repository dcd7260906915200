//! Finite filtered probability spaces, conditional expectations, martingale
//! differences and square functions.
//!
//! The model is fully discrete: a finite atom set with strictly positive
//! weights summing to one, a chain of refining partitions (the filtration),
//! and functions given by per-atom values in R^m with an l_r norm on the
//! fiber. The last partition must separate atoms, so every function is
//! measurable at the top level and every identity below is a finite sum.
//!
//! Conventions used throughout the crate:
//!
//! * levels are 1-based: `E_n` averages over the blocks of level `n`,
//! * `E_0 = 0`, so the first martingale difference is `dE_1 f = E_1 f`,
//! * the square function is `S(f) = (sum_n |dE_n f|^2)^{1/2}` atomwise, with
//!   `S_q` replacing the exponent 2 by `q >= 1` and the absolute value by the
//!   fiber norm.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kahan::KahanSum;
use crate::scalar::rmax;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("a measure space needs at least one atom")]
    EmptySpace,
    #[error("weight {value} at atom {index} must be strictly positive and finite")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within {tol}")]
    WeightSum { sum: f64, tol: f64 },
    #[error("a filtration needs at least one level")]
    NoLevels,
    #[error("level {level} assigns {got} atoms, the space has {expected}")]
    LevelLength {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("block index {block} at level {level}, atom {atom} is out of range")]
    BlockIndexRange {
        level: usize,
        atom: usize,
        block: usize,
    },
    #[error("level {level} does not refine the previous level (atoms {atom_a}, {atom_b})")]
    NotRefining {
        level: usize,
        atom_a: usize,
        atom_b: usize,
    },
    #[error("the last level must separate every atom")]
    LastLevelNotDiscrete,
    #[error("level {level} is out of range 1..={depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("expected {expected} values, got {got}")]
    ValueLength { expected: usize, got: usize },
    #[error("operation requires scalar values (fiber dimension 1)")]
    NotScalar,
    #[error("exponent {value} lies outside [1, inf)")]
    ExponentRange { value: f64 },
    #[error("fiber norm index {value} lies outside [1, inf]")]
    FiberNormRange { value: f64 },
    #[error("values must be finite")]
    NonFiniteValue,
    #[error("operands live on different filtrations")]
    FiltrationMismatch,
    #[error("custom fiber norms cannot be serialized")]
    CustomNormNotSerializable,
    #[error("fiber dimension must be at least 1")]
    FiberDim,
    #[error("json: {0}")]
    Json(String),
}

/// An L_p exponent in [1, inf].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent<T> {
    Finite(T),
    Infinity,
}

impl<T: Real> Exponent<T> {
    pub fn finite(p: T) -> Result<Self, ProbabilityError> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(ProbabilityError::ExponentRange { value: p.as_f64() });
        }
        Ok(Exponent::Finite(p))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// The finite value, if any.
    pub fn value(&self) -> Option<T> {
        match self {
            Exponent::Finite(p) => Some(*p),
            Exponent::Infinity => None,
        }
    }
}

impl<T: Real> fmt::Display for Exponent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl<T: Real + Serialize> Serialize for Exponent<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => p.serialize(s),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Exponent<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Num(T),
            Word(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Num(p) => Exponent::finite(p).map_err(serde::de::Error::custom),
            Raw::Word(w) if w.eq_ignore_ascii_case("inf") => Ok(Exponent::Infinity),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("bad exponent {w:?}"))),
        }
    }
}

/// Finite measure space: strictly positive weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasureSpace<T> {
    weights: Vec<T>,
}

impl<T: Real> FiniteMeasureSpace<T> {
    pub fn new(weights: Vec<T>) -> Result<Self, ProbabilityError> {
        if weights.is_empty() {
            return Err(ProbabilityError::EmptySpace);
        }
        let mut total = KahanSum::new();
        for (index, &w) in weights.iter().enumerate() {
            if !(w > T::zero()) || !w.is_finite() {
                return Err(ProbabilityError::BadWeight {
                    index,
                    value: w.as_f64(),
                });
            }
            total.add(w);
        }
        let tol = rmax(T::of(1e-12), T::epsilon() * T::of(32.0));
        let sum = total.value();
        if (sum - T::one()).abs() > tol {
            return Err(ProbabilityError::WeightSum {
                sum: sum.as_f64(),
                tol: tol.as_f64(),
            });
        }
        Ok(FiniteMeasureSpace { weights })
    }

    /// Uniform space on `n` atoms.
    pub fn uniform(n: usize) -> Result<Self, ProbabilityError> {
        if n == 0 {
            return Err(ProbabilityError::EmptySpace);
        }
        let w = T::one() / T::of(n as f64);
        Ok(FiniteMeasureSpace {
            weights: vec![w; n],
        })
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> T {
        self.weights[atom]
    }

    /// Weighted L_p norm of a vector of atom values, `p` in [1, inf].
    pub fn lp_norm(&self, values: &[T], p: Exponent<T>) -> Result<T, ProbabilityError> {
        if values.len() != self.weights.len() {
            return Err(ProbabilityError::ValueLength {
                expected: self.weights.len(),
                got: values.len(),
            });
        }
        match p {
            Exponent::Infinity => {
                let mut m = T::zero();
                for &v in values {
                    m = rmax(m, v.abs());
                }
                Ok(m)
            }
            Exponent::Finite(p) => {
                if !(p >= T::one()) || !p.is_finite() {
                    return Err(ProbabilityError::ExponentRange { value: p.as_f64() });
                }
                let mut acc = KahanSum::new();
                if p == T::one() {
                    for (&w, &v) in self.weights.iter().zip(values) {
                        acc.add(w * v.abs());
                    }
                    Ok(acc.value())
                } else if p == T::of(2.0) {
                    for (&w, &v) in self.weights.iter().zip(values) {
                        acc.add(w * v * v);
                    }
                    Ok(acc.value().sqrt())
                } else {
                    for (&w, &v) in self.weights.iter().zip(values) {
                        acc.add(w * v.abs().powf(p));
                    }
                    Ok(acc.value().powf(T::one() / p))
                }
            }
        }
    }

    /// Weighted inner product `sum_i w_i g_i h_i`.
    pub fn inner_product(&self, g: &[T], h: &[T]) -> T {
        let mut acc = KahanSum::new();
        for ((&w, &a), &b) in self.weights.iter().zip(g).zip(h) {
            acc.add(w * a * b);
        }
        acc.value()
    }
}

/// A refining chain of partitions over a [`FiniteMeasureSpace`].
///
/// `levels[k][atom]` is the block label of `atom` at level `k + 1`. Labels
/// must lie in `0..atom_count`; the last level must separate atoms.
#[derive(Clone, Debug)]
pub struct Filtration<T> {
    space: FiniteMeasureSpace<T>,
    levels: Vec<Vec<usize>>,
    /// Per level, dense block weights indexed by block label.
    block_weights: Vec<Vec<T>>,
}

impl<T: Real> Filtration<T> {
    pub fn new(
        space: FiniteMeasureSpace<T>,
        levels: Vec<Vec<usize>>,
    ) -> Result<Self, ProbabilityError> {
        let atoms = space.atom_count();
        if levels.is_empty() {
            return Err(ProbabilityError::NoLevels);
        }
        for (k, lv) in levels.iter().enumerate() {
            if lv.len() != atoms {
                return Err(ProbabilityError::LevelLength {
                    level: k + 1,
                    got: lv.len(),
                    expected: atoms,
                });
            }
            for (atom, &b) in lv.iter().enumerate() {
                if b >= atoms {
                    return Err(ProbabilityError::BlockIndexRange {
                        level: k + 1,
                        atom,
                        block: b,
                    });
                }
            }
        }
        // Each level must refine the previous one: atoms sharing a block now
        // must have shared a block before.
        for k in 1..levels.len() {
            let mut parent: Vec<Option<(usize, usize)>> = vec![None; atoms];
            for atom in 0..atoms {
                let b = levels[k][atom];
                let p = levels[k - 1][atom];
                match parent[b] {
                    None => parent[b] = Some((p, atom)),
                    Some((expect, first_atom)) => {
                        if expect != p {
                            return Err(ProbabilityError::NotRefining {
                                level: k + 1,
                                atom_a: first_atom,
                                atom_b: atom,
                            });
                        }
                    }
                }
            }
        }
        // Last level discrete.
        {
            let last = &levels[levels.len() - 1];
            let mut seen = vec![false; atoms];
            for &b in last {
                if seen[b] {
                    return Err(ProbabilityError::LastLevelNotDiscrete);
                }
                seen[b] = true;
            }
        }
        let mut block_weights = Vec::with_capacity(levels.len());
        for lv in &levels {
            let mut acc = vec![KahanSum::new(); atoms];
            for (atom, &b) in lv.iter().enumerate() {
                acc[b].add(space.weight(atom));
            }
            block_weights.push(acc.into_iter().map(|a| a.value()).collect());
        }
        Ok(Filtration {
            space,
            levels,
            block_weights,
        })
    }

    /// Dyadic filtration: `2^depth` uniform atoms; at level `n` the blocks
    /// are the `2^n` runs of `2^(depth-n)` consecutive atoms.
    pub fn dyadic(depth: usize) -> Result<Self, ProbabilityError> {
        if depth == 0 {
            return Err(ProbabilityError::NoLevels);
        }
        let atoms = 1usize << depth;
        let space = FiniteMeasureSpace::uniform(atoms)?;
        let levels = (1..=depth)
            .map(|n| (0..atoms).map(|a| a >> (depth - n)).collect())
            .collect();
        Filtration::new(space, levels)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn space(&self) -> &FiniteMeasureSpace<T> {
        &self.space
    }

    pub fn atom_count(&self) -> usize {
        self.space.atom_count()
    }

    /// Block labels at level `n` (1-based).
    pub fn level(&self, n: usize) -> Result<&[usize], ProbabilityError> {
        if n == 0 || n > self.levels.len() {
            return Err(ProbabilityError::LevelOutOfRange {
                level: n,
                depth: self.levels.len(),
            });
        }
        Ok(&self.levels[n - 1])
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }
}

/// Norm on the fiber R^m.
#[derive(Clone)]
pub enum FiberNorm<T> {
    /// l_r norm, `r` in [1, inf).
    Lr(T),
    /// sup norm.
    LInfinity,
    /// Arbitrary norm callback. Not serializable.
    Custom(Arc<dyn Fn(&[T]) -> T + Send + Sync>),
}

impl<T: Real> FiberNorm<T> {
    pub fn lr(r: T) -> Result<Self, ProbabilityError> {
        if !(r >= T::one()) || !r.is_finite() {
            return Err(ProbabilityError::FiberNormRange { value: r.as_f64() });
        }
        Ok(FiberNorm::Lr(r))
    }

    pub fn eval(&self, v: &[T]) -> T {
        match self {
            FiberNorm::Lr(r) => {
                if v.len() == 1 {
                    return v[0].abs();
                }
                if *r == T::one() {
                    let mut s = T::zero();
                    for &x in v {
                        s += x.abs();
                    }
                    s
                } else if *r == T::of(2.0) {
                    let mut s = T::zero();
                    for &x in v {
                        s += x * x;
                    }
                    s.sqrt()
                } else {
                    let mut s = T::zero();
                    for &x in v {
                        s += x.abs().powf(*r);
                    }
                    s.powf(T::one() / *r)
                }
            }
            FiberNorm::LInfinity => {
                let mut m = T::zero();
                for &x in v {
                    m = rmax(m, x.abs());
                }
                m
            }
            FiberNorm::Custom(f) => f(v),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for FiberNorm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberNorm::Lr(r) => write!(f, "Lr({r:?})"),
            FiberNorm::LInfinity => write!(f, "LInfinity"),
            FiberNorm::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A function on the atoms of a filtered space, with values in R^m.
///
/// Values are stored atom-major: `values[atom * fiber_dim + j]`.
#[derive(Clone, Debug)]
pub struct MartingaleFunction<T> {
    filtration: Arc<Filtration<T>>,
    fiber_dim: usize,
    fiber_norm: FiberNorm<T>,
    values: Vec<T>,
}

impl<T: Real> MartingaleFunction<T> {
    /// Scalar function (fiber dimension 1).
    pub fn scalar(
        filtration: Arc<Filtration<T>>,
        values: Vec<T>,
    ) -> Result<Self, ProbabilityError> {
        Self::vector(filtration, 1, values, FiberNorm::Lr(T::of(2.0)))
    }

    pub fn vector(
        filtration: Arc<Filtration<T>>,
        fiber_dim: usize,
        values: Vec<T>,
        fiber_norm: FiberNorm<T>,
    ) -> Result<Self, ProbabilityError> {
        if fiber_dim == 0 {
            return Err(ProbabilityError::FiberDim);
        }
        let expected = filtration.atom_count() * fiber_dim;
        if values.len() != expected {
            return Err(ProbabilityError::ValueLength {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProbabilityError::NonFiniteValue);
        }
        if let FiberNorm::Lr(r) = fiber_norm {
            if !(r >= T::one()) || !r.is_finite() {
                return Err(ProbabilityError::FiberNormRange { value: r.as_f64() });
            }
        }
        Ok(MartingaleFunction {
            filtration,
            fiber_dim,
            fiber_norm,
            values,
        })
    }

    pub fn filtration(&self) -> &Arc<Filtration<T>> {
        &self.filtration
    }

    pub fn depth(&self) -> usize {
        self.filtration.depth()
    }

    pub fn atom_count(&self) -> usize {
        self.filtration.atom_count()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn fiber_norm(&self) -> &FiberNorm<T> {
        &self.fiber_norm
    }

    pub fn is_scalar(&self) -> bool {
        self.fiber_dim == 1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, atom: usize) -> &[T] {
        &self.values[atom * self.fiber_dim..(atom + 1) * self.fiber_dim]
    }

    fn same_shape(&self, other: &Self) -> Result<(), ProbabilityError> {
        if !Arc::ptr_eq(&self.filtration, &other.filtration) || self.fiber_dim != other.fiber_dim
        {
            return Err(ProbabilityError::FiltrationMismatch);
        }
        Ok(())
    }

    fn with_values(&self, values: Vec<T>) -> Self {
        MartingaleFunction {
            filtration: Arc::clone(&self.filtration),
            fiber_dim: self.fiber_dim,
            fiber_norm: self.fiber_norm.clone(),
            values,
        }
    }

    /// Raw conditional expectation values at level `n`.
    ///
    /// Block sums run in atom order with compensated accumulation; the block
    /// mean divides by the block weight computed the same way, which keeps
    /// power-of-two uniform spaces bit-exact against the tensor-trace path.
    fn condexp_values(&self, n: usize) -> Result<Vec<T>, ProbabilityError> {
        let labels = self.filtration.level(n)?;
        let atoms = self.filtration.atom_count();
        let m = self.fiber_dim;
        let weights = self.filtration.space.weights();
        let mut acc = vec![KahanSum::new(); atoms * m];
        for atom in 0..atoms {
            let b = labels[atom];
            let w = weights[atom];
            for j in 0..m {
                acc[b * m + j].add(w * self.values[atom * m + j]);
            }
        }
        let bw = &self.filtration.block_weights[n - 1];
        let mut means = vec![T::zero(); atoms * m];
        for b in 0..atoms {
            if bw[b] > T::zero() {
                for j in 0..m {
                    means[b * m + j] = acc[b * m + j].value() / bw[b];
                }
            }
        }
        let mut out = vec![T::zero(); atoms * m];
        for atom in 0..atoms {
            let b = labels[atom];
            out[atom * m..(atom + 1) * m].copy_from_slice(&means[b * m..(b + 1) * m]);
        }
        Ok(out)
    }

    /// Conditional expectation `E_n f`, `n` in `1..=depth`.
    pub fn condexp(&self, n: usize) -> Result<Self, ProbabilityError> {
        Ok(self.with_values(self.condexp_values(n)?))
    }

    /// Martingale difference `dE_n f = E_n f - E_{n-1} f`, with `E_0 = 0`.
    pub fn mdiff(&self, n: usize) -> Result<Self, ProbabilityError> {
        let cur = self.condexp_values(n)?;
        if n == 1 {
            return Ok(self.with_values(cur));
        }
        let prev = self.condexp_values(n - 1)?;
        let vals = cur
            .iter()
            .zip(prev.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(self.with_values(vals))
    }

    /// All martingale differences: element `n - 1` holds the values of
    /// `dE_n f` for `n = 1..=depth`.
    pub fn difference_stack(&self) -> Result<Vec<Vec<T>>, ProbabilityError> {
        let depth = self.depth();
        let mut out = Vec::with_capacity(depth);
        let mut prev: Option<Vec<T>> = None;
        for n in 1..=depth {
            let cur = self.condexp_values(n)?;
            match &prev {
                None => out.push(cur.clone()),
                Some(p) => out.push(
                    cur.iter().zip(p.iter()).map(|(&a, &b)| a - b).collect(),
                ),
            }
            prev = Some(cur);
        }
        Ok(out)
    }

    /// `E_1 f`, the projection onto the fixed-point subspace of the induced
    /// semigroup.
    pub fn fixed_projection(&self) -> Result<Self, ProbabilityError> {
        self.condexp(1)
    }

    /// Martingale square function from level `from_level` on (scalar only):
    /// `(sum_{n >= from_level} |dE_n f|^2)^{1/2}` atomwise.
    pub fn square_function_from(&self, from_level: usize) -> Result<Vec<T>, ProbabilityError> {
        if !self.is_scalar() {
            return Err(ProbabilityError::NotScalar);
        }
        let depth = self.depth();
        if from_level == 0 || from_level > depth + 1 {
            return Err(ProbabilityError::LevelOutOfRange {
                level: from_level,
                depth,
            });
        }
        let diffs = self.difference_stack()?;
        let atoms = self.atom_count();
        let mut out = vec![T::zero(); atoms];
        for d in diffs.iter().skip(from_level - 1) {
            for (o, &x) in out.iter_mut().zip(d.iter()) {
                *o += x * x;
            }
        }
        for o in out.iter_mut() {
            *o = o.sqrt();
        }
        Ok(out)
    }

    /// Full martingale square function `S(f)` (scalar only).
    pub fn square_function(&self) -> Result<Vec<T>, ProbabilityError> {
        self.square_function_from(1)
    }

    /// `q`-square function from level `from_level` on:
    /// `(sum_{n >= from_level} |dE_n f|_X^q)^{1/q}` atomwise, any fiber.
    pub fn square_function_q(&self, q: T, from_level: usize) -> Result<Vec<T>, ProbabilityError> {
        if !(q >= T::one()) || !q.is_finite() {
            return Err(ProbabilityError::ExponentRange { value: q.as_f64() });
        }
        let depth = self.depth();
        if from_level == 0 || from_level > depth + 1 {
            return Err(ProbabilityError::LevelOutOfRange {
                level: from_level,
                depth,
            });
        }
        let diffs = self.difference_stack()?;
        let atoms = self.atom_count();
        let m = self.fiber_dim;
        let mut out = vec![T::zero(); atoms];
        for d in diffs.iter().skip(from_level - 1) {
            for atom in 0..atoms {
                let norm = self.fiber_norm.eval(&d[atom * m..(atom + 1) * m]);
                out[atom] += norm.powf(q);
            }
        }
        for o in out.iter_mut() {
            *o = o.powf(T::one() / q);
        }
        Ok(out)
    }

    /// Fiber norm of the value at each atom.
    pub fn fiber_norms(&self) -> Vec<T> {
        let m = self.fiber_dim;
        (0..self.atom_count())
            .map(|a| self.fiber_norm.eval(&self.values[a * m..(a + 1) * m]))
            .collect()
    }

    /// Weighted L_p norm of the fiber norms.
    pub fn lp_norm(&self, p: Exponent<T>) -> Result<T, ProbabilityError> {
        self.filtration.space.lp_norm(&self.fiber_norms(), p)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ProbabilityError> {
        self.same_shape(other)?;
        let vals = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(self.with_values(vals))
    }

    pub fn add(&self, other: &Self) -> Result<Self, ProbabilityError> {
        self.same_shape(other)?;
        let vals = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(self.with_values(vals))
    }

    pub fn scale(&self, c: T) -> Self {
        self.with_values(self.values.iter().map(|&v| c * v).collect())
    }

    /// Serializes to the interchange schema
    /// `{weights, levels, values, fiber: {dim, r}}`.
    pub fn to_json_string(&self) -> Result<String, ProbabilityError>
    where
        T: Serialize,
    {
        let r = match &self.fiber_norm {
            FiberNorm::Lr(r) => RJson::Num(*r),
            FiberNorm::LInfinity => RJson::Word("inf".to_string()),
            FiberNorm::Custom(_) => return Err(ProbabilityError::CustomNormNotSerializable),
        };
        let m = self.fiber_dim;
        let doc = MartingaleJson {
            weights: self.filtration.space.weights().to_vec(),
            levels: self.filtration.levels.clone(),
            values: (0..self.atom_count())
                .map(|a| self.values[a * m..(a + 1) * m].to_vec())
                .collect(),
            fiber: FiberJson { dim: m, r },
        };
        serde_json::to_string_pretty(&doc).map_err(|e| ProbabilityError::Json(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self, ProbabilityError>
    where
        T: serde::de::DeserializeOwned,
    {
        let doc: MartingaleJson<T> =
            serde_json::from_str(s).map_err(|e| ProbabilityError::Json(e.to_string()))?;
        let space = FiniteMeasureSpace::new(doc.weights)?;
        let filtration = Arc::new(Filtration::new(space, doc.levels)?);
        let m = doc.fiber.dim;
        let mut values = Vec::with_capacity(doc.values.len() * m.max(1));
        for row in &doc.values {
            if row.len() != m {
                return Err(ProbabilityError::ValueLength {
                    expected: m,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let norm = match doc.fiber.r {
            RJson::Num(r) => FiberNorm::lr(r)?,
            RJson::Word(w) if w.eq_ignore_ascii_case("inf") => FiberNorm::LInfinity,
            RJson::Word(w) => return Err(ProbabilityError::Json(format!("bad fiber norm {w:?}"))),
        };
        MartingaleFunction::vector(filtration, m, values, norm)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
struct MartingaleJson<T> {
    weights: Vec<T>,
    levels: Vec<Vec<usize>>,
    values: Vec<Vec<T>>,
    fiber: FiberJson<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
struct FiberJson<T> {
    dim: usize,
    r: RJson<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
enum RJson<T> {
    Num(T),
    Word(String),
}
