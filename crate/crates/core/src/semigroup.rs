//! Subordination sequences and the diffusion semigroup they induce on a
//! filtered space.
//!
//! A subordination sequence is a strictly increasing list `b_0 = 0 < b_1 <
//! b_2 < ...`. It defines the operator family
//!
//! ```text
//! T^t f = sum_{n >= 1} exp(-t b_{n-1}) dE_n f,
//! ```
//!
//! a symmetric diffusion semigroup: each `T^t` is a unital positive
//! selfadjoint contraction on every L_p, `T^s T^t = T^{s+t}`, and
//! `T^t f -> f` as `t -> 0+`. The sequence is stored in the log domain:
//! the equivalent product form uses `a_n = 1 - exp(-b_n)`, which rounds to 1
//! in binary64 for every interesting `b_n`, so `a` is never materialized.
//!
//! [`SubordinationSequence::verify_axioms`] measures worst-case violations of
//! the semigroup axioms over sample functions and a time grid. Strong
//! continuity at finite depth is checked against the exact envelope
//! `|T^t f - f|_2 <= (1 - exp(-t b_{d-1})) |f|_2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kahan::KahanSum;
use crate::probability::{Exponent, MartingaleFunction, ProbabilityError};
use crate::scalar::{rmax, rmin};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemigroupError {
    #[error("depth {depth} is out of range 1..={max}")]
    DepthRange { depth: usize, max: usize },
    #[error("a subordination sequence needs at least two entries")]
    TooShort,
    #[error("b[0] must be exactly zero, got {0}")]
    FirstEntryNotZero(f64),
    #[error("sequence is not strictly increasing at index {index}")]
    NotIncreasing { index: usize },
    #[error("sequence entries must be finite")]
    NonFinite,
    #[error("sequence supports filtration depth {seq}, function has depth {filtration}")]
    DepthMismatch { seq: usize, filtration: usize },
    #[error("time must be positive and finite, got {0}")]
    BadTime(f64),
    #[error("level {level} is out of range 1..={depth}")]
    LevelRange { level: usize, depth: usize },
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error("json: {0}")]
    Json(String),
}

/// Where a sequence came from; carried through serialization.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance<T> {
    /// `b_n = 16^{n+1}` for `n >= 1`.
    TheoremA { depth: usize },
    /// Incomplete-gamma construction with parameters `q` and `M`.
    Gamma { q: T, m_scale: T },
    Custom,
}

impl<T: Real> Provenance<T> {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::TheoremA { .. } => "theorem_a",
            Provenance::Gamma { .. } => "gamma",
            Provenance::Custom => "custom",
        }
    }
}

/// Strictly increasing sequence `b_0 = 0 < b_1 < ...` driving the semigroup.
///
/// `depth()` is the number of positive entries; a sequence of depth `d`
/// serves filtrations of depth up to `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinationSequence<T> {
    b: Vec<T>,
    provenance: Provenance<T>,
}

/// Largest depth for which `16^{depth+1}` is exactly representable and the
/// kernel ratios stay in range in binary64.
pub const THEOREM_A_MAX_DEPTH: usize = 15;

impl<T: Real> SubordinationSequence<T> {
    /// The sequence `b = [0, 16^2, 16^3, ..., 16^{depth+1}]`.
    ///
    /// Powers of 16 are powers of two, hence exact in any binary float.
    pub fn theorem_a(depth: usize) -> Result<Self, SemigroupError> {
        if depth == 0 || depth > THEOREM_A_MAX_DEPTH {
            return Err(SemigroupError::DepthRange {
                depth,
                max: THEOREM_A_MAX_DEPTH,
            });
        }
        let sixteen = T::of(16.0);
        let mut b = Vec::with_capacity(depth + 1);
        b.push(T::zero());
        for n in 1..=depth {
            b.push(sixteen.powi(n as i32 + 1));
        }
        Ok(SubordinationSequence {
            b,
            provenance: Provenance::TheoremA { depth },
        })
    }

    pub fn custom(b: Vec<T>) -> Result<Self, SemigroupError> {
        Self::with_provenance(b, Provenance::Custom)
    }

    pub fn with_provenance(b: Vec<T>, provenance: Provenance<T>) -> Result<Self, SemigroupError> {
        if b.len() < 2 {
            return Err(SemigroupError::TooShort);
        }
        if b[0] != T::zero() {
            return Err(SemigroupError::FirstEntryNotZero(b[0].as_f64()));
        }
        for i in 1..b.len() {
            if !b[i].is_finite() {
                return Err(SemigroupError::NonFinite);
            }
            if !(b[i] > b[i - 1]) {
                return Err(SemigroupError::NotIncreasing { index: i });
            }
        }
        Ok(SubordinationSequence { b, provenance })
    }

    /// Number of positive entries.
    pub fn depth(&self) -> usize {
        self.b.len() - 1
    }

    pub fn entries(&self) -> &[T] {
        &self.b
    }

    pub fn entry(&self, n: usize) -> T {
        self.b[n]
    }

    pub fn provenance(&self) -> &Provenance<T> {
        &self.provenance
    }

    fn check_time(t: T) -> Result<(), SemigroupError> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(SemigroupError::BadTime(t.as_f64()));
        }
        Ok(())
    }

    /// Coefficient of `dE_n` in `T^t`: `exp(-t b_{n-1})`, `1 <= n <= depth`.
    pub fn coefficient(&self, n: usize, t: T) -> Result<T, SemigroupError> {
        Self::check_time(t)?;
        if n == 0 || n > self.depth() {
            return Err(SemigroupError::LevelRange {
                level: n,
                depth: self.depth(),
            });
        }
        Ok((-t * self.b[n - 1]).exp())
    }

    /// Coefficient of `E_n` in the telescoped form of `T^t`:
    /// `exp(-t b_{n-1}) - exp(-t b_n) >= 0`.
    ///
    /// Evaluated as `exp(-t b_{n-1}) * (-expm1(-t (b_n - b_{n-1})))` so the
    /// difference never cancels.
    pub fn weight(&self, n: usize, t: T) -> Result<T, SemigroupError> {
        Self::check_time(t)?;
        if n == 0 || n > self.depth() {
            return Err(SemigroupError::LevelRange {
                level: n,
                depth: self.depth(),
            });
        }
        let head = (-t * self.b[n - 1]).exp();
        let gap = self.b[n] - self.b[n - 1];
        Ok(head * (-((-t * gap).exp_m1())))
    }

    /// Geometric default grid `t = 4^{-j} / b_1`, `j = -5..=40`, ascending.
    ///
    /// It spans every scale `1/b_n` of the depth-15 power-16 family.
    pub fn default_t_grid(&self) -> Vec<T> {
        let b1 = self.b[1];
        let four = T::of(4.0);
        (-40..=5).map(|j| four.powi(j) / b1).collect()
    }

    /// `T^t f = sum_n exp(-t b_{n-1}) dE_n f`.
    pub fn apply(
        &self,
        f: &MartingaleFunction<T>,
        t: T,
    ) -> Result<MartingaleFunction<T>, SemigroupError> {
        Self::check_time(t)?;
        let fd = f.depth();
        if self.depth() < fd {
            return Err(SemigroupError::DepthMismatch {
                seq: self.depth(),
                filtration: fd,
            });
        }
        let diffs = f.difference_stack()?;
        Ok(self.combine(f, &diffs, t))
    }

    /// The contraction `T = T^1`, whose powers generate the semigroup family.
    pub fn operator_t(
        &self,
        f: &MartingaleFunction<T>,
    ) -> Result<MartingaleFunction<T>, SemigroupError> {
        self.apply(f, T::one())
    }

    /// Linear combination `sum_n exp(-t b_{n-1}) diffs[n-1]` reusing a
    /// precomputed difference stack. The `n = 1` term enters with exact
    /// coefficient one, so level-1 measurable functions are fixed bitwise.
    fn combine(
        &self,
        like: &MartingaleFunction<T>,
        diffs: &[Vec<T>],
        t: T,
    ) -> MartingaleFunction<T> {
        let len = like.values().len();
        let mut out = diffs[0].clone();
        debug_assert_eq!(out.len(), len);
        for (n, d) in diffs.iter().enumerate().skip(1) {
            let c = (-t * self.b[n]).exp();
            for (o, &x) in out.iter_mut().zip(d.iter()) {
                *o += c * x;
            }
        }
        MartingaleFunction::vector(
            Arc::clone(like.filtration()),
            like.fiber_dim(),
            out,
            like.fiber_norm().clone(),
        )
        .expect("shape preserved")
    }

    /// Worst-case violations of the semigroup axioms over `samples` and
    /// `t_grid`: L_p contraction (p = 1, 2, inf), positivity, the semigroup
    /// law on all grid pairs, selfadjointness, unitality, and the strong
    /// continuity envelope. `continuity_final` reports the relative distance
    /// `|T^t f - f|_2 / |f|_2` at the smallest grid time; it converges to 0
    /// as the grid extends toward `t = 0` but is not itself a violation.
    pub fn verify_axioms(
        &self,
        samples: &[MartingaleFunction<T>],
        t_grid: &[T],
    ) -> Result<AxiomReport<T>, SemigroupError> {
        if samples.is_empty() || t_grid.is_empty() {
            return Err(SemigroupError::TooShort);
        }
        for t in t_grid {
            Self::check_time(*t)?;
        }
        let mut report = AxiomReport::zeroed(self.depth(), t_grid);

        let p_one = Exponent::finite(T::one()).expect("valid");
        let p_two = Exponent::finite(T::of(2.0)).expect("valid");
        let tiny = T::of(1e-300);
        let t_min = t_grid
            .iter()
            .copied()
            .fold(T::infinity(), rmin);

        for (idx, f) in samples.iter().enumerate() {
            let fd = f.depth();
            if self.depth() < fd {
                return Err(SemigroupError::DepthMismatch {
                    seq: self.depth(),
                    filtration: fd,
                });
            }
            let diffs = f.difference_stack()?;
            let abs_f = MartingaleFunction::vector(
                Arc::clone(f.filtration()),
                f.fiber_dim(),
                f.values().iter().map(|v| v.abs()).collect(),
                f.fiber_norm().clone(),
            )?;
            let abs_diffs = abs_f.difference_stack()?;
            let one = MartingaleFunction::vector(
                Arc::clone(f.filtration()),
                f.fiber_dim(),
                vec![T::one(); f.values().len()],
                f.fiber_norm().clone(),
            )?;
            let one_diffs = one.difference_stack()?;
            // partner for the selfadjointness pairing
            let g = &samples[(idx + 1) % samples.len()];
            let g_diffs = if f.atom_count() == g.atom_count()
                && f.fiber_dim() == g.fiber_dim()
                && std::sync::Arc::ptr_eq(f.filtration(), g.filtration())
            {
                Some(g.difference_stack()?)
            } else {
                None
            };

            let norms = [
                f.lp_norm(p_one)?,
                f.lp_norm(p_two)?,
                f.lp_norm(Exponent::Infinity)?,
            ];
            let norm_abs = abs_f.lp_norm(Exponent::Infinity)?;
            let scale2 = rmax(norms[1], tiny);

            for &t in t_grid {
                let tf = self.combine(f, &diffs, t);
                // (a)/(d) contraction in L_1, L_2, L_inf
                for (k, &p) in [p_one, p_two, Exponent::Infinity].iter().enumerate() {
                    let v = (tf.lp_norm(p)? - norms[k]) / rmax(norms[k], tiny);
                    report.contraction = rmax(report.contraction, v);
                }
                // (d) positivity on |f|
                let t_abs = self.combine(&abs_f, &abs_diffs, t);
                let mut worst = T::zero();
                for &v in t_abs.values() {
                    worst = rmax(worst, -v);
                }
                report.positivity =
                    rmax(report.positivity, worst / rmax(norm_abs, tiny));
                // (e) selfadjointness against the partner sample
                if let Some(gd) = &g_diffs {
                    let tg = self.combine(g, gd, t);
                    let space = f.filtration().space();
                    let lhs = space.inner_product(tf.values(), g.values());
                    let rhs = space.inner_product(f.values(), tg.values());
                    let v = (lhs - rhs).abs() / (T::one() + lhs.abs());
                    report.selfadjoint = rmax(report.selfadjoint, v);
                }
                // (f) unitality; exact because dE_n(1) vanishes bitwise
                let t_one = self.combine(&one, &one_diffs, t);
                let mut worst_one = T::zero();
                for &v in t_one.values() {
                    worst_one = rmax(worst_one, (v - T::one()).abs());
                }
                report.unital = rmax(report.unital, worst_one);
                // (c) strong continuity envelope
                let df = tf.sub(f)?;
                let dist = df.lp_norm(p_two)?;
                let envelope = -(-t * self.b[fd - 1]).exp_m1();
                report.continuity_envelope = rmax(
                    report.continuity_envelope,
                    (dist - envelope * norms[1]) / scale2,
                );
                if t == t_min {
                    report.continuity_final =
                        rmax(report.continuity_final, dist / scale2);
                }
            }
            // (b) semigroup law over all grid pairs; the middle stack is
            // recomputed from T^t f so the check exercises the tower
            // property instead of the algebraic shortcut.
            for &t in t_grid {
                let tf = self.combine(f, &diffs, t);
                let tf_diffs = tf.difference_stack()?;
                for &s in t_grid {
                    let stf = self.combine(&tf, &tf_diffs, s);
                    let direct = self.combine(f, &diffs, s + t);
                    let v = stf.sub(&direct)?.lp_norm(p_two)? / scale2;
                    report.law = rmax(report.law, v);
                }
            }
        }
        report.worst = report
            .contraction
            .max(report.positivity)
            .max(report.law)
            .max(report.selfadjoint)
            .max(report.unital)
            .max(report.continuity_envelope);
        Ok(report)
    }

    /// Serializes as `{b, provenance, params}`.
    pub fn to_json_string(&self) -> Result<String, SemigroupError>
    where
        T: Serialize,
    {
        let params = match &self.provenance {
            Provenance::TheoremA { depth } => serde_json::json!({ "depth": depth }),
            Provenance::Gamma { q, m_scale } => {
                let q = serde_json::to_value(q).map_err(|e| SemigroupError::Json(e.to_string()))?;
                let m = serde_json::to_value(m_scale)
                    .map_err(|e| SemigroupError::Json(e.to_string()))?;
                serde_json::json!({ "q": q, "M": m })
            }
            Provenance::Custom => serde_json::json!({}),
        };
        let doc = SequenceJson {
            b: self.b.clone(),
            provenance: self.provenance.tag().to_string(),
            params,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| SemigroupError::Json(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self, SemigroupError>
    where
        T: serde::de::DeserializeOwned,
    {
        let doc: SequenceJson<T> =
            serde_json::from_str(s).map_err(|e| SemigroupError::Json(e.to_string()))?;
        let provenance = match doc.provenance.as_str() {
            "theorem_a" => {
                #[derive(Deserialize)]
                struct P {
                    depth: usize,
                }
                let p: P = serde_json::from_value(doc.params)
                    .map_err(|e| SemigroupError::Json(e.to_string()))?;
                Provenance::TheoremA { depth: p.depth }
            }
            "gamma" => {
                #[derive(Deserialize)]
                #[serde(bound(deserialize = "T: serde::de::DeserializeOwned"))]
                struct P<T> {
                    q: T,
                    #[serde(rename = "M")]
                    m: T,
                }
                let p: P<T> = serde_json::from_value(doc.params)
                    .map_err(|e| SemigroupError::Json(e.to_string()))?;
                Provenance::Gamma {
                    q: p.q,
                    m_scale: p.m,
                }
            }
            "custom" => Provenance::Custom,
            other => {
                return Err(SemigroupError::Json(format!(
                    "unknown provenance {other:?}"
                )))
            }
        };
        Self::with_provenance(doc.b, provenance)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
struct SequenceJson<T> {
    b: Vec<T>,
    provenance: String,
    params: serde_json::Value,
}

/// Worst-case axiom violations; every field except `continuity_final` is a
/// violation that should sit at roundoff level.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct AxiomReport<T> {
    pub depth: usize,
    pub grid_len: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub contraction: T,
    pub positivity: T,
    pub law: T,
    pub selfadjoint: T,
    pub unital: T,
    pub continuity_envelope: T,
    /// `|T^t f - f|_2 / |f|_2` at the smallest grid time; informational.
    pub continuity_final: T,
    pub worst: T,
}

impl<T: Real> AxiomReport<T> {
    fn zeroed(depth: usize, t_grid: &[T]) -> Self {
        let t_min = t_grid.iter().copied().fold(T::infinity(), rmin);
        let t_max = t_grid.iter().copied().fold(T::zero(), rmax);
        AxiomReport {
            depth,
            grid_len: t_grid.len(),
            t_min: t_min.as_f64(),
            t_max: t_max.as_f64(),
            contraction: T::zero(),
            positivity: T::zero(),
            law: T::zero(),
            selfadjoint: T::zero(),
            unital: T::zero(),
            continuity_envelope: T::zero(),
            continuity_final: T::zero(),
            worst: T::zero(),
        }
    }

    pub fn pass(&self, tol: T) -> bool {
        self.worst <= tol
    }
}

/// Telescoped partial sums: `sum_{n=1}^{d} weight(n, t) = 1 - exp(-t b_d)`,
/// so the weights plus the top coefficient resolve the identity.
pub fn weight_telescope_defect<T: Real>(
    seq: &SubordinationSequence<T>,
    t: T,
) -> Result<T, SemigroupError> {
    let mut acc = KahanSum::new();
    for n in 1..=seq.depth() {
        acc.add(seq.weight(n, t)?);
    }
    acc.add((-t * seq.entry(seq.depth())).exp());
    Ok((acc.value() - T::one()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{Filtration, FiniteMeasureSpace};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn dyadic_sample(depth: usize, seed: u64) -> MartingaleFunction<f64> {
        let filt = Arc::new(Filtration::dyadic(depth).unwrap());
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let vals = (0..filt.atom_count())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        MartingaleFunction::scalar(filt, vals).unwrap()
    }

    #[test]
    fn power_sixteen_family() {
        let s = SubordinationSequence::<f64>::theorem_a(1).unwrap();
        assert_eq!(s.entries(), &[0.0, 256.0]);
        let s = SubordinationSequence::<f64>::theorem_a(3).unwrap();
        assert_eq!(s.entries(), &[0.0, 256.0, 4096.0, 65536.0]);
        let s = SubordinationSequence::<f64>::theorem_a(15).unwrap();
        assert_eq!(s.entry(15), 2f64.powi(64));
        assert!(SubordinationSequence::<f64>::theorem_a(0).is_err());
        assert!(SubordinationSequence::<f64>::theorem_a(16).is_err());
    }

    #[test]
    fn custom_sequence_validation() {
        assert!(SubordinationSequence::custom(vec![0.0, 1.0, 2.0]).is_ok());
        assert!(SubordinationSequence::custom(vec![0.5, 1.0]).is_err());
        assert!(SubordinationSequence::custom(vec![0.0, 2.0, 2.0]).is_err());
        assert!(SubordinationSequence::custom(vec![0.0]).is_err());
        assert!(SubordinationSequence::custom(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn weight_half_at_log_two_over_b1() {
        let s = SubordinationSequence::<f64>::theorem_a(3).unwrap();
        let t = 2f64.ln() / 256.0;
        // weight(1) = 1 - e^{-t b_1} = 1 - 1/2
        assert_relative_eq!(s.weight(1, t).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn weights_telescope_to_one() {
        let s = SubordinationSequence::<f64>::theorem_a(6).unwrap();
        for &t in &[1e-6, 1e-3, 0.5, 3.0, 1e3, 1e6] {
            assert!(weight_telescope_defect(&s, t).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn apply_matches_telescoped_form() {
        // oracle: T^t f = sum_{n<d} weight(n,t) E_n f + e^{-t b_{d-1}} E_d f
        let f = dyadic_sample(5, 7);
        let s = SubordinationSequence::<f64>::theorem_a(5).unwrap();
        for &t in &[1e-5, 1e-3, 0.07, 1.0] {
            let fast = s.apply(&f, t).unwrap();
            let d = f.depth();
            let mut oracle = vec![0.0; f.values().len()];
            for n in 1..d {
                let w = s.weight(n, t).unwrap();
                let e = f.condexp(n).unwrap();
                for (o, &v) in oracle.iter_mut().zip(e.values()) {
                    *o += w * v;
                }
            }
            let head = (-t * s.entry(d - 1)).exp();
            let e = f.condexp(d).unwrap();
            for (o, &v) in oracle.iter_mut().zip(e.values()) {
                *o += head * v;
            }
            for (a, b) in fast.values().iter().zip(oracle.iter()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn operator_t_is_time_one() {
        let f = dyadic_sample(4, 9);
        let s = SubordinationSequence::<f64>::theorem_a(4).unwrap();
        let a = s.operator_t(&f).unwrap();
        let b = s.apply(&f, 1.0).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn level_one_measurable_functions_are_fixed() {
        let filt = Arc::new(Filtration::dyadic(4).unwrap());
        let coarse = filt.level(1).unwrap().to_vec();
        let vals: Vec<f64> = coarse.iter().map(|&b| if b == 0 { 1.25 } else { -0.5 }).collect();
        let f = MartingaleFunction::scalar(Arc::clone(&filt), vals).unwrap();
        let s = SubordinationSequence::<f64>::theorem_a(4).unwrap();
        for &t in &[1e-4, 1.0, 50.0] {
            let tf = s.apply(&f, t).unwrap();
            for (a, b) in tf.values().iter().zip(f.values()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn unitality_is_exact_even_with_ragged_weights() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let space = FiniteMeasureSpace::new(weights).unwrap();
        let levels = vec![
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            vec![0, 0, 1, 1, 2, 2, 3, 3],
            vec![0, 1, 2, 3, 4, 5, 6, 7],
        ];
        let filt = Arc::new(Filtration::new(space, levels).unwrap());
        let one = MartingaleFunction::scalar(filt, vec![1.0; 8]).unwrap();
        let s = SubordinationSequence::<f64>::theorem_a(3).unwrap();
        for &t in &[1e-6, 0.3, 2.0] {
            let t_one = s.apply(&one, t).unwrap();
            assert_eq!(t_one.values(), one.values());
        }
    }

    #[test]
    fn commutes_with_fixed_projection() {
        let f = dyadic_sample(5, 21);
        let s = SubordinationSequence::<f64>::theorem_a(5).unwrap();
        for &t in &[1e-4, 0.02, 1.0] {
            let tf = s.apply(&f, t).unwrap();
            let a = tf.fixed_projection().unwrap();
            let b = s.apply(&f.fixed_projection().unwrap(), t).unwrap();
            let c = f.fixed_projection().unwrap();
            for i in 0..f.values().len() {
                assert!((a.values()[i] - c.values()[i]).abs() <= 1e-12);
                assert!((b.values()[i] - c.values()[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn axiom_report_on_dyadic_samples() {
        let samples: Vec<_> = (0..6).map(|k| dyadic_sample(4, 100 + k)).collect();
        let s = SubordinationSequence::<f64>::theorem_a(4).unwrap();
        let grid: Vec<f64> = (-2..=20).map(|j| 4f64.powi(-j) / 256.0).collect();
        let report = s.verify_axioms(&samples, &grid).unwrap();
        assert!(report.pass(1e-10), "{report:?}");
        assert!(report.unital == 0.0);
        // at the smallest grid time the distance is well below the envelope
        assert!(report.continuity_final <= 1.0);
    }

    #[test]
    fn law_is_exact_at_depth_one() {
        let filt = Arc::new(Filtration::dyadic(1).unwrap());
        let f = MartingaleFunction::scalar(filt, vec![1.0, -2.0]).unwrap();
        let s = SubordinationSequence::<f64>::theorem_a(1).unwrap();
        let grid = [0.25, 1.0, 4.0];
        let report = s.verify_axioms(&[f], &grid).unwrap();
        assert_eq!(report.law, 0.0);
    }

    #[test]
    fn depth_mismatch_is_an_error() {
        let f = dyadic_sample(5, 3);
        let s = SubordinationSequence::<f64>::theorem_a(3).unwrap();
        assert!(matches!(
            s.apply(&f, 1.0),
            Err(SemigroupError::DepthMismatch { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let s = SubordinationSequence::<f64>::theorem_a(4).unwrap();
        let text = s.to_json_string().unwrap();
        assert!(text.contains("\"theorem_a\""));
        let back = SubordinationSequence::<f64>::from_json_str(&text).unwrap();
        assert_eq!(back, s);

        let c = SubordinationSequence::custom(vec![0.0, 1.5, 2.5]).unwrap();
        let text = c.to_json_string().unwrap();
        let back = SubordinationSequence::<f64>::from_json_str(&text).unwrap();
        assert_eq!(back, c);

        assert!(SubordinationSequence::<f64>::from_json_str(
            r#"{"b": [1.0, 2.0], "provenance": "custom", "params": {}}"#
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_nonnegative_and_telescoping(
            t in 1e-9f64..1e6,
            depth in 1usize..9,
        ) {
            let s = SubordinationSequence::<f64>::theorem_a(depth).unwrap();
            for n in 1..=depth {
                prop_assert!(s.weight(n, t).unwrap() >= 0.0);
            }
            prop_assert!(weight_telescope_defect(&s, t).unwrap() <= 1e-13);
        }

        #[test]
        fn l2_contraction_random(seed in 0u64..500, t in 1e-8f64..100.0) {
            let f = dyadic_sample(4, seed);
            let s = SubordinationSequence::<f64>::theorem_a(4).unwrap();
            let tf = s.apply(&f, t).unwrap();
            let p2 = Exponent::finite(2.0).unwrap();
            prop_assert!(
                tf.lp_norm(p2).unwrap() <= f.lp_norm(p2).unwrap() * (1.0 + 1e-12)
            );
        }
    }
}
