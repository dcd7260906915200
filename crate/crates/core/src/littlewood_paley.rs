//! The semigroup g-function and its kernel quadratic form.
//!
//! For a subordination sequence `0 = b_0 < b_1 < ...` and a depth-`n`
//! filtration, the g-function of the induced semigroup admits two routes:
//!
//! * closed form: `G(f)(w)^2 = v(w)^T B v(w)` with
//!   `v(w) = (dE_2 f(w), ..., dE_n f(w))` and the kernel matrix
//!   `B_ij = b_i b_j / (b_i + b_j)^2` over the positive entries;
//! * quadrature: `G_q(f)(w) = (int_0^inf |sum_k t b_k e^{-t b_k}
//!   dE_{k+1} f(w)|_X^q dt/t)^{1/q}`, which also covers vector values,
//!   fiber norms and exponents `q != 2`.
//!
//! The two agree for scalar `f` and `q = 2`. Kernel entries are evaluated
//! exclusively through the ratio `rho = b_i / b_j` as `1/(rho + 1/rho + 2)`:
//! for the power-16 family the products `b_i b_j` overflow binary64 long
//! before the ratios do, and the ratio of two powers of two is exact.
//!
//! Every diagonal entry is exactly 1/4, and for the power-16 family the
//! off-diagonal rows sum below `2 sum_i 16^{-i} = 2/15`, so by Gershgorin's
//! circle theorem the spectrum lies in `[7/60, 23/60]`. That enclosure gives
//! the two-sided pointwise estimate checked by [`verify_theorem_a`]:
//! `sqrt(7/60) S(f - Ff) <= G(f) <= sqrt(23/60) S(f - Ff)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kahan::KahanSum;
use crate::probability::{Exponent, MartingaleFunction, ProbabilityError};
use crate::quadrature::{chunk_breakpoints, integrate_adaptive, GaussLegendre, QuadratureError};
use crate::scalar::{rmax, rmin};
use crate::semigroup::{SemigroupError, SubordinationSequence};
use crate::special::{ln_gamma, reg_gamma_q, SpecialError};
use crate::Real;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("kernel needs filtration depth >= 2, got {0}")]
    DepthTooSmall(usize),
    #[error("kernel size must be >= 1, got {0}")]
    SizeRange(usize),
    #[error("sequence depth {seq} cannot serve filtration depth {filtration}")]
    SequenceTooShort { seq: usize, filtration: usize },
    #[error("exponent q must satisfy q >= 1, got {0}")]
    QDomain(f64),
    #[error("truncation bound must be positive, got {0}")]
    BadTruncation(f64),
    #[error("operation requires scalar values; use the quadrature route")]
    NotScalar,
    #[error("accuracy target {target:e} not met, achieved {achieved:e}")]
    Accuracy { achieved: f64, target: f64 },
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Symmetric kernel `B_ij = 1/(rho + 1/rho + 2)`, `rho = b_i/b_j`, over the
/// positive sequence entries attached to difference levels `2..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<T> {
    m: DMatrix<T>,
}

impl<T: Real> KernelMatrix<T> {
    /// Kernel for difference levels `2..=n`; size `n - 1`.
    pub fn from_sequence(
        seq: &SubordinationSequence<T>,
        n: usize,
    ) -> Result<Self, LpError> {
        if n < 2 {
            return Err(LpError::DepthTooSmall(n));
        }
        if seq.depth() < n - 1 {
            return Err(LpError::SequenceTooShort {
                seq: seq.depth(),
                filtration: n,
            });
        }
        let size = n - 1;
        let mut m = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in 0..=i {
                // rho >= 1 since the sequence increases
                let rho = seq.entry(i + 1) / seq.entry(j + 1);
                let e = Self::entry_from_ratio(rho);
                m[(i, j)] = e;
                m[(j, i)] = e;
            }
        }
        Ok(KernelMatrix { m })
    }

    /// Kernel of the power-16 family at any size: `rho_ij = 16^{i-j}` stays
    /// in binary64 range far beyond the depth cap of the stored sequence.
    pub fn power16(size: usize) -> Result<Self, LpError> {
        if size == 0 {
            return Err(LpError::SizeRange(size));
        }
        let sixteen = T::of(16.0);
        let mut m = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in 0..=i {
                let e = Self::entry_from_ratio(sixteen.powi((i - j) as i32));
                m[(i, j)] = e;
                m[(j, i)] = e;
            }
        }
        Ok(KernelMatrix { m })
    }

    #[inline]
    fn entry_from_ratio(rho: T) -> T {
        T::one() / (rho + T::one() / rho + T::of(2.0))
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    /// Row-disc enclosure `[min_k (B_kk - r_k), max_k (B_kk + r_k)]` with
    /// `r_k` the off-diagonal absolute row sum; contains every eigenvalue.
    pub fn gershgorin_bounds(&self) -> (T, T) {
        let n = self.size();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for k in 0..n {
            let mut radius = KahanSum::new();
            for j in 0..n {
                if j != k {
                    radius.add(num_traits::Float::abs(self.m[(k, j)]));
                }
            }
            let r = radius.value();
            lo = rmin(lo, self.m[(k, k)] - r);
            hi = rmax(hi, self.m[(k, k)] + r);
        }
        (lo, hi)
    }

    /// Extremal eigenvalues by a dense symmetric eigensolver, with an
    /// explicit residual check `|Bx - lambda x| <= 1e-10 |B|`.
    pub fn eigen_range(&self) -> Result<(T, T), LpError>
    where
        T: nalgebra::RealField,
    {
        let eig = nalgebra::SymmetricEigen::new(self.m.clone());
        let n = self.size();
        let mut i_min = 0;
        let mut i_max = 0;
        for i in 1..n {
            if eig.eigenvalues[i] < eig.eigenvalues[i_min] {
                i_min = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[i_max] {
                i_max = i;
            }
        }
        let scale = self.m.norm();
        let target = T::of(1e-10);
        for &i in &[i_min, i_max] {
            let x = eig.eigenvectors.column(i);
            let residual = (&self.m * x - x * eig.eigenvalues[i]).norm();
            if residual > target * scale {
                return Err(LpError::Accuracy {
                    achieved: (residual / scale).as_f64(),
                    target: target.as_f64(),
                });
            }
        }
        Ok((eig.eigenvalues[i_min], eig.eigenvalues[i_max]))
    }
}

/// The spectral enclosure of the power-16 kernel: diagonal 1/4 plus/minus
/// the geometric off-diagonal envelope `2 sum_{i>=1} 16^{-i} = 2/15`,
/// i.e. `(7/60, 23/60)`.
pub fn sandwich_bounds<T: Real>() -> (T, T) {
    let quarter = T::of(0.25);
    let radius = T::of(2.0) / T::of(15.0);
    (quarter - radius, quarter + radius)
}

/// `G(f)` per atom via the kernel quadratic form (scalar `f` only):
/// `sqrt(v^T B v)` with `v = (dE_2 f, ..., dE_n f)`.
///
/// The accumulation is a plain row-major double loop with the product
/// grouped as `B_ij * (v_i * v_j)`; the tracial-algebra route reproduces
/// exactly this arithmetic on diagonal matrices, which keeps the two paths
/// bit-identical there.
pub fn gfunction_closed_form<T: Real>(
    seq: &SubordinationSequence<T>,
    f: &MartingaleFunction<T>,
) -> Result<Vec<T>, LpError> {
    if !f.is_scalar() {
        return Err(LpError::NotScalar);
    }
    let depth = f.depth();
    let atoms = f.atom_count();
    if depth < 2 {
        return Ok(vec![T::zero(); atoms]);
    }
    let kernel = KernelMatrix::from_sequence(seq, depth)?;
    let diffs = f.difference_stack()?;
    let size = depth - 1;
    let mut out = vec![T::zero(); atoms];
    for (atom, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for i in 0..size {
            let vi = diffs[i + 1][atom];
            for j in 0..size {
                s += kernel.entry(i, j) * (vi * diffs[j + 1][atom]);
            }
        }
        *o = rmax(s, T::zero()).sqrt();
    }
    Ok(out)
}

/// Integration domain for [`gfunction_quadrature`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GMode<T> {
    /// `t` over `(0, inf)`.
    Full,
    /// `t` over `(0, M]`; monotone nondecreasing in `M`.
    Truncated(T),
}

/// `G_q(f)` per atom by adaptive quadrature in `u = ln t` coordinates.
///
/// The integrand `|sum_k t b_k e^{-t b_k} dE_{k+1} f|_X^q` concentrates near
/// the scales `t = 1/b_k`, which the panel layout follows. The `t -> 0` and
/// `t -> inf` tails are bounded analytically (linear envelope below, Gamma
/// tail above), certified to at most `1e-12` of the total, and added as
/// remainders.
pub fn gfunction_quadrature<T: Real>(
    seq: &SubordinationSequence<T>,
    f: &MartingaleFunction<T>,
    q: T,
    mode: GMode<T>,
) -> Result<Vec<T>, LpError> {
    if !(q >= T::one()) || !q.is_finite() {
        return Err(LpError::QDomain(q.as_f64()));
    }
    if let GMode::Truncated(m) = mode {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(LpError::BadTruncation(m.as_f64()));
        }
    }
    let depth = f.depth();
    let atoms = f.atom_count();
    if depth < 2 {
        return Ok(vec![T::zero(); atoms]);
    }
    if seq.depth() < depth - 1 {
        return Err(LpError::SequenceTooShort {
            seq: seq.depth(),
            filtration: depth,
        });
    }
    let terms = depth - 1;
    // b_k and ln b_k for k = 1..=terms
    let b: Vec<T> = (1..=terms).map(|k| seq.entry(k)).collect();
    let ln_b: Vec<T> = b.iter().map(|x| x.ln()).collect();
    let diffs = f.difference_stack()?;
    let m_dim = f.fiber_dim();
    let rule = GaussLegendre::<T>::new(16);

    let results: Result<Vec<T>, LpError> = (0..atoms)
        .into_par_iter()
        .map(|atom| {
            let rows: Vec<&[T]> = (0..terms)
                .map(|k| &diffs[k + 1][atom * m_dim..(atom + 1) * m_dim])
                .collect();
            let norms: Vec<T> = rows.iter().map(|r| f.fiber_norm().eval(r)).collect();
            atom_gq(&b, &ln_b, &rows, &norms, f, q, mode, &rule)
        })
        .collect();
    results
}

/// One atom of the quadrature g-function; see [`gfunction_quadrature`].
#[allow(clippy::too_many_arguments)]
fn atom_gq<T: Real>(
    b: &[T],
    ln_b: &[T],
    rows: &[&[T]],
    norms: &[T],
    f: &MartingaleFunction<T>,
    q: T,
    mode: GMode<T>,
    rule: &GaussLegendre<T>,
) -> Result<T, LpError> {
    let terms = b.len();
    let m_dim = rows[0].len();
    // linear envelope coefficient for the lower tail: phi(t) <= t W
    let mut w_acc = KahanSum::new();
    for k in 0..terms {
        w_acc.add(b[k] * norms[k]);
    }
    let w_env = w_acc.value();
    if w_env == T::zero() {
        return Ok(T::zero());
    }
    let ln_w = w_env.ln();
    let eps_tail = T::of(1e-12);
    let lg_q = ln_gamma(q);

    // scale anchors in u = ln t; b increasing, so the anchors descend
    let mut anchors: Vec<T> = ln_b.iter().map(|&x| -x).collect();
    anchors.reverse();
    let u_min_scale = anchors[0];

    let mut lo_shift = T::of(36.0) / q + T::one();
    let mut z_target = T::of(50.0) + T::of(5.0) * q;
    let mut buffer = vec![T::zero(); m_dim];

    for _attempt in 0..8 {
        // upper cutoff: full mode ends at the Gamma-tail point, truncated
        // mode at min(ln M, that point)
        let t_hi = z_target / (q * b[0]);
        let u_hi_full = t_hi.ln();
        let (u_hi, include_hi) = match mode {
            GMode::Full => (u_hi_full, true),
            GMode::Truncated(m) => {
                let lm = m.ln();
                if lm < u_hi_full {
                    (lm, false)
                } else {
                    (u_hi_full, true)
                }
            }
        };
        let u_lo = rmin(u_min_scale, u_hi) - lo_shift;

        let mut pts: Vec<T> = vec![u_lo];
        for &a in &anchors {
            if a > u_lo && a < u_hi {
                pts.push(a);
            }
        }
        pts.push(u_hi);
        let panels = chunk_breakpoints(&pts, T::of(8.0));

        let mut integrand = |u: T| -> T {
            for v in buffer.iter_mut() {
                *v = T::zero();
            }
            for k in 0..terms {
                let z = ln_b[k] + u;
                // c = exp(z - e^z); z - e^z -> -inf at both ends, so c
                // underflows to an exact 0 instead of overflowing
                let c = (z - z.exp()).exp();
                if c > T::zero() {
                    for (v, &x) in buffer.iter_mut().zip(rows[k].iter()) {
                        *v += c * x;
                    }
                }
            }
            f.fiber_norm().eval(&buffer).powf(q)
        };
        let main = integrate_adaptive(&mut integrand, &panels, T::of(1e-9), 48, rule)?;

        // lower tail: int_0^{t_lo} (t W)^q dt/t = (W t_lo)^q / q
        let r_lo = (q * (ln_w + u_lo) - q.ln()).exp();
        // upper tail: phi(t) <= t e^{-t b_1} D for t >= t_hi
        let r_hi = if include_hi {
            let mut d_acc = KahanSum::new();
            for k in 0..terms {
                d_acc.add(b[k] * (-(b[k] - b[0]) * t_hi).exp() * norms[k]);
            }
            let d = d_acc.value();
            if d == T::zero() {
                T::zero()
            } else {
                let tail_q = reg_gamma_q(q, q * b[0] * t_hi)?;
                if tail_q == T::zero() {
                    T::zero()
                } else {
                    (q * d.ln() - q * (q * b[0]).ln() + lg_q + tail_q.ln()).exp()
                }
            }
        } else {
            T::zero()
        };

        let total = main.value + r_lo + r_hi;
        if total == T::zero() {
            return Ok(T::zero());
        }
        let lo_ok = r_lo <= eps_tail * total;
        let hi_ok = r_hi <= eps_tail * total;
        if lo_ok && hi_ok {
            return Ok(rmax(total, T::zero()).powf(T::one() / q));
        }
        if !lo_ok {
            lo_shift = lo_shift + T::of(36.0) / q + T::one();
        }
        if !hi_ok {
            z_target = z_target + T::of(40.0);
        }
    }
    Err(LpError::Accuracy {
        achieved: eps_tail.as_f64(),
        target: 1e-12,
    })
}

/// One `L_p` consequence line of the pointwise sandwich:
/// `lhs = sqrt(7/60) |S(f - Ff)|_p`, `mid = |G(f)|_p`,
/// `rhs = sqrt(23/60) |S(f - Ff)|_p`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize + Real"))]
pub struct LpCheck<T> {
    pub p: Exponent<T>,
    pub lhs: T,
    pub mid: T,
    pub rhs: T,
}

/// Result of the two-sided pointwise verification. Margins are relative:
/// `worst_lower_margin = min_w (G - lo*S)/(lo*S)` over atoms with `S > 0`,
/// and symmetrically for the upper bound; nonnegative margins mean the
/// inequalities hold.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize + Real"))]
pub struct TheoremAReport<T> {
    pub check: String,
    pub depth: usize,
    pub worst_lower_margin: T,
    pub worst_upper_margin: T,
    pub lp_checks: Vec<LpCheck<T>>,
}

impl<T: Real> TheoremAReport<T> {
    /// All pointwise and L_p inequalities hold within the relative slack.
    pub fn pass(&self, slack: T) -> bool {
        if self.worst_lower_margin < -slack || self.worst_upper_margin < -slack {
            return false;
        }
        self.lp_checks.iter().all(|c| {
            c.lhs <= c.mid + slack * rmax(c.mid, T::of(1e-300))
                && c.mid <= c.rhs + slack * rmax(c.rhs, T::of(1e-300))
        })
    }
}

/// Checks `sqrt(7/60) S(f - Ff) <= G(f) <= sqrt(23/60) S(f - Ff)` atomwise
/// for the power-16 sequence, plus the L_p-norm consequences for
/// `p in {1, 2, 4, inf}`.
pub fn verify_theorem_a<T: Real>(
    f: &MartingaleFunction<T>,
) -> Result<TheoremAReport<T>, LpError> {
    if !f.is_scalar() {
        return Err(LpError::NotScalar);
    }
    let depth = f.depth();
    let seq = SubordinationSequence::theorem_a(depth.max(2) - 1)?;
    let g = gfunction_closed_form(&seq, f)?;
    // S(f - Ff) drops the level-1 difference and nothing else
    let s = f.square_function_from(2)?;
    let (lo_sq, hi_sq) = sandwich_bounds::<T>();
    let lo = lo_sq.sqrt();
    let hi = hi_sq.sqrt();

    let mut worst_lower = T::infinity();
    let mut worst_upper = T::infinity();
    for (gv, sv) in g.iter().zip(s.iter()) {
        if *sv > T::zero() {
            worst_lower = rmin(worst_lower, (*gv - lo * *sv) / (lo * *sv));
            worst_upper = rmin(worst_upper, (hi * *sv - *gv) / (hi * *sv));
        }
    }
    // no informative atom: the sandwich is vacuous (0 <= 0 <= 0)
    if !worst_lower.is_finite() {
        worst_lower = T::zero();
        worst_upper = T::zero();
    }

    let space = f.filtration().space();
    let mut lp_checks = Vec::new();
    for p in [
        Exponent::finite(T::one()).expect("valid"),
        Exponent::finite(T::of(2.0)).expect("valid"),
        Exponent::finite(T::of(4.0)).expect("valid"),
        Exponent::Infinity,
    ] {
        let sp = space.lp_norm(&s, p)?;
        let gp = space.lp_norm(&g, p)?;
        lp_checks.push(LpCheck {
            p,
            lhs: lo * sp,
            mid: gp,
            rhs: hi * sp,
        });
    }
    Ok(TheoremAReport {
        check: "theorem_a".to_string(),
        depth,
        worst_lower_margin: worst_lower,
        worst_upper_margin: worst_upper,
        lp_checks,
    })
}
