//! Subordination sequences built by inverting regularized incomplete gamma
//! functions, and the two-sided `S_q ~ G_q` equivalence they certify.
//!
//! For an exponent `q >= 1` and a scale `M > 0`, level `k >= 1` solves
//!
//! ```text
//! P(q, l_k) = tau_k,   Q(q, m_k) = tau_k,   tau_k = 2^(-q^2 (k+2)),
//! ```
//!
//! with `P`/`Q` the regularized lower/upper incomplete gamma functions and
//! `l_0 = m_0 = 1`. The time and frequency sequences follow from the
//! coupling `t_k b_k q = l_k`, `t_{k-1} b_k q = m_k`:
//!
//! ```text
//! t_k = M prod_{j<=k} l_j/m_j,    b_k = (Mq)^{-1} prod_{j<=k} m_j/l_{j-1},
//! ```
//!
//! kept in the log domain because the products collapse/explode far beyond
//! binary64 range as `k` grows. The split points satisfy
//! `int_{l_k}^{m_k} t^{q-1} e^{-t} dt = (1 - 2 tau_k) Gamma(q)`, which makes
//! the diagonal block of the g-function energy explicit, while the
//! off-diagonal blocks decay like `2^{-q^2 (n+1)}`; together these give the
//! pointwise two-sided bound
//!
//! ```text
//! (1/4) (Gamma(q)/q^q)^{1/q} S_q(f - Ff) <= G_q(f)
//!     <= (N/(N-1))^{(q-1)/q} S_q(f - Ff)
//! ```
//!
//! where `N = min_k m_{k+1}/l_k = min_k b_{k+1}/b_k > 2` is the separation
//! ratio of the constructed frequencies.

use serde::Serialize;
use thiserror::Error;

use crate::kahan::KahanSum;
use crate::littlewood_paley::{gfunction_quadrature, GMode, LpError};
use crate::probability::{MartingaleFunction, ProbabilityError};
use crate::quadrature::{chunk_breakpoints, integrate_adaptive, GaussLegendre, QuadratureError};
use crate::scalar::{rmax, rmin};
use crate::semigroup::{Provenance, SemigroupError, SubordinationSequence};
use crate::special::{ln_gamma, reg_gamma_p, reg_gamma_q, SpecialError};
use crate::Real;

const LN_2: f64 = core::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum GammaError {
    #[error("exponent q must satisfy q >= 1, got {0}")]
    QRange(f64),
    #[error("scale M must be positive and finite, got {0}")]
    MRange(f64),
    #[error("depth must be at least 1")]
    DepthRange,
    #[error(
        "target 2^(-q^2 (k+2)) underflows at q={q}, k={k}; largest supported k is {max_k}"
    )]
    TargetUnderflow { q: f64, k: usize, max_k: usize },
    #[error("level {level} is out of range 1..={depth}")]
    LevelRange { level: usize, depth: usize },
    #[error("separation ratio {0} violates N > 2")]
    SeparationTooSmall(f64),
    #[error("inverse gamma solver stalled at residual {residual:e} (target {target:e})")]
    SolverStall { residual: f64, target: f64 },
    #[error("b_{index} = exp({log_b}) is not representable in the scalar type")]
    LinearRange { index: usize, log_b: f64 },
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Lp(#[from] Box<LpError>),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<LpError> for GammaError {
    fn from(e: LpError) -> Self {
        GammaError::Lp(Box::new(e))
    }
}

/// Parameters of the construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaParams<T> {
    pub q: T,
    /// The truncation scale `M`; it only rescales `t_k` and `b_k`
    /// reciprocally, so 1 is the canonical choice.
    pub m_scale: T,
    /// Number of solved levels `K`.
    pub depth: usize,
}

impl<T: Real> GammaParams<T> {
    pub fn new(q: T, m_scale: T, depth: usize) -> Result<Self, GammaError> {
        if !(q >= T::one()) || !q.is_finite() {
            return Err(GammaError::QRange(q.as_f64()));
        }
        if !(m_scale > T::zero()) || !m_scale.is_finite() {
            return Err(GammaError::MRange(m_scale.as_f64()));
        }
        if depth == 0 {
            return Err(GammaError::DepthRange);
        }
        Ok(GammaParams { q, m_scale, depth })
    }
}

/// Worst solver and coupling-identity residuals observed during a build.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct BuildResiduals<T> {
    /// worst `|P(q, l_k)/tau_k - 1|`
    pub solver_l: T,
    /// worst `|Q(q, m_k)/tau_k - 1|`
    pub solver_m: T,
    /// worst log-domain defect of `t_k b_k q = l_k`
    pub identity_l: T,
    /// worst log-domain defect of `t_{k-1} b_k q = m_k`
    pub identity_m: T,
}

/// The constructed split points and log-domain sequences.
#[derive(Clone, Debug)]
pub struct GammaSequences<T> {
    q: T,
    m_scale: T,
    /// `l_0 = 1 > l_1 > ... -> 0`
    l: Vec<T>,
    /// `m_0 = 1 < m_1 < ... -> inf`
    m: Vec<T>,
    /// `ln t_k`, `k = 0..=K`
    log_t: Vec<T>,
    /// `ln b_k`, `k = 1..=K`, stored at index `k - 1`; `b_0 = 0` is implicit
    log_b: Vec<T>,
    /// `N = min_k m_{k+1}/l_k`; `None` when `K < 2` (no ratio to take)
    separation: Option<T>,
    residuals: BuildResiduals<T>,
}

/// `tau = 2^(-q^2 (k+2))` in the natural log: `-q^2 (k+2) ln 2`.
fn ln_target<T: Real>(q: T, k: usize) -> Result<T, GammaError> {
    let e = q * q * T::of((k + 2) as f64) * T::of(LN_2);
    if e > T::of(700.0) {
        let q2 = (q * q).as_f64();
        let max_k = (700.0 / (q2 * LN_2)).floor() as usize;
        return Err(GammaError::TargetUnderflow {
            q: q.as_f64(),
            k,
            max_k: max_k.saturating_sub(2),
        });
    }
    Ok(-e)
}

const SOLVER_TOL: f64 = 1e-13;
const SOLVER_MAX_ITER: usize = 200;

/// Solves `P(q, l) = tau` for the lower split point by safeguarded Newton
/// on `ln P - ln tau`, seeded by the small-argument expansion
/// `P(q, l) ~ l^q / (q Gamma(q))`.
pub fn solve_l<T: Real>(q: T, k: usize) -> Result<T, GammaError> {
    check_q(q)?;
    if k == 0 {
        return Ok(T::one());
    }
    let ln_tau = ln_target(q, k)?;
    let lg = ln_gamma(q);
    let seed = ((q.ln() + lg + ln_tau) / q).exp();
    // P is increasing; expand to a sign-changing bracket around the seed
    let mut lo = seed;
    let mut hi = seed;
    for _ in 0..200 {
        if reg_gamma_p(q, lo)?.ln() < ln_tau {
            break;
        }
        lo = lo * T::of(0.5);
    }
    for _ in 0..200 {
        if reg_gamma_p(q, hi)?.ln() > ln_tau {
            break;
        }
        hi = hi * T::of(2.0);
    }
    // |ln P - ln tau| cannot resolve below one ulp of ln tau
    let tol = rmax(
        T::of(SOLVER_TOL),
        num_traits::Float::abs(ln_tau) * T::epsilon() * T::of(2.0),
    );
    let mut x = seed;
    let mut residual = T::infinity();
    for _ in 0..SOLVER_MAX_ITER {
        let p = reg_gamma_p(q, x)?;
        let phi = p.ln() - ln_tau;
        residual = num_traits::Float::abs(phi);
        if residual <= tol {
            return Ok(x);
        }
        if phi > T::zero() {
            hi = rmin(hi, x);
        } else {
            lo = rmax(lo, x);
        }
        // phi' = P'/P with P' = x^{q-1} e^{-x} / Gamma(q)
        let dphi = ((q - T::one()) * x.ln() - x - lg).exp() / p;
        let mut next = x - phi / dphi;
        if !(next > lo) || !(next < hi) || !next.is_finite() {
            next = (lo + hi) * T::of(0.5);
        }
        x = next;
    }
    Err(GammaError::SolverStall {
        residual: residual.as_f64(),
        target: SOLVER_TOL,
    })
}

/// Solves `Q(q, m) = tau` for the upper split point; seeded by fixed-point
/// iteration on the tail asymptotic `m - (q-1) ln m = -ln tau - ln Gamma(q)`,
/// then safeguarded Newton on `ln Q - ln tau`.
pub fn solve_m<T: Real>(q: T, k: usize) -> Result<T, GammaError> {
    check_q(q)?;
    if k == 0 {
        return Ok(T::one());
    }
    let ln_tau = ln_target(q, k)?;
    let lg = ln_gamma(q);
    let rhs = -ln_tau - lg;
    let mut seed = rmax(rhs, T::of(2.0));
    for _ in 0..12 {
        seed = rhs + (q - T::one()) * seed.ln();
    }
    let mut lo = rmax(seed * T::of(0.5), T::of(1e-3));
    for _ in 0..200 {
        if reg_gamma_q(q, lo)?.ln() > ln_tau {
            break;
        }
        lo = lo * T::of(0.5);
    }
    let mut hi = seed * T::of(2.0);
    for _ in 0..200 {
        if reg_gamma_q(q, hi)?.ln() < ln_tau {
            break;
        }
        hi = hi * T::of(2.0);
    }
    let tol = rmax(
        T::of(SOLVER_TOL),
        num_traits::Float::abs(ln_tau) * T::epsilon() * T::of(2.0),
    );
    let mut x = seed;
    let mut residual = T::infinity();
    for _ in 0..SOLVER_MAX_ITER {
        let qq = reg_gamma_q(q, x)?;
        let phi = qq.ln() - ln_tau;
        residual = num_traits::Float::abs(phi);
        if residual <= tol {
            return Ok(x);
        }
        // Q is decreasing
        if phi > T::zero() {
            lo = rmax(lo, x);
        } else {
            hi = rmin(hi, x);
        }
        let dphi = -(((q - T::one()) * x.ln() - x - lg).exp()) / qq;
        let mut next = x - phi / dphi;
        if !(next > lo) || !(next < hi) || !next.is_finite() {
            next = (lo + hi) * T::of(0.5);
        }
        x = next;
    }
    Err(GammaError::SolverStall {
        residual: residual.as_f64(),
        target: SOLVER_TOL,
    })
}

fn check_q<T: Real>(q: T) -> Result<(), GammaError> {
    if !(q >= T::one()) || !q.is_finite() {
        return Err(GammaError::QRange(q.as_f64()));
    }
    Ok(())
}

impl<T: Real> GammaSequences<T> {
    pub fn build(params: GammaParams<T>) -> Result<Self, GammaError> {
        let GammaParams { q, m_scale, depth } = params;
        let mut l = vec![T::one()];
        let mut m = vec![T::one()];
        let mut solver_l_worst = T::zero();
        let mut solver_m_worst = T::zero();
        for k in 1..=depth {
            let tau = ln_target(q, k)?.exp();
            let lk = solve_l(q, k)?;
            let mk = solve_m(q, k)?;
            solver_l_worst = rmax(
                solver_l_worst,
                num_traits::Float::abs(reg_gamma_p(q, lk)? / tau - T::one()),
            );
            solver_m_worst = rmax(
                solver_m_worst,
                num_traits::Float::abs(reg_gamma_q(q, mk)? / tau - T::one()),
            );
            l.push(lk);
            m.push(mk);
        }

        // prefix products in the log domain; l_0 = m_0 = 1 contribute zero
        let ln_m_scale = m_scale.ln();
        let mut log_t = vec![ln_m_scale];
        let mut acc_t = KahanSum::new();
        acc_t.add(ln_m_scale);
        for k in 1..=depth {
            acc_t.add(l[k].ln());
            acc_t.add(-(m[k].ln()));
            log_t.push(acc_t.value());
        }
        let mut log_b = Vec::with_capacity(depth);
        let mut acc_b = KahanSum::new();
        acc_b.add(-(ln_m_scale + q.ln()));
        for k in 1..=depth {
            acc_b.add(m[k].ln());
            acc_b.add(-(l[k - 1].ln()));
            log_b.push(acc_b.value());
        }

        // coupling identities, checked in the log domain
        let mut identity_l = T::zero();
        let mut identity_m = T::zero();
        for k in 1..=depth {
            let dl = log_t[k] + log_b[k - 1] + q.ln() - l[k].ln();
            let dm = log_t[k - 1] + log_b[k - 1] + q.ln() - m[k].ln();
            identity_l = rmax(identity_l, num_traits::Float::abs(dl));
            identity_m = rmax(identity_m, num_traits::Float::abs(dm));
        }

        let mut separation = None;
        if depth >= 2 {
            let mut n = T::infinity();
            for k in 1..depth {
                n = rmin(n, m[k + 1] / l[k]);
            }
            if !(n > T::of(2.0)) {
                return Err(GammaError::SeparationTooSmall(n.as_f64()));
            }
            separation = Some(n);
        }
        Ok(GammaSequences {
            q,
            m_scale,
            l,
            m,
            log_t,
            log_b,
            separation,
            residuals: BuildResiduals {
                solver_l: solver_l_worst,
                solver_m: solver_m_worst,
                identity_l,
                identity_m,
            },
        })
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn m_scale(&self) -> T {
        self.m_scale
    }

    /// Number of solved levels `K`.
    pub fn depth(&self) -> usize {
        self.l.len() - 1
    }

    pub fn l(&self) -> &[T] {
        &self.l
    }

    pub fn m(&self) -> &[T] {
        &self.m
    }

    pub fn log_t(&self) -> &[T] {
        &self.log_t
    }

    /// `ln b_k` for `k = 1..=K` at index `k - 1`.
    pub fn log_b(&self) -> &[T] {
        &self.log_b
    }

    /// Separation ratio `N`; `None` when fewer than two levels exist.
    pub fn separation(&self) -> Option<T> {
        self.separation
    }

    pub fn residuals(&self) -> &BuildResiduals<T> {
        &self.residuals
    }

    /// Materializes `b = [0, b_1, ..., b_K]` in the linear domain.
    pub fn subordination_sequence(&self) -> Result<SubordinationSequence<T>, GammaError> {
        let mut b = vec![T::zero()];
        for (i, &lb) in self.log_b.iter().enumerate() {
            let v = lb.exp();
            if !v.is_finite() || v <= T::zero() {
                return Err(GammaError::LinearRange {
                    index: i + 1,
                    log_b: lb.as_f64(),
                });
            }
            b.push(v);
        }
        Ok(SubordinationSequence::with_provenance(
            b,
            Provenance::Gamma {
                q: self.q,
                m_scale: self.m_scale,
            },
        )?)
    }

    /// Residual of the split identity
    /// `int_{l_k}^{m_k} t^{q-1} e^{-t} dt = (1 - 2 tau_k) Gamma(q)`,
    /// relative to `Gamma(q)`, measured by direct adaptive quadrature
    /// (independent of the P/Q evaluations the solver used).
    pub fn verify_partition(&self, k: usize) -> Result<T, GammaError> {
        if k == 0 || k > self.depth() {
            return Err(GammaError::LevelRange {
                level: k,
                depth: self.depth(),
            });
        }
        let q = self.q;
        let (lk, mk) = (self.l[k], self.m[k]);
        let rule = GaussLegendre::<T>::new(16);
        let mut integrand = |t: T| {
            if q == T::one() {
                (-t).exp()
            } else {
                ((q - T::one()) * t.ln() - t).exp()
            }
        };
        // the integrand peaks at t = q - 1; keep that point on a panel edge
        let mut pts = vec![lk];
        let peak = q - T::one();
        if peak > lk && peak < mk {
            pts.push(peak);
        }
        pts.push(mk);
        let panels = chunk_breakpoints(&pts, T::of(8.0));
        let got = integrate_adaptive(&mut integrand, &panels, T::of(1e-11), 48, &rule)?;
        let tau = ln_target(q, k)?.exp();
        let gamma_q = ln_gamma(q).exp();
        let expect = (T::one() - T::of(2.0) * tau) * gamma_q;
        Ok(num_traits::Float::abs(got.value - expect) / gamma_q)
    }

    /// Upper bound on the kernel sum: checks
    /// `sum_k b_k e^{-t b_k} <= N/((N-1) t)` over a geometric grid spanning
    /// twelve decades around the constructed scales. Returns the worst
    /// relative excess (nonpositive when the bound holds).
    pub fn kernel_sum_excess(&self) -> Result<T, GammaError> {
        let b: Vec<T> = self.log_b.iter().map(|&lb| lb.exp()).collect();
        let factor = match self.separation {
            // N = inf degenerates the prefactor to 1
            None => T::one(),
            Some(n) => n / (n - T::one()),
        };
        let mut worst = T::neg_infinity();
        let t_anchor = T::one() / b[b.len() - 1];
        for j in 0..=120 {
            let t = t_anchor * T::of(10.0).powf(T::of(j as f64 / 10.0 - 2.0));
            let mut acc = KahanSum::new();
            for &bk in &b {
                acc.add(bk * (-t * bk).exp());
            }
            let bound = factor / t;
            worst = rmax(worst, (acc.value() - bound) / bound);
        }
        Ok(worst)
    }

    /// Per-level energy factors of the g-function over the time block
    /// `[t_n, t_{n-1}]`, per unit `|dE_{k+1} f|_X^q`.
    pub fn block_energy(
        &self,
        f: &MartingaleFunction<T>,
        n: usize,
    ) -> Result<BlockEnergy<T>, GammaError> {
        let depth = self.depth();
        if n == 0 || n > depth {
            return Err(GammaError::LevelRange { level: n, depth });
        }
        let q = self.q;
        let rule = GaussLegendre::<T>::new(16);
        let u_lo = self.log_t[n];
        let u_hi = self.log_t[n - 1];

        // factor for term k over this block, by quadrature in u = ln t:
        // int (t b_k)^q e^{-q t b_k} dt/t = int exp(q (z - e^z)) du
        let factor = |k: usize| -> Result<T, GammaError> {
            let lnb = self.log_b[k - 1];
            let mut pts = vec![u_lo];
            let anchor = -lnb;
            if anchor > u_lo && anchor < u_hi {
                pts.push(anchor);
            }
            pts.push(u_hi);
            let panels = chunk_breakpoints(&pts, T::of(8.0));
            let mut integrand = |u: T| {
                let z = lnb + u;
                (q * (z - z.exp())).exp()
            };
            Ok(integrate_adaptive(&mut integrand, &panels, T::of(1e-11), 48, &rule)?.value)
        };

        let gamma_q = ln_gamma(q).exp();
        let q_pow = q.powf(q);
        let tau_n = ln_target(q, n)?.exp();
        let diag_measured = factor(n)?;
        let diag_identity = (T::one() - T::of(2.0) * tau_n) * gamma_q / q_pow;
        let identity_residual =
            num_traits::Float::abs(diag_measured - diag_identity) / diag_identity;

        let mut cross = Vec::new();
        for k in 1..=depth {
            if k == n {
                continue;
            }
            let measured = factor(k)?;
            let exponent = if k < n {
                // ties to l_{n-1}: integral over (0, l_{n-1}]
                q * q * T::of((n + 1) as f64)
            } else {
                // ties to m_k: integral over [m_k, inf)
                q * q * T::of((k + 2) as f64)
            };
            let bound = (-exponent * T::of(LN_2)).exp() * gamma_q / q_pow;
            cross.push(CrossTerm { k, measured, bound });
        }

        // per-atom diagonal values R_{n,n}(w)
        let norms: Vec<T> = {
            let diffs = f.difference_stack()?;
            let m_dim = f.fiber_dim();
            if n < f.depth() {
                (0..f.atom_count())
                    .map(|a| {
                        f.fiber_norm()
                            .eval(&diffs[n][a * m_dim..(a + 1) * m_dim])
                    })
                    .collect()
            } else {
                vec![T::zero(); f.atom_count()]
            }
        };
        let root = diag_measured.powf(T::one() / q);
        let diagonal = norms.iter().map(|&x| root * x).collect();

        Ok(BlockEnergy {
            level: n,
            diagonal_factor_measured: diag_measured,
            diagonal_factor_identity: diag_identity,
            identity_residual,
            diagonal,
            cross,
        })
    }

    /// Verifies the pointwise equivalence
    /// `c_q S_q(f - Ff) <= G_q(f) <= C_{q,N} S_q(f - Ff)` with
    /// `c_q = (1/4)(Gamma(q)/q^q)^{1/q}` and
    /// `C_{q,N} = (N/(N-1))^{(q-1)/q}`.
    pub fn verify_equivalence(
        &self,
        f: &MartingaleFunction<T>,
    ) -> Result<EquivalenceReport<T>, GammaError> {
        let q = self.q;
        let seq = self.subordination_sequence()?;
        let g = gfunction_quadrature(&seq, f, q, GMode::Full).map_err(Box::new)?;
        let s = f.square_function_q(q, 2)?;

        let lower = ((ln_gamma(q) - q * q.ln()) / q).exp() * T::of(0.25);
        let upper = match self.separation {
            None => T::one(),
            Some(n) => (n / (n - T::one())).powf((q - T::one()) / q),
        };

        let mut worst_lower = T::infinity();
        let mut worst_upper = T::infinity();
        let mut informative = 0usize;
        for (gv, sv) in g.iter().zip(s.iter()) {
            if *sv > T::zero() {
                informative += 1;
                worst_lower = rmin(worst_lower, (*gv - lower * *sv) / (lower * *sv));
                worst_upper = rmin(worst_upper, (upper * *sv - *gv) / (upper * *sv));
            }
        }
        if informative == 0 {
            worst_lower = T::zero();
            worst_upper = T::zero();
        }
        Ok(EquivalenceReport {
            check: "gamma_equivalence".to_string(),
            q,
            depth: self.depth(),
            separation: self.separation.map(|n| n.as_f64()),
            lower_constant: lower,
            upper_constant: upper,
            worst_lower_margin: worst_lower,
            worst_upper_margin: worst_upper,
            atoms_checked: informative,
        })
    }

    /// Serializes as
    /// `{q, M, depth, l, m, log_t, log_b, N, residuals}`.
    pub fn to_json_string(&self) -> Result<String, GammaError>
    where
        T: Serialize,
    {
        #[derive(Serialize)]
        #[serde(bound(serialize = "T: Serialize"))]
        struct Doc<'a, T> {
            q: &'a T,
            #[serde(rename = "M")]
            m_scale: &'a T,
            depth: usize,
            l: &'a [T],
            m: &'a [T],
            log_t: &'a [T],
            log_b: &'a [T],
            #[serde(rename = "N")]
            separation: Option<f64>,
            residuals: &'a BuildResiduals<T>,
        }
        let doc = Doc {
            q: &self.q,
            m_scale: &self.m_scale,
            depth: self.depth(),
            l: &self.l,
            m: &self.m,
            log_t: &self.log_t,
            log_b: &self.log_b,
            separation: self.separation.map(|n| n.as_f64()),
            residuals: &self.residuals,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Energy factors of one time block; `measured <= bound` must hold for
/// every cross term.
#[derive(Clone, Debug)]
pub struct BlockEnergy<T> {
    pub level: usize,
    /// `int_{t_n}^{t_{n-1}} (t b_n)^q e^{-q t b_n} dt/t`
    pub diagonal_factor_measured: T,
    /// `(1 - 2 tau_n) Gamma(q) / q^q`
    pub diagonal_factor_identity: T,
    pub identity_residual: T,
    /// per atom `R_{n,n}(w) = factor^{1/q} |dE_{n+1} f(w)|_X`
    pub diagonal: Vec<T>,
    pub cross: Vec<CrossTerm<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct CrossTerm<T> {
    pub k: usize,
    pub measured: T,
    pub bound: T,
}

impl<T: Real> BlockEnergy<T> {
    /// Smallest relative slack of the proof bounds over all cross terms.
    pub fn bound_margin(&self) -> T {
        let mut worst = T::infinity();
        for c in &self.cross {
            worst = rmin(worst, (c.bound - c.measured) / c.bound);
        }
        worst
    }
}

/// Two-sided pointwise equivalence margins; nonnegative margins mean the
/// inequalities hold.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct EquivalenceReport<T> {
    pub check: String,
    pub q: T,
    pub depth: usize,
    #[serde(rename = "N")]
    pub separation: Option<f64>,
    pub lower_constant: T,
    pub upper_constant: T,
    pub worst_lower_margin: T,
    pub worst_upper_margin: T,
    pub atoms_checked: usize,
}

impl<T: Real> EquivalenceReport<T> {
    pub fn pass(&self, slack: T) -> bool {
        self.worst_lower_margin >= -slack && self.worst_upper_margin >= -slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::gfunction_closed_form;
    use crate::probability::{FiberNorm, Filtration, FiniteMeasureSpace};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn build(q: f64, depth: usize) -> GammaSequences<f64> {
        GammaSequences::build(GammaParams::new(q, 1.0, depth).unwrap()).unwrap()
    }

    #[test]
    fn q_one_closed_forms() {
        // P(1, l) = 1 - e^{-l} and Q(1, m) = e^{-m} invert in closed form
        for k in 1..=6 {
            let tau = 2f64.powi(-(k as i32 + 2));
            let l = solve_l(1.0, k).unwrap();
            let m = solve_m(1.0, k).unwrap();
            assert_relative_eq!(l, -(-tau).ln_1p(), max_relative = 1e-12);
            assert_relative_eq!(m, (k as f64 + 2.0) * LN_2, max_relative = 1e-12);
        }
        assert_relative_eq!(solve_l(1.0, 1).unwrap(), 0.13353139, max_relative = 1e-7);
        assert_relative_eq!(solve_m(1.0, 1).unwrap(), 2.07944154, max_relative = 1e-7);
    }

    #[test]
    fn solver_residuals_meet_contract() {
        for &q in &[1.0, 1.5, 2.0, 3.0] {
            for k in 1..=5 {
                let tau = (-(q * q) * (k as f64 + 2.0) * LN_2).exp();
                let l = solve_l(q, k).unwrap();
                let m = solve_m(q, k).unwrap();
                assert!(
                    (reg_gamma_p(q, l).unwrap() / tau - 1.0).abs() <= 1e-12,
                    "P residual q={q} k={k}"
                );
                assert!(
                    (reg_gamma_q(q, m).unwrap() / tau - 1.0).abs() <= 1e-12,
                    "Q residual q={q} k={k}"
                );
            }
        }
    }

    #[test]
    fn q_two_first_level_against_direct_integration() {
        let l1 = solve_l(2.0, 1).unwrap();
        // integral_0^{l1} t e^{-t} dt must equal tau * Gamma(2) = 2^{-12}
        let rule = GaussLegendre::<f64>::new(16);
        let mut f = |t: f64| t * (-t).exp();
        let got = integrate_adaptive(&mut f, &[0.0, l1], 1e-12, 40, &rule)
            .unwrap()
            .value;
        assert_relative_eq!(got, 2f64.powi(-12), max_relative = 1e-9);
    }

    #[test]
    fn sequences_are_monotone_and_seeded_at_one() {
        for &q in &[1.0, 2.0, 3.0] {
            let s = build(q, 5);
            assert_eq!(s.l()[0], 1.0);
            assert_eq!(s.m()[0], 1.0);
            for k in 1..=5 {
                assert!(s.l()[k] < s.l()[k - 1], "l not decreasing at {k}");
                assert!(s.m()[k] > s.m()[k - 1], "m not increasing at {k}");
                assert!(s.l()[k] < s.m()[k]);
                assert!(s.log_t()[k] < s.log_t()[k - 1], "t not decreasing");
                if k >= 2 {
                    assert!(s.log_b()[k - 1] > s.log_b()[k - 2], "b not increasing");
                }
            }
            assert_eq!(s.log_t()[0], 0.0); // t_0 = M = 1
        }
    }

    #[test]
    fn coupling_identities_hold_in_log_domain() {
        for &q in &[1.0, 1.5, 2.0, 3.0] {
            let s = build(q, 6);
            let r = s.residuals();
            assert!(r.identity_l <= 1e-10, "q={q}: {:?}", r);
            assert!(r.identity_m <= 1e-10, "q={q}: {:?}", r);
            assert!(r.solver_l <= 1e-12);
            assert!(r.solver_m <= 1e-12);
        }
    }

    #[test]
    fn q_one_product_formulas_match_closed_forms() {
        // with q = 1, M = 1: b_k = prod m_j / l_{j-1} in closed form
        let s = build(1.0, 4);
        let mut expect_log_b = 0.0f64;
        for k in 1..=4 {
            let mk = (k as f64 + 2.0) * LN_2;
            let lk_prev = if k == 1 {
                1.0f64
            } else {
                -(-(2f64.powi(-(k as i32 + 1)))).ln_1p()
            };
            expect_log_b += mk.ln() - lk_prev.ln();
            assert_relative_eq!(s.log_b()[k - 1], expect_log_b, max_relative = 1e-10);
        }
    }

    #[test]
    fn separation_exceeds_two_and_matches_frequency_ratios() {
        for &q in &[1.0, 2.0, 3.0] {
            let s = build(q, 5);
            let n = s.separation().unwrap();
            assert!(n > 2.0, "q={q}: N={n}");
            for k in 1..5 {
                let ratio = (s.log_b()[k] - s.log_b()[k - 1]).exp();
                let direct = s.m()[k + 1] / s.l()[k];
                assert_relative_eq!(ratio, direct, max_relative = 1e-10);
                assert!(direct >= n * (1.0 - 1e-12));
            }
        }
        assert!(build(2.0, 1).separation().is_none());
    }

    #[test]
    fn partition_integral_identity() {
        // q = 1, k = 1: e^{-l_1} - e^{-m_1} = 7/8 - 1/8 = 3/4 = 1 - 2/2^3
        let s = build(1.0, 3);
        assert!(s.verify_partition(1).unwrap() <= 1e-10);
        for &q in &[2.0, 3.0] {
            let s = build(q, 4);
            for k in 1..=4 {
                let r = s.verify_partition(k).unwrap();
                assert!(r <= 1e-10, "q={q} k={k}: residual {r}");
            }
        }
    }

    #[test]
    fn kernel_sum_bound_holds_over_twelve_decades() {
        for &q in &[1.0, 2.0, 3.0] {
            let s = build(q, 5);
            let excess = s.kernel_sum_excess().unwrap();
            assert!(excess <= 1e-12, "q={q}: excess {excess}");
        }
    }

    #[test]
    fn target_underflow_guard() {
        // q = 5: exponent 25 (k+2) ln 2 crosses 700 near k = 38
        let err = GammaSequences::build(GammaParams::new(5.0, 1.0, 39).unwrap());
        assert!(matches!(
            err,
            Err(GammaError::TargetUnderflow { .. })
        ));
        assert!(build_result_ok(5.0, 10));
    }

    fn build_result_ok(q: f64, depth: usize) -> bool {
        GammaSequences::build(GammaParams::new(q, 1.0, depth).unwrap()).is_ok()
    }

    fn single_difference(a: f64) -> MartingaleFunction<f64> {
        let space = FiniteMeasureSpace::new(vec![0.5, 0.5]).unwrap();
        let filt = Arc::new(Filtration::new(space, vec![vec![0, 0], vec![0, 1]]).unwrap());
        MartingaleFunction::scalar(filt, vec![a, -a]).unwrap()
    }

    #[test]
    fn block_energy_diagonal_identity_and_bounds() {
        let f = single_difference(2.0);
        for &q in &[1.0, 2.0, 3.0] {
            let s = build(q, 4);
            let be = s.block_energy(&f, 1).unwrap();
            assert!(
                be.identity_residual <= 1e-9,
                "q={q}: {:?}",
                be.identity_residual
            );
            // dE_2 f = f has fiber norm 2 at both atoms
            let expect = be.diagonal_factor_measured.powf(1.0 / q) * 2.0;
            assert_relative_eq!(be.diagonal[0], expect, max_relative = 1e-12);
            // the k = n + 1 bound is attained up to an exponentially small
            // tail, so the margin is only nonnegative within quadrature error
            assert!(be.bound_margin() >= -1e-9, "q={q}");
            for c in &be.cross {
                assert!(c.measured <= c.bound * (1.0 + 1e-9), "q={q} k={}", c.k);
            }
        }
    }

    #[test]
    fn block_energy_vanishes_without_the_difference() {
        // depth-2 function has only dE_2; blocks n >= 2 see nothing
        let f = single_difference(1.0);
        let s = build(2.0, 4);
        let be = s.block_energy(&f, 2).unwrap();
        assert!(be.diagonal.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn equivalence_single_difference_margins() {
        let f = single_difference(1.5);
        for &q in &[1.0, 2.0, 3.0] {
            let s = build(q, 3);
            let rep = s.verify_equivalence(&f).unwrap();
            assert!(rep.pass(1e-8), "q={q}: {rep:?}");
            // G = Gamma(q)^{1/q}/q * S makes the lower margin exactly 3
            assert_relative_eq!(rep.worst_lower_margin, 3.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn equivalence_on_random_vector_martingales() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let norms = [
            FiberNorm::lr(1.0).unwrap(),
            FiberNorm::lr(2.0).unwrap(),
            FiberNorm::LInfinity,
        ];
        for trial in 0..12 {
            let depth = 2 + trial % 4;
            let filt = Arc::new(Filtration::dyadic(depth).unwrap());
            let m_dim = 3;
            let vals: Vec<f64> = (0..filt.atom_count() * m_dim)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let f = MartingaleFunction::vector(
                filt,
                m_dim,
                vals,
                norms[trial % norms.len()].clone(),
            )
            .unwrap();
            for &q in &[1.0, 2.0, 3.0] {
                let s = build(q, depth.max(2));
                let rep = s.verify_equivalence(&f).unwrap();
                assert!(rep.pass(1e-8), "trial {trial} q={q}: {rep:?}");
            }
        }
    }

    #[test]
    fn q_two_scalar_quadrature_matches_kernel_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let filt = Arc::new(Filtration::dyadic(4).unwrap());
        let vals: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = MartingaleFunction::scalar(filt, vals).unwrap();
        let s = build(2.0, 4);
        let seq = s.subordination_sequence().unwrap();
        let quad = gfunction_quadrature(&seq, &f, 2.0, GMode::Full).unwrap();
        let closed = gfunction_closed_form(&seq, &f).unwrap();
        for (a, b) in quad.iter().zip(closed.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn json_document_shape() {
        let s = build(2.0, 3);
        let text = s.to_json_string().unwrap();
        assert!(text.contains("\"log_t\""));
        assert!(text.contains("\"log_b\""));
        assert!(text.contains("\"N\""));
        assert!(text.contains("\"residuals\""));
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["depth"], 3);
        assert!(parsed["N"].as_f64().unwrap() > 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GammaParams::new(0.5, 1.0, 3).is_err());
        assert!(GammaParams::new(2.0, -1.0, 3).is_err());
        assert!(GammaParams::new(2.0, 1.0, 0).is_err());
        let s = build(2.0, 3);
        assert!(s.verify_partition(0).is_err());
        assert!(s.verify_partition(4).is_err());
    }
}
