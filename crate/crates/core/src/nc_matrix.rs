//! Finite-dimensional tracial matrix algebras with tensor-factor
//! filtrations: conditional expectations as normalized partial traces,
//! column/row square functions, the subordinated semigroup, and the
//! operator-order verification of the two-sided kernel bounds.
//!
//! The algebra is `M_D` with `D = s_1 ... s_d` and the normalized trace
//! `tau = Tr/D`. Level `n` is the subalgebra of matrices acting on the
//! first `n` tensor factors, and `E_n` is the trace-preserving conditional
//! expectation onto it: identity on the leading factors tensored with the
//! normalized partial trace over the trailing ones.
//!
//! Diagonal matrices over power-of-two factor dimensions are arithmetically
//! identical to functions on a uniform atom space: every accumulation here
//! (Kahan partial traces in index order, plain `+=` kernel sums grouped as
//! `B_ij * (v_i * v_j)`, clamped square roots) reproduces the commutative
//! code path bit for bit. [`diagonal_embedding`] and [`shadow_filtration`]
//! expose that bridge.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kahan::KahanSum;
use crate::littlewood_paley::{KernelMatrix, LpError};
use crate::probability::{Exponent, Filtration, FiniteMeasureSpace, ProbabilityError};
use crate::scalar::rmax;
use crate::semigroup::{SemigroupError, SubordinationSequence};
use crate::Real;

#[derive(Debug, Error)]
pub enum NcError {
    #[error("factor dimensions must be a nonempty list of integers >= 2")]
    BadFactorDims,
    #[error("total dimension {0} exceeds the supported limit {1}")]
    DimTooLarge(usize, usize),
    #[error("matrix must be {expected}x{expected}, got {rows}x{cols}")]
    ShapeMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("level {level} is out of range 1..={depth}")]
    LevelRange { level: usize, depth: usize },
    #[error("elements live over different filtrations")]
    FiltrationMismatch,
    #[error("exponent must satisfy p >= 1, got {0}")]
    PDomain(f64),
    #[error("hardy norm requires p >= 2, got {0}; smaller p needs an infimum over decompositions")]
    HardyUnsupported(f64),
    #[error("eigendecomposition residual {achieved:e} exceeds target {target:e}")]
    Accuracy { achieved: f64, target: f64 },
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Lp(#[from] Box<LpError>),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<LpError> for NcError {
    fn from(e: LpError) -> Self {
        NcError::Lp(Box::new(e))
    }
}

const MAX_DIM: usize = 1024;

fn fabs<T: Real>(x: T) -> T {
    num_traits::Float::abs(x)
}

fn fsqrt<T: Real>(x: T) -> T {
    num_traits::Float::sqrt(x)
}

/// Tensor-factor filtration of `M_D`, `D = prod s_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixAlgebraFiltration {
    factor_dims: Vec<usize>,
    dim: usize,
}

impl MatrixAlgebraFiltration {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self, NcError> {
        if factor_dims.is_empty() || factor_dims.iter().any(|&s| s < 2) {
            return Err(NcError::BadFactorDims);
        }
        let mut dim = 1usize;
        for &s in &factor_dims {
            dim = dim
                .checked_mul(s)
                .filter(|&d| d <= MAX_DIM)
                .ok_or(NcError::DimTooLarge(usize::MAX, MAX_DIM))?;
        }
        Ok(MatrixAlgebraFiltration { factor_dims, dim })
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    /// Number of levels `d`; the top level is the full algebra.
    pub fn depth(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the first `n` factors.
    pub fn leading_dim(&self, n: usize) -> usize {
        self.factor_dims[..n].iter().product()
    }

    /// Dimension of the factors past level `n`.
    pub fn trailing_dim(&self, n: usize) -> usize {
        self.dim / self.leading_dim(n)
    }
}

/// The commutative shadow of the diagonal subalgebra: the uniform space on
/// `D` atoms with level-`n` blocks of width `trailing_dim(n)`.
pub fn shadow_filtration<T: Real>(
    filt: &MatrixAlgebraFiltration,
) -> Result<Filtration<T>, NcError> {
    let d = filt.dim();
    let space = FiniteMeasureSpace::uniform(d)?;
    let levels = (1..=filt.depth())
        .map(|n| {
            let w = filt.trailing_dim(n);
            (0..d).map(|a| a / w).collect()
        })
        .collect();
    Ok(Filtration::new(space, levels)?)
}

/// An element of the algebra, carrying its filtration.
#[derive(Clone, Debug)]
pub struct TracialElement<T: Real + RealField> {
    filtration: Arc<MatrixAlgebraFiltration>,
    m: DMatrix<Complex<T>>,
}

/// Kahan accumulator for complex terms (separate compensation per part).
struct CKahan<T> {
    re: KahanSum<T>,
    im: KahanSum<T>,
}

impl<T: Real> CKahan<T> {
    fn new() -> Self {
        CKahan {
            re: KahanSum::new(),
            im: KahanSum::new(),
        }
    }

    fn add(&mut self, z: Complex<T>) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn value(&self) -> Complex<T> {
        Complex::new(self.re.value(), self.im.value())
    }
}

/// `a^H b` with Kahan inner products over `k` in index order.
fn adjoint_times<T: Real + RealField>(
    a: &DMatrix<Complex<T>>,
    b: &DMatrix<Complex<T>>,
) -> DMatrix<Complex<T>> {
    let n = a.nrows();
    DMatrix::from_fn(a.ncols(), b.ncols(), |r, c| {
        let mut acc = CKahan::new();
        for k in 0..n {
            acc.add(a[(k, r)].conj() * b[(k, c)]);
        }
        acc.value()
    })
}

/// `a b^H` with Kahan inner products over `k` in index order.
fn times_adjoint<T: Real + RealField>(
    a: &DMatrix<Complex<T>>,
    b: &DMatrix<Complex<T>>,
) -> DMatrix<Complex<T>> {
    let n = a.ncols();
    DMatrix::from_fn(a.nrows(), b.nrows(), |r, c| {
        let mut acc = CKahan::new();
        for k in 0..n {
            acc.add(a[(r, k)] * b[(c, k)].conj());
        }
        acc.value()
    })
}

/// `tau(a b)` without forming the product.
fn trace_product<T: Real + RealField>(
    a: &DMatrix<Complex<T>>,
    b: &DMatrix<Complex<T>>,
) -> Complex<T> {
    let n = a.nrows();
    let mut acc = CKahan::new();
    for r in 0..n {
        for k in 0..n {
            acc.add(a[(r, k)] * b[(k, r)]);
        }
    }
    acc.value().unscale(T::of(n as f64))
}

fn frobenius<T: Real + RealField>(m: &DMatrix<Complex<T>>) -> T {
    let mut acc = KahanSum::new();
    for z in m.iter() {
        acc.add(z.re * z.re + z.im * z.im);
    }
    fsqrt(acc.value())
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Stock QR-based solvers misbehave on the exactly sparse, highly
/// degenerate matrices this module produces (Choi matrices, conditional
/// expectation images), so the rotations are done by hand: for each
/// off-diagonal entry `a_pq = r u` (`|u| = 1`) the unitary
///
/// ```text
/// G_pp = c,  G_pq = s u,  G_qp = -s conj(u),  G_qq = c
/// ```
///
/// with `tau = (a_qq - a_pp)/(2r)`, `t = sign(tau)/(|tau| + sqrt(1+tau^2))`
/// annihilates the entry; sweeps repeat until the off-diagonal mass falls
/// below a few ulp of the input scale. The result is verified by
/// reconstruction: `|Q L Q^H - H|_F <= 1e-10 (|H|_F + 1)`.
fn hermitian_eigen<T: Real + RealField>(
    m: &DMatrix<Complex<T>>,
) -> Result<(DVector<T>, DMatrix<Complex<T>>), NcError> {
    let h = (m + m.adjoint()).scale(T::of(0.5));
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = DMatrix::from_diagonal_element(n, n, Complex::new(T::one(), T::zero()));
    let scale = frobenius(&h) + T::of(1e-300);
    let tol = scale * T::epsilon() * T::of(n as f64);
    let mut converged = n < 2;
    let mut off = T::zero();
    for sweep in 0..60 {
        let mut acc = KahanSum::new();
        for p in 0..n {
            for q in (p + 1)..n {
                let z = a[(p, q)];
                acc.add(z.re * z.re + z.im * z.im);
            }
        }
        off = fsqrt(acc.value());
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = fsqrt(apq.re * apq.re + apq.im * apq.im);
                if r == T::zero() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // hard-zero negligible couplings once the sweep has settled
                if sweep >= 4 && r <= T::epsilon() * T::of(0.5) * (fabs(app) + fabs(aqq)) {
                    a[(p, q)] = Complex::new(T::zero(), T::zero());
                    a[(q, p)] = Complex::new(T::zero(), T::zero());
                    continue;
                }
                let u = apq.unscale(r);
                let tau = (aqq - app) / (r + r);
                let t = if tau >= T::zero() {
                    T::one() / (tau + fsqrt(T::one() + tau * tau))
                } else {
                    -T::one() / (-tau + fsqrt(T::one() + tau * tau))
                };
                let c = T::one() / fsqrt(T::one() + t * t);
                let s = t * c;
                let su = u.scale(s);
                let su_conj = u.conj().scale(s);
                // columns: A <- A G
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip.scale(c) - su_conj * aiq;
                    a[(i, q)] = su * aip + aiq.scale(c);
                }
                // rows: A <- G^H A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj.scale(c) - su * aqj;
                    a[(q, j)] = su_conj * apj + aqj.scale(c);
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip.scale(c) - su_conj * viq;
                    v[(i, q)] = su * vip + viq.scale(c);
                }
            }
        }
    }
    if !converged {
        return Err(NcError::Accuracy {
            achieved: off.as_f64(),
            target: tol.as_f64(),
        });
    }
    let vals = DVector::from_fn(n, |i, _| a[(i, i)].re);
    let rebuilt = &v
        * DMatrix::from_diagonal(&vals.map(|l| Complex::new(l, T::zero())))
        * v.adjoint();
    let defect = frobenius(&(rebuilt - &h));
    let target = T::of(1e-10) * (frobenius(&h) + T::one());
    if !(defect <= target) {
        return Err(NcError::Accuracy {
            achieved: defect.as_f64(),
            target: target.as_f64(),
        });
    }
    Ok((vals, v))
}

fn min_eigenvalue<T: Real + RealField>(m: &DMatrix<Complex<T>>) -> Result<T, NcError> {
    let (vals, _) = hermitian_eigen(m)?;
    let mut worst = T::infinity();
    for &l in vals.iter() {
        worst = crate::scalar::rmin(worst, l);
    }
    Ok(worst)
}

/// Hermitian square root: spectral with eigenvalues clamped at zero.
///
/// An exactly diagonal input takes the entrywise path
/// `sqrt(max(entry, 0))`, which keeps diagonal embeddings bit-identical to
/// the commutative square functions.
fn hermitian_sqrt<T: Real + RealField>(
    m: &DMatrix<Complex<T>>,
) -> Result<DMatrix<Complex<T>>, NcError> {
    let n = m.nrows();
    let off_diag_zero = (0..n).all(|r| {
        (0..n).all(|c| r == c || (m[(r, c)].re == T::zero() && m[(r, c)].im == T::zero()))
    });
    if off_diag_zero {
        return Ok(DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex::new(fsqrt(rmax(m[(r, c)].re, T::zero())), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }));
    }
    let (vals, vecs) = hermitian_eigen(m)?;
    let roots = DMatrix::from_diagonal(
        &vals.map(|l| Complex::new(fsqrt(rmax(l, T::zero())), T::zero())),
    );
    Ok(&vecs * roots * vecs.adjoint())
}

impl<T: Real + RealField> TracialElement<T> {
    pub fn new(
        filtration: Arc<MatrixAlgebraFiltration>,
        m: DMatrix<Complex<T>>,
    ) -> Result<Self, NcError> {
        let d = filtration.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(NcError::ShapeMismatch {
                expected: d,
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NcError::NonFinite);
        }
        Ok(TracialElement { filtration, m })
    }

    pub fn from_real(
        filtration: Arc<MatrixAlgebraFiltration>,
        m: DMatrix<T>,
    ) -> Result<Self, NcError> {
        let cm = m.map(|x| Complex::new(x, T::zero()));
        Self::new(filtration, cm)
    }

    pub fn identity(filtration: Arc<MatrixAlgebraFiltration>) -> Self {
        let d = filtration.dim();
        TracialElement {
            filtration,
            m: DMatrix::identity(d, d),
        }
    }

    pub fn filtration(&self) -> &Arc<MatrixAlgebraFiltration> {
        &self.filtration
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.m
    }

    pub fn depth(&self) -> usize {
        self.filtration.depth()
    }

    pub fn dim(&self) -> usize {
        self.filtration.dim()
    }

    pub fn adjoint(&self) -> Self {
        TracialElement {
            filtration: Arc::clone(&self.filtration),
            m: self.m.adjoint(),
        }
    }

    /// Largest entrywise deviation from self-adjointness.
    pub fn hermitian_defect(&self) -> T {
        let a = self.m.adjoint();
        let mut worst = T::zero();
        for (x, y) in self.m.iter().zip(a.iter()) {
            worst = rmax(worst, rmax(fabs(x.re - y.re), fabs(x.im - y.im)));
        }
        worst
    }

    /// Normalized trace `tau = Tr/D`.
    pub fn trace(&self) -> Complex<T> {
        let mut acc = CKahan::new();
        for i in 0..self.dim() {
            acc.add(self.m[(i, i)]);
        }
        acc.value().unscale(T::of(self.dim() as f64))
    }

    fn same_shape(&self, other: &Self) -> Result<(), NcError> {
        if !Arc::ptr_eq(&self.filtration, &other.filtration)
            && self.filtration != other.filtration
        {
            return Err(NcError::FiltrationMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, NcError> {
        self.same_shape(other)?;
        Ok(TracialElement {
            filtration: Arc::clone(&self.filtration),
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NcError> {
        self.same_shape(other)?;
        Ok(TracialElement {
            filtration: Arc::clone(&self.filtration),
            m: &self.m - &other.m,
        })
    }

    /// `E_n`: identity on the first `n` factors, normalized partial trace
    /// over the rest. The trace over each block runs in index order with
    /// Kahan compensation; that order is what makes diagonal elements
    /// reproduce the commutative conditional expectation exactly.
    pub fn condexp(&self, n: usize) -> Result<Self, NcError> {
        let depth = self.depth();
        if n == 0 || n > depth {
            return Err(NcError::LevelRange { level: n, depth });
        }
        let lead = self.filtration.leading_dim(n);
        let trail = self.filtration.trailing_dim(n);
        let d = self.dim();
        let mut out = DMatrix::from_element(d, d, Complex::new(T::zero(), T::zero()));
        let scale = T::of(trail as f64);
        for ra in 0..lead {
            for ca in 0..lead {
                let mut acc = CKahan::new();
                for b in 0..trail {
                    acc.add(self.m[(ra * trail + b, ca * trail + b)]);
                }
                let avg = acc.value().unscale(scale);
                for b in 0..trail {
                    out[(ra * trail + b, ca * trail + b)] = avg;
                }
            }
        }
        Ok(TracialElement {
            filtration: Arc::clone(&self.filtration),
            m: out,
        })
    }

    /// `E_1`, the projection onto the fixed-point subalgebra.
    pub fn fixed_projection(&self) -> Result<Self, NcError> {
        self.condexp(1)
    }

    /// `dx_n = E_n x - E_{n-1} x` with `E_0 = 0`.
    pub fn mdiff(&self, n: usize) -> Result<Self, NcError> {
        if n == 1 {
            return self.condexp(1);
        }
        self.condexp(n)?.sub(&self.condexp(n - 1)?)
    }

    /// All differences `dx_1, ..., dx_d`, each from a fresh pair of
    /// conditional expectations.
    pub fn difference_stack(&self) -> Result<Vec<DMatrix<Complex<T>>>, NcError> {
        let depth = self.depth();
        let mut out = Vec::with_capacity(depth);
        let mut prev: Option<DMatrix<Complex<T>>> = None;
        for n in 1..=depth {
            let cur = self.condexp(n)?.m;
            match &prev {
                None => out.push(cur.clone()),
                Some(p) => out.push(&cur - p),
            }
            prev = Some(cur);
        }
        Ok(out)
    }

    /// `(tau(|x|^p))^{1/p}` through singular values; `p = inf` is the
    /// operator norm. Singular values come from the Hermitian spectrum of
    /// `x^H x`, clamped at zero before the square root.
    pub fn lp_norm(&self, p: Exponent<T>) -> Result<T, NcError> {
        let gram = adjoint_times(&self.m, &self.m);
        let (vals, _) = hermitian_eigen(&gram)?;
        match p {
            Exponent::Infinity => {
                let mut worst = T::zero();
                for &l in vals.iter() {
                    worst = rmax(worst, l);
                }
                Ok(fsqrt(worst))
            }
            Exponent::Finite(p) => {
                if !(p >= T::one()) || !p.is_finite() {
                    return Err(NcError::PDomain(p.as_f64()));
                }
                let mut acc = KahanSum::new();
                for &l in vals.iter() {
                    acc.add(num_traits::Float::powf(fsqrt(rmax(l, T::zero())), p));
                }
                let mean = acc.value() / T::of(self.dim() as f64);
                Ok(num_traits::Float::powf(mean, T::one() / p))
            }
        }
    }

    /// Serializes as `{factor_dims, data}` with `data` the row-major
    /// interleaved `[re, im, re, im, ...]` entries.
    pub fn to_json_string(&self) -> Result<String, NcError>
    where
        T: Serialize,
    {
        let d = self.dim();
        let mut data = Vec::with_capacity(2 * d * d);
        for r in 0..d {
            for c in 0..d {
                data.push(self.m[(r, c)].re);
                data.push(self.m[(r, c)].im);
            }
        }
        let doc = NcJson {
            factor_dims: self.filtration.factor_dims.clone(),
            data,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self, NcError>
    where
        T: serde::de::DeserializeOwned,
    {
        let doc: NcJson<T> = serde_json::from_str(text)?;
        let filt = Arc::new(MatrixAlgebraFiltration::new(doc.factor_dims)?);
        let d = filt.dim();
        if doc.data.len() != 2 * d * d {
            return Err(NcError::ShapeMismatch {
                expected: d,
                rows: doc.data.len() / (2 * d).max(1),
                cols: d,
            });
        }
        let m = DMatrix::from_fn(d, d, |r, c| {
            let at = 2 * (r * d + c);
            Complex::new(doc.data[at], doc.data[at + 1])
        });
        Self::new(filt, m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct NcJson<T> {
    factor_dims: Vec<usize>,
    data: Vec<T>,
}

/// Places values on the diagonal; atom `a` corresponds to the `a`-th
/// diagonal entry under the lexicographic tensor indexing, matching
/// [`shadow_filtration`] blocks.
pub fn diagonal_embedding<T: Real + RealField>(
    filtration: Arc<MatrixAlgebraFiltration>,
    values: &[T],
) -> Result<TracialElement<T>, NcError> {
    let d = filtration.dim();
    if values.len() != d {
        return Err(NcError::ShapeMismatch {
            expected: d,
            rows: values.len(),
            cols: 1,
        });
    }
    let m = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex::new(values[r], T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    });
    TracialElement::new(filtration, m)
}

/// `S_c^2 = sum_n dx_n^* dx_n` and `S_r^2 = sum_n dx_n dx_n^*` from
/// `from_level` on; plain entrywise accumulation in level order, exactly
/// like the commutative square function.
pub fn square_sums<T: Real + RealField>(
    x: &TracialElement<T>,
    from_level: usize,
) -> Result<(DMatrix<Complex<T>>, DMatrix<Complex<T>>), NcError> {
    let depth = x.depth();
    if from_level == 0 || from_level > depth + 1 {
        return Err(NcError::LevelRange {
            level: from_level,
            depth,
        });
    }
    let d = x.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let mut col = DMatrix::from_element(d, d, zero);
    let mut row = DMatrix::from_element(d, d, zero);
    let diffs = x.difference_stack()?;
    for dx in diffs.iter().skip(from_level - 1) {
        let c = adjoint_times(dx, dx);
        let r = times_adjoint(dx, dx);
        for (o, &v) in col.iter_mut().zip(c.iter()) {
            *o += v;
        }
        for (o, &v) in row.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    Ok((col, row))
}

/// Column and row martingale square functions `(S_c(x), S_r(x))`.
pub fn nc_square_functions<T: Real + RealField>(
    x: &TracialElement<T>,
    from_level: usize,
) -> Result<(TracialElement<T>, TracialElement<T>), NcError> {
    let (c2, r2) = square_sums(x, from_level)?;
    Ok((
        TracialElement {
            filtration: Arc::clone(&x.filtration),
            m: hermitian_sqrt(&c2)?,
        },
        TracialElement {
            filtration: Arc::clone(&x.filtration),
            m: hermitian_sqrt(&r2)?,
        },
    ))
}

/// `G_c^2 = sum_{i,j} B_ij dx_{i+2}^* dx_{j+2}` and the row analogue, with
/// the same kernel matrix as the commutative closed form and the same
/// `i`-major plain accumulation grouped `B_ij * (dx_i^* dx_j)`.
pub fn gfunction_sums<T: Real + RealField>(
    seq: &SubordinationSequence<T>,
    x: &TracialElement<T>,
) -> Result<(DMatrix<Complex<T>>, DMatrix<Complex<T>>), NcError> {
    let depth = x.depth();
    let d = x.dim();
    let zero = Complex::new(T::zero(), T::zero());
    if depth < 2 {
        let z = DMatrix::from_element(d, d, zero);
        return Ok((z.clone(), z));
    }
    let kernel = KernelMatrix::from_sequence(seq, depth).map_err(Box::new)?;
    let size = depth - 1;
    let diffs = x.difference_stack()?;
    let mut col = DMatrix::from_element(d, d, zero);
    let mut row = DMatrix::from_element(d, d, zero);
    for i in 0..size {
        for j in 0..size {
            let b = kernel.entry(i, j);
            let pc = adjoint_times(&diffs[i + 1], &diffs[j + 1]);
            let pr = times_adjoint(&diffs[i + 1], &diffs[j + 1]);
            for (o, &v) in col.iter_mut().zip(pc.iter()) {
                *o += v.scale(b);
            }
            for (o, &v) in row.iter_mut().zip(pr.iter()) {
                *o += v.scale(b);
            }
        }
    }
    Ok((col, row))
}

/// `(G_c(x), G_r(x))` as Hermitian square roots of [`gfunction_sums`].
pub fn nc_gfunction<T: Real + RealField>(
    seq: &SubordinationSequence<T>,
    x: &TracialElement<T>,
) -> Result<(TracialElement<T>, TracialElement<T>), NcError> {
    let (c2, r2) = gfunction_sums(seq, x)?;
    Ok((
        TracialElement {
            filtration: Arc::clone(&x.filtration),
            m: hermitian_sqrt(&c2)?,
        },
        TracialElement {
            filtration: Arc::clone(&x.filtration),
            m: hermitian_sqrt(&r2)?,
        },
    ))
}

/// One operator-order gap `A - B`: its smallest eigenvalue and the scale
/// the tolerance is measured against.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct GapRecord<T> {
    pub name: &'static str,
    pub min_eigenvalue: T,
    pub scale: T,
}

impl<T: Real> GapRecord<T> {
    pub fn pass(&self, tol: T) -> bool {
        self.min_eigenvalue >= -tol * self.scale
    }
}

/// PSD verification of the two-sided operator inequalities
/// `(7/60) S_c(x - Fx)^2 <= G_c(x)^2 <= (23/60) S_c(x - Fx)^2` (and rows),
/// plus the square-root comparisons (the square root is operator
/// increasing, so both layers must hold).
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct NcReport<T> {
    pub check: String,
    pub depth: usize,
    pub dim: usize,
    pub gaps: Vec<GapRecord<T>>,
}

impl<T: Real> NcReport<T> {
    pub fn pass(&self, tol: T) -> bool {
        self.gaps.iter().all(|g| g.pass(tol))
    }

    pub fn worst_relative(&self) -> T {
        let mut worst = T::zero();
        for g in &self.gaps {
            if g.scale > T::zero() {
                worst = rmax(worst, -g.min_eigenvalue / g.scale);
            }
        }
        worst
    }
}

/// Runs the operator-order checks against the power-16 sequence.
pub fn verify_nc_theorem<T: Real + RealField>(
    x: &TracialElement<T>,
) -> Result<NcReport<T>, NcError> {
    let depth = x.depth();
    let seq = SubordinationSequence::theorem_a(depth.max(2) - 1)?;
    verify_nc_theorem_with(x, &seq)
}

pub fn verify_nc_theorem_with<T: Real + RealField>(
    x: &TracialElement<T>,
    seq: &SubordinationSequence<T>,
) -> Result<NcReport<T>, NcError> {
    let lo = T::of(7.0) / T::of(60.0);
    let hi = T::of(23.0) / T::of(60.0);
    let (sc2, sr2) = square_sums(x, 2)?;
    let (gc2, gr2) = gfunction_sums(seq, x)?;

    let mut gaps = Vec::with_capacity(8);
    let mut push = |name: &'static str,
                    gap: DMatrix<Complex<T>>,
                    scale: T|
     -> Result<(), NcError> {
        gaps.push(GapRecord {
            name,
            min_eigenvalue: min_eigenvalue(&gap)?,
            scale,
        });
        Ok(())
    };

    let scale_c = rmax(frobenius(&sc2), frobenius(&gc2));
    let scale_r = rmax(frobenius(&sr2), frobenius(&gr2));
    push("column_lower", &gc2 - sc2.scale(lo), scale_c)?;
    push("column_upper", sc2.scale(hi) - &gc2, scale_c)?;
    push("row_lower", &gr2 - sr2.scale(lo), scale_r)?;
    push("row_upper", sr2.scale(hi) - &gr2, scale_r)?;

    let sc = hermitian_sqrt(&sc2)?;
    let sr = hermitian_sqrt(&sr2)?;
    let gc = hermitian_sqrt(&gc2)?;
    let gr = hermitian_sqrt(&gr2)?;
    let rlo = fsqrt(lo);
    let rhi = fsqrt(hi);
    let scale_rc = rmax(frobenius(&sc), frobenius(&gc));
    let scale_rr = rmax(frobenius(&sr), frobenius(&gr));
    push("column_lower_sqrt", &gc - sc.scale(rlo), scale_rc)?;
    push("column_upper_sqrt", sc.scale(rhi) - &gc, scale_rc)?;
    push("row_lower_sqrt", &gr - sr.scale(rlo), scale_rr)?;
    push("row_upper_sqrt", sr.scale(rhi) - &gr, scale_rr)?;

    Ok(NcReport {
        check: "nc_theorem".to_string(),
        depth: x.depth(),
        dim: x.dim(),
        gaps,
    })
}

/// Hardy-type norms for `p >= 2`, both sides applied to `y = x - Fx`:
/// `|x|_{H_p} = max(|S_c(y)|_p, |S_r(y)|_p)` and the semigroup analogue
/// `|x|_{p,F} = max(|G_c(y)|_p, |G_r(y)|_p)`, with the bracket
/// `sqrt(7/60) |x|_{H_p} <= |x|_{p,F} <= sqrt(23/60) |x|_{H_p}`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize + Real"))]
pub struct HardyReport<T> {
    pub p: Exponent<T>,
    pub hardy: T,
    pub semigroup: T,
    pub lower_margin: T,
    pub upper_margin: T,
}

impl<T: Real> HardyReport<T> {
    pub fn pass(&self, slack: T) -> bool {
        self.lower_margin >= -slack && self.upper_margin >= -slack
    }
}

pub fn hardy_norm<T: Real + RealField>(
    x: &TracialElement<T>,
    p: Exponent<T>,
    seq: &SubordinationSequence<T>,
) -> Result<HardyReport<T>, NcError> {
    if let Exponent::Finite(v) = p {
        if !(v >= T::of(2.0)) || !v.is_finite() {
            return Err(NcError::HardyUnsupported(v.as_f64()));
        }
    }
    let y = x.sub(&x.fixed_projection()?)?;
    let (sc, sr) = nc_square_functions(&y, 1)?;
    let (gc, gr) = nc_gfunction(seq, &y)?;
    let hardy = rmax(sc.lp_norm(p)?, sr.lp_norm(p)?);
    let semigroup = rmax(gc.lp_norm(p)?, gr.lp_norm(p)?);
    let lo = fsqrt(T::of(7.0) / T::of(60.0)) * hardy;
    let hi = fsqrt(T::of(23.0) / T::of(60.0)) * hardy;
    let (lower_margin, upper_margin) = if hardy > T::zero() {
        ((semigroup - lo) / lo, (hi - semigroup) / hi)
    } else {
        (T::zero(), T::zero())
    };
    Ok(HardyReport {
        p,
        hardy,
        semigroup,
        lower_margin,
        upper_margin,
    })
}

/// Choi matrix of `E_n`: `C = sum_{kl} e_kl (x) E_n(e_kl)`; complete
/// positivity is equivalent to `C >= 0`.
pub fn choi_matrix<T: Real + RealField>(
    filtration: &Arc<MatrixAlgebraFiltration>,
    n: usize,
) -> Result<DMatrix<Complex<T>>, NcError> {
    let depth = filtration.depth();
    if n == 0 || n > depth {
        return Err(NcError::LevelRange { level: n, depth });
    }
    let d = filtration.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let mut c = DMatrix::from_element(d * d, d * d, zero);
    for k in 0..d {
        for l in 0..d {
            let mut unit = DMatrix::from_element(d, d, zero);
            unit[(k, l)] = Complex::new(T::one(), T::zero());
            let e = TracialElement {
                filtration: Arc::clone(filtration),
                m: unit,
            }
            .condexp(n)?;
            for r in 0..d {
                for cc in 0..d {
                    c[(k * d + r, l * d + cc)] = e.m[(r, cc)];
                }
            }
        }
    }
    Ok(c)
}

/// `T^t x = sum_n exp(-t b_{n-1}) dx_n`, mirroring the commutative
/// combination: the first difference is cloned (coefficient exactly 1),
/// later ones accumulate with plain `+= c * dx`.
pub fn nc_operator<T: Real + RealField>(
    seq: &SubordinationSequence<T>,
    x: &TracialElement<T>,
    t: T,
) -> Result<TracialElement<T>, NcError> {
    let depth = x.depth();
    if seq.depth() < depth {
        return Err(NcError::Semigroup(SemigroupError::DepthMismatch {
            seq: seq.depth(),
            filtration: depth,
        }));
    }
    let diffs = x.difference_stack()?;
    let mut out = diffs[0].clone();
    for (n, dx) in diffs.iter().enumerate().skip(1) {
        let c = seq.coefficient(n + 1, t)?;
        for (o, &v) in out.iter_mut().zip(dx.iter()) {
            *o += v.scale(c);
        }
    }
    Ok(TracialElement {
        filtration: Arc::clone(&x.filtration),
        m: out,
    })
}

/// Worst violations of the noncommutative semigroup axioms on samples:
/// unitality (exact), trace-selfadjointness, positivity preservation,
/// `L_p` contraction for `p` in `{1, 2, inf}`, and the semigroup law.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct NcAxiomReport<T> {
    pub depth: usize,
    pub dim: usize,
    pub grid_len: usize,
    pub unital: T,
    pub selfadjoint: T,
    pub positivity: T,
    pub contraction: T,
    pub law: T,
    pub worst: T,
}

impl<T: Real> NcAxiomReport<T> {
    pub fn pass(&self, tol: T) -> bool {
        self.worst <= tol
    }
}

pub fn verify_nc_axioms<T: Real + RealField>(
    seq: &SubordinationSequence<T>,
    samples: &[TracialElement<T>],
    t_grid: &[T],
) -> Result<NcAxiomReport<T>, NcError> {
    assert!(!samples.is_empty(), "need at least one sample");
    let depth = samples[0].depth();
    let dim = samples[0].dim();
    let one = TracialElement::identity(Arc::clone(samples[0].filtration()));
    let ps = [
        Exponent::Finite(T::one()),
        Exponent::Finite(T::of(2.0)),
        Exponent::Infinity,
    ];

    let mut unital = T::zero();
    let mut selfadjoint = T::zero();
    let mut positivity = T::zero();
    let mut contraction = T::zero();
    let mut law = T::zero();

    for &t in t_grid {
        let tone = nc_operator(seq, &one, t)?;
        for (o, i) in tone.m.iter().zip(one.m.iter()) {
            unital = rmax(unital, rmax(fabs(o.re - i.re), fabs(o.im - i.im)));
        }
    }

    for (idx, x) in samples.iter().enumerate() {
        let partner = &samples[(idx + 1) % samples.len()];
        // positivity input: a PSD element built from the sample
        let psd = TracialElement {
            filtration: Arc::clone(x.filtration()),
            m: adjoint_times(&x.m, &x.m),
        };
        let psd_scale = rmax(frobenius(&psd.m), T::one());
        let norms: Vec<T> = ps
            .iter()
            .map(|&p| x.lp_norm(p))
            .collect::<Result<_, _>>()?;
        for &t in t_grid {
            let tx = nc_operator(seq, x, t)?;
            for (&p, &nx) in ps.iter().zip(norms.iter()) {
                let nt = tx.lp_norm(p)?;
                if nx > T::zero() {
                    contraction = rmax(contraction, (nt - nx) / nx);
                }
            }
            let lhs = trace_product(&tx.m, &partner.m);
            let ty = nc_operator(seq, partner, t)?;
            let rhs = trace_product(&x.m, &ty.m);
            let dev = (lhs - rhs).norm() / (T::one() + lhs.norm());
            selfadjoint = rmax(selfadjoint, dev);

            let tpsd = nc_operator(seq, &psd, t)?;
            let min = min_eigenvalue(&tpsd.m)?;
            positivity = rmax(positivity, -min / psd_scale);
        }
        // semigroup law on a thinned pair grid
        for (i, &t) in t_grid.iter().enumerate().step_by(3) {
            let tx = nc_operator(seq, x, t)?;
            for &s in t_grid.iter().skip(i % 2).step_by(4) {
                let lhs = nc_operator(seq, &tx, s)?;
                let rhs = nc_operator(seq, x, s + t)?;
                let diff = frobenius(&(&lhs.m - &rhs.m)) / T::of(f64::sqrt(dim as f64));
                let base = rmax(x.lp_norm(Exponent::Finite(T::of(2.0)))?, T::one());
                law = rmax(law, diff / base);
            }
        }
    }

    let mut worst = unital;
    for v in [selfadjoint, positivity, contraction, law] {
        worst = rmax(worst, v);
    }
    Ok(NcAxiomReport {
        depth,
        dim,
        grid_len: t_grid.len(),
        unital,
        selfadjoint,
        positivity,
        contraction,
        law,
        worst,
    })
}
