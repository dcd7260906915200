//! Fixed-order Gauss-Legendre panels with adaptive bisection.
//!
//! The integrands in this crate are smooth and nonnegative between known
//! breakpoints (scale locations of the subordination sequence), so a panel
//! whose bisected value agrees with the whole-panel value relatively is
//! accepted, and relative per-panel control composes into relative global
//! control. Panels that fail to converge within the depth limit surface as
//! an accuracy error carrying the achieved bound.

use thiserror::Error;

use crate::kahan::KahanSum;
use crate::scalar::rmax;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive refinement stalled: achieved relative error {achieved:.3e} over target {target:.3e}")]
    Accuracy { achieved: f64, target: f64 },
    #[error("integration bounds are not ordered or not finite")]
    BadInterval,
}

/// Gauss-Legendre rule on [-1, 1]; nodes found by Newton iteration on the
/// Legendre recurrence, accurate to a few ulp.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

/// Value of P_n and its derivative at x.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 1..n {
        let kf = T::of(k as f64);
        let p2 = ((T::of(2.0) * kf + T::one()) * x * p1 - kf * p0) / (kf + T::one());
        p0 = p1;
        p1 = p2;
    }
    let nf = T::of(n as f64);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "rule order must be at least 2");
        let n = order;
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let pi = T::of(std::f64::consts::PI);
        for i in 0..n.div_ceil(2) {
            let mut x = (pi * (T::of(i as f64) + T::of(0.75)) / (T::of(n as f64) + T::of(0.5))).cos();
            for _ in 0..60 {
                let (p, d) = legendre(n, x);
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= T::epsilon() * rmax(x.abs(), T::one()) {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            let w = T::of(2.0) / ((T::one() - x * x) * d * d);
            nodes[i] = x;
            weights[i] = w;
            nodes[n - 1 - i] = -x;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// One panel over [a, b].
    pub fn integrate<F: FnMut(T) -> T>(&self, f: &mut F, a: T, b: T) -> T {
        let half = T::of(0.5);
        let mid = half * (a + b);
        let rad = half * (b - a);
        let mut acc = KahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc.add(w * f(mid + rad * x));
        }
        rad * acc.value()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOutcome<T> {
    pub value: T,
    pub error_estimate: T,
}

/// Inserts extra breakpoints so no panel is wider than `max_width`.
pub fn chunk_breakpoints<T: Real>(points: &[T], max_width: T) -> Vec<T> {
    let mut out = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if i > 0 {
            let prev = points[i - 1];
            let width = p - prev;
            if width > max_width {
                let pieces = (width / max_width).ceil().as_f64() as usize;
                for j in 1..pieces {
                    out.push(prev + width * T::of(j as f64 / pieces as f64));
                }
            }
        }
        out.push(p);
    }
    out
}

struct Adapt<'a, T, F> {
    f: &'a mut F,
    rule: &'a GaussLegendre<T>,
    rel_tol: T,
    value: KahanSum<T>,
    err: KahanSum<T>,
}

impl<T: Real, F: FnMut(T) -> T> Adapt<'_, T, F> {
    fn panel(&mut self, a: T, b: T, whole: T, floor: T, depth: usize) {
        let mid = T::of(0.5) * (a + b);
        let left = self.rule.integrate(self.f, a, mid);
        let right = self.rule.integrate(self.f, mid, b);
        let two = left + right;
        let err = (whole - two).abs();
        if err <= self.rel_tol * two.abs() + floor || depth == 0 {
            self.value.add(two);
            self.err.add(err);
            return;
        }
        let half_floor = T::of(0.5) * floor;
        self.panel(a, mid, left, half_floor, depth - 1);
        self.panel(mid, b, right, half_floor, depth - 1);
    }
}

/// Adaptive integration over the panels delimited by `breakpoints`
/// (ascending). `rel_tol` is the relative target for the total.
pub fn integrate_adaptive<T: Real, F: FnMut(T) -> T>(
    f: &mut F,
    breakpoints: &[T],
    rel_tol: T,
    max_depth: usize,
    rule: &GaussLegendre<T>,
) -> Result<QuadOutcome<T>, QuadratureError> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] >= w[0]) )
        || breakpoints.iter().any(|p| !p.is_finite())
    {
        return Err(QuadratureError::BadInterval);
    }
    // Coarse pass fixes the absolute floor below which panel errors are noise.
    let mut coarse = KahanSum::new();
    let mut panels = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let v = rule.integrate(f, w[0], w[1]);
        panels.push(v);
        coarse.add(v);
    }
    let floor = rel_tol * coarse.value().abs() / T::of(8.0 * panels.len() as f64)
        + T::of(1e-300);

    let mut state = Adapt {
        f,
        rule,
        rel_tol,
        value: KahanSum::new(),
        err: KahanSum::new(),
    };
    for (i, w) in breakpoints.windows(2).enumerate() {
        state.panel(w[0], w[1], panels[i], floor, max_depth);
    }
    let value = state.value.value();
    let err = state.err.value();
    let scale = rmax(value.abs(), T::of(1e-300));
    if err > rel_tol * scale * T::of(4.0) + T::of(64.0) * floor {
        return Err(QuadratureError::Accuracy {
            achieved: (err / scale).as_f64(),
            target: rel_tol.as_f64(),
        });
    }
    Ok(QuadOutcome {
        value,
        error_estimate: err,
    })
}
