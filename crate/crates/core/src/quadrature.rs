//! Composite Gauss–Legendre quadrature on `[0, 1]` split at known breakpoints.
//!
//! Each segment is mapped through the smoothstep substitution
//! `m = a + (b - a)(3t² - 2t³)`, which removes square-root endpoint
//! singularities (triangular quantiles, for instance). Pieces whose estimate
//! changes when halved are refined locally; converged pieces are frozen.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss–Legendre nodes per piece.
    pub nodes: usize,
    /// Relative tolerance on the change under halving.
    pub rel_tol: f64,
    /// Absolute floor on the same change over the whole range. Parametric
    /// quantiles are only accurate to about 1e-12, so tiny integrals of them
    /// cannot meet a purely relative tolerance.
    pub abs_tol: f64,
    /// Maximum halving depth of any piece.
    pub max_depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            nodes: 32,
            rel_tol: 1e-10,
            abs_tol: 1e-11,
            max_depth: 40,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Rule<T> {
    // nodes mapped to [0,1] after the smoothstep substitution, with Jacobian folded into weights
    t: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut t = Vec::with_capacity(n);
        let mut ww = Vec::with_capacity(n);
        for (xi, wi) in x.into_iter().zip(w) {
            let u = 0.5 * (xi + 1.0);
            let s = u * u * (3.0 - 2.0 * u);
            let jac = 6.0 * u * (1.0 - u);
            t.push(T::lit(s));
            ww.push(T::lit(0.5 * wi * jac));
        }
        Self { t, w: ww }
    }

    fn apply<F>(&self, f: &F, a: T, b: T) -> Result<(T, T)>
    where
        F: Fn(T) -> Result<T>,
    {
        let h = b - a;
        let mut acc = T::zero();
        let mut abs = T::zero();
        for (&t, &w) in self.t.iter().zip(&self.w) {
            let v = f(a + h * t)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "integrand at m = {}",
                    (a + h * t).to_f64_lossy()
                )));
            }
            acc += w * v;
            abs += w * v.abs();
        }
        Ok((acc * h, abs * h))
    }
}

/// Integrates `f` over `[breakpoints[0], breakpoints.last()]`, never crossing an
/// interior breakpoint with a single piece.
pub fn integrate<T, F>(f: F, breakpoints: &[T], opts: QuadratureOptions) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> Result<T> + Sync,
{
    if breakpoints.len() < 2 {
        return Ok(T::zero());
    }
    let rule = Rule::<T>::new(opts.nodes);
    let segments: Vec<(T, T)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    let total_width = breakpoints[breakpoints.len() - 1] - breakpoints[0];

    // coarse pass fixes the absolute scale used by the local tolerances
    let coarse: Vec<(T, T)> = segments
        .par_iter()
        .map(|&(a, b)| rule.apply(&f, a, b))
        .collect::<Result<_>>()?;
    let coarse_vals: Vec<T> = coarse.iter().map(|c| c.0).collect();
    let coarse_abs: Vec<T> = coarse.iter().map(|c| c.1).collect();
    let scale = pairwise_sum(&coarse_vals).abs().max(pairwise_sum(&coarse_abs));
    let tol = (T::lit(opts.rel_tol) * scale).max(T::lit(opts.abs_tol));

    let pieces: Vec<Result<T>> = segments
        .par_iter()
        .zip(coarse_vals.par_iter())
        .map(|(&(a, b), &est)| refine(&rule, &f, a, b, est, tol, total_width, opts.max_depth))
        .collect();
    let mut vals = Vec::with_capacity(pieces.len());
    for p in pieces {
        vals.push(p?);
    }
    Ok(pairwise_sum(&vals))
}

#[allow(clippy::too_many_arguments)]
fn refine<T, F>(
    rule: &Rule<T>,
    f: &F,
    a: T,
    b: T,
    whole: T,
    tol: T,
    total_width: T,
    max_depth: usize,
) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> Result<T>,
{
    // explicit stack keeps the summation order deterministic (left to right)
    let mut out = Vec::new();
    let mut stack = vec![(a, b, whole, 0usize)];
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = (lo + hi) * T::lit(0.5);
        let (left, _) = rule.apply(f, lo, mid)?;
        let (right, _) = rule.apply(f, mid, hi)?;
        let refined = left + right;
        let local_tol = (tol * (hi - lo) / total_width).max(T::epsilon() * refined.abs());
        if (refined - est).abs() <= local_tol || mid <= lo || mid >= hi {
            out.push(refined);
        } else if depth + 1 >= max_depth {
            return Err(Error::Quadrature {
                last: refined.to_f64_lossy(),
                previous: est.to_f64_lossy(),
            });
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(pairwise_sum(&out))
}
