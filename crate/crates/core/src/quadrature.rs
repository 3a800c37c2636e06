//! Globally adaptive Gauss–Legendre quadrature for vector-valued integrands.
//!
//! Each panel is integrated with a 15-point Gauss–Legendre rule and with the
//! same rule on its two halves; the difference is the panel's error estimate.
//! The panel with the largest estimate is bisected until the summed estimate
//! meets `max(abs_tol, rel_tol·|I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 4000,
            initial_panels: 1,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_initial_panels(mut self, n: usize) -> Self {
        self.initial_panels = n.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<const K: usize> {
    pub value: [f64; K],
    pub error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// Nodes and weights on [-1, 1], computed once by Newton iteration on P_n.
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn gauss_legendre(n: usize) -> ([f64; ORDER], [f64; ORDER]) {
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn fixed<const K: usize, F>(f: &mut F, a: f64, b: f64) -> Result<[f64; K]>
where
    F: FnMut(f64) -> Result<[f64; K]>,
{
    let (nodes, weights) = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = [0.0; K];
    for (x, w) in nodes.iter().zip(weights.iter()) {
        let v = f(mid + half * x)?;
        for k in 0..K {
            acc[k] += w * v[k];
        }
    }
    for v in acc.iter_mut() {
        *v *= half;
    }
    Ok(acc)
}

struct Panel<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: f64,
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn evaluate_panel<const K: usize, F>(f: &mut F, a: f64, b: f64) -> Result<Panel<K>>
where
    F: FnMut(f64) -> Result<[f64; K]>,
{
    let whole = fixed(f, a, b)?;
    let mid = 0.5 * (a + b);
    let left = fixed(f, a, mid)?;
    let right = fixed(f, mid, b)?;
    let mut value = [0.0; K];
    let mut error: f64 = 0.0;
    for k in 0..K {
        value[k] = left[k] + right[k];
        error = error.max((value[k] - whole[k]).abs());
    }
    if !error.is_finite() {
        error = f64::INFINITY;
    }
    Ok(Panel { a, b, value, error })
}

fn norm<const K: usize>(v: &[f64; K]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates a fallible vector-valued integrand over `[a, b]`.
pub fn integrate_with<const K: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Estimate<K>>
where
    F: FnMut(f64) -> Result<[f64; K]>,
{
    if a == b {
        return Ok(Estimate {
            value: [0.0; K],
            error: 0.0,
            panels: 0,
            evaluations: 0,
        });
    }
    if b < a {
        let mut est = integrate_with(f, b, a, opts)?;
        for v in est.value.iter_mut() {
            *v = -*v;
        }
        return Ok(est);
    }

    let per_panel = 3 * ORDER;
    let n0 = opts.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        heap.push(evaluate_panel(&mut f, lo, hi)?);
    }
    let mut evaluations = n0 * per_panel;

    loop {
        let mut total = [0.0; K];
        let mut error = 0.0;
        for p in heap.iter() {
            for k in 0..K {
                total[k] += p.value[k];
            }
            error += p.error;
        }
        let target = opts.abs_tol.max(opts.rel_tol * norm(&total));
        if error <= target {
            return Ok(Estimate {
                value: total,
                error,
                panels: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::QuadratureNotConverged {
                panels: heap.len(),
                estimate: error,
                target,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::QuadratureNotConverged {
                panels: heap.len() + 1,
                estimate: error,
                target,
            });
        }
        heap.push(evaluate_panel(&mut f, worst.a, mid)?);
        heap.push(evaluate_panel(&mut f, mid, worst.b)?);
        evaluations += 2 * per_panel;
    }
}

/// Integrates an infallible vector-valued integrand over `[a, b]`.
pub fn integrate<const K: usize, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Estimate<K>>
where
    F: Fn(f64) -> [f64; K],
{
    integrate_with(|x| Ok(f(x)), a, b, opts)
}

/// Iterated 2D integral over the rectangle `[x0, x1] × [y0, y1]`.
///
/// The inner integral runs at a tenth of the outer tolerances so that its
/// error does not dominate the outer estimate.
pub fn integrate_2d<F>(f: F, x: (f64, f64), y: (f64, f64), opts: &QuadOptions) -> Result<Estimate<1>>
where
    F: Fn(f64, f64) -> f64,
{
    let inner_opts = QuadOptions {
        rel_tol: 0.1 * opts.rel_tol,
        abs_tol: 0.1 * opts.abs_tol / (x.1 - x.0).abs().max(1e-300),
        ..*opts
    };
    let mut inner_evals = 0usize;
    let mut inner_error = 0.0f64;
    let est = integrate_with(
        |xv| {
            let inner = integrate(|yv| [f(xv, yv)], y.0, y.1, &inner_opts)?;
            inner_evals += inner.evaluations;
            inner_error = inner_error.max(inner.error);
            Ok(inner.value)
        },
        x.0,
        x.1,
        opts,
    )?;
    Ok(Estimate {
        value: est.value,
        error: est.error + inner_error * (x.1 - x.0).abs(),
        panels: est.panels,
        evaluations: inner_evals,
    })
}
