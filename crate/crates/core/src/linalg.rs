//! Small fixed-size linear algebra for a single degree of freedom.
//!
//! Phase-space points are ordered `x = (p, q)`. The symplectic matrix is
//! `J = [[0, -1], [1, 0]]`, so that `ξ ∧ x = ξ_p q − ξ_q p = (Jξ)·x`.

use nalgebra::{Matrix2, Vector2};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// The symplectic form `J`.
pub fn symplectic_j() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// Wedge product `a ∧ b = a_p b_q − a_q b_p`.
pub fn wedge(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// `|CᵀJC − J|_max`, zero for a symplectic `C`.
pub fn symplectic_residual(c: &Mat2) -> f64 {
    let j = symplectic_j();
    (c.transpose() * j * c - j).abs().max()
}

/// Matrix exponential of a general 2×2 matrix.
///
/// Splits off the trace and uses `K² = −det(K)·I` for the traceless part,
/// so `exp(K) = c·I + s·K` with `c`, `s` the even/odd parts of `cosh √δ`.
pub fn expm2(a: &Mat2) -> Mat2 {
    let half_trace = 0.5 * a.trace();
    let k = a - Mat2::identity() * half_trace;
    let delta = -k.determinant();
    let (c, s) = even_odd_cosh(delta);
    (Mat2::identity() * c + k * s) * half_trace.exp()
}

/// Returns `(cosh √δ, sinh √δ / √δ)` continued analytically through δ = 0.
fn even_odd_cosh(delta: f64) -> (f64, f64) {
    if delta.abs() < 1e-4 {
        // Taylor series; eight terms are far below f64 resolution at |δ| < 1e-4.
        let mut c = 0.0;
        let mut s = 0.0;
        let mut term = 1.0;
        for k in 0..8 {
            let k2 = 2.0 * k as f64;
            c += term;
            s += term / (k2 + 1.0);
            term *= delta / ((k2 + 1.0) * (k2 + 2.0));
        }
        (c, s)
    } else if delta > 0.0 {
        let r = delta.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-delta).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// Eigenvalues of a real symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// Symmetric outer product `v vᵀ`.
pub fn outer(v: &Vec2) -> Mat2 {
    v * v.transpose()
}

/// Symplectic matrix `rot(θ)·diag(e^s, e^{−s})·[[1, 0], [k, 1]]`.
///
/// Every 2×2 symplectic matrix with positive determinant factors this way,
/// which makes it a convenient generator for property tests.
pub fn symplectic_from_params(theta: f64, squeeze: f64, shear: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    let rot = Mat2::new(c, -s, s, c);
    let sq = Mat2::new(squeeze.exp(), 0.0, 0.0, (-squeeze).exp());
    let sh = Mat2::new(1.0, 0.0, shear, 1.0);
    rot * sq * sh
}

/// Infinity norm (max absolute row sum).
pub fn inf_norm(m: &Mat2) -> f64 {
    let r0 = m[(0, 0)].abs() + m[(0, 1)].abs();
    let r1 = m[(1, 0)].abs() + m[(1, 1)].abs();
    r0.max(r1)
}
