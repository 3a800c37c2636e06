//! Finite-difference integration of the Wigner Fokker–Planck equation
//! `∂W/∂t = 2αW − v·∇W + Σ D_ab ∂_a∂_b W`, `v = (2JH − α)x + Jb`.
//!
//! Fourth-order central differences in space with zero padding outside the
//! grid, classical RK4 in time.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::linalg::{Mat2, Vec2};
use crate::model::OpenSystem;

/// Safety factor on the explicit stability bound.
pub const CFL: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct FokkerPlanckReport {
    pub field: GridField,
    pub steps: usize,
    pub dt: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
}

struct Operator {
    drift: Mat2,
    offset: Vec2,
    diffusion: Mat2,
    growth: f64,
    origin: [f64; 2],
    h: [f64; 2],
}

fn at(w: &Array2<f64>, i: isize, j: isize) -> f64 {
    let (n, m) = w.dim();
    if i < 0 || j < 0 || i >= n as isize || j >= m as isize {
        0.0
    } else {
        w[[i as usize, j as usize]]
    }
}

fn d1(f: impl Fn(isize) -> f64, h: f64) -> f64 {
    (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h)
}

fn d2(f: impl Fn(isize) -> f64, h: f64) -> f64 {
    (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h)
}

impl Operator {
    fn new(sys: &OpenSystem, field: &GridField) -> Self {
        let h = sys.hamiltonian.matrix();
        let b = sys.hamiltonian.linear();
        let alpha: f64 = sys
            .channels
            .iter()
            .map(|c| c.l_re[1] * c.l_im[0] - c.l_re[0] * c.l_im[1])
            .sum();
        // Hamilton's equations: ṗ = −∂H/∂q, q̇ = ∂H/∂p.
        let drift = Mat2::new(
            -2.0 * h[(1, 0)] - alpha,
            -2.0 * h[(1, 1)],
            2.0 * h[(0, 0)],
            2.0 * h[(0, 1)] - alpha,
        );
        let offset = Vec2::new(-b[1], b[0]);
        // Each real vector l contributes (ħ/2)(Jl)(Jl)ᵀ, with Jl = (−l_q, l_p).
        let mut diffusion = Mat2::zeros();
        for c in &sys.channels {
            for l in [c.l_re, c.l_im] {
                let v = Vec2::new(-l[1], l[0]);
                diffusion += v * v.transpose() * (0.5 * sys.hbar);
            }
        }
        Self {
            drift,
            offset,
            diffusion,
            growth: -drift.trace(),
            origin: field.spec.origin,
            h: field.spec.spacing,
        }
    }

    fn max_speed(&self, shape: [usize; 2]) -> f64 {
        let corners = [
            Vec2::new(self.origin[0], self.origin[1]),
            Vec2::new(self.origin[0] + self.h[0] * shape[0] as f64, self.origin[1]),
            Vec2::new(self.origin[0], self.origin[1] + self.h[1] * shape[1] as f64),
            Vec2::new(
                self.origin[0] + self.h[0] * shape[0] as f64,
                self.origin[1] + self.h[1] * shape[1] as f64,
            ),
        ];
        corners
            .iter()
            .map(|x| (self.drift * x + self.offset).abs().max())
            .fold(0.0, f64::max)
    }

    fn stable_dt(&self, shape: [usize; 2]) -> f64 {
        let hmin = self.h[0].min(self.h[1]);
        let dnorm = self.diffusion.abs().max() * 2.0;
        let speed = self.max_speed(shape);
        let mut bound = f64::INFINITY;
        if dnorm > 0.0 {
            bound = bound.min(hmin * hmin / dnorm);
        }
        if speed > 0.0 {
            bound = bound.min(hmin / speed);
        }
        CFL * bound
    }

    fn apply(&self, w: &Array2<f64>) -> Array2<f64> {
        let (n, m) = w.dim();
        let [hp, hq] = self.h;
        let d = self.diffusion;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ii = i as isize;
                let p = self.origin[0] + hp * i as f64;
                (0..m)
                    .map(|j| {
                        let jj = j as isize;
                        let q = self.origin[1] + hq * j as f64;
                        let v = self.drift * Vec2::new(p, q) + self.offset;
                        let wp = d1(|k| at(w, ii + k, jj), hp);
                        let wq = d1(|k| at(w, ii, jj + k), hq);
                        let wpp = d2(|k| at(w, ii + k, jj), hp);
                        let wqq = d2(|k| at(w, ii, jj + k), hq);
                        let wpq = d1(|a| d1(|b| at(w, ii + a, jj + b), hq), hp);
                        self.growth * w[[i, j]] - v[0] * wp - v[1] * wq
                            + d[(0, 0)] * wpp
                            + 2.0 * d[(0, 1)] * wpq
                            + d[(1, 1)] * wqq
                    })
                    .collect()
            })
            .collect();
        Array2::from_shape_fn((n, m), |(i, j)| rows[i][j])
    }
}

fn axpy(a: &Array2<f64>, s: f64, b: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    Zip::from(&mut out).and(b).for_each(|o, &x| *o += s * x);
    out
}

/// Integrates the real part of `w0` to time `t`. `dt` is an upper bound;
/// the step actually used also respects the stability limit.
pub fn integrate_fokker_planck(sys: &OpenSystem, w0: &GridField, t: f64, dt: f64) -> Result<FokkerPlanckReport> {
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::InvalidParameter("need dt > 0 and t >= 0".into()));
    }
    let op = Operator::new(sys, w0);
    let limit = op.stable_dt(w0.spec.shape);
    let step = dt.min(limit);
    let steps = if t == 0.0 { 0 } else { (t / step).ceil() as usize };
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };

    let mut w = w0.real();
    let area = w0.spec.cell_area();
    let initial_mass = w.sum() * area;
    let initial_norm = w.iter().map(|v| v.abs()).sum::<f64>();
    for k in 0..steps {
        let k1 = op.apply(&w);
        let k2 = op.apply(&axpy(&w, 0.5 * h, &k1));
        let k3 = op.apply(&axpy(&w, 0.5 * h, &k2));
        let k4 = op.apply(&axpy(&w, h, &k3));
        Zip::from(&mut w)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|x, &a, &b, &c, &d| *x += h / 6.0 * (a + 2.0 * b + 2.0 * c + d));
        let norm = w.iter().map(|v| v.abs()).sum::<f64>();
        if !(norm <= 2.0 * initial_norm) {
            return Err(Error::Unstable { time: (k + 1) as f64 * h });
        }
    }
    let final_mass = w.sum() * area;
    Ok(FokkerPlanckReport {
        field: GridField::from_real(w0.spec, w)?,
        steps,
        dt: h,
        initial_mass,
        final_mass,
    })
}
