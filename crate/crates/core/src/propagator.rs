//! Exact propagation of chord and Wigner functions.
//!
//! The evolved chord function is
//! `W̃_t(ξ) = W̃₀(e^{−αt}R_{−t}ξ) · exp(−ξ·M(t)ξ/2ħ) · exp(−(i/ħ) ξ∧d_t)`,
//! where `R_t = exp(2JHt)`, `M(t)` is the damping matrix and `d_t` is the
//! displacement generated by the linear part of the Hamiltonian.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::linalg::{expm2, symplectic_j, wedge, Mat2, Vec2};
use crate::model::{HamiltonianForm, OpenSystem};
use crate::quadrature::{integrate, QuadOptions};
use crate::states::{ChordFn, ChordState, StateKind};

type CMat2 = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMatrix {
    pub matrix: Mat2,
    pub time: f64,
}

pub fn flow(h: &HamiltonianForm, t: f64) -> FlowMatrix {
    FlowMatrix {
        matrix: expm2(&(h.generator() * t)),
        time: t,
    }
}

/// `ξ_t = e^{αt} R_t ξ`.
pub fn chord_flow(sys: &OpenSystem, t: f64, xi: &Vec2) -> Vec2 {
    flow(&sys.hamiltonian, t).matrix * xi * (sys.alpha() * t).exp()
}

/// Drift `d_t` solving `ḋ = (2JH − α)d + Jb`, `d_0 = 0`.
pub fn linear_drift(sys: &OpenSystem, t: f64) -> Result<Vec2> {
    let jb = symplectic_j() * sys.hamiltonian.linear();
    if jb == Vec2::zeros() || t == 0.0 {
        return Ok(Vec2::zeros());
    }
    let a = sys.hamiltonian.generator() - Mat2::identity() * sys.alpha();
    let opts = QuadOptions::default().with_rel_tol(1e-13);
    let est = integrate(
        |s| {
            let v = expm2(&(a * (t - s))) * jb;
            [v[0], v[1]]
        },
        0.0,
        t,
        &opts,
    )?;
    Ok(Vec2::new(est.value[0], est.value[1]))
}

/// Dissipative affine flow of a phase-space point, `e^{−αt}R_t x + d_t`.
pub fn point_flow(sys: &OpenSystem, t: f64, x: &Vec2) -> Result<Vec2> {
    let r = flow(&sys.hamiltonian, t).matrix;
    Ok(r * x * (-sys.alpha() * t).exp() + linear_drift(sys, t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DampingMethod {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingMatrix {
    pub m: Mat2,
    pub time: f64,
    pub method: DampingMethod,
}

impl DampingMatrix {
    /// `M_J = −J M J`, the Wigner-space covariance increment per unit ħ.
    pub fn m_j(&self) -> Mat2 {
        let j = symplectic_j();
        -(j * self.m * j)
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }
}

/// Integrand `e^{2αu} R_uᵀ L R_u` packed as `(m11, m12, m22)`.
fn kernel(k: &Mat2, alpha: f64, gram: &Mat2, u: f64) -> [f64; 3] {
    let r = expm2(&(k * u));
    let m = r.transpose() * gram * r * (2.0 * alpha * u).exp();
    [m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]]
}

fn unpack(v: [f64; 3]) -> Mat2 {
    Mat2::new(v[0], v[1], v[1], v[2])
}

/// `∫_a^b e^{2αu} R_uᵀ L R_u du`.
pub fn kernel_integral(sys: &OpenSystem, a: f64, b: f64, opts: &QuadOptions) -> Result<Mat2> {
    let gram = sys.channel_gram();
    if gram == Mat2::zeros() || a == b {
        return Ok(Mat2::zeros());
    }
    let k = sys.hamiltonian.generator();
    let alpha = sys.alpha();
    let est = integrate(|u| kernel(&k, alpha, &gram, u), a, b, opts)?;
    Ok(unpack(est.value))
}

pub fn damping_matrix(sys: &OpenSystem, t: f64) -> Result<DampingMatrix> {
    damping_matrix_with(sys, t, &QuadOptions::default())
}

/// `M(t) = ∫_{−t}^0 e^{2αu} R_uᵀ L R_u du` with `L = Σ(l′l′ᵀ + l″l″ᵀ)`.
pub fn damping_matrix_with(sys: &OpenSystem, t: f64, opts: &QuadOptions) -> Result<DampingMatrix> {
    Ok(DampingMatrix {
        m: kernel_integral(sys, -t, 0.0, opts)?,
        time: t,
        method: DampingMethod::Quadrature,
    })
}

/// `(1 − e^{−κt})/κ`, continued to `t` at `κ = 0`.
fn phi(kappa: Complex64, t: f64) -> Complex64 {
    let z = kappa * t;
    if z.norm() < 1e-3 {
        let mut term = Complex64::new(t, 0.0);
        let mut sum = term;
        for n in 1..12 {
            term *= -z / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) - (-z).exp()) / kappa
    }
}

/// `I_n = ∫_{−t}^0 uⁿ e^{au} du` for n = 0, 1, 2.
fn moment_integrals(a: f64, t: f64) -> [f64; 3] {
    if (a * t).abs() < 1.0 {
        let mut out = [0.0; 3];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut coeff = 1.0;
            for k in 0..40 {
                let m = (n + k) as f64;
                *slot += coeff * -(-t).powi(n as i32 + k as i32 + 1) / (m + 1.0);
                coeff *= a / (k as f64 + 1.0);
            }
        }
        out
    } else {
        let e = (-a * t).exp();
        let i0 = (1.0 - e) / a;
        let i1 = t * e / a - i0 / a;
        let i2 = -t * t * e / a - 2.0 * i1 / a;
        [i0, i1, i2]
    }
}

/// Closed-form `M(t)` by diagonalizing `2JH`, or by truncating the
/// exponential when `2JH` is nilpotent.
pub fn damping_matrix_closed(sys: &OpenSystem, t: f64) -> Result<DampingMatrix> {
    let gram = sys.channel_gram();
    let k = sys.hamiltonian.generator();
    let alpha = sys.alpha();
    let sigma = sys.sigma();
    let scale = crate::linalg::inf_norm(&k).max(1e-300);

    let m = if sigma.norm() <= 1e-8 * scale || k == Mat2::zeros() {
        if (k * k).abs().max() > 1e-12 * scale * scale {
            return Err(Error::UnsupportedForm(
                "near-parabolic generator is not nilpotent".into(),
            ));
        }
        let [i0, i1, i2] = moment_integrals(2.0 * alpha, t);
        gram * i0 + (k.transpose() * gram + gram * k) * i1 + k.transpose() * gram * k * i2
    } else {
        // Right eigenvectors of K = [[a, b], [c, −a]] for eigenvalues ±σ.
        let (a, b, c) = (k[(0, 0)], k[(0, 1)], k[(1, 0)]);
        let eigvec = |lam: Complex64| {
            let v1 = (Complex64::new(b, 0.0), lam - a);
            let v2 = (lam + a, Complex64::new(c, 0.0));
            let n1 = v1.0.norm_sqr() + v1.1.norm_sqr();
            let n2 = v2.0.norm_sqr() + v2.1.norm_sqr();
            if n1 >= n2 {
                v1
            } else {
                v2
            }
        };
        let (x1, x2) = (eigvec(sigma), eigvec(-sigma));
        let v = CMat2::new(x1.0, x2.0, x1.1, x2.1);
        let p = v
            .try_inverse()
            .ok_or_else(|| Error::UnsupportedForm("defective generator".into()))?;
        let cond = v.norm() * p.norm();
        if !(cond < 1e8) {
            return Err(Error::UnsupportedForm(format!(
                "eigenbasis too ill-conditioned (cond {cond:e})"
            )));
        }
        let gram_c = gram.map(|v| Complex64::new(v, 0.0));
        let amat = v.transpose() * gram_c * v;
        let d = [sigma, -sigma];
        let two_alpha = Complex64::new(2.0 * alpha, 0.0);
        let inner = CMat2::from_fn(|i, j| amat[(i, j)] * phi(two_alpha + d[i] + d[j], t));
        let m = p.transpose() * inner * p;
        let imag = m.map(|z| z.im).abs().max();
        let real = m.map(|z| z.re);
        if imag > 1e-9 * real.abs().max().max(1e-300) && imag > 1e-14 {
            return Err(Error::UnsupportedForm(format!("closed form left imaginary residue {imag:e}")));
        }
        real
    };
    Ok(DampingMatrix {
        m: (m + m.transpose()) * 0.5,
        time: t,
        method: DampingMethod::ClosedForm,
    })
}

/// `exp(−ξ·M(t)ξ/2ħ)`.
pub fn gaussian_factor(sys: &OpenSystem, t: f64, xi: &Vec2) -> Result<f64> {
    let m = damping_matrix(sys, t)?.m;
    Ok((-xi.dot(&(m * xi)) / (2.0 * sys.hbar)).exp())
}

/// Everything needed to evaluate `W̃_t` repeatedly at a fixed time.
#[derive(Debug, Clone, Copy)]
pub struct ChordPropagator {
    pub time: f64,
    pub alpha: f64,
    pub hbar: f64,
    /// `e^{−αt} R_{−t}`, pulling chords back to the initial state.
    pub pullback: Mat2,
    pub damping: DampingMatrix,
    pub drift: Vec2,
}

impl ChordPropagator {
    pub fn new(sys: &OpenSystem, t: f64) -> Result<Self> {
        Self::with_options(sys, t, &QuadOptions::default())
    }

    pub fn with_options(sys: &OpenSystem, t: f64, opts: &QuadOptions) -> Result<Self> {
        let alpha = sys.alpha();
        Ok(Self {
            time: t,
            alpha,
            hbar: sys.hbar,
            pullback: flow(&sys.hamiltonian, -t).matrix * (-alpha * t).exp(),
            damping: damping_matrix_with(sys, t, opts)?,
            drift: linear_drift(sys, t)?,
        })
    }

    pub fn gaussian(&self, xi: &Vec2) -> f64 {
        (-xi.dot(&(self.damping.m * xi)) / (2.0 * self.hbar)).exp()
    }

    pub fn phase(&self, xi: &Vec2) -> Complex64 {
        Complex64::from_polar(1.0, -wedge(xi, &self.drift) / self.hbar)
    }

    pub fn apply(&self, w0: &ChordFn, xi: &Vec2) -> Complex64 {
        w0(&(self.pullback * xi)) * self.gaussian(xi) * self.phase(xi)
    }
}

pub fn evolve_chord(sys: &OpenSystem, state: &ChordState, t: f64, xi: &Vec2) -> Result<Complex64> {
    Ok(ChordPropagator::new(sys, t)?.apply(&state.evaluator(), xi))
}

/// Mean and covariance of an evolved Gaussian Wigner function.
pub fn evolve_gaussian_moments(sys: &OpenSystem, mean: &Vec2, cov: &Mat2, t: f64) -> Result<(Vec2, Mat2)> {
    let r = flow(&sys.hamiltonian, t).matrix;
    let decay = (-sys.alpha() * t).exp();
    let m_j = damping_matrix(sys, t)?.m_j();
    let mean_t = r * mean * decay + linear_drift(sys, t)?;
    let cov_t = r * cov * r.transpose() * (decay * decay) + m_j * sys.hbar;
    Ok((mean_t, (cov_t + cov_t.transpose()) * 0.5))
}

/// The evolved state as a new [`ChordState`].
pub fn evolve_state(sys: &OpenSystem, state: &ChordState, t: f64) -> Result<ChordState> {
    let prop = ChordPropagator::new(sys, t)?;
    let w0 = state.evaluator();
    let eval: ChordFn = Arc::new(move |xi: &Vec2| prop.apply(&w0, xi));
    // Chords reaching the initial support grow at most by ‖(e^{−αt}R_{−t})⁻¹‖.
    let inverse = prop.pullback.try_inverse().unwrap_or_else(Mat2::identity);
    let stretch = inverse.norm().max(1.0);
    let kind = match state.gaussian_moments() {
        Some((mean, cov)) => {
            let (mean, cov) = evolve_gaussian_moments(sys, &mean, &cov, t)?;
            StateKind::Gaussian { mean, cov }
        }
        _ => StateKind::Evolved { time: t },
    };
    Ok(ChordState::from_fn(
        format!("{} @ t={t}", state.label),
        state.hbar,
        state.pure && t == 0.0,
        kind,
        state.extent * stretch,
        eval,
    ))
}

/// Threshold on the chord-box border, as a fraction of `1/2πħ`.
pub const CHORD_TAIL_TOL: f64 = 1e-8;

/// Samples `W_t` on `grid` by Fourier inversion of the evolved chord function
/// on the conjugate chord lattice.
pub fn evolve_wigner_grid(sys: &OpenSystem, state: &ChordState, t: f64, grid: &GridSpec) -> Result<GridField> {
    let prop = ChordPropagator::new(sys, t)?;
    let w0 = state.evaluator();
    wigner_from_chord(move |xi| prop.apply(&w0, xi), sys.hbar, grid)
}

fn fft_index(n: usize, size: usize) -> f64 {
    if n < size.div_ceil(2) {
        n as f64
    } else {
        n as f64 - size as f64
    }
}

/// `W(x) = (1/2πħ) ∫ e^{(i/ħ) ξ∧x} W̃(ξ) dξ` on a uniform grid, via FFT.
pub fn wigner_from_chord<F>(chord: F, hbar: f64, grid: &GridSpec) -> Result<GridField>
where
    F: Fn(&Vec2) -> Complex64 + Sync,
{
    grid.validate()?;
    let [np, nq] = grid.shape;
    let [dp, dq] = grid.spacing;
    let [p0, q0] = grid.origin;
    // Chord lattice conjugate to the phase-space grid.
    let dxi_p = 2.0 * PI * hbar / (nq as f64 * dq);
    let dxi_q = 2.0 * PI * hbar / (np as f64 * dp);

    // f[n][m] = W̃(m δξ_p, n δξ_q) e^{(i/ħ)(m δξ_p q0 − n δξ_q p0)}.
    let mut rows: Vec<Vec<Complex64>> = (0..np)
        .into_par_iter()
        .map(|n| {
            let xq = fft_index(n, np) * dxi_q;
            (0..nq)
                .map(|m| {
                    let xp = fft_index(m, nq) * dxi_p;
                    let phase = (xp * q0 - xq * p0) / hbar;
                    chord(&Vec2::new(xp, xq)) * Complex64::from_polar(1.0, phase)
                })
                .collect()
        })
        .collect();

    let norm = 1.0 / (2.0 * PI * hbar);
    let border = rows
        .iter()
        .enumerate()
        .flat_map(|(n, row)| {
            let full = n == np / 2;
            row.iter()
                .enumerate()
                .filter(move |(m, _)| full || *m == nq / 2)
                .map(|(_, v)| v.norm())
        })
        .fold(0.0f64, f64::max);
    if border > CHORD_TAIL_TOL * norm {
        return Err(Error::GridTooCoarse {
            tail: border / norm,
            tolerance: CHORD_TAIL_TOL,
        });
    }

    let mut planner = FftPlanner::<f64>::new();
    let inv_q = planner.plan_fft_inverse(nq);
    let fwd_p = planner.plan_fft_forward(np);
    rows.par_iter_mut().for_each(|row| inv_q.process(row));

    let scale = dxi_p * dxi_q / (2.0 * PI * hbar);
    let columns: Vec<Vec<Complex64>> = (0..nq)
        .into_par_iter()
        .map(|k| {
            let mut col: Vec<Complex64> = rows.iter().map(|r| r[k]).collect();
            fwd_p.process(&mut col);
            col
        })
        .collect();
    let values = Array2::from_shape_fn((np, nq), |(j, k)| Complex64::new(columns[k][j].re * scale, 0.0));
    let field = GridField::new(*grid, values)?;

    let edge = field.border_max_abs();
    if edge > CHORD_TAIL_TOL * norm {
        return Err(Error::DomainTooSmall {
            edge: edge / norm,
            tolerance: CHORD_TAIL_TOL,
        });
    }
    Ok(field)
}

/// Central-difference residual of the chord master equation
/// `∂_t W̃ + ((2JH + α)ξ)·∇W̃ + (1/2ħ)(ξ·Lξ)W̃ + (i/ħ)(b·ξ)W̃ = 0`.
///
/// Second-order one-sided differences are used in time when `t < h`.
pub fn chord_pde_residual(sys: &OpenSystem, state: &ChordState, t: f64, xi: &Vec2, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("step h must be positive".into()));
    }
    let opts = QuadOptions::default().with_rel_tol(1e-14).with_abs_tol(1e-300);
    let w0 = state.evaluator();
    let at = |time: f64, x: &Vec2| -> Result<Complex64> {
        Ok(ChordPropagator::with_options(sys, time, &opts)?.apply(&w0, x))
    };

    let dt = if t >= h {
        (at(t + h, xi)? - at(t - h, xi)?) / (2.0 * h)
    } else {
        (-3.0 * at(t, xi)? + 4.0 * at(t + h, xi)? - at(t + 2.0 * h, xi)?) / (2.0 * h)
    };

    let prop = ChordPropagator::with_options(sys, t, &opts)?;
    let w = |x: Vec2| prop.apply(&w0, &x);
    let ep = Vec2::new(h, 0.0);
    let eq = Vec2::new(0.0, h);
    let grad = [
        (w(xi + ep) - w(xi - ep)) / (2.0 * h),
        (w(xi + eq) - w(xi - eq)) / (2.0 * h),
    ];
    let v = (sys.hamiltonian.generator() + Mat2::identity() * sys.alpha()) * xi;
    let transport = grad[0] * v[0] + grad[1] * v[1];
    let value = w(*xi);
    let diffusion = xi.dot(&(sys.channel_gram() * xi)) / (2.0 * sys.hbar);
    let shift = Complex64::new(0.0, sys.hamiltonian.linear().dot(xi) / sys.hbar);
    Ok((dt + transport + value * (diffusion + shift)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigenvalues, symplectic_from_params, symplectic_residual};
    use crate::model::{symplectic_transform, LindbladChannel};
    use crate::states::{cat_state, cat_wigner_line, coherent_state, CatParameters};
    use proptest::prelude::*;

    fn photon(nbar: f64) -> OpenSystem {
        OpenSystem::photon_bath(1.0, 1.0, nbar, 1.0).unwrap()
    }

    #[test]
    fn free_particle_flow_is_shear() {
        let r = flow(&HamiltonianForm::free_particle(), 1.7).matrix;
        assert!((r - Mat2::new(1.0, 0.0, 1.7, 1.0)).abs().max() < 1e-15);
        assert_eq!(flow(&HamiltonianForm::harmonic(1.0), 0.0).matrix, Mat2::identity());
    }

    #[test]
    fn harmonic_quarter_period() {
        let r = flow(&HamiltonianForm::harmonic(1.0), std::f64::consts::FRAC_PI_2).matrix;
        assert!((r - symplectic_j()).abs().max() < 1e-15);
        assert!(symplectic_residual(&r) < 1e-14);
    }

    #[test]
    fn chord_flow_examples() {
        let h0 = HamiltonianForm::quadratic(Mat2::zeros()).unwrap();
        let ch = LindbladChannel::new(Vec2::new(0.0, 1.0), Vec2::new(0.5, 0.0)).unwrap();
        let sys = OpenSystem::new(h0, vec![ch], 1.0).unwrap();
        assert!((sys.alpha() - 0.5).abs() < 1e-15);
        let out = chord_flow(&sys, 1.0, &Vec2::new(1.0, 0.0));
        assert!((out - Vec2::new(0.5f64.exp(), 0.0)).norm() < 1e-15);
        let bath = photon(0.0);
        let xi = Vec2::new(0.3, -1.1);
        assert!((chord_flow(&bath, 0.8, &xi).norm() - 0.4f64.exp() * xi.norm()).abs() < 1e-14);
    }

    #[test]
    fn point_flow_with_linear_term() {
        let h = HamiltonianForm::free_particle().with_linear(Vec2::new(0.0, 1.0));
        let sys = OpenSystem::new(h, vec![], 1.0).unwrap();
        let (p, q, t) = (0.4, -0.3, 1.3);
        let out = point_flow(&sys, t, &Vec2::new(p, q)).unwrap();
        assert!((out - Vec2::new(p - t, q + p * t - t * t / 2.0)).norm() < 1e-13);
    }

    #[test]
    fn cat_centers_contract() {
        let sys = OpenSystem::photon_bath(0.0, 1.0, 0.0, 1.0).unwrap();
        let out = point_flow(&sys, 0.6, &Vec2::new(0.0, 2.0)).unwrap();
        assert!((out[1] - 2.0 * (-0.3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn photon_bath_damping_is_isotropic() {
        for nbar in [0.0, 0.5, 3.0] {
            let sys = photon(nbar);
            let t = 0.7;
            let m = damping_matrix(&sys, -t).unwrap().m;
            let expected = -((t.exp() - 1.0) * (2.0 * nbar + 1.0) / 2.0);
            assert!((m - Mat2::identity() * expected).abs().max() < 1e-10 * expected.abs());
            let det = (t.exp() - 1.0).powi(2) * (2.0 * nbar + 1.0).powi(2) / 4.0;
            assert!((m.determinant() - det).abs() < 1e-10 * det);
        }
    }

    #[test]
    fn uniform_field_determinant() {
        let sys = OpenSystem::uniform_field(2.0, 0.0, 1.0, 1.0).unwrap();
        for t in [0.3, 0.9306, 2.0] {
            let det = damping_matrix(&sys, -t).unwrap().det();
            assert!((det - 4.0 * t.powi(4) / 12.0).abs() < 1e-12 * (1.0 + det));
        }
    }

    #[test]
    fn damping_is_zero_at_origin() {
        assert_eq!(damping_matrix(&photon(1.0), 0.0).unwrap().m, Mat2::zeros());
    }

    fn regime_systems() -> Vec<OpenSystem> {
        let ch = |a: [f64; 4]| LindbladChannel::new(Vec2::new(a[0], a[1]), Vec2::new(a[2], a[3])).unwrap();
        let chans = vec![ch([0.3, 0.8, 0.5, -0.2]), ch([0.0, 0.4, 0.4, 0.0])];
        let mut out = vec![photon(0.5)];
        for h in [
            HamiltonianForm::harmonic(1.3),
            HamiltonianForm::hyperbolic(0.9),
            HamiltonianForm::quadratic(Mat2::new(0.7, 0.2, 0.2, -0.4)).unwrap(),
            HamiltonianForm::free_particle().with_linear(Vec2::new(0.0, 1.0)),
            HamiltonianForm::quadratic(Mat2::zeros()).unwrap(),
        ] {
            out.push(OpenSystem::new(h, chans.clone(), 1.0).unwrap());
        }
        out.push(OpenSystem::uniform_field(2.0, 1.0, -1.0, 1.0).unwrap());
        out
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for sys in regime_systems() {
            for t in [-2.0, -0.5, 0.3, 1.7] {
                let q = damping_matrix(&sys, t).unwrap().m;
                let c = damping_matrix_closed(&sys, t).unwrap().m;
                let scale = q.abs().max().max(1.0);
                assert!((q - c).abs().max() < 1e-9 * scale, "{sys:?} t={t}\n{q}\n{c}");
            }
        }
    }

    #[test]
    fn closed_form_degenerate_rates() {
        // α = σ for the hyperbolic flow, and α = 0 in the elliptic one.
        let ch = LindbladChannel::new(Vec2::new(0.0, 1.0), Vec2::new(0.5, 0.0)).unwrap();
        let hyper = OpenSystem::new(HamiltonianForm::hyperbolic(0.5), vec![ch], 1.0).unwrap();
        assert!((hyper.alpha() - hyper.sigma().re).abs() < 1e-15);
        let plain = LindbladChannel::new(Vec2::new(0.3, 1.0), Vec2::zeros()).unwrap();
        let ell = OpenSystem::new(HamiltonianForm::harmonic(1.0), vec![plain], 1.0).unwrap();
        for sys in [hyper, ell] {
            let q = damping_matrix(&sys, -1.4).unwrap().m;
            let c = damping_matrix_closed(&sys, -1.4).unwrap().m;
            assert!((q - c).abs().max() < 1e-9 * q.abs().max());
        }
    }

    #[test]
    fn hyperbolic_determinant_formula() {
        // ω pq with α from a single channel, checked against the eigenbasis formula.
        let omega: f64 = 1.0;
        let ch = LindbladChannel::new(Vec2::new(0.2, 0.7), Vec2::new(0.3, -0.1)).unwrap();
        let sys = OpenSystem::new(HamiltonianForm::hyperbolic(omega), vec![ch], 1.0).unwrap();
        let alpha = sys.alpha();
        let t = 1.1;
        // 2JH = diag(−ω, ω): eigenbasis is the coordinate basis.
        let a = sys.channel_gram();
        let e = (2.0 * alpha * t).exp();
        let f1 = (e * e - 2.0 * e * (2.0 * omega * t).cosh() + 1.0) / (4.0 * (alpha * alpha - omega * omega));
        let f2 = (e * e - 2.0 * e + 1.0) / (4.0 * alpha * alpha);
        let det = f1 * a[(0, 0)] * a[(1, 1)] - f2 * a[(0, 1)] * a[(1, 0)];
        let got = damping_matrix(&sys, -t).unwrap().det();
        assert!((got - det).abs() < 1e-10 * det.abs(), "{got} vs {det}");
    }

    #[test]
    fn coherent_wigner_at_time_zero() {
        let hbar = 1.0;
        let c = Vec2::new(0.5, -0.25);
        let state = coherent_state(c, hbar);
        let grid = GridSpec::centered(c, 8.0, 64).unwrap();
        let field = evolve_wigner_grid(&photon(0.0), &state, 0.0, &grid).unwrap();
        for ((i, j), v) in field.values.indexed_iter() {
            let x = grid.point(i, j) - c;
            let exact = (-(x.norm_squared()) / hbar).exp() / (PI * hbar);
            assert!((v.re - exact).abs() < 1e-12, "{i},{j}");
        }
        assert!((field.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coarse_grid_is_reported() {
        let state = cat_state(CatParameters::new(3.0, 1.0, 0.0).unwrap(), 1.0);
        let grid = GridSpec::centered(Vec2::zeros(), 8.0, 16).unwrap();
        let err = evolve_wigner_grid(&photon(0.0), &state, 0.0, &grid).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
        let small = GridSpec::centered(Vec2::zeros(), 2.0, 64).unwrap();
        let err = evolve_wigner_grid(&photon(0.0), &state, 0.0, &small).unwrap_err();
        assert!(matches!(err, Error::DomainTooSmall { .. }));
    }

    #[test]
    fn cat_line_matches_grid() {
        let params = CatParameters::new(2.0, 1.0, 0.5).unwrap();
        let sys = OpenSystem::photon_bath(0.0, 1.0, 0.5, 1.0).unwrap();
        let state = cat_state(params, 1.0);
        let grid = GridSpec::centered(Vec2::zeros(), 12.0, 128).unwrap();
        let t = 0.3;
        let field = evolve_wigner_grid(&sys, &state, t, &grid).unwrap();
        let j0 = grid.nearest(&Vec2::zeros()).unwrap().1;
        let peak = field.max_abs();
        for i in 0..128 {
            let exact = cat_wigner_line(&params, 1.0, t, grid.p(i));
            assert!((field.values[[i, j0]].re - exact).abs() < 1e-6 * peak);
        }
    }

    #[test]
    fn gaussian_convolution_spot_check() {
        // Evolved Gaussian has an exact Wigner function with known moments.
        let sys = photon(0.5);
        let cov = Mat2::new(0.9, 0.2, 0.2, 0.4);
        let mean = Vec2::new(1.0, -0.5);
        let state = crate::states::gaussian_state(mean, cov, 1.0).unwrap();
        let t = 0.4;
        let (m_t, c_t) = evolve_gaussian_moments(&sys, &mean, &cov, t).unwrap();
        let grid = GridSpec::centered(Vec2::zeros(), 10.0, 96).unwrap();
        let field = evolve_wigner_grid(&sys, &state, t, &grid).unwrap();
        let inv = c_t.try_inverse().unwrap();
        let norm = 1.0 / (2.0 * PI * c_t.determinant().sqrt());
        for (i, j) in [(40, 50), (48, 48), (52, 44), (30, 60), (47, 49)] {
            let d = grid.point(i, j) - m_t;
            let exact = norm * (-0.5 * d.dot(&(inv * d))).exp();
            assert!((field.values[[i, j]].re - exact).abs() < 1e-6 * exact.max(1e-3));
        }
    }

    #[test]
    fn pde_residual_examples() {
        let sys = photon(0.0);
        let state = coherent_state(Vec2::new(0.3, -0.2), 1.0);
        let xi = Vec2::new(0.5, 0.5);
        let r1 = chord_pde_residual(&sys, &state, 0.3, &xi, 1e-3).unwrap();
        assert!(r1 < 1e-5, "{r1}");
        let a = chord_pde_residual(&sys, &state, 0.3, &xi, 2e-2).unwrap();
        let b = chord_pde_residual(&sys, &state, 0.3, &xi, 1e-2).unwrap();
        assert!((a / b - 4.0).abs() < 0.8, "ratio {}", a / b);
        assert!(chord_pde_residual(&sys, &state, 0.3, &Vec2::zeros(), 1e-3).unwrap() < 1e-10);
    }

    #[test]
    fn pde_residual_with_linear_term() {
        let sys = OpenSystem::uniform_field(1.0, 0.5, 1.0, 1.0).unwrap();
        let state = cat_state(CatParameters::new(1.0, 1.0, 0.0).unwrap(), 1.0);
        let xi = Vec2::new(0.4, -0.7);
        let a = chord_pde_residual(&sys, &state, 0.5, &xi, 2e-2).unwrap();
        let b = chord_pde_residual(&sys, &state, 0.5, &xi, 1e-2).unwrap();
        assert!((a / b - 4.0).abs() < 0.8, "ratio {}", a / b);
    }

    fn arbitrary_system() -> impl Strategy<Value = OpenSystem> {
        (
            -1.0..1.0f64,
            -1.0..1.0f64,
            -1.0..1.0f64,
            prop::collection::vec(prop::array::uniform4(-0.8..0.8f64), 1..3),
        )
            .prop_map(|(a, b, d, chans)| {
                let h = HamiltonianForm::quadratic(Mat2::new(a, b, b, d)).unwrap();
                let channels = chans
                    .into_iter()
                    .map(|v| LindbladChannel::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])).unwrap())
                    .collect();
                OpenSystem::new(h, channels, 1.0).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn flow_is_a_group(sys in arbitrary_system(), t in -1.5..1.5f64, s in -1.5..1.5f64) {
            let h = &sys.hamiltonian;
            let lhs = flow(h, t).matrix * flow(h, s).matrix;
            let rhs = flow(h, t + s).matrix;
            prop_assert!((lhs - rhs).abs().max() < 1e-10 * (1.0 + rhs.abs().max()));
            prop_assert!(symplectic_residual(&flow(h, t).matrix) < 1e-10 * (1.0 + rhs.abs().max().powi(2)));
        }

        #[test]
        fn chord_and_point_flows_invert(sys in arbitrary_system(), t in -1.5..1.5f64, p in -2.0..2.0f64, q in -2.0..2.0f64) {
            let plain = OpenSystem::new(sys.hamiltonian.clone(), vec![], 1.0).unwrap();
            let x = Vec2::new(p, q);
            let back = point_flow(&plain, -t, &chord_flow(&plain, t, &x)).unwrap();
            prop_assert!((back - x).norm() < 1e-10 * (1.0 + x.norm()));
        }

        #[test]
        fn damping_sign_definite(sys in arbitrary_system(), t in 0.0..2.0f64) {
            let fwd = damping_matrix(&sys, t).unwrap().m;
            let bwd = damping_matrix(&sys, -t).unwrap().m;
            let tol_f = 1e-12 * fwd.abs().max();
            let tol_b = 1e-12 * bwd.abs().max();
            prop_assert!(sym_eigenvalues(&fwd).0 >= -tol_f);
            prop_assert!(sym_eigenvalues(&bwd).1 <= tol_b);
        }

        #[test]
        fn damping_is_symplectically_covariant(
            sys in arbitrary_system(),
            t in -1.5..1.5f64,
            theta in -3.0..3.0f64,
            squeeze in -0.8..0.8f64,
            shear in -1.0..1.0f64,
        ) {
            let c = symplectic_from_params(theta, squeeze, shear);
            let moved = symplectic_transform(&sys, &c).unwrap();
            let m = damping_matrix(&sys, t).unwrap().m;
            let m2 = damping_matrix(&moved, t).unwrap().m;
            let c_inv = c.try_inverse().unwrap();
            let expected = c_inv.transpose() * m * c_inv;
            prop_assert!((m2 - expected).abs().max() < 1e-9 * (1.0 + expected.abs().max()));
        }

        #[test]
        fn evolution_keeps_trace_and_hermiticity(sys in arbitrary_system(), t in 0.0..2.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let state = cat_state(CatParameters::new(1.2, 1.0, 0.0).unwrap(), 1.0);
            let evolved = evolve_state(&sys, &state, t).unwrap();
            prop_assert_eq!(evolved.eval(&Vec2::zeros()), Complex64::new(1.0 / (2.0 * PI), 0.0));
            let xi = Vec2::new(a, b);
            let d = evolved.eval(&xi) - evolved.eval(&-xi).conj();
            prop_assert!(d.norm() < 1e-14);
        }
    }
}
