//! Master equation in a truncated Fock basis, integrated with RK4, and the
//! Wigner transform of the resulting density matrix.
//!
//! `q = √(ħ/2)(a + a†)`, `p = i√(ħ/2)(a† − a)`; a phase point maps to the
//! coherent amplitude `(q + ip)/√(2ħ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::linalg::Vec2;
use crate::model::OpenSystem;

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest population allowed in the top Fock level.
pub const LEAK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    pub matrix: CMat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FockJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl FockDensity {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn from_ket(ket: &[Complex64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(ket);
        let norm = v.norm();
        let v = v / Complex64::new(norm, 0.0);
        Self {
            matrix: &v * v.adjoint(),
        }
    }

    /// Coherent state centred at `x = (p, q)`.
    pub fn coherent(x: Vec2, hbar: f64, dim: usize) -> Self {
        Self::from_ket(&coherent_ket(x, hbar, dim))
    }

    /// Even superposition of coherent states at `(0, ±ζ)`.
    pub fn cat(zeta: f64, hbar: f64, dim: usize) -> Self {
        let a = coherent_ket(Vec2::new(0.0, zeta), hbar, dim);
        let b = coherent_ket(Vec2::new(0.0, -zeta), hbar, dim);
        let ket: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        Self::from_ket(&ket)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn top_population(&self) -> f64 {
        let n = self.dim();
        self.matrix[(n - 1, n - 1)].re
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.dim();
        let grab = |f: fn(&Complex64) -> f64| (0..n).map(|i| (0..n).map(|j| f(&self.matrix[(i, j)])).collect()).collect();
        let doc = FockJson {
            dim: n,
            re: grab(|z| z.re),
            im: grab(|z| z.im),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FockJson = serde_json::from_str(text)?;
        let n = doc.dim;
        if doc.re.len() != n || doc.im.len() != n || doc.re.iter().chain(&doc.im).any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("Fock matrix does not match dim".into()));
        }
        Ok(Self {
            matrix: CMat::from_fn(n, n, |i, j| Complex64::new(doc.re[i][j], doc.im[i][j])),
        })
    }
}

fn coherent_ket(x: Vec2, hbar: f64, dim: usize) -> Vec<Complex64> {
    let beta = Complex64::new(x[1], x[0]) / (2.0 * hbar).sqrt();
    let mut out = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        out.push(c);
        c = c * beta / ((n + 1) as f64).sqrt();
    }
    out
}

/// Truncation large enough for a cat of half-separation ζ in a bath with
/// `nbar` thermal photons: the larger of `⌈ζ²/ħ⌉·4 + 20` and a thermal tail
/// bound `(n̄/(n̄+1))^k < 1e−11`.
pub fn default_dim(zeta: f64, hbar: f64, nbar: f64) -> usize {
    let coherent = (zeta * zeta / hbar).ceil() as usize * 4 + 20;
    let thermal = if nbar > 0.0 {
        (11.0 * std::f64::consts::LN_10 / ((nbar + 1.0) / nbar).ln()).ceil() as usize + 10
    } else {
        0
    };
    coherent.max(thermal)
}

/// Matrix with nonzero entries only on diagonals `−2..=2`, stored by offset.
struct Banded {
    dim: usize,
    diags: [Vec<Complex64>; 5],
}

impl Banded {
    fn from_dense(m: &CMat) -> Result<Self> {
        let dim = m.nrows();
        let mut diags: [Vec<Complex64>; 5] = Default::default();
        for (slot, k) in diags.iter_mut().zip(-2isize..=2) {
            *slot = (0..dim)
                .map(|i| {
                    let j = i as isize + k;
                    if j >= 0 && (j as usize) < dim {
                        m[(i, j as usize)]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
        }
        for i in 0..dim {
            for j in 0..dim {
                if (i as isize - j as isize).abs() > 2 && m[(i, j)].norm() > 0.0 {
                    return Err(Error::InvalidParameter("operator is not pentadiagonal".into()));
                }
            }
        }
        Ok(Self { dim, diags })
    }

    /// Upper bound on the spectral norm, `√(‖A‖₁‖A‖∞)`.
    fn norm_bound(&self) -> f64 {
        let n = self.dim;
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for (d, k) in self.diags.iter().zip(-2isize..=2) {
            for (i, v) in d.iter().enumerate() {
                let j = i as isize + k;
                if j >= 0 && (j as usize) < n {
                    rows[i] += v.norm();
                    cols[j as usize] += v.norm();
                }
            }
        }
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        (max(&rows) * max(&cols)).sqrt()
    }

    /// `out += A·ρ`.
    fn left(&self, rho: &CMat, out: &mut CMat) {
        let n = self.dim;
        for j in 0..n {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (d, k) in self.diags.iter().zip(-2isize..=2) {
                    let r = i as isize + k;
                    if r >= 0 && (r as usize) < n {
                        acc += d[i] * rho[(r as usize, j)];
                    }
                }
                out[(i, j)] += acc;
            }
        }
    }

    /// `out += ρ·B`.
    fn right(&self, rho: &CMat, out: &mut CMat) {
        let n = self.dim;
        for j in 0..n {
            for (d, k) in self.diags.iter().zip(-2isize..=2) {
                let r = j as isize - k;
                if r < 0 || r as usize >= n {
                    continue;
                }
                let b = d[r as usize];
                if b == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..n {
                    out[(i, j)] += rho[(i, r as usize)] * b;
                }
            }
        }
    }
}

fn ladder(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

struct Generator {
    /// `G = −(i/ħ)H − (1/2ħ)Σ L†L`, so that `ρ̇ = Gρ + ρG† + (1/ħ)Σ LρL†`.
    g: Banded,
    g_adj: Banded,
    jumps: Vec<(Banded, Banded)>,
    inv_hbar: f64,
}

impl Generator {
    fn new(sys: &OpenSystem, dim: usize) -> Result<Self> {
        let hbar = sys.hbar;
        let a = ladder(dim);
        let ad = a.adjoint();
        let id = CMat::identity(dim, dim);
        let n_op = &ad * &a;
        let a2 = &a * &a;
        let ad2 = &ad * &ad;
        let s = Complex64::new(0.5 * hbar, 0.0);
        // Weyl-symmetric quadratics in normal order, exact on the kept levels.
        let qq = (&a2 + &ad2 + &n_op * Complex64::new(2.0, 0.0) + &id) * s;
        let pp = (&a2 + &ad2 - &n_op * Complex64::new(2.0, 0.0) - &id) * (-s);
        let pq_sym = (&ad2 - &a2) * (I * hbar);
        let q = (&a + &ad) * Complex64::new((0.5 * hbar).sqrt(), 0.0);
        let p = (&ad - &a) * (I * (0.5 * hbar).sqrt());

        let h = sys.hamiltonian.matrix();
        let b = sys.hamiltonian.linear();
        let c = |v: f64| Complex64::new(v, 0.0);
        let ham = &pp * c(h[(0, 0)]) + &pq_sym * c(h[(0, 1)]) + &qq * c(h[(1, 1)]) + &p * c(b[0]) + &q * c(b[1]);

        let mut g = &ham * (-I / hbar);
        let mut jumps = Vec::new();
        for ch in &sys.channels {
            let u_p = Complex64::new(ch.l_re[0], ch.l_im[0]);
            let u_q = Complex64::new(ch.l_re[1], ch.l_im[1]);
            let l = &p * u_p + &q * u_q;
            let l_adj = l.adjoint();
            g -= (&l_adj * &l) * Complex64::new(0.5 / hbar, 0.0);
            jumps.push((Banded::from_dense(&l)?, Banded::from_dense(&l_adj)?));
        }
        Ok(Self {
            g_adj: Banded::from_dense(&g.adjoint())?,
            g: Banded::from_dense(&g)?,
            jumps,
            inv_hbar: 1.0 / hbar,
        })
    }

    /// Bound on the norm of `ρ ↦ Gρ + ρG† + Σ LρL†/ħ`.
    fn norm_bound(&self) -> f64 {
        let jumps: f64 = self.jumps.iter().map(|(l, l_adj)| l.norm_bound() * l_adj.norm_bound()).sum();
        2.0 * self.g.norm_bound() + jumps * self.inv_hbar
    }

    fn rhs(&self, rho: &CMat) -> CMat {
        let n = rho.nrows();
        let mut out = CMat::zeros(n, n);
        self.g.left(rho, &mut out);
        self.g_adj.right(rho, &mut out);
        let mut tmp = CMat::zeros(n, n);
        let mut jump = CMat::zeros(n, n);
        for (l, l_adj) in &self.jumps {
            tmp.fill(Complex64::new(0.0, 0.0));
            l.left(rho, &mut tmp);
            l_adj.right(&tmp, &mut jump);
        }
        out + jump * Complex64::new(self.inv_hbar, 0.0)
    }
}

/// Inside the RK4 stability region for any spectrum of this radius.
const RK4_RADIUS: f64 = 2.5;

/// RK4 integration of the master equation to time `t` with step at most `dt`.
/// The step is shortened further when the generator norm demands it, since
/// the ladder operators grow with the truncation.
pub fn integrate_fock_lindblad(sys: &OpenSystem, rho0: &FockDensity, t: f64, dt: f64) -> Result<FockDensity> {
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::InvalidParameter("need dt > 0 and t >= 0".into()));
    }
    let gen = Generator::new(sys, rho0.dim())?;
    let radius = gen.norm_bound();
    let dt = if radius > 0.0 { dt.min(RK4_RADIUS / radius) } else { dt };
    let steps = (t / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let hc = Complex64::new(h, 0.0);
    let mut rho = rho0.matrix.clone();
    let check = |rho: &CMat| -> Result<()> {
        let n = rho.nrows();
        let top = rho[(n - 1, n - 1)].re;
        if top > LEAK_THRESHOLD {
            return Err(Error::TruncationLeak {
                population: top,
                threshold: LEAK_THRESHOLD,
            });
        }
        Ok(())
    };
    check(&rho)?;
    for _ in 0..steps {
        let k1 = gen.rhs(&rho);
        let k2 = gen.rhs(&(&rho + &k1 * (hc * 0.5)));
        let k3 = gen.rhs(&(&rho + &k2 * (hc * 0.5)));
        let k4 = gen.rhs(&(&rho + &k3 * hc));
        rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * (hc / 6.0);
        check(&rho)?;
    }
    Ok(FockDensity { matrix: rho })
}

/// Wigner function `Σ ρ_mn W_{|m⟩⟨n|}` sampled on a grid.
///
/// For `m = n + k`, `W_{|m⟩⟨n|} = (−1)ⁿ e^{−ikθ} f_n^{(k)}(4|β|²)/πħ` with
/// `β = |β|e^{iθ}` and `f_n^{(k)}` the normalized associated Laguerre
/// functions, generated by their three-term recursion.
pub fn wigner_from_fock(rho: &FockDensity, hbar: f64, grid: &GridSpec) -> Result<GridField> {
    grid.validate()?;
    let dim = rho.dim();
    let m = &rho.matrix;
    let values = Array2::from_shape_fn((grid.shape[0], grid.shape[1]), |(i, j)| {
        let x = grid.point(i, j);
        let beta = Complex64::new(x[1], x[0]) / (2.0 * hbar).sqrt();
        let r = 4.0 * beta.norm_sqr();
        let rot = if beta.norm() > 0.0 { beta.conj() / beta.norm() } else { Complex64::new(1.0, 0.0) };
        let mut total = 0.0;
        let mut f0 = (-0.5 * r).exp();
        let mut phase = Complex64::new(1.0, 0.0);
        for k in 0..dim {
            if k > 0 {
                f0 *= (r / k as f64).sqrt();
                phase *= rot;
            }
            let mut prev = 0.0;
            let mut cur = f0;
            let kf = k as f64;
            for n in 0..dim - k {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let term = m[(n + k, n)] * phase * (sign * cur);
                total += if k == 0 { term.re } else { 2.0 * term.re };
                let nf = n as f64;
                let next = ((2.0 * nf + 1.0 + kf - r) * cur - (nf * (nf + kf)).sqrt() * prev)
                    / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
                prev = cur;
                cur = next;
            }
        }
        total / (PI * hbar)
    });
    GridField::from_real(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HamiltonianForm;

    fn bath(nbar: f64) -> OpenSystem {
        OpenSystem::photon_bath(0.0, 1.0, nbar, 1.0).unwrap()
    }

    #[test]
    fn vacuum_wigner_is_gaussian() {
        let rho = FockDensity::coherent(Vec2::zeros(), 1.0, 10);
        let grid = GridSpec::centered(Vec2::zeros(), 5.0, 40).unwrap();
        let w = wigner_from_fock(&rho, 1.0, &grid).unwrap();
        for ((i, j), v) in w.values.indexed_iter() {
            let x = grid.point(i, j);
            assert!((v.re - (-x.norm_squared()).exp() / PI).abs() < 1e-14);
        }
    }

    #[test]
    fn displaced_state_wigner_center() {
        let c = Vec2::new(0.8, -0.6);
        let rho = FockDensity::coherent(c, 0.5, 40);
        let grid = GridSpec::centered(Vec2::zeros(), 4.0, 64).unwrap();
        let w = wigner_from_fock(&rho, 0.5, &grid).unwrap();
        for ((i, j), v) in w.values.indexed_iter() {
            let d = grid.point(i, j) - c;
            let exact = (-d.norm_squared() / 0.5).exp() / (PI * 0.5);
            assert!((v.re - exact).abs() < 1e-10);
        }
        assert!((w.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unitary_evolution_keeps_purity() {
        let sys = OpenSystem::new(HamiltonianForm::harmonic(1.0), vec![], 1.0).unwrap();
        let rho = FockDensity::cat(1.5, 1.0, 40);
        let out = integrate_fock_lindblad(&sys, &rho, 1.0, 1e-3).unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-9);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_decay_matches_closed_form() {
        let nbar = 0.5;
        let rho = FockDensity::coherent(Vec2::new(0.0, 1.0), 1.0, default_dim(1.0, 1.0, nbar));
        let t = 0.8;
        let out = integrate_fock_lindblad(&bath(nbar), &rho, t, 2e-3).unwrap();
        let e = t.exp();
        let expected = e / (1.0 + (e - 1.0) * (2.0 * nbar + 1.0));
        assert!((out.purity() - expected).abs() < 1e-8);
        assert!(out.hermiticity_error() < 1e-12);
        assert!((out.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn leak_is_detected() {
        let rho = FockDensity::coherent(Vec2::new(0.0, 4.0), 1.0, 12);
        let err = integrate_fock_lindblad(&bath(0.0), &rho, 0.1, 1e-2).unwrap_err();
        assert!(matches!(err, Error::TruncationLeak { .. }));
    }

    #[test]
    fn json_round_trip() {
        let rho = FockDensity::cat(1.0, 1.0, 6);
        let back = FockDensity::from_json(&rho.to_json().unwrap()).unwrap();
        assert_eq!(back, rho);
    }
}
