//! Initial chord functions: coherent, Gaussian and two-component cat states.
//!
//! Chord functions follow `W̃(ξ) = Tr[T̂_{−ξ} ρ̂]/2πħ`, so a state centred at
//! `c` carries the phase `exp(−(i/ħ) ξ∧c)` and `W̃(0) = 1/2πħ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, symplectic_j, wedge, Mat2, Vec2};
use crate::quadrature::{integrate_2d, QuadOptions};

pub type ChordFn = Arc<dyn Fn(&Vec2) -> Complex64 + Send + Sync>;

/// Closed-form provenance of a state, kept so that moments and lobe
/// positions stay available after construction.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Coherent { center: Vec2 },
    Gaussian { mean: Vec2, cov: Mat2 },
    Cat(CatParameters),
    Evolved { time: f64 },
    Reconstructed { time: f64 },
    Custom,
}

#[derive(Clone)]
pub struct ChordState {
    eval: ChordFn,
    pub label: String,
    pub pure: bool,
    pub hbar: f64,
    pub kind: StateKind,
    /// Chord radius beyond which `|W̃|` is negligible (below ~1e−9 of its peak).
    pub extent: f64,
}

impl fmt::Debug for ChordState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChordState")
            .field("label", &self.label)
            .field("pure", &self.pure)
            .field("hbar", &self.hbar)
            .field("kind", &self.kind)
            .field("extent", &self.extent)
            .finish()
    }
}

impl ChordState {
    pub fn from_fn(
        label: impl Into<String>,
        hbar: f64,
        pure: bool,
        kind: StateKind,
        extent: f64,
        eval: ChordFn,
    ) -> Self {
        Self {
            eval,
            label: label.into(),
            pure,
            hbar,
            kind,
            extent,
        }
    }

    pub fn eval(&self, xi: &Vec2) -> Complex64 {
        (self.eval)(xi)
    }

    pub fn evaluator(&self) -> ChordFn {
        Arc::clone(&self.eval)
    }

    pub fn norm_value(&self) -> f64 {
        1.0 / (2.0 * PI * self.hbar)
    }

    /// `2πħ ∫|W̃|² dξ` over the square of half-width `extent`.
    pub fn purity(&self, rel_tol: f64) -> Result<f64> {
        let r = self.extent;
        let opts = QuadOptions::default().with_rel_tol(rel_tol).with_initial_panels(8);
        let est = integrate_2d(|a, b| self.eval(&Vec2::new(a, b)).norm_sqr(), (-r, r), (-r, r), &opts)?;
        Ok(2.0 * PI * self.hbar * est.value[0])
    }

    /// Checks normalization, hermiticity at the given chords and, for pure
    /// states, unit purity. Returns the list of violations.
    pub fn check_invariants(&self, probes: &[Vec2]) -> Result<Vec<String>> {
        let mut problems = Vec::new();
        let w0 = self.eval(&Vec2::zeros());
        if (w0 - Complex64::new(self.norm_value(), 0.0)).norm() > 1e-12 * self.norm_value() {
            problems.push(format!("W(0) = {w0}, expected {}", self.norm_value()));
        }
        for xi in probes {
            let a = self.eval(xi);
            let b = self.eval(&-xi).conj();
            if (a - b).norm() > 1e-12 * self.norm_value() {
                problems.push(format!("hermiticity fails at {xi:?}: {a} vs {b}"));
            }
        }
        if self.pure {
            let p = self.purity(1e-9)?;
            if (p - 1.0).abs() > 1e-6 {
                problems.push(format!("pure state has purity {p}"));
            }
        }
        Ok(problems)
    }

    /// Mean and covariance when the state is Gaussian.
    pub fn gaussian_moments(&self) -> Option<(Vec2, Mat2)> {
        match &self.kind {
            StateKind::Coherent { center } => Some((*center, Mat2::identity() * (0.5 * self.hbar))),
            StateKind::Gaussian { mean, cov } => Some((*mean, *cov)),
            _ => None,
        }
    }
}

fn gaussian_extent(min_variance: f64, hbar: f64) -> f64 {
    // |W̃| = exp(−ξ·Qξ/2ħ²); 1e−9 of the peak at ξ²·λ_min(Q)/2ħ² = 20.7.
    (2.0 * 20.8 * hbar * hbar / min_variance).sqrt()
}

pub fn coherent_state(center: Vec2, hbar: f64) -> ChordState {
    let norm = 1.0 / (2.0 * PI * hbar);
    let eval: ChordFn = Arc::new(move |xi: &Vec2| {
        let amp = norm * (-xi.norm_squared() / (4.0 * hbar)).exp();
        Complex64::from_polar(amp, -wedge(xi, &center) / hbar)
    });
    ChordState::from_fn(
        format!("coherent({}, {})", center[0], center[1]),
        hbar,
        true,
        StateKind::Coherent { center },
        gaussian_extent(0.5 * hbar, hbar),
        eval,
    )
}

/// Gaussian state whose Wigner function has the given mean and covariance.
pub fn gaussian_state(mean: Vec2, cov: Mat2, hbar: f64) -> Result<ChordState> {
    if cov[(0, 1)] != cov[(1, 0)] {
        return Err(Error::InvalidParameter("covariance must be symmetric".into()));
    }
    let (lo, _) = sym_eigenvalues(&cov);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let det = cov.determinant();
    let floor = 0.25 * hbar * hbar;
    if det < floor * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "covariance violates the uncertainty bound: det = {det:e} < (ħ/2)² = {floor:e}"
        )));
    }
    let pure = (det - floor).abs() <= 1e-12 * floor;
    let j = symplectic_j();
    let q = j.transpose() * cov * j;
    let norm = 1.0 / (2.0 * PI * hbar);
    let eval: ChordFn = Arc::new(move |xi: &Vec2| {
        let amp = norm * (-xi.dot(&(q * xi)) / (2.0 * hbar * hbar)).exp();
        Complex64::from_polar(amp, -wedge(xi, &mean) / hbar)
    });
    Ok(ChordState::from_fn(
        "gaussian",
        hbar,
        pure,
        StateKind::Gaussian { mean, cov },
        gaussian_extent(lo, hbar),
        eval,
    ))
}

/// Even cat `|ζ⟩ + |−ζ⟩` with coherent components centred at `(0, ±ζ)`,
/// together with the photon bath it decoheres in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatParameters {
    pub zeta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub nbar: f64,
}

fn one() -> f64 {
    1.0
}

impl CatParameters {
    pub fn new(zeta: f64, gamma: f64, nbar: f64) -> Result<Self> {
        if !(zeta >= 0.0 && gamma >= 0.0 && nbar >= 0.0) {
            return Err(Error::InvalidParameter("cat parameters must be nonnegative".into()));
        }
        Ok(Self { zeta, gamma, nbar })
    }

    /// `N = (1 + e^{−ζ²/ħ})⁻¹`.
    pub fn normalization(&self, hbar: f64) -> f64 {
        1.0 / (1.0 + (-self.zeta * self.zeta / hbar).exp())
    }

    /// `β_t = 2n̄(1 − e^{−γt}) + 1`.
    pub fn beta(&self, t: f64) -> f64 {
        2.0 * self.nbar * (1.0 - (-self.gamma * t).exp()) + 1.0
    }

    /// Time at which the interference term of `W_t(p, 0)` stops dominating.
    pub fn positivity_time(&self) -> f64 {
        (1.0 / (2.0 * self.nbar + 1.0)).ln_1p() / self.gamma
    }

    /// First minimum of the fringe term along `q = 0`.
    pub fn zero_location(&self, hbar: f64, t: f64) -> f64 {
        let s = (-0.5 * self.gamma * t).exp();
        PI * hbar * self.beta(t) / (2.0 * s * self.zeta)
    }
}

pub fn cat_state(params: CatParameters, hbar: f64) -> ChordState {
    let x_zeta = Vec2::new(0.0, params.zeta);
    let g = move |v: Vec2| (-v.norm_squared() / (4.0 * hbar)).exp();
    // Written as a ratio so that W̃(0) = 1/2πħ holds to the last bit;
    // the denominator is 2/N.
    let overlap = g(2.0 * x_zeta);
    let denom = 2.0 + 2.0 * overlap;
    let norm = 1.0 / (2.0 * PI * hbar);
    let eval: ChordFn = Arc::new(move |xi: &Vec2| {
        let central = 2.0 * g(*xi) * (wedge(xi, &x_zeta) / hbar).cos();
        let lobes = g(xi - 2.0 * x_zeta) + g(xi + 2.0 * x_zeta);
        Complex64::new(norm * ((central + lobes) / denom), 0.0)
    });
    ChordState::from_fn(
        format!("cat(zeta={})", params.zeta),
        hbar,
        true,
        StateKind::Cat(params),
        2.0 * params.zeta + gaussian_extent(0.5 * hbar, hbar),
        eval,
    )
}

/// Closed-form `W_t(p, 0)` of the cat state in a photon bath, in the frame
/// co-rotating with the oscillator.
pub fn cat_wigner_line(params: &CatParameters, hbar: f64, t: f64, p: f64) -> f64 {
    let n = params.normalization(hbar);
    let beta = params.beta(t);
    let s = (-0.5 * params.gamma * t).exp();
    let z2 = params.zeta * params.zeta;
    let envelope = n / (PI * hbar * beta) * (-p * p / (hbar * beta)).exp();
    let classical = (-s * s * z2 / (hbar * beta)).exp();
    let fringe = (-z2 * (1.0 - s * s / beta) / hbar).exp() * (2.0 * s * params.zeta * p / (hbar * beta)).cos();
    envelope * (classical + fringe)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateDescriptor {
    Coherent {
        center: [f64; 2],
    },
    Gaussian {
        mean: [f64; 2],
        cov: [[f64; 2]; 2],
    },
    Cat {
        zeta: f64,
    },
}

impl StateDescriptor {
    pub fn build(&self, hbar: f64) -> Result<ChordState> {
        match self {
            Self::Coherent { center } => Ok(coherent_state(Vec2::from(*center), hbar)),
            Self::Gaussian { mean, cov } => gaussian_state(
                Vec2::from(*mean),
                Mat2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]),
                hbar,
            ),
            Self::Cat { zeta } => Ok(cat_state(CatParameters::new(*zeta, 1.0, 0.0)?, hbar)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<Vec2> {
        vec![Vec2::new(0.3, -0.7), Vec2::new(1.5, 2.0), Vec2::new(-2.2, 0.1)]
    }

    #[test]
    fn coherent_normalization_and_purity() {
        let s = coherent_state(Vec2::new(0.4, -1.0), 1.0);
        assert_eq!(s.eval(&Vec2::zeros()).re, 1.0 / (2.0 * PI));
        assert!((s.purity(1e-10).unwrap() - 1.0).abs() < 1e-8);
        assert!(s.check_invariants(&probes()).unwrap().is_empty());
    }

    #[test]
    fn coherent_modulus_ignores_center() {
        let a = coherent_state(Vec2::zeros(), 0.7);
        let b = coherent_state(Vec2::new(0.0, 3.0), 0.7);
        for xi in probes() {
            assert!((a.eval(&xi).norm() - b.eval(&xi).norm()).abs() < 1e-16);
        }
    }

    #[test]
    fn gaussian_matches_coherent() {
        let hbar = 0.8;
        let g = gaussian_state(Vec2::new(0.2, 0.3), Mat2::identity() * (hbar / 2.0), hbar).unwrap();
        let c = coherent_state(Vec2::new(0.2, 0.3), hbar);
        assert!(g.pure);
        for xi in probes() {
            assert!((g.eval(&xi) - c.eval(&xi)).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_purity_identity() {
        let hbar = 1.0;
        let cov = Mat2::new(1.3, 0.4, 0.4, 0.9);
        let g = gaussian_state(Vec2::zeros(), cov, hbar).unwrap();
        let expected = 0.5 * hbar / cov.determinant().sqrt();
        assert!((g.purity(1e-10).unwrap() - expected).abs() < 1e-8);
        let nbar = 1.5;
        let thermal = gaussian_state(Vec2::zeros(), Mat2::identity() * (0.5 * hbar * (2.0 * nbar + 1.0)), hbar).unwrap();
        assert!((thermal.purity(1e-10).unwrap() - 1.0 / (2.0 * nbar + 1.0)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_rejects_bad_covariance() {
        let err = gaussian_state(Vec2::zeros(), Mat2::new(1.0, 2.0, 2.0, 1.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
        assert!(gaussian_state(Vec2::zeros(), Mat2::identity() * 0.1, 1.0).is_err());
    }

    #[test]
    fn cat_invariants() {
        for zeta in [0.5, 2.0, 4.0] {
            let s = cat_state(CatParameters::new(zeta, 1.0, 0.0).unwrap(), 1.0);
            assert!(s.check_invariants(&probes()).unwrap().is_empty(), "zeta {zeta}");
        }
    }

    #[test]
    fn cat_with_zero_separation_is_vacuum() {
        let cat = cat_state(CatParameters::new(0.0, 1.0, 0.0).unwrap(), 1.0);
        let vac = coherent_state(Vec2::zeros(), 1.0);
        for xi in probes() {
            assert!((cat.eval(&xi) - vac.eval(&xi)).norm() < 1e-15);
        }
    }

    #[test]
    fn far_cat_lobe_is_half_the_centre() {
        let zeta = 8.0;
        let s = cat_state(CatParameters::new(zeta, 1.0, 0.0).unwrap(), 1.0);
        let ratio = s.eval(&Vec2::new(0.0, 2.0 * zeta)).re / s.eval(&Vec2::zeros()).re;
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bracket_balance_at_positivity_time() {
        for nbar in [0.0, 0.5, 2.0] {
            let c = CatParameters::new(2.0, 1.3, nbar).unwrap();
            let t = c.positivity_time();
            let r = (-c.gamma * t).exp() / c.beta(t);
            assert!((1.0 - r - r).abs() < 1e-14);
        }
    }

    #[test]
    fn fringe_minimum_changes_side_at_positivity_time() {
        let c = CatParameters::new(2.0, 1.0, 0.0).unwrap();
        let tp = c.positivity_time();
        let pm = c.zero_location(1.0, tp);
        // At t_p the line value at p_m vanishes exactly.
        assert!(cat_wigner_line(&c, 1.0, tp, pm).abs() < 1e-15);
        let min_over = |t: f64| {
            (0..=10_000)
                .map(|k| cat_wigner_line(&c, 1.0, t, 5.0 * pm * k as f64 / 1e4))
                .fold(f64::INFINITY, f64::min)
        };
        assert!(min_over(0.8 * tp) < 0.0);
        assert!(min_over(1.2 * tp) > 0.0);
    }

    #[test]
    fn descriptor_parses() {
        let d: StateDescriptor = serde_json::from_str(r#"{"type":"cat","zeta":2.0}"#).unwrap();
        assert_eq!(d.build(1.0).unwrap().kind, StateKind::Cat(CatParameters::new(2.0, 1.0, 0.0).unwrap()));
        assert!(serde_json::from_str::<StateDescriptor>(r#"{"type":"cat","zeta":2.0,"x":1}"#).is_err());
    }
}
