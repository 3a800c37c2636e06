//! Open-system data model: quadratic Hamiltonian, linear Lindblad channels,
//! the derived scalars α and σ, regime classification and symplectic
//! changes of coordinates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, outer, symplectic_j, symplectic_residual, Mat2, Vec2};

/// Quadratic Hamiltonian `H(x) = x·Hx + b·x` with `x = (p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianForm {
    matrix: Mat2,
    linear: Vec2,
}

impl HamiltonianForm {
    /// Rejects matrices whose off-diagonal entries differ at all.
    pub fn new(matrix: Mat2, linear: Vec2) -> Result<Self> {
        let (h12, h21) = (matrix[(0, 1)], matrix[(1, 0)]);
        if h12 != h21 {
            return Err(Error::AsymmetricHamiltonian { h12, h21 });
        }
        if !matrix.iter().chain(linear.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("hamiltonian entries must be finite".into()));
        }
        Ok(Self { matrix, linear })
    }

    pub fn quadratic(matrix: Mat2) -> Result<Self> {
        Self::new(matrix, Vec2::zeros())
    }

    /// `ω(p² + q²)/2`.
    pub fn harmonic(omega: f64) -> Self {
        Self {
            matrix: Mat2::identity() * (0.5 * omega),
            linear: Vec2::zeros(),
        }
    }

    /// `ω p q`.
    pub fn hyperbolic(omega: f64) -> Self {
        Self {
            matrix: Mat2::new(0.0, 0.5 * omega, 0.5 * omega, 0.0),
            linear: Vec2::zeros(),
        }
    }

    /// `p²/2`.
    pub fn free_particle() -> Self {
        Self {
            matrix: Mat2::new(0.5, 0.0, 0.0, 0.0),
            linear: Vec2::zeros(),
        }
    }

    pub fn with_linear(mut self, linear: Vec2) -> Self {
        self.linear = linear;
        self
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn linear(&self) -> &Vec2 {
        &self.linear
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn value(&self, x: &Vec2) -> f64 {
        x.dot(&(self.matrix * x)) + self.linear.dot(x)
    }

    /// Generator `2JH` of the homogeneous Hamiltonian flow.
    pub fn generator(&self) -> Mat2 {
        symplectic_j() * self.matrix * 2.0
    }

    /// Default classification tolerance, `1e−12·‖H‖_∞`.
    pub fn default_tol(&self) -> f64 {
        1e-12 * inf_norm(&self.matrix)
    }
}

/// Lindblad operator `L(x) = l′·x + i l″·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladChannel {
    pub l_re: Vec2,
    pub l_im: Vec2,
}

impl LindbladChannel {
    pub fn new(l_re: Vec2, l_im: Vec2) -> Result<Self> {
        if !l_re.iter().chain(l_im.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("channel vectors must be finite".into()));
        }
        Ok(Self { l_re, l_im })
    }

    /// This channel's share of α, `(J l″)·l′`.
    pub fn dissipation(&self) -> f64 {
        (symplectic_j() * self.l_im).dot(&self.l_re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

pub fn classify(h: &HamiltonianForm, tol: f64) -> Regime {
    let det = h.det();
    if det > tol {
        Regime::Elliptic
    } else if det < -tol {
        Regime::Hyperbolic
    } else {
        Regime::Parabolic
    }
}

pub fn dissipation_coefficient(channels: &[LindbladChannel]) -> f64 {
    channels.iter().map(LindbladChannel::dissipation).sum()
}

/// `σ = 2√(−det H)`: real for hyperbolic, imaginary for elliptic flows.
pub fn sigma(h: &HamiltonianForm) -> Complex64 {
    let v = -h.det();
    if v >= 0.0 {
        Complex64::new(2.0 * v.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, 2.0 * (-v).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystem {
    pub hamiltonian: HamiltonianForm,
    pub channels: Vec<LindbladChannel>,
    pub hbar: f64,
}

impl OpenSystem {
    pub fn new(hamiltonian: HamiltonianForm, channels: Vec<LindbladChannel>, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self {
            hamiltonian,
            channels,
            hbar,
        })
    }

    pub fn alpha(&self) -> f64 {
        dissipation_coefficient(&self.channels)
    }

    pub fn sigma(&self) -> Complex64 {
        sigma(&self.hamiltonian)
    }

    pub fn regime(&self) -> Regime {
        classify(&self.hamiltonian, self.hamiltonian.default_tol())
    }

    /// `Σ_j (l′_j l′_jᵀ + l″_j l″_jᵀ)`, the source term of the damping matrix.
    pub fn channel_gram(&self) -> Mat2 {
        self.channels
            .iter()
            .fold(Mat2::zeros(), |acc, c| acc + outer(&c.l_re) + outer(&c.l_im))
    }

    /// Characteristic rates used to size scans and integration boxes.
    pub fn timescale(&self, horizon: f64) -> f64 {
        let mut rates = vec![self.alpha().abs(), self.sigma().norm(), inf_norm(&self.hamiltonian.generator())];
        rates.push(self.channel_gram().trace());
        let rate = rates.into_iter().fold(0.0f64, f64::max);
        if rate > 0.0 {
            (1.0 / rate).min(horizon)
        } else {
            horizon
        }
    }

    /// Thermal photon bath on an oscillator of frequency ω.
    pub fn photon_bath(omega: f64, gamma: f64, nbar: f64, hbar: f64) -> Result<Self> {
        if gamma < 0.0 || nbar < 0.0 {
            return Err(Error::InvalidParameter("photon bath needs gamma, nbar >= 0".into()));
        }
        let down = (gamma * (nbar + 1.0) / 2.0).sqrt();
        let up = (gamma * nbar / 2.0).sqrt();
        let channels = vec![
            LindbladChannel::new(Vec2::new(0.0, down), Vec2::new(down, 0.0))?,
            LindbladChannel::new(Vec2::new(0.0, up), Vec2::new(-up, 0.0))?,
        ];
        Self::new(HamiltonianForm::harmonic(omega), channels, hbar)
    }

    /// Particle in a uniform field, `p²/2 + q`, with one channel
    /// `l′ = (0, √D′)`, `l″ = (ε√D″, 0)`, so that `α = ε√(D′D″)`.
    pub fn uniform_field(d_prime: f64, d_second: f64, epsilon: f64, hbar: f64) -> Result<Self> {
        if d_prime < 0.0 || d_second < 0.0 {
            return Err(Error::InvalidParameter("diffusion constants must be >= 0".into()));
        }
        let h = HamiltonianForm::free_particle().with_linear(Vec2::new(0.0, 1.0));
        let channel = LindbladChannel::new(Vec2::new(0.0, d_prime.sqrt()), Vec2::new(epsilon * d_second.sqrt(), 0.0))?;
        Self::new(h, vec![channel], hbar)
    }

    pub fn from_descriptor(d: &SystemDescriptor) -> Result<Self> {
        let m = d.hamiltonian.matrix;
        let matrix = Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
        let linear = d.hamiltonian.linear.map(Vec2::from).unwrap_or_else(Vec2::zeros);
        let h = HamiltonianForm::new(matrix, linear)?;
        let channels = d
            .channels
            .iter()
            .map(|c| LindbladChannel::new(Vec2::from(c.l_re), Vec2::from(c.l_im)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h, channels, d.hbar)
    }

    pub fn to_descriptor(&self) -> SystemDescriptor {
        let m = self.hamiltonian.matrix();
        let b = self.hamiltonian.linear();
        SystemDescriptor {
            hbar: self.hbar,
            hamiltonian: HamiltonianDescriptor {
                matrix: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
                linear: Some([b[0], b[1]]),
            },
            channels: self
                .channels
                .iter()
                .map(|c| ChannelDescriptor {
                    l_re: [c.l_re[0], c.l_re[1]],
                    l_im: [c.l_im[0], c.l_im[1]],
                })
                .collect(),
        }
    }
}

/// Maps the system into coordinates `x′ = Cx`.
///
/// Linear forms pull back as `l ↦ C⁻ᵀl`, the quadratic part as `C⁻ᵀHC⁻¹`.
pub fn symplectic_transform(sys: &OpenSystem, c: &Mat2) -> Result<OpenSystem> {
    let scale = c.abs().max().max(1.0);
    let residual = symplectic_residual(c);
    if !(residual <= 1e-12 * scale * scale) {
        return Err(Error::NonSymplectic { residual });
    }
    // For symplectic C, C⁻¹ = −J Cᵀ J exactly.
    let j = symplectic_j();
    let c_inv = -j * c.transpose() * j;
    let c_inv_t = c_inv.transpose();
    let h = c_inv_t * sys.hamiltonian.matrix() * c_inv;
    let h = (h + h.transpose()) * 0.5;
    let linear = c_inv_t * sys.hamiltonian.linear();
    let channels = sys
        .channels
        .iter()
        .map(|ch| LindbladChannel {
            l_re: c_inv_t * ch.l_re,
            l_im: c_inv_t * ch.l_im,
        })
        .collect();
    OpenSystem::new(HamiltonianForm::new(h, linear)?, channels, sys.hbar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub hamiltonian: HamiltonianDescriptor,
    #[serde(default)]
    pub channels: Vec<ChannelDescriptor>,
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianDescriptor {
    pub matrix: [[f64; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDescriptor {
    pub l_re: [f64; 2],
    pub l_im: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symplectic_from_params;
    use proptest::prelude::*;

    #[test]
    fn canonical_regimes() {
        assert_eq!(classify(&HamiltonianForm::harmonic(1.0), 0.0), Regime::Elliptic);
        assert_eq!(classify(&HamiltonianForm::hyperbolic(1.0), 0.0), Regime::Hyperbolic);
        let h = HamiltonianForm::free_particle().with_linear(Vec2::new(0.0, 1.0));
        assert_eq!(classify(&h, h.default_tol()), Regime::Parabolic);
    }

    #[test]
    fn alpha_of_photon_bath_is_half_gamma() {
        let sys = OpenSystem::photon_bath(1.0, 1.0, 0.5, 1.0).unwrap();
        assert!((sys.alpha() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_examples() {
        let real_only = [LindbladChannel::new(Vec2::new(1.0, 2.0), Vec2::zeros()).unwrap()];
        assert_eq!(dissipation_coefficient(&real_only), 0.0);
        let single = [LindbladChannel::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap()];
        assert_eq!(dissipation_coefficient(&single), -1.0);
    }

    #[test]
    fn sigma_branches() {
        assert_eq!(sigma(&HamiltonianForm::harmonic(1.0)), Complex64::new(0.0, 1.0));
        assert_eq!(sigma(&HamiltonianForm::hyperbolic(1.0)), Complex64::new(1.0, 0.0));
        assert_eq!(sigma(&HamiltonianForm::quadratic(Mat2::zeros()).unwrap()), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let err = HamiltonianForm::quadratic(Mat2::new(1.0, 0.2, 0.3, 1.0)).unwrap_err();
        assert!(matches!(err, Error::AsymmetricHamiltonian { .. }));
    }

    #[test]
    fn identity_transform_is_noop() {
        let sys = OpenSystem::photon_bath(1.3, 0.7, 0.2, 1.0).unwrap();
        assert_eq!(symplectic_transform(&sys, &Mat2::identity()).unwrap(), sys);
    }

    #[test]
    fn pq_rotates_to_squared_difference() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = Mat2::new(r, r, -r, r);
        let sys = OpenSystem::new(HamiltonianForm::hyperbolic(1.0), vec![], 1.0).unwrap();
        let out = symplectic_transform(&sys, &c).unwrap();
        let expected = Mat2::new(0.5, 0.0, 0.0, -0.5);
        assert!((out.hamiltonian.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn non_symplectic_rejected() {
        let sys = OpenSystem::photon_bath(1.0, 1.0, 0.0, 1.0).unwrap();
        let err = symplectic_transform(&sys, &Mat2::new(2.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NonSymplectic { .. }));
    }

    #[test]
    fn descriptor_round_trip_and_unknown_fields() {
        let sys = OpenSystem::uniform_field(2.0, 1.0, -1.0, 0.5).unwrap();
        let text = serde_json::to_string(&sys.to_descriptor()).unwrap();
        let back: SystemDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(OpenSystem::from_descriptor(&back).unwrap(), sys);
        let bad = r#"{"hbar":1.0,"hamiltonian":{"matrix":[[1,0],[0,1]]},"channels":[],"extra":1}"#;
        assert!(serde_json::from_str::<SystemDescriptor>(bad).is_err());
    }

    fn arbitrary_system() -> impl Strategy<Value = OpenSystem> {
        (
            -2.0..2.0f64,
            -2.0..2.0f64,
            -2.0..2.0f64,
            prop::collection::vec(prop::array::uniform4(-1.0..1.0f64), 0..3),
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
        #[test]
        fn invariants_survive_symplectic_maps(
            sys in arbitrary_system(),
            theta in -3.0..3.0f64,
            squeeze in -1.0..1.0f64,
            shear in -1.5..1.5f64,
        ) {
            let c = symplectic_from_params(theta, squeeze, shear);
            let out = symplectic_transform(&sys, &c).unwrap();
            let scale = 1.0 + sys.alpha().abs();
            prop_assert!((out.alpha() - sys.alpha()).abs() < 1e-12 * scale * 10.0);
            prop_assert!((out.sigma() - sys.sigma()).norm() < 1e-9 * (1.0 + sys.sigma().norm()));
            let tol = 1e-9 * (1.0 + inf_norm(sys.hamiltonian.matrix()));
            let det_in = sys.hamiltonian.det();
            if det_in.abs() > 10.0 * tol {
                prop_assert_eq!(classify(&out.hamiltonian, tol), classify(&sys.hamiltonian, tol));
            }
        }
    }
}
