//! Langevin counterpart of the Wigner Fokker–Planck equation, integrated by
//! Euler–Maruyama over an ensemble of independent paths.

use std::io::Write;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::linalg::{outer, symplectic_j, Mat2, Vec2};
use crate::model::{symplectic_transform, HamiltonianForm, OpenSystem};

/// `dx = (A x + c) dt + Σ_k v_k dW_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeSpec {
    pub drift_matrix: Mat2,
    pub drift_offset: Vec2,
    pub noise_vectors: Vec<Vec2>,
}

impl SdeSpec {
    /// Drift `2JH − α`, offset `Jb`, noise `√ħ·Jl′` and `√ħ·Jl″` per channel.
    pub fn from_system(sys: &OpenSystem) -> Self {
        let j = symplectic_j();
        let s = sys.hbar.sqrt();
        let noise_vectors = sys
            .channels
            .iter()
            .flat_map(|c| [j * c.l_re * s, j * c.l_im * s])
            .collect();
        Self {
            drift_matrix: sys.hamiltonian.generator() - Mat2::identity() * sys.alpha(),
            drift_offset: j * sys.hamiltonian.linear(),
            noise_vectors,
        }
    }

    /// Fokker–Planck diffusion `D = ½ Σ v vᵀ`.
    pub fn diffusion_matrix(&self) -> Mat2 {
        self.noise_vectors.iter().fold(Mat2::zeros(), |acc, v| acc + outer(v)) * 0.5
    }
}

/// Gaussian initial distribution for the paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInit {
    pub mean: Vec2,
    pub cov: Mat2,
}

impl GaussianInit {
    fn cholesky(&self) -> Result<Mat2> {
        if self.cov == Mat2::zeros() {
            return Ok(Mat2::zeros());
        }
        self.cov
            .cholesky()
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams {
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Record every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
}

/// Recorded states, indexed `[path, record, component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub paths: Array3<f64>,
    pub times: Vec<f64>,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl TrajectoryEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.dim().0
    }

    pub fn samples(&self, record: usize) -> Vec<Vec2> {
        (0..self.n_paths())
            .map(|k| Vec2::new(self.paths[[k, record, 0]], self.paths[[k, record, 1]]))
            .collect()
    }

    /// CSV with header `t,mean_p,mean_q,cov_pp,cov_pq,cov_qq,n_paths`.
    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "mean_p", "mean_q", "cov_pp", "cov_pq", "cov_qq", "n_paths"])?;
        for (r, t) in self.times.iter().enumerate() {
            let (m, c) = ensemble_moments(self, r)?;
            out.write_record(&[
                format!("{t:.17e}"),
                format!("{:.17e}", m[0]),
                format!("{:.17e}", m[1]),
                format!("{:.17e}", c[(0, 0)]),
                format!("{:.17e}", c[(0, 1)]),
                format!("{:.17e}", c[(1, 1)]),
                self.n_paths().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Euler–Maruyama with a ChaCha8 substream per path, keyed by the path
/// index, so results do not depend on how paths are scheduled.
pub fn simulate(spec: &SdeSpec, init: &GaussianInit, params: &SimulationParams) -> Result<TrajectoryEnsemble> {
    let SimulationParams {
        t,
        dt,
        n_paths,
        seed,
        record_every,
    } = *params;
    if !(dt > 0.0) || n_paths == 0 || !(t >= dt) || record_every == 0 {
        return Err(Error::InvalidParameter("need dt > 0, n >= 1, t >= dt, record_every >= 1".into()));
    }
    let steps = (t / dt).round() as usize;
    let chol = init.cholesky()?;
    let mut record_steps: Vec<usize> = (0..=steps).step_by(record_every).collect();
    if *record_steps.last().unwrap() != steps {
        record_steps.push(steps);
    }
    let times: Vec<f64> = record_steps.iter().map(|&k| k as f64 * dt).collect();
    let n_rec = record_steps.len();
    let sqrt_dt = dt.sqrt();
    let a = spec.drift_matrix;
    let c = spec.drift_offset;
    let noise = &spec.noise_vectors;

    let per_path: Vec<Vec<[f64; 2]>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let mut x = init.mean + chol * z;
            let mut out = Vec::with_capacity(n_rec);
            let mut next = 0;
            for step in 0..=steps {
                if record_steps[next] == step {
                    out.push([x[0], x[1]]);
                    next += 1;
                    if next == n_rec {
                        break;
                    }
                }
                let mut dx = (a * x + c) * dt;
                for v in noise {
                    let w: f64 = rng.sample(StandardNormal);
                    dx += v * (w * sqrt_dt);
                }
                x += dx;
            }
            out
        })
        .collect();

    let mut paths = Array3::zeros((n_paths, n_rec, 2));
    for (k, rec) in per_path.iter().enumerate() {
        for (r, v) in rec.iter().enumerate() {
            paths[[k, r, 0]] = v[0];
            paths[[k, r, 1]] = v[1];
        }
    }
    Ok(TrajectoryEnsemble {
        paths,
        times,
        dt,
        seed,
        scheme: Scheme::EulerMaruyama,
    })
}

fn pairwise_sum(f: &dyn Fn(usize) -> f64, lo: usize, hi: usize) -> f64 {
    if hi - lo <= 32 {
        (lo..hi).map(f).sum()
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum(f, lo, mid) + pairwise_sum(f, mid, hi)
    }
}

/// Sample mean and unbiased covariance at a recorded step.
pub fn ensemble_moments(ens: &TrajectoryEnsemble, record: usize) -> Result<(Vec2, Mat2)> {
    let (n, n_rec, _) = ens.paths.dim();
    if record >= n_rec {
        return Err(Error::InvalidParameter(format!("record {record} out of range")));
    }
    let x = |k: usize, c: usize| ens.paths[[k, record, c]];
    let nf = n as f64;
    let mean = Vec2::new(
        pairwise_sum(&|k| x(k, 0), 0, n) / nf,
        pairwise_sum(&|k| x(k, 1), 0, n) / nf,
    );
    if n < 2 {
        return Ok((mean, Mat2::zeros()));
    }
    let d = |k: usize, c: usize| x(k, c) - mean[c];
    let denom = nf - 1.0;
    let pp = pairwise_sum(&|k| d(k, 0) * d(k, 0), 0, n) / denom;
    let pq = pairwise_sum(&|k| d(k, 0) * d(k, 1), 0, n) / denom;
    let qq = pairwise_sum(&|k| d(k, 1) * d(k, 1), 0, n) / denom;
    Ok((mean, Mat2::new(pp, pq, pq, qq)))
}

/// Total-variation distance between the empirical distribution of `samples`
/// and the density sampled in `field`, on blocks of `block × block` cells.
/// Samples outside the grid count fully towards the distance.
pub fn histogram_tv(samples: &[Vec2], field: &GridField, block: usize) -> f64 {
    let spec = field.spec;
    let nb = [spec.shape[0].div_ceil(block), spec.shape[1].div_ceil(block)];
    let mut model = vec![0.0; nb[0] * nb[1]];
    for ((i, j), v) in field.values.indexed_iter() {
        model[(i / block) * nb[1] + j / block] += v.re * spec.cell_area();
    }
    let mut counts = vec![0.0; nb[0] * nb[1]];
    let mut outside = 0.0;
    let n = samples.len() as f64;
    for x in samples {
        // Cell i covers [p_i − Δ/2, p_i + Δ/2).
        match spec.nearest(x) {
            Some((i, j)) => counts[(i / block) * nb[1] + j / block] += 1.0 / n,
            None => outside += 1.0 / n,
        }
    }
    let inside: f64 = model.iter().zip(&counts).map(|(m, c)| (m - c).abs()).sum();
    0.5 * (inside + outside)
}

/// Coordinates in which friction acts on the momentum alone.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumFrame {
    /// System expressed in the new coordinates `x̄ = C x`.
    pub system: OpenSystem,
    pub transform: Mat2,
    /// Hamiltonian whose flow, with momentum friction `2α`, gives the drift.
    pub friction_hamiltonian: HamiltonianForm,
    pub momentum_friction: f64,
}

/// Shear `p̄ = p − (α/2H₁₁) q`.
pub fn momentum_dissipation_frame(sys: &OpenSystem) -> Result<MomentumFrame> {
    let h = sys.hamiltonian.matrix();
    if h[(0, 0)] == 0.0 {
        return Err(Error::SingularFrame);
    }
    let alpha = sys.alpha();
    let k = alpha / (2.0 * h[(0, 0)]);
    let c = Mat2::new(1.0, -k, 0.0, 1.0);
    let system = symplectic_transform(sys, &c)?;
    let mut hbar = *system.hamiltonian.matrix();
    hbar[(0, 1)] -= 0.5 * alpha;
    hbar[(1, 0)] -= 0.5 * alpha;
    let friction_hamiltonian = HamiltonianForm::new(hbar, *system.hamiltonian.linear())?;
    Ok(MomentumFrame {
        system,
        transform: c,
        friction_hamiltonian,
        momentum_friction: 2.0 * alpha,
    })
}
