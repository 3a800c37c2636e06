//! Uniform rectangular phase-space grids and their CSV/JSON serialization.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

/// Sample points `p_i = origin[0] + i·spacing[0]`, `q_j = origin[1] + j·spacing[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub shape: [usize; 2],
}

impl GridSpec {
    pub fn new(origin: [f64; 2], spacing: [f64; 2], shape: [usize; 2]) -> Result<Self> {
        let spec = Self { origin, spacing, shape };
        spec.validate()?;
        Ok(spec)
    }

    /// `n × n` points covering `[c − L, c + L)` on each axis, so that the
    /// centre is a grid point whenever `n` is even.
    pub fn centered(center: Vec2, half_width: f64, n: usize) -> Result<Self> {
        let h = 2.0 * half_width / n as f64;
        Self::new([center[0] - half_width, center[1] - half_width], [h, h], [n, n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape[0] == 0 || self.shape[1] == 0 {
            return Err(Error::InvalidParameter("grid shape must be positive".into()));
        }
        if !(self.spacing[0] > 0.0 && self.spacing[1] > 0.0) {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn p(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.spacing[0]
    }

    pub fn q(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.spacing[1]
    }

    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.p(i), self.q(j))
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    /// Nearest grid index to a phase-space point, if inside the grid.
    pub fn nearest(&self, x: &Vec2) -> Option<(usize, usize)> {
        let fi = ((x[0] - self.origin[0]) / self.spacing[0]).round();
        let fj = ((x[1] - self.origin[1]) / self.spacing[1]).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.shape[0] as f64 || fj >= self.shape[1] as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

/// Field sampled on a [`GridSpec`], indexed `[i_p, j_q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Array2<Complex64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Array2<Complex64>) -> Result<Self> {
        spec.validate()?;
        if values.dim() != (spec.shape[0], spec.shape[1]) {
            return Err(Error::InvalidParameter(format!(
                "values shape {:?} does not match grid shape {:?}",
                values.dim(),
                spec.shape
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn from_real(spec: GridSpec, values: Array2<f64>) -> Result<Self> {
        Self::new(spec, values.mapv(|v| Complex64::new(v, 0.0)))
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&Vec2) -> Complex64) -> Self {
        let values = Array2::from_shape_fn((spec.shape[0], spec.shape[1]), |(i, j)| f(&spec.point(i, j)));
        Self { spec, values }
    }

    pub fn real(&self) -> Array2<f64> {
        self.values.mapv(|v| v.re)
    }

    /// Riemann sum of the real part times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().map(|v| v.re).sum::<f64>() * self.spec.cell_area()
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn argmin_real(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut v = f64::INFINITY;
        for ((i, j), x) in self.values.indexed_iter() {
            if x.re < v {
                v = x.re;
                best = (i, j);
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude on the outermost ring of samples.
    pub fn border_max_abs(&self) -> f64 {
        let (n, m) = self.values.dim();
        let mut out = 0.0f64;
        for ((i, j), v) in self.values.indexed_iter() {
            if i == 0 || j == 0 || i + 1 == n || j + 1 == m {
                out = out.max(v.norm());
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        if self.spec.shape != other.spec.shape {
            return Err(Error::InvalidParameter("grid shapes differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Row-major CSV with header `p,q,value_re,value_im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["p", "q", "value_re", "value_im"])?;
        for ((i, j), v) in self.values.indexed_iter() {
            out.write_record(&[
                format!("{:.17e}", self.spec.p(i)),
                format!("{:.17e}", self.spec.q(j)),
                format!("{:.17e}", v.re),
                format!("{:.17e}", v.im),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.spec)?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(spec: GridSpec, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut data = Vec::with_capacity(spec.shape[0] * spec.shape[1]);
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad CSV field {k}")))
            };
            data.push(Complex64::new(parse(2)?, parse(3)?));
        }
        let values = Array2::from_shape_vec((spec.shape[0], spec.shape[1]), data)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(spec, values)
    }
}
