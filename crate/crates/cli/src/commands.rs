use std::f64::consts::PI;

use serde::Serialize;
use serde_json::json;

use symplectic_lindblad::analysis::{
    det_curve, positivity_time, purity, reconstruct, uniform_field_sweep, PositivityStatus, PurityCurve,
    SWEEP_D_SECOND,
};
use symplectic_lindblad::langevin::{ensemble_moments, histogram_tv, simulate, GaussianInit, SdeSpec, SimulationParams};
use symplectic_lindblad::oracle::fock::default_dim;
use symplectic_lindblad::oracle::{integrate_fock_lindblad, integrate_fokker_planck, wigner_from_fock, FockDensity};
use symplectic_lindblad::propagator::{evolve_gaussian_moments, evolve_state, evolve_wigner_grid};
use symplectic_lindblad::states::StateKind;
use symplectic_lindblad::{GridField, Mat2, OpenSystem, Vec2};

use crate::config::{EvolveOutput, RunConfig};
use crate::failure::Failure;
use crate::output::Output;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn json_bytes(v: &impl Serialize) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn csv_field(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn classify(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let alpha = sys.alpha();
    let sigma = sys.sigma();
    let report = json!({
        "regime": sys.regime(),
        "alpha": alpha,
        "sigma": [sigma.re, sigma.im],
        "hbar": sys.hbar,
        "det_h": sys.hamiltonian.det(),
        "timescales": {
            "dissipation": finite(1.0 / alpha.abs()),
            "oscillation": finite(1.0 / sigma.norm()),
            "system": finite(sys.timescale(f64::INFINITY)),
        },
    });
    out.primary(&json_bytes(&report)?)
}

pub struct PositivityFlags {
    pub sweep: bool,
    pub require_reached: bool,
    pub threshold_table: bool,
}

pub fn positivity(cfg: &RunConfig, flags: &PositivityFlags, out: &Output) -> Result<(), Failure> {
    if flags.threshold_table {
        return threshold_table(cfg, out);
    }
    if flags.sweep {
        return sweep(cfg, flags, out);
    }
    let sys = cfg.system()?;
    let res = positivity_time(&sys, cfg.horizon)?;
    out.primary(&json_bytes(&res)?)?;
    if let Some(times) = &cfg.det_curve {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "det_m"])?;
        for (t, d) in det_curve(&sys, times)? {
            w.write_record([csv_field(t), csv_field(d)])?;
        }
        out.secondary("det.csv", &finish(w)?)?;
    }
    if flags.require_reached {
        if let PositivityStatus::Unreached { limit, horizon } = res.status {
            return Err(Failure::NotReached(format!("det M(−t) peaked at {limit:e} within horizon {horizon}")));
        }
    }
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, Failure> {
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

fn sweep(cfg: &RunConfig, flags: &PositivityFlags, out: &Output) -> Result<(), Failure> {
    let hbar = cfg.system().map(|s| s.hbar).unwrap_or(1.0);
    let rows = uniform_field_sweep(cfg.d_prime, &cfg.d_seconds, cfg.horizon, hbar)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table_epsilon", "channel_sign", "d_prime", "d_second", "alpha", "t_p"])?;
    for r in &rows {
        w.write_record([
            format!("{}", r.table_epsilon),
            format!("{}", r.channel_sign),
            csv_field(r.d_prime),
            csv_field(r.d_second),
            csv_field(r.alpha),
            r.t_p.map(csv_field).unwrap_or_default(),
        ])?;
    }
    out.primary(&finish(w)?)?;
    if flags.require_reached && rows.iter().any(|r| r.t_p.is_none()) {
        return Err(Failure::NotReached("at least one sweep row has no threshold".into()));
    }
    Ok(())
}

/// Uniform-field thresholds for `D′ = 2` as an ε-by-D″ table, followed by
/// photon-bath thresholds next to `(1/γ)ln(1 + 1/(2n̄+1))`.
fn threshold_table(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let rows = uniform_field_sweep(cfg.d_prime, &SWEEP_D_SECOND, cfg.horizon, 1.0)?;
    let three = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "none".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["D''".to_string()];
    header.extend(SWEEP_D_SECOND.iter().map(|d| format!("{d}")));
    w.write_record(&header)?;
    for eps in [-1.0, 1.0] {
        let mut rec = vec![format!("epsilon={eps}")];
        rec.extend(rows.iter().filter(|r| r.table_epsilon == eps).map(|r| three(r.t_p)));
        w.write_record(&rec)?;
    }
    let nbars = [0.0, 0.5, 1.0, 2.0, 3.0];
    let mut head = vec!["nbar".to_string()];
    head.extend(nbars.iter().map(|n| format!("{n}")));
    let mut solved = vec!["t_p(gamma=1)".to_string()];
    let mut formula = vec!["ln(1+1/(2nbar+1))".to_string()];
    for &nbar in &nbars {
        let sys = OpenSystem::photon_bath(0.0, 1.0, nbar, 1.0)?;
        solved.push(three(positivity_time(&sys, cfg.horizon)?.time()));
        formula.push(format!("{:.3}", (1.0 / (2.0 * nbar + 1.0)).ln_1p()));
    }
    w.write_record(&head)?;
    w.write_record(&solved)?;
    w.write_record(&formula)?;
    out.primary(&finish(w)?)
}

pub fn evolve(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let state = cfg.state()?;
    let t = cfg.time()?;
    let grid = cfg.grid.spec()?;
    match cfg.output {
        EvolveOutput::Wigner => {
            let field = evolve_wigner_grid(&sys, &state, t, &grid)?;
            let mut buf = Vec::new();
            field.write_csv(&mut buf)?;
            out.primary(&buf)?;
            let (i, j) = field.argmin_real();
            let meta = json!({
                "grid": grid,
                "t": t,
                "state": state.label,
                "min": field.min_real(),
                "argmin": [grid.p(i), grid.q(j)],
                "integral": field.integral(),
            });
            out.secondary("json", &json_bytes(&meta)?)
        }
        EvolveOutput::Chord => {
            let evolved = evolve_state(&sys, &state, t)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["xi_p", "xi_q", "value_re", "value_im"])?;
            for i in 0..grid.shape[0] {
                for j in 0..grid.shape[1] {
                    let xi = grid.point(i, j);
                    let v = evolved.eval(&xi);
                    w.write_record([csv_field(xi[0]), csv_field(xi[1]), csv_field(v.re), csv_field(v.im)])?;
                }
            }
            out.primary(&finish(w)?)
        }
    }
}

pub fn entropy(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let state = cfg.state()?;
    let curve = PurityCurve::compute(&sys, &state, &cfg.times())?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    out.primary(&buf)
}

pub fn langevin(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let state = cfg.state()?;
    let t = cfg.time()?;
    let (mean, cov) = state
        .gaussian_moments()
        .ok_or_else(|| Failure::Config("langevin needs a coherent or gaussian state".into()))?;
    let steps = (t / cfg.dt).round() as usize;
    let params = SimulationParams {
        t,
        dt: cfg.dt,
        n_paths: cfg.n,
        seed: cfg.seed,
        record_every: if cfg.record_every == 0 { steps.max(1) } else { cfg.record_every },
    };
    let ens = simulate(&SdeSpec::from_system(&sys), &GaussianInit { mean, cov }, &params)?;
    let mut buf = Vec::new();
    ens.write_summary(&mut buf)?;
    out.primary(&buf)?;

    let last = ens.times.len() - 1;
    let t_end = ens.times[last];
    let (m, c) = ensemble_moments(&ens, last)?;
    let (m_exact, c_exact) = evolve_gaussian_moments(&sys, &mean, &cov, t_end)?;
    let tol = 4.0 / (cfg.n as f64).sqrt();
    // Errors in units of the exact standard deviations.
    let sd = Vec2::new(c_exact[(0, 0)].sqrt(), c_exact[(1, 1)].sqrt());
    let mean_err = (0..2).map(|k| (m[k] - m_exact[k]).abs() / sd[k]).fold(0.0, f64::max);
    let cov_err = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| (c[(a, b)] - c_exact[(a, b)]).abs() / (sd[a] * sd[b]))
        .fold(0.0, f64::max);
    let grid = cfg.grid.spec()?;
    let density = gaussian_density(m_exact, c_exact, &grid);
    let tv = histogram_tv(&ens.samples(last), &density, 8);
    let report = json!({
        "t": t_end,
        "n_paths": cfg.n,
        "seed": cfg.seed,
        "mean": [m[0], m[1]],
        "mean_exact": [m_exact[0], m_exact[1]],
        "cov": [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
        "cov_exact": [[c_exact[(0, 0)], c_exact[(0, 1)]], [c_exact[(1, 0)], c_exact[(1, 1)]]],
        "tolerance": tol,
        "mean_error": mean_err,
        "cov_error": cov_err,
        "mean_pass": mean_err <= tol,
        "cov_pass": cov_err <= tol,
        "histogram_tv": tv,
        "histogram_tv_bound": 5.0 / (cfg.n as f64).sqrt(),
    });
    out.secondary("report.json", &json_bytes(&report)?)
}

fn gaussian_density(mean: Vec2, cov: Mat2, grid: &symplectic_lindblad::GridSpec) -> GridField {
    let inv = cov.try_inverse().unwrap_or_else(Mat2::zeros);
    let norm = 1.0 / (2.0 * PI * cov.determinant().max(0.0).sqrt());
    GridField::from_fn(*grid, |x| {
        let d = x - mean;
        (norm * (-0.5 * d.dot(&(inv * d))).exp()).into()
    })
}

pub fn reconstruct_cmd(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let state = cfg.state()?;
    let t = cfg.time()?;
    let grid = cfg.grid.spec()?;
    let evolved = evolve_state(&sys, &state, t)?;
    let rec = reconstruct(&sys, &evolved, t, cfg.floor)?;
    let scale = state.norm_value();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["xi_p", "xi_q", "value_re", "value_im", "reliable", "damping"])?;
    let mut reliable = 0usize;
    let mut max_err: f64 = 0.0;
    for i in 0..grid.shape[0] {
        for j in 0..grid.shape[1] {
            let xi = grid.point(i, j);
            let v = rec.state.eval(&xi);
            let ok = rec.reliable(&xi);
            if ok {
                reliable += 1;
                max_err = max_err.max((v - state.eval(&xi)).norm() / scale);
            }
            w.write_record([
                csv_field(xi[0]),
                csv_field(xi[1]),
                csv_field(v.re),
                csv_field(v.im),
                ok.to_string(),
                csv_field(rec.damping_at(&xi)),
            ])?;
        }
    }
    out.primary(&finish(w)?)?;
    let total = grid.shape[0] * grid.shape[1];
    let report = json!({
        "t": t,
        "floor": cfg.floor,
        "reliable_points": reliable,
        "total_points": total,
        "reliable_fraction": reliable as f64 / total as f64,
        "max_error_relative_to_peak": max_err,
    });
    out.secondary("report.json", &json_bytes(&report)?)
}

fn tv_distance(a: &GridField, b: &GridField) -> Result<f64, Failure> {
    let area = a.spec.cell_area();
    let (ra, rb) = (a.real(), b.real());
    if ra.dim() != rb.dim() {
        return Err(Failure::Config("grids differ".into()));
    }
    Ok(0.5 * ra.iter().zip(rb.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() * area)
}

pub fn oracle_compare(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let sys = cfg.system()?;
    let state = cfg.state()?;
    let t = cfg.time()?;
    let grid = cfg.grid.spec()?;
    let hbar = sys.hbar;

    let exact = evolve_wigner_grid(&sys, &state, t, &grid)?;
    let rho0 = match &state.kind {
        StateKind::Coherent { center } => {
            let d = if cfg.fock_dim > 0 { cfg.fock_dim } else { default_dim(center.norm(), hbar, 0.0) };
            Some(FockDensity::coherent(*center, hbar, d))
        }
        StateKind::Cat(p) => {
            let d = if cfg.fock_dim > 0 { cfg.fock_dim } else { default_dim(p.zeta, hbar, 0.0) };
            Some(FockDensity::cat(p.zeta, hbar, d))
        }
        _ => None,
    };
    let rho0 = rho0.ok_or_else(|| Failure::Config("oracle-compare needs a coherent or cat state".into()))?;
    let w0 = wigner_from_fock(&rho0, hbar, &grid)?;

    let fp = integrate_fokker_planck(&sys, &w0, t, cfg.dt)?;
    let rho_t = integrate_fock_lindblad(&sys, &rho0, t, cfg.dt.min(0.01))?;
    let fock = wigner_from_fock(&rho_t, hbar, &grid)?;

    let mut report = json!({
        "t": t,
        "grid": grid,
        "fp_dt": fp.dt,
        "fp_steps": fp.steps,
        "fock_dim": rho0.dim(),
        "linf": {
            "exact_fp": exact.max_abs_diff(&fp.field)?,
            "exact_fock": exact.max_abs_diff(&fock)?,
            "fp_fock": fp.field.max_abs_diff(&fock)?,
        },
        "tv": {
            "exact_fp": tv_distance(&exact, &fp.field)?,
            "exact_fock": tv_distance(&exact, &fock)?,
            "fp_fock": tv_distance(&fp.field, &fock)?,
        },
        "purity": {
            "exact": purity(&sys, &state, t)?,
            "fock": rho_t.purity(),
        },
        "fp_mass": [fp.initial_mass, fp.final_mass],
    });
    if cfg.refine {
        // Self-convergence in time: halving the step twice.
        let half = integrate_fokker_planck(&sys, &w0, t, fp.dt / 2.0)?;
        let quarter = integrate_fokker_planck(&sys, &w0, t, fp.dt / 4.0)?;
        let e1 = fp.field.max_abs_diff(&half.field)?;
        let e2 = half.field.max_abs_diff(&quarter.field)?;
        report["refinement"] = json!({
            "dt": [fp.dt, half.dt, quarter.dt],
            "differences": [e1, e2],
            "order": finite((e1 / e2).log2()),
        });
    }
    out.primary(&json_bytes(&report)?)
}
