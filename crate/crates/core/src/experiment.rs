//! Optimization runs with their on-disk artifacts, and parameter sweeps.
//!
//! A run directory holds
//! - `config.txt`: the effective configuration,
//! - `iterations.csv`: one row per accepted iterate,
//! - `stress_profile.csv`: cell maximum of `|σ^D|_F` per time node of the final state,
//! - `summary.json`: final diagnostics,
//! - `sigma_dev_XXXX.vtk` snapshots when `vtk_every > 0`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::control::PsiQuadrature;
use crate::error::{Error, Result};
use crate::optim::{dist_k, fd_gradient_error, gradient_descent, FdCheck, IterationRecord, OptimResult, Termination};
use crate::problem::Problem;
use crate::state::StateTrajectory;
use crate::vtk;

pub const ITERATIONS_HEADER: &str = "iter,objective,tracking_term,tikhonov_term,grad_norm,step_size,dist_K,wall_time_s";

#[derive(Clone, Debug, Serialize)]
pub struct ArmijoSummary {
    pub c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub warm_start: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub lambda_yosida: f64,
    pub delta_smooth: f64,
    pub epsilon_hardening: f64,
    pub alpha: f64,
    pub n_t: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub psi_quadrature: PsiQuadrature,
    pub iterations: usize,
    pub termination: String,
    pub objective: f64,
    pub tracking_term: f64,
    pub tikhonov_term: f64,
    pub grad_norm: f64,
    /// `⟨g, −g⟩` at the final iterate.
    pub directional_derivative: f64,
    pub difference_quotient: f64,
    pub fd_tau: f64,
    pub err: Option<f64>,
    #[serde(rename = "dist_K")]
    pub dist_k: f64,
    /// Largest final Newton residual over the time steps of the final state.
    pub max_newton_residual: f64,
    pub armijo: ArmijoSummary,
    pub wall_time_s: f64,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub result: OptimResult,
    pub fd: FdCheck,
    /// `(t_k, max_T |σ^D(t_k)|_F)` of the final state.
    pub stress_profile: Vec<(f64, f64)>,
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_context(path, e))
}

pub fn csv_row(r: &IterationRecord) -> String {
    format!(
        "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6}",
        r.iter, r.objective, r.tracking_term, r.tikhonov_term, r.grad_norm, r.step_size, r.dist_k, r.wall_time_s
    )
}

pub fn stress_profile(state: &StateTrajectory) -> Vec<(f64, f64)> {
    (0..state.grid.n_nodes())
        .map(|k| (state.grid.t(k), state.max_deviator(k)))
        .collect()
}

fn write_vtk_series(dir: &Path, problem: &Problem, state: &StateTrajectory, every: usize) -> Result<()> {
    for k in (0..state.grid.n_nodes()).step_by(every) {
        let values: Vec<f64> = state.sigma[k].iter().map(|s| s.deviator().frob_norm()).collect();
        let path = dir.join(format!("sigma_dev_{k:04}.vtk"));
        let title = format!("deviatoric stress at t = {:.6}", state.grid.t(k));
        vtk::write_unstructured(
            create(&path)?,
            &title,
            &problem.mesh,
            ("sigma_dev_frobenius", &values),
            Some(&state.u[k]),
        )
        .map_err(|e| io_context(&path, e))?;
    }
    Ok(())
}

/// Run gradient descent from `ℓ = 0` and write the artifacts to `cfg.output_dir`.
///
/// A failed line search is a regular outcome and is reported in the summary.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    fs::write(dir.join("config.txt"), cfg.to_config_string()).map_err(|e| io_context(dir, e))?;

    let problem = Problem::new(cfg.problem.clone())?;
    let csv_path = dir.join("iterations.csv");
    let mut csv = create(&csv_path)?;
    writeln!(csv, "{ITERATIONS_HEADER}").map_err(|e| io_context(&csv_path, e))?;
    let mut write_error = None;
    let result = gradient_descent(&problem, &cfg.optim, |r| {
        if write_error.is_none() {
            if let Err(e) = writeln!(csv, "{}", csv_row(r)).and_then(|_| csv.flush()) {
                write_error = Some(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(io_context(&csv_path, e));
    }

    let last = result.records.last().expect("at least the initial record");
    let fd = fd_gradient_error(
        &problem,
        &result.control,
        &result.last.gradient,
        last.objective,
        cfg.optim.fd_tau,
    )?;
    let state = &result.last.state;
    let profile = stress_profile(state);
    let profile_path = dir.join("stress_profile.csv");
    let mut out = create(&profile_path)?;
    let mut text = String::from("t,max_sigma_dev_frobenius\n");
    for (t, m) in &profile {
        text.push_str(&format!("{t:.9},{m:.12e}\n"));
    }
    out.write_all(text.as_bytes()).map_err(|e| io_context(&profile_path, e))?;
    if cfg.vtk_every > 0 {
        write_vtk_series(dir, &problem, state, cfg.vtk_every)?;
    }

    let p = &cfg.problem;
    let o = &cfg.optim;
    let summary = RunSummary {
        lambda_yosida: p.lambda_yosida,
        delta_smooth: p.delta_smooth,
        epsilon_hardening: p.epsilon_hardening,
        alpha: p.alpha,
        n_t: p.n_t,
        n_x: p.n_x,
        n_y: p.n_y,
        psi_quadrature: p.psi_quadrature,
        iterations: last.iter,
        termination: termination_label(&result.termination),
        objective: last.objective,
        tracking_term: last.tracking_term,
        tikhonov_term: last.tikhonov_term,
        grad_norm: last.grad_norm,
        directional_derivative: fd.derivative,
        difference_quotient: fd.quotient,
        fd_tau: o.fd_tau,
        err: fd.err,
        dist_k: dist_k(state, p.gamma_yield),
        max_newton_residual: state.residuals.iter().copied().fold(0.0, f64::max),
        armijo: ArmijoSummary {
            c1: o.armijo_c1,
            backtrack_factor: o.backtrack_factor,
            initial_step: o.initial_step,
            max_backtracks: o.max_backtracks,
            warm_start: "last accepted step, doubled after two consecutive first-trial acceptances",
        },
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.into()))?;
    fs::write(dir.join("summary.json"), json + "\n").map_err(|e| io_context(dir, e))?;
    Ok(RunOutput {
        summary,
        result,
        fd,
        stress_profile: profile,
    })
}

pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "max_iterations".into(),
        Termination::LineSearchFailed(msg) => format!("line_search_failed: {msg}"),
    }
}

pub const SWEEP_HEADER: &str =
    "value,iterations,directional_derivative,difference_quotient,err,dist_K,objective,grad_norm,termination";

/// One row of a sweep table. `summary` is `None` when the run failed with `error`.
pub struct SweepRow {
    pub value: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        match (&self.summary, &self.error) {
            (Some(s), _) => format!(
                "{},{},{:.6e},{:.6e},{},{:.6e},{:.9e},{:.6e},{}",
                self.value,
                s.iterations,
                s.directional_derivative,
                s.difference_quotient,
                s.err.map_or("undefined".to_string(), |e| format!("{e:.6e}")),
                s.dist_k,
                s.objective,
                s.grad_norm,
                s.termination.split(':').next().unwrap_or_default()
            ),
            (None, e) => format!(
                "{},,,,,,,,error: {}",
                self.value,
                e.as_deref().unwrap_or("unknown").replace(',', ";")
            ),
        }
    }
}

/// Run `base` once per value of `key`, each in `output_dir/<key>_<value>`, and
/// write `sweep_<key>.csv` to `output_dir`.
pub fn sweep(base: &ExperimentConfig, key: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    let root: PathBuf = base.output_dir.clone();
    fs::create_dir_all(&root).map_err(|e| io_context(&root, e))?;
    let table_path = root.join(format!("sweep_{key}.csv"));
    let mut table = create(&table_path)?;
    writeln!(table, "{SWEEP_HEADER}").map_err(|e| io_context(&table_path, e))?;
    let mut rows = Vec::new();
    for value in values {
        let mut cfg = base.clone();
        cfg.set(key, value)?;
        cfg.output_dir = root.join(format!("{key}_{value}"));
        cfg.validate()?;
        let row = match run(&cfg) {
            Ok(out) => SweepRow {
                value: value.clone(),
                summary: Some(out.summary),
                error: None,
            },
            Err(e @ (Error::Config(_) | Error::Io(_))) => return Err(e),
            Err(e) => {
                log::error!("{key} = {value}: {e}");
                SweepRow {
                    value: value.clone(),
                    summary: None,
                    error: Some(e.to_string()),
                }
            }
        };
        writeln!(table, "{}", row.to_csv())
            .and_then(|_| table.flush())
            .map_err(|e| io_context(&table_path, e))?;
        rows.push(row);
    }
    Ok(rows)
}
