//! CSV and JSON artifacts. Numbers are written with 15 significant digits;
//! a non-finite value is an error rather than a silent `NaN` in a file.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::conservation::{observed_orders, ConservationReport};
use crate::error::{Error, Result};
use crate::eulerian::Trajectory;
use crate::grid::GridFunction;
use crate::lagrangian::{FlowState, FlowTrajectory};
use crate::nonuniform::ExperimentReport;

pub fn fmt_num(x: f64) -> Result<String> {
    if x.is_finite() {
        Ok(format!("{x:.14e}"))
    } else {
        Err(Error::Numerical(format!("refusing to write non-finite value {x}")))
    }
}

fn fmt_opt(x: Option<f64>) -> Result<String> {
    x.map(fmt_num).transpose().map(Option::unwrap_or_default)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Result<Vec<String>>>) -> Result<()> {
    // Format everything before touching the file so a failure leaves no
    // partial artifact.
    let rows: Vec<Vec<String>> = rows.into_iter().collect::<Result<_>>()?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `value` as pretty JSON. Non-finite floats become `null`.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_grid_function_csv(path: &Path, f: &GridFunction) -> Result<()> {
    let grid = f.grid();
    write_rows(
        path,
        &["x", "value"],
        grid.points()
            .zip(f.samples())
            .map(|(x, &v)| Ok(vec![fmt_num(x)?, fmt_num(v)?])),
    )
}

/// Columns `x,phi,phi_x,v,psi` with `phi` lifted to `x + displacement`.
pub fn write_flow_state_csv(path: &Path, state: &FlowState) -> Result<()> {
    let grid = state.grid();
    let phi = state.phi.values();
    let rows = (0..grid.n()).map(|j| {
        Ok(vec![
            fmt_num(grid.x(j))?,
            fmt_num(phi[j])?,
            fmt_num(state.phi.phi_x().samples()[j])?,
            fmt_num(state.v.samples()[j])?,
            fmt_num(state.psi.samples()[j])?,
        ])
    });
    write_rows(path, &["x", "phi", "phi_x", "v", "psi"], rows)
}

#[derive(Serialize)]
struct TrajectoryManifest<'a, D: Serialize> {
    formulation: &'a str,
    config: &'a crate::config::SolverConfig,
    plan: &'a crate::config::StepPlan,
    completed: bool,
    final_time: f64,
    termination: &'a Option<crate::eulerian::Termination>,
    snapshots: Vec<Snapshot>,
    diagnostics: &'a [D],
}

#[derive(Serialize)]
struct Snapshot {
    t: f64,
    file: String,
}

fn snapshot_name(prefix: &str, k: usize) -> String {
    format!("{prefix}_{k:05}.csv")
}

/// Snapshots as `<dir>/eulerian_NNNNN.csv` plus `<dir>/eulerian.json`.
/// Returns the written paths, manifest last.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut snapshots = Vec::new();
    for (k, (t, v)) in traj.times.iter().zip(&traj.states).enumerate() {
        let name = snapshot_name("eulerian", k);
        let path = dir.join(&name);
        write_grid_function_csv(&path, v)?;
        written.push(path);
        snapshots.push(Snapshot { t: *t, file: name });
    }
    let manifest = TrajectoryManifest {
        formulation: "eulerian",
        config: &traj.config,
        plan: &traj.plan,
        completed: traj.completed(),
        final_time: traj.final_time(),
        termination: &traj.termination,
        snapshots,
        diagnostics: &traj.diagnostics,
    };
    let path = dir.join("eulerian.json");
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}

/// Snapshots as `<dir>/lagrangian_NNNNN.csv` plus `<dir>/lagrangian.json`.
pub fn write_flow_trajectory(dir: &Path, flow: &FlowTrajectory) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut snapshots = Vec::new();
    for (k, (t, st)) in flow.times.iter().zip(&flow.states).enumerate() {
        let name = snapshot_name("lagrangian", k);
        let path = dir.join(&name);
        write_flow_state_csv(&path, st)?;
        written.push(path);
        snapshots.push(Snapshot { t: *t, file: name });
    }
    let manifest = TrajectoryManifest {
        formulation: "lagrangian",
        config: &flow.config,
        plan: &flow.plan,
        completed: flow.completed(),
        final_time: flow.final_time(),
        termination: &flow.termination,
        snapshots,
        diagnostics: &flow.diagnostics,
    };
    let path = dir.join("lagrangian.json");
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}

/// Columns `t,residual_s2,residual_sup,psi_norm`.
pub fn write_conservation_csv(path: &Path, report: &ConservationReport) -> Result<()> {
    let rows = (0..report.times.len()).map(|i| {
        Ok(vec![
            fmt_num(report.times[i])?,
            fmt_num(report.residual_s_minus_2[i])?,
            fmt_num(report.residual_sup[i])?,
            fmt_num(report.psi_norm_s_minus_1[i])?,
        ])
    });
    write_rows(path, &["t", "residual_s2", "residual_sup", "psi_norm"], rows)
}

/// Summary of a conservation run and an optional dt sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationSummary {
    pub gamma: f64,
    pub max_residual_sup: f64,
    pub max_residual_s_minus_2: f64,
    pub final_residual_sup: f64,
    pub tolerance: f64,
    /// `max_residual_sup <= tolerance`.
    pub passed: bool,
    pub psi_identically_zero: bool,
    /// `(dt, final sup residual)` for each sweep run.
    pub sweep: Vec<(f64, f64)>,
    pub observed_orders: Vec<f64>,
}

impl ConservationSummary {
    pub fn new(gamma: f64, report: &ConservationReport, tolerance: f64, sweep: Vec<(f64, f64)>) -> Self {
        let errors: Vec<f64> = sweep.iter().map(|p| p.1).collect();
        let final_residual_sup = report.final_residual_sup();
        ConservationSummary {
            gamma,
            max_residual_sup: report.max_residual_sup(),
            max_residual_s_minus_2: report.max_residual_s_minus_2(),
            final_residual_sup,
            tolerance,
            passed: report.max_residual_sup() <= tolerance,
            psi_identically_zero: report.psi_norm_s_minus_1.iter().all(|&p| p == 0.0),
            observed_orders: observed_orders(&errors),
            sweep,
        }
    }
}

/// Columns `n,r_n,initial_gap,final_gap_s,final_gap_y_s2,phi_separation,supports_disjoint,status`.
/// Values a failed record lacks are left empty.
pub fn write_experiment_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let rows = report.records.iter().map(|r| {
        Ok(vec![
            r.n.to_string(),
            fmt_num(r.r_n)?,
            fmt_num(r.initial_gap)?,
            fmt_opt(r.final_gap_s)?,
            fmt_opt(r.final_gap_y_s2)?,
            fmt_opt(r.phi_separation)?,
            r.supports_disjoint.to_string(),
            r.failure.clone().unwrap_or_else(|| "ok".into()),
        ])
    });
    write_rows(
        path,
        &[
            "n",
            "r_n",
            "initial_gap",
            "final_gap_s",
            "final_gap_y_s2",
            "phi_separation",
            "supports_disjoint",
            "status",
        ],
        rows,
    )
}

/// Columns `t,sup_diff`.
pub fn write_sup_diff_csv(path: &Path, times: &[f64], diffs: &[f64]) -> Result<()> {
    if times.len() != diffs.len() {
        return Err(Error::InvalidInput("times and diffs differ in length".into()));
    }
    write_rows(
        path,
        &["t", "sup_diff"],
        times.iter().zip(diffs).map(|(&t, &d)| Ok(vec![fmt_num(t)?, fmt_num(d)?])),
    )
}
