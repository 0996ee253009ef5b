//! The three subcommands. Each returns the files it wrote; [`run`] adds the
//! manifest last.

use log::info;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use rodflow_core::conservation::conservation_residual;
use rodflow_core::io::{
    write_conservation_csv, write_experiment_csv, write_flow_state_csv, write_flow_trajectory,
    write_grid_function_csv, write_json, write_sup_diff_csv, write_trajectory, ConservationSummary,
};
use rodflow_core::{integrate_eulerian, integrate_spray, run_experiment, SolverConfig};

use crate::config::{Formulation, RunConfig};
use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    VerifyConservation,
    Nonuniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Blow-up or another early stop; outputs are partial.
    EarlyTermination,
    VerificationFailed,
    Failed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::EarlyTermination | Status::Failed => 2,
            Status::VerificationFailed => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub message: Option<String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

impl Outcome {
    pub fn code(&self) -> i32 {
        self.status.code()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub artifact_version: &'static str,
    pub command: Command,
    pub status: Status,
    pub completed: bool,
    pub message: Option<String>,
    pub seed: u64,
    pub config_echo: &'a RunConfig,
    pub outputs: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Integration(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Artifacts { dir, written: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            let rel = p.strip_prefix(self.dir).map(Path::to_path_buf).unwrap_or(p);
            self.written.push(rel);
        }
    }

    fn finish(self, status: Status, message: Option<String>) -> Outcome {
        Outcome {
            status,
            message,
            outputs: self.written,
        }
    }
}

/// Run `command` and write `manifest.json` last. Configuration errors are
/// returned before anything is written.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    cfg.solver()?;
    let outcome = match command {
        Command::Simulate => simulate(cfg, out),
        Command::VerifyConservation => verify_conservation(cfg, out),
        Command::Nonuniform => nonuniform(cfg, out),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(f @ Failure::Config(_)) => return Err(f),
        Err(f) => Outcome {
            status: Status::Failed,
            message: Some(f.to_string()),
            outputs: Vec::new(),
        },
    };
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION"),
        command,
        status: outcome.status,
        completed: outcome.status == Status::Ok || outcome.status == Status::VerificationFailed,
        message: outcome.message.clone(),
        seed: cfg.seed,
        config_echo: cfg,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    fs::create_dir_all(out).map_err(|e| Failure::Integration(e.to_string()))?;
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(outcome)
}

fn termination_message(what: &str, t: &rodflow_core::eulerian::Termination) -> String {
    format!("{what} stopped at t = {}: {}", t.time, t.reason)
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let solver = cfg.solver()?;
    let v0 = cfg.initial()?;
    let mut art = Artifacts::new(out)?;
    let p = art.path("initial_data.csv");
    write_grid_function_csv(&p, &v0)?;
    art.record([p]);

    let mut messages = Vec::new();
    let eulerian = match cfg.formulation {
        Formulation::Eulerian | Formulation::Both => {
            info!("eulerian integration, N = {}", solver.n);
            let traj = integrate_eulerian(&v0, &solver)?;
            art.record(write_trajectory(out, &traj)?);
            if let Some(t) = &traj.termination {
                messages.push(termination_message("eulerian", t));
            }
            Some(traj)
        }
        Formulation::Lagrangian => None,
    };
    let lagrangian = match cfg.formulation {
        Formulation::Lagrangian | Formulation::Both => {
            info!("lagrangian integration, N = {}", solver.n);
            let flow = integrate_spray(&v0, solver.t_end, &solver)?;
            art.record(write_flow_trajectory(out, &flow)?);
            if let Some(t) = &flow.termination {
                messages.push(termination_message("lagrangian", t));
            }
            Some(flow)
        }
        Formulation::Eulerian => None,
    };
    if let (Some(traj), Some(flow)) = (&eulerian, &lagrangian) {
        let mut times = Vec::new();
        let mut diffs = Vec::new();
        for ((te, ve), (tl, st)) in traj.times.iter().zip(&traj.states).zip(flow.times.iter().zip(&flow.states)) {
            if (te - tl).abs() > 1e-12 * te.abs().max(1.0) {
                break;
            }
            times.push(*te);
            diffs.push(ve.sup_distance(&st.eulerian_velocity()?)?);
        }
        let p = art.path("cross_check.csv");
        write_sup_diff_csv(&p, &times, &diffs)?;
        art.record([p]);
    }
    Ok(if messages.is_empty() {
        art.finish(Status::Ok, None)
    } else {
        art.finish(Status::EarlyTermination, Some(messages.join("; ")))
    })
}

fn verify_conservation(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let solver = cfg.solver()?;
    let v0 = cfg.initial()?;
    for &dt in &cfg.dt_sweep {
        SolverConfig { dt: Some(dt), ..solver.clone() }.validate()?;
    }
    let s = solver.s.value();
    let mut art = Artifacts::new(out)?;
    info!("lagrangian integration with conservation check, N = {}", solver.n);
    let flow = integrate_spray(&v0, solver.t_end, &solver)?;
    let report = conservation_residual(&flow, &v0, solver.gamma, s)?;
    let p = art.path("conservation.csv");
    write_conservation_csv(&p, &report)?;
    art.record([p]);
    let p = art.path("final_state.csv");
    write_flow_state_csv(&p, flow.last())?;
    art.record([p]);

    if let Some(t) = &flow.termination {
        let msg = termination_message("lagrangian", t);
        let summary = ConservationSummary::new(solver.gamma, &report, cfg.tolerance, Vec::new());
        let p = art.path("conservation.json");
        write_json(&p, &summary)?;
        art.record([p]);
        return Ok(art.finish(Status::EarlyTermination, Some(msg)));
    }

    let mut sweep = Vec::new();
    for &dt in &cfg.dt_sweep {
        info!("conservation sweep, dt = {dt}");
        let c = SolverConfig {
            dt: Some(dt),
            snapshot_stride: usize::MAX,
            ..solver.clone()
        };
        let f = integrate_spray(&v0, solver.t_end, &c)?;
        if let Some(t) = &f.termination {
            return Ok(art.finish(Status::EarlyTermination, Some(termination_message("sweep", t))));
        }
        let r = conservation_residual(&f, &v0, solver.gamma, s)?;
        sweep.push((dt, r.final_residual_sup()));
    }
    let summary = ConservationSummary::new(solver.gamma, &report, cfg.tolerance, sweep);
    let p = art.path("conservation.json");
    write_json(&p, &summary)?;
    art.record([p]);
    Ok(if summary.passed {
        art.finish(Status::Ok, None)
    } else {
        let msg = format!(
            "max residual {:.3e} exceeds tolerance {:.3e}",
            summary.max_residual_sup, summary.tolerance
        );
        art.finish(Status::VerificationFailed, Some(msg))
    })
}

fn nonuniform(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let ec = cfg.experiment()?;
    info!("non-uniform dependence experiment, n = {:?}, N = {}", ec.n_values, ec.solver.n);
    let report = run_experiment(&ec)?;
    let mut art = Artifacts::new(out)?;
    let p = art.path("experiment.csv");
    write_experiment_csv(&p, &report)?;
    art.record([p]);
    let p = art.path("experiment.json");
    write_json(&p, &report)?;
    art.record([p]);
    let s = &report.summary;
    let v = &s.verdicts;
    Ok(if s.failed_records > 0 {
        let msg = format!("{} of {} records failed to integrate", s.failed_records, report.records.len());
        art.finish(Status::EarlyTermination, Some(msg))
    } else if !v.all() {
        let failed: Vec<&str> = [
            ("construction_exact", v.construction_exact),
            ("separation_bound", v.separation_bound),
            ("supports_disjoint", v.supports_disjoint),
            ("non_uniformity_witness", v.non_uniformity_witness),
        ]
        .iter()
        .filter(|p| !p.1)
        .map(|p| p.0)
        .collect();
        art.finish(Status::VerificationFailed, Some(format!("failed: {}", failed.join(", "))))
    } else {
        art.finish(Status::Ok, None)
    })
}
