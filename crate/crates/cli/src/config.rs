//! Run configuration files (TOML or JSON, same schema).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rodflow_core::nonuniform::ExperimentConfig;
use rodflow_core::{EvalMethod, Grid, GridFunction, SobolevIndex, SolverConfig};

use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Eulerian,
    Lagrangian,
    Both,
}

/// Initial data sampled on the configured grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    Zero {},
    Constant {
        value: f64,
    },
    /// `amplitude · sin(2π·mode·x/L + phase)`
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
        #[serde(default)]
        phase: f64,
    },
    /// Random trigonometric polynomial with `modes` modes, coefficients
    /// decaying like `k⁻²`, scaled to sup-norm `amplitude`.
    Random {
        amplitude: f64,
        #[serde(default = "four")]
        modes: usize,
        /// Falls back to the top-level `seed`.
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn one() -> u32 {
    1
}

fn four() -> usize {
    4
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Sine {
            amplitude: 0.1,
            mode: 1,
            phase: 0.0,
        }
    }
}

impl InitialData {
    pub fn sample(&self, grid: Grid, default_seed: u64) -> Result<GridFunction, Failure> {
        let l = grid.length();
        let f = match *self {
            InitialData::Zero {} => Ok(GridFunction::zeros(grid)),
            InitialData::Constant { value } => GridFunction::constant(grid, value),
            InitialData::Sine { amplitude, mode, phase } => {
                GridFunction::from_fn(grid, |x| amplitude * (TAU * mode as f64 * x / l + phase).sin())
            }
            InitialData::Random { amplitude, modes, seed } => {
                if modes == 0 || modes >= grid.n() / 2 {
                    return Err(Failure::Config(format!(
                        "initial_data.modes must lie in 1..{}, got {modes}",
                        grid.n() / 2
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(default_seed));
                let coeffs: Vec<(f64, f64)> = (1..=modes)
                    .map(|k| {
                        let d = (k * k) as f64;
                        (rng.gen_range(-1.0..1.0) / d, rng.gen_range(-1.0..1.0) / d)
                    })
                    .collect();
                let raw = GridFunction::from_fn(grid, |x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(i, (a, b))| {
                            let th = TAU * (i + 1) as f64 * x / l;
                            a * th.cos() + b * th.sin()
                        })
                        .sum()
                })
                .map_err(|e| Failure::Config(e.to_string()))?;
                let sup = raw.sup_norm();
                Ok(if sup > 0.0 { raw.scale(amplitude / sup) } else { raw })
            }
        };
        f.map_err(|e| Failure::Config(format!("initial_data: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "zero_data")]
    pub v0: InitialData,
    pub g: InitialData,
    pub x0: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
}

fn zero_data() -> InitialData {
    InitialData::Zero {}
}

fn default_n_values() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub s: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub domain_length: f64,
    pub dt: Option<f64>,
    pub cfl_factor: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub blowup_floor: f64,
    pub norm_cap: f64,
    pub dealias: bool,
    pub snapshot_stride: usize,
    pub eval_method: EvalMethod,
    pub warm_start: bool,
    pub formulation: Formulation,
    pub initial_data: InitialData,
    /// Residual bound for `verify-conservation`.
    pub tolerance: f64,
    pub seed: u64,
    /// Extra step sizes for the conservation order sweep.
    pub dt_sweep: Vec<f64>,
    pub experiment: Option<ExperimentSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            gamma: s.gamma,
            s: s.s.value(),
            n: s.n,
            domain_length: s.domain_length,
            dt: s.dt,
            cfl_factor: s.cfl_factor,
            t_end: s.t_end,
            blowup_floor: s.blowup_floor,
            norm_cap: s.norm_cap,
            dealias: s.dealias,
            snapshot_stride: s.snapshot_stride,
            eval_method: s.eval_method,
            warm_start: s.warm_start,
            formulation: Formulation::Lagrangian,
            initial_data: InitialData::default(),
            tolerance: 1e-6,
            seed: 0,
            dt_sweep: Vec::new(),
            experiment: None,
        }
    }
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML. Parse
    /// errors carry the line and offending key.
    pub fn from_path(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json).map_err(|m| Failure::Config(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn solver(&self) -> Result<SolverConfig, Failure> {
        let s = SobolevIndex::new(self.s).map_err(|e| Failure::Config(format!("s: {e}")))?;
        let cfg = SolverConfig {
            gamma: self.gamma,
            s,
            n: self.n,
            domain_length: self.domain_length,
            dt: self.dt,
            cfl_factor: self.cfl_factor,
            t_end: self.t_end,
            blowup_floor: self.blowup_floor,
            norm_cap: self.norm_cap,
            dealias: self.dealias,
            snapshot_stride: self.snapshot_stride,
            eval_method: self.eval_method,
            warm_start: self.warm_start,
        };
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Failure::Config(format!(
                "tolerance must be non-negative, got {}",
                self.tolerance
            )));
        }
        Ok(cfg)
    }

    pub fn initial(&self) -> Result<GridFunction, Failure> {
        let grid = self.solver()?.grid().map_err(|e| Failure::Config(e.to_string()))?;
        self.initial_data.sample(grid, self.seed)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let section = self
            .experiment
            .as_ref()
            .ok_or_else(|| Failure::Config("missing [experiment] section".into()))?;
        let solver = self.solver()?;
        let grid = solver.grid().map_err(|e| Failure::Config(e.to_string()))?;
        let ec = ExperimentConfig {
            v0: section.v0.sample(grid, self.seed)?,
            g: section.g.sample(grid, self.seed.wrapping_add(1))?,
            x0: section.x0,
            radius: section.radius,
            n_values: section.n_values.clone(),
            solver,
        };
        ec.validate().map_err(|e| Failure::Config(format!("experiment: {e}")))?;
        Ok(ec)
    }
}
