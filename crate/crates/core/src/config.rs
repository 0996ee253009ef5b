//! Solver configuration shared by the Eulerian and Lagrangian integrators.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::interp::EvalMethod;
use crate::spectral::SobolevIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub gamma: f64,
    pub s: SobolevIndex,
    #[serde(rename = "N")]
    pub n: usize,
    pub domain_length: f64,
    /// Fixed step; when absent the step follows `cfl_factor`.
    pub dt: Option<f64>,
    pub cfl_factor: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Lagrangian runs stop when `min φ_x` drops below this.
    pub blowup_floor: f64,
    /// Eulerian runs stop when `sup |v_x|` exceeds this.
    pub norm_cap: f64,
    /// 2/3-rule dealiasing of the quadratic products.
    pub dealias: bool,
    /// Keep every k-th state (the final state is always kept).
    pub snapshot_stride: usize,
    pub eval_method: EvalMethod,
    /// Seed each diffeomorphism inversion with the previous one.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1.0,
            s: SobolevIndex::new(2.0).expect("valid"),
            n: 256,
            domain_length: TAU,
            dt: None,
            cfl_factor: 0.25,
            t_end: 1.0,
            blowup_floor: 1e-6,
            norm_cap: 1e6,
            dealias: false,
            snapshot_stride: 1,
            eval_method: EvalMethod::Auto,
            warm_start: false,
        }
    }
}

/// Number of steps and the uniform step size covering `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub steps: usize,
    pub dt: f64,
}

impl StepPlan {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma == 0.0 || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be nonzero, got {}", self.gamma)));
        }
        Grid::new(self.n, self.domain_length)?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Parameter(format!("T must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.cfl_factor.is_finite() && self.cfl_factor > 0.0) {
            return Err(Error::Parameter(format!(
                "cfl_factor must be positive, got {}",
                self.cfl_factor
            )));
        }
        if !(self.blowup_floor >= 0.0 && self.norm_cap > 0.0) {
            return Err(Error::Parameter("blowup_floor must be >= 0 and norm_cap > 0".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Parameter("snapshot_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.domain_length)
    }

    /// Step plan for integrating data with `sup |v0| = v0_sup` up to `t_end`.
    pub fn step_plan(&self, t_end: f64, v0_sup: f64) -> Result<StepPlan> {
        self.validate()?;
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Parameter(format!("end time must be positive, got {t_end}")));
        }
        let dx = self.domain_length / self.n as f64;
        match self.dt {
            Some(dt) => {
                if dt * v0_sup >= 10.0 * dx {
                    return Err(Error::Parameter(format!(
                        "dt = {dt} moves data more than 10 cells per step (sup|v0| = {v0_sup:.3e}, dx = {dx:.3e})"
                    )));
                }
                let ratio = t_end / dt;
                let steps = ratio.round();
                if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio {
                    return Err(Error::Parameter(format!(
                        "end time {t_end} is not an integer multiple of dt = {dt}"
                    )));
                }
                let steps = steps as usize;
                Ok(StepPlan {
                    steps,
                    dt: t_end / steps as f64,
                })
            }
            None => {
                let dt0 = self.cfl_factor * dx / v0_sup.max(1.0);
                let steps = (t_end / dt0).ceil().max(1.0) as usize;
                Ok(StepPlan {
                    steps,
                    dt: t_end / steps as f64,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_zero_gamma_and_bad_grid() {
        let cfg = SolverConfig { gamma: 0.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
        let cfg = SolverConfig { n: 17, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fixed_step_plan() {
        let cfg = SolverConfig { dt: Some(1e-3), ..Default::default() };
        let plan = cfg.step_plan(1.0, 0.1).unwrap();
        assert_eq!(plan.steps, 1000);
        assert!((plan.time(1000) - 1.0).abs() < 1e-15);
        assert!(cfg.step_plan(1.00037, 0.1).is_err());
    }

    #[test]
    fn sanity_bound_on_fixed_step() {
        let cfg = SolverConfig { dt: Some(0.5), n: 256, ..Default::default() };
        // 10 cells = 0.245; 0.5 * 1.0 exceeds it.
        assert!(cfg.step_plan(1.0, 1.0).is_err());
        assert!(cfg.step_plan(1.0, 0.1).is_ok());
    }

    #[test]
    fn automatic_step_respects_cfl() {
        let cfg = SolverConfig::default();
        let plan = cfg.step_plan(1.0, 4.0).unwrap();
        let dx = TAU / 256.0;
        assert!(plan.dt <= 0.25 * dx / 4.0 + 1e-15);
        assert!((plan.time(plan.steps) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_uses_external_key_names() {
        let cfg: SolverConfig =
            serde_json::from_str(r#"{"gamma": 2.0, "N": 64, "T": 0.5, "dt": 0.01}"#).unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.t_end, 0.5);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"s": 1.0}"#).is_err());
        assert!(serde_json::from_str::<SolverConfig>(r#"{"gama": 1.0}"#).is_err());
    }
}
