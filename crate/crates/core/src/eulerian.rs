//! Eulerian form of the rod equation, `v_t + v v_x = B(v, v)`, with
//!
//! ```text
//! B(v, v) = (1 - γ⁻² ∂ₓ²)⁻¹ ( (γ-3)/γ · v v_x - γ⁻² v_x v_xx )
//! ```
//!
//! and the change of variables `v(x) = u(γx)` relating it to the original
//! equation in `u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{SolverConfig, StepPlan};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::rk4::{rk4_step, OdeState};
use crate::spectral::{derivative_multiplier, fft_real, helmholtz_symbol, ifft_real, sobolev_norm, wavenumber};

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be finite and nonzero, got {gamma}")));
    }
    Ok(())
}

fn truncate(c: &mut [Complex64]) {
    let n = c.len() as i64;
    for (i, v) in c.iter_mut().enumerate() {
        if 3 * wavenumber(i, n as usize).abs() > n {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// `v`, `v_x` and `B(v, v)` sampled on the grid.
struct Parts {
    v: Vec<f64>,
    vx: Vec<f64>,
    b: Vec<f64>,
}

fn parts(v: &GridFunction, gamma: f64, dealias: bool) -> Parts {
    let grid = v.grid();
    let n = grid.n();
    let mut c = fft_real(v.samples());
    if dealias {
        truncate(&mut c);
    }
    let deriv = |order: u32| -> Vec<f64> {
        ifft_real(
            c.iter()
                .enumerate()
                .map(|(i, ci)| {
                    let k = wavenumber(i, n);
                    ci * derivative_multiplier(k, grid.angular(k), n, order)
                })
                .collect(),
        )
    };
    let vx = deriv(1);
    let vxx = deriv(2);
    let vv = if dealias { ifft_real(c.clone()) } else { v.samples().to_vec() };
    let a = (gamma - 3.0) / gamma;
    let g2 = 1.0 / (gamma * gamma);
    let q: Vec<f64> = (0..n)
        .map(|j| a * vv[j] * vx[j] - g2 * vx[j] * vxx[j])
        .collect();
    let mut qc = fft_real(&q);
    if dealias {
        truncate(&mut qc);
    }
    let b = ifft_real(
        qc.iter()
            .enumerate()
            .map(|(i, ci)| ci / helmholtz_symbol(grid.angular(wavenumber(i, n)), gamma))
            .collect(),
    );
    Parts { v: vv, vx, b }
}

/// The quadratic operator `B(v, v)`.
pub fn b_operator(v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    b_operator_with(v, gamma, false)
}

pub fn b_operator_with(v: &GridFunction, gamma: f64, dealias: bool) -> Result<GridFunction> {
    check_gamma(gamma)?;
    v.ensure_finite()?;
    Ok(GridFunction::from_raw(v.grid(), parts(v, gamma, dealias).b))
}

/// `v_t = -v v_x + B(v, v)`.
pub fn eulerian_rhs(v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    eulerian_rhs_with(v, gamma, false)
}

pub fn eulerian_rhs_with(v: &GridFunction, gamma: f64, dealias: bool) -> Result<GridFunction> {
    check_gamma(gamma)?;
    v.ensure_finite()?;
    let p = parts(v, gamma, dealias);
    let mut adv: Vec<f64> = p.v.iter().zip(&p.vx).map(|(a, b)| a * b).collect();
    if dealias {
        let mut c = fft_real(&adv);
        truncate(&mut c);
        adv = ifft_real(c);
    }
    Ok(GridFunction::from_raw(
        v.grid(),
        p.b.iter().zip(&adv).map(|(b, a)| b - a).collect(),
    ))
}

/// Per-step solution diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub sup_v: f64,
    pub sup_vx: f64,
    pub hs_norm: f64,
}

/// Why an integration stopped before its end time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub plan: StepPlan,
    /// Times of the stored states.
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// One entry per completed step, plus the initial state.
    pub diagnostics: Vec<StepDiagnostics>,
    pub termination: Option<Termination>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.termination.is_none()
    }

    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Stored state nearest to `t`.
    pub fn state_at(&self, t: f64) -> Option<&GridFunction> {
        let k = self
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 0.5 * self.plan.dt)?;
        Some(&self.states[k])
    }
}

fn diagnostics(t: f64, v: &GridFunction, s: f64) -> StepDiagnostics {
    let vx = crate::spectral::derivative(v, 1).map(|d| d.sup_norm()).unwrap_or(f64::NAN);
    StepDiagnostics {
        t,
        sup_v: v.sup_norm(),
        sup_vx: vx,
        hs_norm: sobolev_norm(v, s),
    }
}

/// Classical RK4 on [`eulerian_rhs`] from `t = 0` to `cfg.t_end`.
///
/// Stops early (recording a [`Termination`]) when `sup |v_x|` exceeds
/// `cfg.norm_cap` or the state stops being finite; states written up to that
/// point are kept.
pub fn integrate_eulerian(v0: &GridFunction, cfg: &SolverConfig) -> Result<Trajectory> {
    integrate_eulerian_until(v0, cfg.t_end, cfg)
}

/// As [`integrate_eulerian`] with an explicit end time.
pub fn integrate_eulerian_until(
    v0: &GridFunction,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let grid = cfg.grid()?;
    grid.ensure_same(&v0.grid())?;
    v0.ensure_finite()?;
    let plan = cfg.step_plan(t_end, v0.sup_norm())?;
    let gamma = cfg.gamma;
    let s = cfg.s.value();

    let mut traj = Trajectory {
        config: cfg.clone(),
        plan,
        times: vec![0.0],
        states: vec![v0.clone()],
        diagnostics: vec![diagnostics(0.0, v0, s)],
        termination: None,
    };
    let mut y = v0.samples().to_vec();
    for k in 1..=plan.steps {
        let t = plan.time(k);
        let step = rk4_step(&y, plan.dt, |u: &Vec<f64>| {
            let f = GridFunction::from_raw(grid, u.clone());
            Ok(eulerian_rhs_with(&f, gamma, cfg.dealias)?.into_samples())
        });
        let next = match step {
            Ok(next) if next.is_finite() => next,
            Ok(_) => {
                traj.termination = Some(Termination {
                    time: plan.time(k - 1),
                    reason: "solution became non-finite".into(),
                });
                break;
            }
            Err(e) => {
                traj.termination = Some(Termination {
                    time: plan.time(k - 1),
                    reason: e.to_string(),
                });
                break;
            }
        };
        y = next;
        let state = GridFunction::from_raw(grid, y.clone());
        let d = diagnostics(t, &state, s);
        traj.diagnostics.push(d);
        let blown = !(d.sup_vx <= cfg.norm_cap);
        if k % cfg.snapshot_stride == 0 || k == plan.steps || blown {
            traj.times.push(t);
            traj.states.push(state);
        }
        if blown {
            traj.termination = Some(Termination {
                time: t,
                reason: format!("sup|v_x| = {:.3e} exceeds cap {:.3e}", d.sup_vx, cfg.norm_cap),
            });
            break;
        }
    }
    Ok(traj)
}

fn rescaled_grid(grid: Grid, factor: f64) -> Result<Grid> {
    Grid::new(grid.n(), grid.length() * factor)
}

fn reflect(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    (0..n).map(|j| samples[(n - j) % n]).collect()
}

/// `v(x) = u(γx)`: `u` on a domain of length `L` becomes `v` on `L/|γ|`.
///
/// With the point count unchanged the sample locations of `v` map exactly
/// onto those of `u` (reflected when `γ < 0`), so the trigonometric
/// interpolant is carried over without error.
pub fn u_to_v(u: &GridFunction, gamma: f64) -> Result<GridFunction> {
    check_gamma(gamma)?;
    let grid = rescaled_grid(u.grid(), 1.0 / gamma.abs())?;
    let samples = if gamma > 0.0 { u.samples().to_vec() } else { reflect(u.samples()) };
    GridFunction::new(grid, samples)
}

/// Inverse of [`u_to_v`]: `u(x) = v(x/γ)` on a domain of length `L·|γ|`.
pub fn v_to_u(v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    check_gamma(gamma)?;
    let grid = rescaled_grid(v.grid(), gamma.abs())?;
    let samples = if gamma > 0.0 { v.samples().to_vec() } else { reflect(v.samples()) };
    GridFunction::new(grid, samples)
}
