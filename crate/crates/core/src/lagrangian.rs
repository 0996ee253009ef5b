//! Flow-map formulation: the spray
//!
//! ```text
//! ∂t (φ, v) = (v, B(v∘φ⁻¹, v∘φ⁻¹)∘φ)
//! ```
//!
//! on `(φ, φ_t)`, augmented with the remainder integral `ψ` of the transport
//! identity (see [`crate::conservation`]), plus the exponential map and its
//! differential.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::config::{SolverConfig, StepPlan};
use crate::diffeo::{compose_with, invert_diffeo_with, Diffeo, InversionOptions};
use crate::error::{Error, Result};
use crate::eulerian::{b_operator_with, Termination};
use crate::grid::{Grid, GridFunction};
use crate::interp::{EvalMethod, TrigEvaluator};
use crate::rk4::{rk4_step, OdeState};
use crate::spectral::{derivative, sobolev_norm};

/// A point `(φ, v = φ_t)` of the tangent bundle plus the accumulated
/// remainder `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub phi: Diffeo,
    pub v: GridFunction,
    pub psi: GridFunction,
}

impl FlowState {
    pub fn new(phi: Diffeo, v: GridFunction, psi: GridFunction) -> Result<Self> {
        phi.grid().ensure_same(&v.grid())?;
        phi.grid().ensure_same(&psi.grid())?;
        v.ensure_finite()?;
        psi.ensure_finite()?;
        Ok(FlowState { phi, v, psi })
    }

    /// `(id, v0, 0)`.
    pub fn initial(v0: &GridFunction) -> Self {
        let grid = v0.grid();
        FlowState {
            phi: Diffeo::identity(grid),
            v: v0.clone(),
            psi: GridFunction::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid()
    }

    /// Eulerian velocity `v∘φ⁻¹`.
    pub fn eulerian_velocity(&self) -> Result<GridFunction> {
        let inv = invert_diffeo_with(&self.phi, &InversionOptions::default(), None)?;
        compose_with(&self.v, &inv, EvalMethod::Auto)
    }
}

/// Time derivative of a [`FlowState`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivative {
    pub phi_dot: GridFunction,
    pub v_dot: GridFunction,
    pub psi_dot: GridFunction,
}

/// Knobs shared by every right-hand-side evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct SprayOptions {
    pub dealias: bool,
    pub method: EvalMethod,
}

impl From<&SolverConfig> for SprayOptions {
    fn from(cfg: &SolverConfig) -> Self {
        SprayOptions {
            dealias: cfg.dealias,
            method: cfg.eval_method,
        }
    }
}

/// `B(v∘φ⁻¹, v∘φ⁻¹)∘φ`.
pub fn conjugated_b(phi: &Diffeo, v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    let inv = invert_diffeo_with(phi, &InversionOptions::default(), None)?;
    conjugated_b_given_inverse(phi, &inv, v, gamma, &SprayOptions::default())
}

fn conjugated_b_given_inverse(
    phi: &Diffeo,
    inv: &Diffeo,
    v: &GridFunction,
    gamma: f64,
    opts: &SprayOptions,
) -> Result<GridFunction> {
    let u = compose_with(v, inv, opts.method)?;
    let b = b_operator_with(&u, gamma, opts.dealias)?;
    compose_with(&b, phi, opts.method)
}

/// Integrand of the remainder, `((3γ-3)/γ) · φ_t φ_tx φ_x`.
///
/// This equals `((3γ-3)/γ) (v v_x)∘φ · φ_x²` for the Eulerian velocity, via
/// `φ_tx = (v_x∘φ) φ_x`.
pub fn remainder_rate(phi: &Diffeo, v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    let c = (3.0 * gamma - 3.0) / gamma;
    if c == 0.0 {
        return Ok(GridFunction::zeros(v.grid()));
    }
    let vx = derivative(v, 1)?;
    let s: Vec<f64> = v
        .samples()
        .iter()
        .zip(vx.samples())
        .zip(phi.phi_x().samples())
        .map(|((a, b), p)| c * a * b * p)
        .collect();
    Ok(GridFunction::from_raw(v.grid(), s))
}

pub fn spray_rhs(state: &FlowState, gamma: f64) -> Result<FlowDerivative> {
    spray_rhs_with(state, gamma, &SprayOptions::default(), None).map(|(d, _)| d)
}

/// Returns the derivative and the inverse of `φ` computed on the way.
pub fn spray_rhs_with(
    state: &FlowState,
    gamma: f64,
    opts: &SprayOptions,
    warm_start: Option<&Diffeo>,
) -> Result<(FlowDerivative, Diffeo)> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be nonzero, got {gamma}")));
    }
    let inv_opts = InversionOptions {
        method: opts.method,
        ..Default::default()
    };
    let inv = invert_diffeo_with(&state.phi, &inv_opts, warm_start)?;
    let v_dot = conjugated_b_given_inverse(&state.phi, &inv, &state.v, gamma, opts)?;
    let psi_dot = remainder_rate(&state.phi, &state.v, gamma)?;
    Ok((
        FlowDerivative {
            phi_dot: state.v.clone(),
            v_dot,
            psi_dot,
        },
        inv,
    ))
}

#[derive(Clone)]
struct Packed {
    d: Vec<f64>,
    v: Vec<f64>,
    psi: Vec<f64>,
}

impl OdeState for Packed {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        Packed {
            d: self.d.axpy(a, &x.d),
            v: self.v.axpy(a, &x.v),
            psi: self.psi.axpy(a, &x.psi),
        }
    }

    fn is_finite(&self) -> bool {
        self.d.is_finite() && self.v.is_finite() && self.psi.is_finite()
    }
}

impl Packed {
    fn of(s: &FlowState) -> Packed {
        Packed {
            d: s.phi.displacement().samples().to_vec(),
            v: s.v.samples().to_vec(),
            psi: s.psi.samples().to_vec(),
        }
    }

    fn unpack(&self, grid: Grid) -> Result<FlowState> {
        Ok(FlowState {
            phi: Diffeo::from_displacement(GridFunction::from_raw(grid, self.d.clone()))?,
            v: GridFunction::from_raw(grid, self.v.clone()),
            psi: GridFunction::from_raw(grid, self.psi.clone()),
        })
    }
}

/// One RK4 step of the augmented spray.
pub fn spray_step(state: &FlowState, dt: f64, gamma: f64, opts: &SprayOptions) -> Result<FlowState> {
    let grid = state.grid();
    let y = Packed::of(state);
    let next = rk4_step(&y, dt, |p: &Packed| {
        let s = p.unpack(grid)?;
        let (d, _) = spray_rhs_with(&s, gamma, opts, None)?;
        Ok(Packed {
            d: d.phi_dot.into_samples(),
            v: d.v_dot.into_samples(),
            psi: d.psi_dot.into_samples(),
        })
    })?;
    if !next.is_finite() {
        return Err(Error::Numerical("spray step produced non-finite values".into()));
    }
    next.unpack(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub t: f64,
    pub min_phi_x: f64,
    pub max_phi_x: f64,
    pub sup_v: f64,
    pub hs_norm_v: f64,
}

impl FlowDiagnostics {
    fn of(t: f64, s: &FlowState, sobolev: f64) -> Self {
        FlowDiagnostics {
            t,
            min_phi_x: s.phi.min_phi_x(),
            max_phi_x: s.phi.max_phi_x(),
            sup_v: s.v.sup_norm(),
            hs_norm_v: sobolev_norm(&s.v, sobolev),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub config: SolverConfig,
    pub plan: StepPlan,
    pub times: Vec<f64>,
    pub states: Vec<FlowState>,
    /// One entry per completed step, plus the initial state.
    pub diagnostics: Vec<FlowDiagnostics>,
    pub termination: Option<Termination>,
}

impl FlowTrajectory {
    pub fn completed(&self) -> bool {
        self.termination.is_none()
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn max_phi_x(&self) -> f64 {
        self.diagnostics.iter().fold(f64::NEG_INFINITY, |m, d| m.max(d.max_phi_x))
    }

    pub fn min_phi_x(&self) -> f64 {
        self.diagnostics.iter().fold(f64::INFINITY, |m, d| m.min(d.min_phi_x))
    }

    /// Stored state nearest to `t`.
    pub fn state_at(&self, t: f64) -> Option<&FlowState> {
        let k = self
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 0.5 * self.plan.dt)?;
        Some(&self.states[k])
    }
}

/// RK4 on the augmented spray from `(id, v0, 0)` to `t_end`.
///
/// Stops early when `min φ_x` drops below `cfg.blowup_floor`, when a
/// right-hand side cannot be evaluated (the map stopped being invertible), or
/// when values become non-finite.
pub fn integrate_spray(v0: &GridFunction, t_end: f64, cfg: &SolverConfig) -> Result<FlowTrajectory> {
    let grid = cfg.grid()?;
    grid.ensure_same(&v0.grid())?;
    v0.ensure_finite()?;
    let plan = cfg.step_plan(t_end, v0.sup_norm())?;
    let gamma = cfg.gamma;
    let sobolev = cfg.s.value();
    let opts = SprayOptions::from(cfg);
    let inv_opts = InversionOptions {
        method: opts.method,
        ..Default::default()
    };

    let init = FlowState::initial(v0);
    let mut traj = FlowTrajectory {
        config: cfg.clone(),
        plan,
        times: vec![0.0],
        diagnostics: vec![FlowDiagnostics::of(0.0, &init, sobolev)],
        states: vec![init.clone()],
        termination: None,
    };
    let warm: RefCell<Option<Diffeo>> = RefCell::new(None);
    let mut y = Packed::of(&init);
    for k in 1..=plan.steps {
        let t = plan.time(k);
        let step = rk4_step(&y, plan.dt, |p: &Packed| {
            let s = p.unpack(grid)?;
            let inv = {
                let prev = warm.borrow();
                invert_diffeo_with(&s.phi, &inv_opts, prev.as_ref().filter(|_| cfg.warm_start))?
            };
            let v_dot = conjugated_b_given_inverse(&s.phi, &inv, &s.v, gamma, &opts)?;
            let psi_dot = remainder_rate(&s.phi, &s.v, gamma)?;
            if cfg.warm_start {
                *warm.borrow_mut() = Some(inv);
            }
            Ok(Packed {
                d: s.v.into_samples(),
                v: v_dot.into_samples(),
                psi: psi_dot.into_samples(),
            })
        })
        .and_then(|next| {
            if next.is_finite() {
                next.unpack(grid)
            } else {
                Err(Error::Numerical("state became non-finite".into()))
            }
        });
        let state = match step {
            Ok(s) => s,
            Err(e) => {
                traj.termination = Some(Termination {
                    time: plan.time(k - 1),
                    reason: e.to_string(),
                });
                break;
            }
        };
        let d = FlowDiagnostics::of(t, &state, sobolev);
        traj.diagnostics.push(d);
        let lost = d.min_phi_x < cfg.blowup_floor;
        y = Packed::of(&state);
        if k % cfg.snapshot_stride == 0 || k == plan.steps || lost {
            traj.times.push(t);
            traj.states.push(state);
        }
        if lost {
            traj.termination = Some(Termination {
                time: t,
                reason: format!(
                    "min φ_x = {:.3e} below floor {:.3e}",
                    d.min_phi_x, cfg.blowup_floor
                ),
            });
            break;
        }
    }
    Ok(traj)
}

fn final_only(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        snapshot_stride: usize::MAX,
        ..cfg.clone()
    }
}

fn require_completed(traj: FlowTrajectory) -> Result<FlowTrajectory> {
    match &traj.termination {
        None => Ok(traj),
        Some(t) => Err(Error::EarlyTermination {
            time: t.time,
            reason: format!("outside the domain of exp: {}", t.reason),
        }),
    }
}

/// `exp(v0) = φ(1; v0)`.
pub fn exp_map(v0: &GridFunction, cfg: &SolverConfig) -> Result<Diffeo> {
    let traj = require_completed(integrate_spray(v0, 1.0, &final_only(cfg))?)?;
    Ok(traj.last().phi.clone())
}

/// Default finite-difference step for [`d_exp`].
pub fn default_eps(v0: &GridFunction, h: &GridFunction, s: f64) -> f64 {
    1e-4 * (1.0 + sobolev_norm(v0, s)) / (1.0 + sobolev_norm(h, s))
}

/// Central-difference directional derivative of `exp` at `v0` along `h`,
/// returned as the displacement field `d_{v0} exp(h)`.
pub fn d_exp(
    v0: &GridFunction,
    h: &GridFunction,
    cfg: &SolverConfig,
    eps: Option<f64>,
) -> Result<GridFunction> {
    v0.grid().ensure_same(&h.grid())?;
    if h.samples().iter().all(|&x| x == 0.0) {
        return Ok(GridFunction::zeros(h.grid()));
    }
    let eps = eps.unwrap_or_else(|| default_eps(v0, h, cfg.s.value()));
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let plus = exp_map(&v0.axpy(eps, h)?, cfg).map_err(domain_error)?;
    let minus = exp_map(&v0.axpy(-eps, h)?, cfg).map_err(domain_error)?;
    Ok(plus
        .displacement()
        .sub(minus.displacement())?
        .scale(0.5 / eps))
}

fn domain_error(e: Error) -> Error {
    match e {
        Error::EarlyTermination { time, reason } => {
            Error::Domain(format!("perturbed flow stopped at t = {time}: {reason}"))
        }
        other => other,
    }
}

/// Working constants at a base point: `m` with `d_{v0}exp(g)(x0) = m ‖g‖_s`
/// and the Lipschitz bound `L` of the flow maps near `exp(v0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLEstimate {
    pub m: f64,
    pub lipschitz: f64,
    /// `d_{v0} exp(g)(x0)`.
    pub dexp_at_x0: f64,
    pub g_norm: f64,
}

/// Estimate `m = |d_{v0}exp(g)(x0)| / ‖g‖_s` and `L = max φ_x` over the
/// flows of `v0` and `v0 ± g` on `[0, 1]`.
pub fn estimate_m_l(
    v0: &GridFunction,
    g: &GridFunction,
    x0: f64,
    cfg: &SolverConfig,
) -> Result<MLEstimate> {
    let s = cfg.s.value();
    let g_norm = sobolev_norm(g, s);
    if !(g_norm > 0.0) {
        return Err(Error::Parameter("probe direction g must be nonzero".into()));
    }
    let dexp = d_exp(v0, g, cfg, None)?;
    let dexp_at_x0 = TrigEvaluator::new(&[&dexp], cfg.eval_method)?.eval_one(x0);
    let m = dexp_at_x0.abs() / g_norm;
    if m <= 1e-10 {
        return Err(Error::Degenerate(format!(
            "d exp(g)(x0) = {dexp_at_x0:.3e} at x0 = {x0}; perturb x0 or the base point"
        )));
    }
    let cfg_l = final_only(cfg);
    let mut lipschitz: f64 = 1.0;
    for data in [v0.clone(), v0.add(g)?, v0.sub(g)?] {
        let traj = require_completed(integrate_spray(&data, 1.0, &cfg_l)?).map_err(domain_error)?;
        lipschitz = lipschitz.max(traj.max_phi_x());
    }
    Ok(MLEstimate {
        m,
        lipschitz,
        dexp_at_x0,
        g_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(gamma: f64, n: usize, dt: f64) -> SolverConfig {
        SolverConfig {
            gamma,
            n,
            dt: Some(dt),
            t_end: 1.0,
            ..Default::default()
        }
    }

    fn sine(grid: Grid, a: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| a * x.sin()).unwrap()
    }

    #[test]
    fn conjugated_b_special_cases() {
        let g = Grid::periodic(64).unwrap();
        let phi = Diffeo::from_displacement(sine(g, 0.3)).unwrap();
        assert!(conjugated_b(&phi, &GridFunction::zeros(g), 2.0).unwrap().sup_norm() < 1e-15);
        let c = GridFunction::constant(g, 0.4).unwrap();
        assert!(conjugated_b(&phi, &c, 2.0).unwrap().sup_norm() < 1e-13);
        let v = GridFunction::from_fn(g, |x| (x.cos() + 0.2).sin()).unwrap();
        let a = conjugated_b(&Diffeo::identity(g), &v, 2.0).unwrap();
        let b = b_operator_with(&v, 2.0, false).unwrap();
        assert!(a.sup_distance(&b).unwrap() < 1e-13);
    }

    #[test]
    fn spray_rhs_special_cases() {
        let g = Grid::periodic(64).unwrap();
        let zero = FlowState::initial(&GridFunction::zeros(g));
        let d = spray_rhs(&zero, 2.0).unwrap();
        assert_eq!(d.phi_dot.sup_norm(), 0.0);
        assert_eq!(d.v_dot.sup_norm(), 0.0);
        assert_eq!(d.psi_dot.sup_norm(), 0.0);

        let c = GridFunction::constant(g, 0.25).unwrap();
        let d = spray_rhs(&FlowState::initial(&c), 2.0).unwrap();
        assert!(d.phi_dot.sup_distance(&c).unwrap() == 0.0);
        assert!(d.v_dot.sup_norm() < 1e-14);
        assert!(d.psi_dot.sup_norm() < 1e-14);

        // γ = 1 kills the remainder for every state.
        let phi = Diffeo::from_displacement(sine(g, 0.2)).unwrap();
        let s = FlowState::new(phi, sine(g, 0.7), GridFunction::zeros(g)).unwrap();
        assert_eq!(spray_rhs(&s, 1.0).unwrap().psi_dot.sup_norm(), 0.0);
        assert!(spray_rhs(&s, 2.0).unwrap().psi_dot.sup_norm() > 0.0);
    }

    #[test]
    fn zero_and_constant_data() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let tr = integrate_spray(&GridFunction::zeros(g), 1.0, &c).unwrap();
        assert!(tr.completed());
        for s in &tr.states {
            assert_eq!(s.phi.displacement().sup_norm(), 0.0);
            assert_eq!(s.v.sup_norm(), 0.0);
        }
        let v0 = GridFunction::constant(g, 0.3).unwrap();
        let tr = integrate_spray(&v0, 1.0, &c).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let exact = GridFunction::constant(g, 0.3 * t).unwrap();
            assert!(s.phi.displacement().sup_distance(&exact).unwrap() <= 1e-12);
            assert!(s.v.sup_distance(&v0).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn exp_of_zero_and_constants() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let id = exp_map(&GridFunction::zeros(g), &c).unwrap();
        assert_eq!(id, Diffeo::identity(g));
        let e = exp_map(&GridFunction::constant(g, -0.2).unwrap(), &c).unwrap();
        assert!(e.sup_distance(&Diffeo::shift(g, -0.2).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn d_exp_at_origin_is_identity() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let h = GridFunction::from_fn(g, |x| x.sin() + 0.5 * (2.0 * x).cos()).unwrap();
        let d = d_exp(&GridFunction::zeros(g), &h, &c, None).unwrap();
        assert!(d.sup_distance(&h).unwrap() <= 1e-6);
        let z = d_exp(&GridFunction::zeros(g), &GridFunction::zeros(g), &c, None).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn loss_of_diffeomorphism_terminates() {
        // Large data folds quickly at γ = 1; a high floor makes this immediate.
        let c = SolverConfig { blowup_floor: 0.9, ..cfg(1.0, 64, 0.01) };
        let g = c.grid().unwrap();
        let tr = integrate_spray(&sine(g, 0.5), 1.0, &c).unwrap();
        let term = tr.termination.clone().expect("terminated");
        assert!(term.time < 1.0);
        assert!(tr.states.iter().all(|s| s.v.is_finite() && s.phi.min_phi_x() > 0.0));
        assert!(matches!(exp_map(&sine(g, 0.5), &c), Err(Error::EarlyTermination { .. })));
    }

    #[test]
    fn m_and_l_at_origin() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let probe = sine(g, 0.2);
        let est = estimate_m_l(&GridFunction::zeros(g), &probe, 1.0, &c).unwrap();
        let expect = 0.2 * 1f64.sin() / sobolev_norm(&probe, 2.0);
        assert!((est.m - expect).abs() < 1e-6);
        assert!(est.lipschitz > 1.0);
        // sin vanishes at π.
        assert!(matches!(
            estimate_m_l(&GridFunction::zeros(g), &probe, std::f64::consts::PI, &c),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            estimate_m_l(&GridFunction::zeros(g), &GridFunction::zeros(g), 1.0, &c),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn translations_have_unit_lipschitz_constant() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let v0 = GridFunction::constant(g, 0.3).unwrap();
        let probe = GridFunction::constant(g, 0.1).unwrap();
        let est = estimate_m_l(&v0, &probe, 1.0, &c).unwrap();
        assert!((est.lipschitz - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn warm_start_gives_same_flow() {
        let c = cfg(2.0, 64, 0.05);
        let g = c.grid().unwrap();
        let v0 = sine(g, 0.3);
        let a = integrate_spray(&v0, 1.0, &c).unwrap();
        let b = integrate_spray(&v0, 1.0, &SolverConfig { warm_start: true, ..c }).unwrap();
        assert!(a.last().phi.sup_distance(&b.last().phi).unwrap() < 1e-11);
    }
}
