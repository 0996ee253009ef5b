//! The transport identity for `y = (1 - γ⁻² ∂ₓ²) v` along the flow:
//!
//! ```text
//! (y(t)∘φ(t)) · φ_x(t)² = y(0) + Ψ(t),   Ψ(t) = ∫₀ᵗ ((3γ-3)/γ) φ_t φ_tx φ_x ds
//! ```
//!
//! `Ψ` is carried by the spray integrator as the `psi` component, so the
//! residual of this identity measures integrator and interpolation error.

use serde::{Deserialize, Serialize};

use crate::diffeo::{compose, invert_diffeo, Diffeo};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lagrangian::{remainder_rate, spray_step, FlowState, FlowTrajectory, SprayOptions};
use crate::spectral::{helmholtz_forward, sobolev_norm};

/// `y = v - γ⁻² v_xx`.
pub fn y_of(v: &GridFunction, gamma: f64) -> Result<GridFunction> {
    helmholtz_forward(v, gamma)
}

/// `(y∘φ)·φ_x²` where `y` is built from the Eulerian velocity `v∘φ⁻¹`.
pub fn transported_momentum(state: &FlowState, gamma: f64) -> Result<GridFunction> {
    let v_rec = state.eulerian_velocity()?;
    let y = y_of(&v_rec, gamma)?;
    let px = state.phi.phi_x();
    compose(&y, &state.phi)?.zip_with(px, |a, p| a * p * p)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    pub residual_s_minus_2: Vec<f64>,
    pub residual_sup: Vec<f64>,
    pub psi_norm_s_minus_1: Vec<f64>,
}

impl ConservationReport {
    pub fn max_residual_sup(&self) -> f64 {
        self.residual_sup.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_residual_s_minus_2(&self) -> f64 {
        self.residual_s_minus_2.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_residual_sup(&self) -> f64 {
        self.residual_sup.last().copied().unwrap_or(0.0)
    }
}

/// Residual of the transport identity at every stored state of `flow`.
pub fn conservation_residual(
    flow: &FlowTrajectory,
    v0: &GridFunction,
    gamma: f64,
    s: f64,
) -> Result<ConservationReport> {
    let first = flow
        .states
        .first()
        .ok_or_else(|| Error::InvalidInput("empty flow".into()))?;
    first.grid().ensure_same(&v0.grid())?;
    let y0 = y_of(v0, gamma)?;
    let mut report = ConservationReport::default();
    for (t, state) in flow.times.iter().zip(&flow.states) {
        let lhs = transported_momentum(state, gamma)?;
        let rhs = y0.add(&state.psi)?;
        let diff = lhs.sub(&rhs)?;
        report.times.push(*t);
        report.residual_s_minus_2.push(sobolev_norm(&diff, s - 2.0));
        report.residual_sup.push(diff.sup_norm());
        report.psi_norm_s_minus_1.push(sobolev_norm(&state.psi, s - 1.0));
    }
    Ok(report)
}

/// `y(1) = ((y0 + ψ)/φ_x²)∘φ⁻¹`.
pub fn reconstruct_y1(y0: &GridFunction, phi: &Diffeo, psi: &GridFunction) -> Result<GridFunction> {
    let px = phi.phi_x();
    let num = y0.add(psi)?.zip_with(px, |a, p| a / (p * p))?;
    compose(&num, &invert_diffeo(phi)?)
}

/// Sup-norm mismatch between a central-difference time derivative of
/// `(y∘φ)·φ_x²` (two RK4 micro-steps of size `micro_step`) and the remainder
/// integrand evaluated at `state`.
pub fn instantaneous_identity_check(state: &FlowState, gamma: f64, micro_step: f64) -> Result<f64> {
    if !(micro_step.is_finite() && micro_step > 0.0) {
        return Err(Error::Parameter(format!("micro-step must be positive, got {micro_step}")));
    }
    let opts = SprayOptions::default();
    let fwd = spray_step(state, micro_step, gamma, &opts).map_err(as_domain)?;
    let bwd = spray_step(state, -micro_step, gamma, &opts).map_err(as_domain)?;
    let qf = transported_momentum(&fwd, gamma)?;
    let qb = transported_momentum(&bwd, gamma)?;
    let dq = qf.sub(&qb)?.scale(0.5 / micro_step);
    let rate = remainder_rate(&state.phi, &state.v, gamma)?;
    dq.sup_distance(&rate)
}

fn as_domain(e: Error) -> Error {
    match e {
        Error::Domain(_) => e,
        other => Error::Domain(format!("micro-step failed: {other}")),
    }
}

/// Observed orders `log2(e_i / e_{i+1})` for errors at successively halved
/// step sizes.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverConfig;
    use crate::grid::Grid;
    use crate::lagrangian::integrate_spray;

    #[test]
    fn y_examples() {
        let g = Grid::periodic(64).unwrap();
        assert_eq!(y_of(&GridFunction::zeros(g), 2.0).unwrap().sup_norm(), 0.0);
        let c = GridFunction::constant(g, 1.5).unwrap();
        assert!(y_of(&c, 2.0).unwrap().sup_distance(&c).unwrap() < 1e-15);
        let v = GridFunction::from_fn(g, f64::cos).unwrap();
        let y = y_of(&v, 2.0).unwrap();
        assert!(y.sup_distance(&v.scale(1.25)).unwrap() < 1e-13);
        assert!(matches!(y_of(&v, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_data_has_zero_residual() {
        let cfg = SolverConfig { gamma: 2.0, n: 64, dt: Some(0.1), ..Default::default() };
        let g = cfg.grid().unwrap();
        let v0 = GridFunction::zeros(g);
        let flow = integrate_spray(&v0, 1.0, &cfg).unwrap();
        let rep = conservation_residual(&flow, &v0, 2.0, 2.0).unwrap();
        assert_eq!(rep.max_residual_sup(), 0.0);
        assert_eq!(rep.times.len(), 11);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let cfg = SolverConfig { n: 64, dt: Some(0.5), ..Default::default() };
        let g = cfg.grid().unwrap();
        let flow = integrate_spray(&GridFunction::zeros(g), 1.0, &cfg).unwrap();
        let other = GridFunction::zeros(Grid::periodic(32).unwrap());
        assert!(matches!(
            conservation_residual(&flow, &other, 1.0, 2.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn reconstruct_y1_special_cases() {
        let g = Grid::periodic(64).unwrap();
        let y0 = GridFunction::from_fn(g, |x| (x.sin()).exp()).unwrap();
        let zero = GridFunction::zeros(g);
        let same = reconstruct_y1(&y0, &Diffeo::identity(g), &zero).unwrap();
        assert!(same.sup_distance(&y0).unwrap() < 1e-14);
        let c = 0.3;
        let shifted = reconstruct_y1(&y0, &Diffeo::shift(g, c).unwrap(), &zero).unwrap();
        let exact = GridFunction::from_fn(g, |x| ((x - c).sin()).exp()).unwrap();
        assert!(shifted.sup_distance(&exact).unwrap() < 1e-10);
    }

    #[test]
    fn instantaneous_check_special_cases() {
        let g = Grid::periodic(64).unwrap();
        let zero = FlowState::initial(&GridFunction::zeros(g));
        assert_eq!(instantaneous_identity_check(&zero, 2.0, 1e-4).unwrap(), 0.0);
        let c = FlowState::initial(&GridFunction::constant(g, 0.4).unwrap());
        assert!(instantaneous_identity_check(&c, 2.0, 1e-4).unwrap() <= 1e-10);
        assert!(instantaneous_identity_check(&c, 2.0, 0.0).is_err());
    }

    #[test]
    fn instantaneous_check_on_sine() {
        let g = Grid::periodic(128).unwrap();
        let v = GridFunction::from_fn(g, |x| 0.1 * x.sin()).unwrap();
        let d = instantaneous_identity_check(&FlowState::initial(&v), 2.0, 1e-4).unwrap();
        assert!(d <= 1e-6, "{d:e}");
    }

    #[test]
    fn instantaneous_check_away_from_identity() {
        // Off the identity the φ_x weighting of the integrand matters.
        let g = Grid::periodic(128).unwrap();
        let phi = Diffeo::from_displacement(
            GridFunction::from_fn(g, |x| 0.3 * x.sin() + 0.1 * (2.0 * x).cos()).unwrap(),
        )
        .unwrap();
        let v = GridFunction::from_fn(g, |x| 0.2 * (x + 0.4).cos()).unwrap();
        let st = FlowState::new(phi, v, GridFunction::zeros(g)).unwrap();
        let d = instantaneous_identity_check(&st, 2.0, 1e-4).unwrap();
        assert!(d <= 1e-6, "{d:e}");
    }

    #[test]
    fn orders() {
        let o = observed_orders(&[16.0, 1.0, 0.0625]);
        assert_eq!(o, vec![4.0, 4.0]);
    }
}
