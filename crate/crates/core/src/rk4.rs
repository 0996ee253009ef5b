//! Classical fourth-order Runge–Kutta step over a generic vector state.

use crate::error::Result;

/// Minimal vector-space structure needed by [`rk4_step`].
pub trait OdeState: Sized {
    /// `self + a * x`
    fn axpy(&self, a: f64, x: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

impl OdeState for Vec<f64> {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        self.iter().zip(x).map(|(u, v)| u + a * v).collect()
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

pub fn rk4_step<S, F>(y: &S, dt: f64, mut rhs: F) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    let k1 = rhs(y)?;
    let k2 = rhs(&y.axpy(0.5 * dt, &k1))?;
    let k3 = rhs(&y.axpy(0.5 * dt, &k2))?;
    let k4 = rhs(&y.axpy(dt, &k3))?;
    Ok(y
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4))
}
