//! Orientation-preserving circle diffeomorphisms `φ = id + d` with `d`
//! periodic, composition with grid functions, and inversion.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::interp::{EvalMethod, TrigEvaluator};
use crate::spectral::derivative;

#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo {
    displacement: GridFunction,
    phi_x: GridFunction,
}

impl Diffeo {
    /// Build `φ = id + displacement`; fails unless `φ_x > 0` at every grid
    /// point.
    pub fn from_displacement(displacement: GridFunction) -> Result<Self> {
        displacement.ensure_finite()?;
        let phi_x = derivative(&displacement, 1)?.map(|v| 1.0 + v);
        let min = phi_x.min();
        if !(min > 0.0) {
            return Err(Error::Domain(format!("min φ_x = {min:.3e} is not positive")));
        }
        Ok(Diffeo {
            displacement,
            phi_x,
        })
    }

    pub fn identity(grid: Grid) -> Self {
        Diffeo {
            displacement: GridFunction::zeros(grid),
            phi_x: GridFunction::constant(grid, 1.0).expect("finite"),
        }
    }

    /// Rigid rotation `x ↦ x + c`.
    pub fn shift(grid: Grid, c: f64) -> Result<Self> {
        Ok(Diffeo {
            displacement: GridFunction::constant(grid, c)?,
            phi_x: GridFunction::constant(grid, 1.0)?,
        })
    }

    pub fn grid(&self) -> Grid {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &GridFunction {
        &self.displacement
    }

    pub fn phi_x(&self) -> &GridFunction {
        &self.phi_x
    }

    pub fn min_phi_x(&self) -> f64 {
        self.phi_x.min()
    }

    pub fn max_phi_x(&self) -> f64 {
        self.phi_x.max()
    }

    /// Lifted values `φ(x_j) = x_j + d_j` (not reduced modulo `L`).
    pub fn values(&self) -> Vec<f64> {
        let g = self.grid();
        self.displacement
            .samples()
            .iter()
            .enumerate()
            .map(|(j, d)| g.x(j) + d)
            .collect()
    }

    /// Lifted value `φ(x)` at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> Result<f64> {
        Ok(x + TrigEvaluator::new(&[&self.displacement], EvalMethod::Auto)?.eval_one(x))
    }

    /// `self ∘ inner`, i.e. `x ↦ self(inner(x))`.
    pub fn after(&self, inner: &Diffeo) -> Result<Diffeo> {
        self.grid().ensure_same(&inner.grid())?;
        let moved = compose(&self.displacement, inner)?;
        Diffeo::from_displacement(inner.displacement.add(&moved)?)
    }

    /// Sup-norm distance between displacements (equivalently between the
    /// maps themselves).
    pub fn sup_distance(&self, other: &Diffeo) -> Result<f64> {
        self.displacement.sup_distance(&other.displacement)
    }
}

/// `(f∘φ)(x_j) = f(φ(x_j))` by trigonometric interpolation of `f`.
pub fn compose(f: &GridFunction, phi: &Diffeo) -> Result<GridFunction> {
    compose_with(f, phi, EvalMethod::Auto)
}

pub fn compose_with(f: &GridFunction, phi: &Diffeo, method: EvalMethod) -> Result<GridFunction> {
    f.grid().ensure_same(&phi.grid())?;
    if !(phi.min_phi_x() > 0.0) {
        return Err(Error::Domain("composition with a non-monotone map".into()));
    }
    let ev = TrigEvaluator::new(&[f], method)?;
    let out = ev.eval(&phi.values()).swap_remove(0);
    Ok(GridFunction::from_raw(f.grid(), out))
}

/// Controls for [`invert_diffeo_with`].
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// Residual tolerance `|φ(y) - x|`, scaled by `max(1, L/2π)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: EvalMethod,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            tolerance: 1e-12,
            max_iterations: 50,
            method: EvalMethod::Auto,
        }
    }
}

/// `φ⁻¹` sampled on the grid: solves `y + d(y) = x_j` pointwise by
/// safeguarded Newton iteration on the monotone lift of `φ`.
pub fn invert_diffeo(phi: &Diffeo) -> Result<Diffeo> {
    invert_diffeo_with(phi, &InversionOptions::default(), None)
}

/// As [`invert_diffeo`], optionally warm-started from a previous inverse.
pub fn invert_diffeo_with(
    phi: &Diffeo,
    opts: &InversionOptions,
    warm_start: Option<&Diffeo>,
) -> Result<Diffeo> {
    let grid = phi.grid();
    let n = grid.n();
    let d = phi.displacement();
    let dmax = d.max();
    let dmin = d.min();
    // Constant displacement: the inverse is the opposite rotation.
    if dmax == dmin {
        return Diffeo::shift(grid, -dmax);
    }
    let tol = opts.tolerance * (grid.length() / std::f64::consts::TAU).max(1.0);
    let ev = TrigEvaluator::new(&[d, phi.phi_x()], opts.method)?;

    let targets: Vec<f64> = grid.points().collect();
    let margin = (dmax - dmin) + grid.dx();
    let mut lo: Vec<f64> = targets.iter().map(|x| x - dmax - margin).collect();
    let mut hi: Vec<f64> = targets.iter().map(|x| x - dmin + margin).collect();
    let mut y: Vec<f64> = match warm_start {
        Some(w) => {
            grid.ensure_same(&w.grid())?;
            w.values()
        }
        None => targets.iter().zip(d.samples()).map(|(x, dj)| x - dj).collect(),
    };

    let mut active: Vec<usize> = (0..n).collect();
    let mut pts = Vec::with_capacity(n);
    let mut worst = (0.0f64, 0usize);
    for _ in 0..opts.max_iterations {
        pts.clear();
        pts.extend(active.iter().map(|&j| y[j]));
        let vals = ev.eval(&pts);
        let mut still = Vec::with_capacity(active.len());
        worst = (0.0, 0);
        for (a, &j) in active.iter().enumerate() {
            let yj = y[j];
            let r = yj + vals[0][a] - targets[j];
            if !r.is_finite() {
                return Err(Error::Numerical(format!("non-finite residual at x = {}", targets[j])));
            }
            let slope = vals[1][a];
            if r.abs() <= tol {
                // The evaluation is already paid for; one more Newton step
                // takes the residual from `tol` to round-off.
                if slope > 0.0 {
                    y[j] = yj - r / slope;
                }
                continue;
            }
            if r.abs() > worst.0 {
                worst = (r.abs(), j);
            }
            if r > 0.0 {
                hi[j] = hi[j].min(yj);
            } else {
                lo[j] = lo[j].max(yj);
            }
            let newton = yj - r / slope;
            y[j] = if slope > 0.0 && newton > lo[j] && newton < hi[j] {
                newton
            } else {
                0.5 * (lo[j] + hi[j])
            };
            still.push(j);
        }
        active = still;
        if active.is_empty() {
            let disp: Vec<f64> = y.iter().zip(&targets).map(|(yj, x)| yj - x).collect();
            return Diffeo::from_displacement(GridFunction::new(grid, disp)?);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: worst.0,
        x: targets[worst.1],
    })
}
