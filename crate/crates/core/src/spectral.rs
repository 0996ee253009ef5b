//! Fourier calculus on periodic grid functions.
//!
//! Coefficients follow `f̂_k = (1/L) ∫ f(x) e^{-2πikx/L} dx`, discretized as
//! `f̂_k = (1/N) Σ_j f_j e^{-2πijk/N}`. They are stored in FFT order
//! (`k = 0, 1, .., N/2-1, -N/2, .., -1`).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Signed wavenumber of FFT slot `idx` on an `n`-point grid.
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

pub(crate) fn fft_real(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_plan(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

pub(crate) fn ifft_real(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    inverse_plan(n).process(&mut coeffs);
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Sobolev regularity index; only `s > 3/2` is admitted.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 1.5) {
            return Err(Error::Parameter(format!(
                "Sobolev index must exceed 3/2, got {s}"
            )));
        }
        Ok(SobolevIndex(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SobolevIndex {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        SobolevIndex::new(s)
    }
}

impl From<SobolevIndex> for f64 {
    fn from(s: SobolevIndex) -> f64 {
        s.0
    }
}

/// Discrete Fourier coefficients of a real grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(f: &GridFunction) -> Spectrum {
        Spectrum {
            grid: f.grid(),
            coefficients: fft_real(f.samples()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Coefficients in FFT order.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Coefficient of wavenumber `k ∈ [-N/2, N/2)`.
    pub fn coefficient(&self, k: i64) -> Option<Complex64> {
        let n = self.grid.n() as i64;
        if k < -n / 2 || k >= n / 2 {
            return None;
        }
        Some(self.coefficients[k.rem_euclid(n) as usize])
    }

    pub fn to_grid(&self) -> GridFunction {
        GridFunction::from_raw(self.grid, ifft_real(self.coefficients.clone()))
    }

    /// Apply a real Fourier multiplier given as a function of the angular
    /// wavenumber `2πk/L` (and the signed integer mode).
    pub fn apply(&self, m: impl Fn(i64, f64) -> Complex64) -> Spectrum {
        let n = self.grid.n();
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = wavenumber(i, n);
                c * m(k, self.grid.angular(k))
            })
            .collect();
        Spectrum {
            grid: self.grid,
            coefficients,
        }
    }
}

pub(crate) fn derivative_multiplier(k: i64, xi: f64, n: usize, order: u32) -> Complex64 {
    if order % 2 == 1 && k == -(n as i64) / 2 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, xi).powu(order)
}

/// Spectral derivative of order 1, 2 or 3.
pub fn derivative(f: &GridFunction, order: u32) -> Result<GridFunction> {
    if !(1..=3).contains(&order) {
        return Err(Error::Parameter(format!(
            "derivative order must be 1, 2 or 3, got {order}"
        )));
    }
    f.ensure_finite()?;
    let n = f.len();
    Ok(Spectrum::of(f)
        .apply(|k, xi| derivative_multiplier(k, xi, n, order))
        .to_grid())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be finite and nonzero, got {gamma}")));
    }
    Ok(())
}

pub(crate) fn helmholtz_symbol(xi: f64, gamma: f64) -> f64 {
    1.0 + (xi / gamma) * (xi / gamma)
}

/// `(1 - γ⁻² ∂ₓ²) f`
pub fn helmholtz_forward(f: &GridFunction, gamma: f64) -> Result<GridFunction> {
    check_gamma(gamma)?;
    f.ensure_finite()?;
    Ok(Spectrum::of(f)
        .apply(|_, xi| Complex64::new(helmholtz_symbol(xi, gamma), 0.0))
        .to_grid())
}

/// `(1 - γ⁻² ∂ₓ²)⁻¹ f`
pub fn helmholtz_inverse(f: &GridFunction, gamma: f64) -> Result<GridFunction> {
    check_gamma(gamma)?;
    f.ensure_finite()?;
    Ok(Spectrum::of(f)
        .apply(|_, xi| Complex64::new(1.0 / helmholtz_symbol(xi, gamma), 0.0))
        .to_grid())
}

pub(crate) fn sobolev_norm_of_coeffs(grid: Grid, coeffs: &[Complex64], s: f64) -> f64 {
    let n = grid.n();
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let xi = grid.angular(wavenumber(i, n));
            (1.0 + xi * xi).powf(s) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖f‖_s = (Σ_k (1 + (2πk/L)²)^s |f̂_k|²)^{1/2}`; any real `s` is accepted.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> f64 {
    sobolev_norm_of_coeffs(f.grid(), &fft_real(f.samples()), s)
}

/// Standard `C^∞` bump `exp(-1/(1-ξ²))`, centred at `center` with the given
/// half-width, scaled to have `‖·‖_s = target_norm`.
///
/// Distances are measured periodically, so supports may straddle the seam.
pub fn bump(
    center: f64,
    halfwidth: f64,
    s: f64,
    target_norm: f64,
    grid: Grid,
) -> Result<GridFunction> {
    let l = grid.length();
    if !(halfwidth > 0.0 && halfwidth < l / 2.0) {
        return Err(Error::Parameter(format!(
            "bump half-width must lie in (0, L/2), got {halfwidth}"
        )));
    }
    if !(target_norm.is_finite() && target_norm > 0.0) {
        return Err(Error::Parameter(format!(
            "bump norm must be positive, got {target_norm}"
        )));
    }
    if !center.is_finite() || !s.is_finite() {
        return Err(Error::Parameter("bump center and index must be finite".into()));
    }
    const MIN_CELLS: f64 = 4.0;
    if halfwidth < MIN_CELLS * grid.dx() {
        let mut min_n = (MIN_CELLS * l / halfwidth).ceil() as usize;
        min_n += min_n % 2;
        return Err(Error::Resolution {
            detail: format!(
                "bump half-width {halfwidth:.3e} spans {:.2} cells",
                halfwidth / grid.dx()
            ),
            min_n,
        });
    }
    let c = grid.wrap(center);
    let raw: Vec<f64> = grid
        .points()
        .map(|x| {
            let d = (x - c + l / 2.0).rem_euclid(l) - l / 2.0;
            let xi = d / halfwidth;
            if xi.abs() < 1.0 {
                (-1.0 / (1.0 - xi * xi)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let shape = GridFunction::from_raw(grid, raw);
    let norm = sobolev_norm(&shape, s);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!("bump has degenerate norm {norm}")));
    }
    Ok(shape.scale(target_norm / norm))
}

/// Resample onto an `n`-point grid of the same length by zero-padding or
/// truncating the spectrum. Returns the resampled function and the fraction
/// of squared `L²` mass discarded by truncation.
pub fn resample(f: &GridFunction, n: usize) -> Result<(GridFunction, f64)> {
    let target = Grid::new(n, f.grid().length())?;
    let src_n = f.len();
    let coeffs = fft_real(f.samples());
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut kept = 0.0;
    let half = (src_n.min(n) / 2) as i64;
    for (i, c) in coeffs.iter().enumerate() {
        let k = wavenumber(i, src_n);
        // Nyquist modes of either grid are dropped to keep the result real.
        if k.abs() < half {
            out[k.rem_euclid(n as i64) as usize] = *c;
            kept += c.norm_sqr();
        }
    }
    let lost = if total > 0.0 { (total - kept).max(0.0) / total } else { 0.0 };
    Ok((GridFunction::from_raw(target, ifft_real(out)), lost))
}

/// Zero all modes with `|k| > N/3` (2/3-rule dealiasing).
pub fn dealias(f: &GridFunction) -> GridFunction {
    let n = f.len() as i64;
    Spectrum::of(f)
        .apply(|k, _| {
            if 3 * k.abs() > n {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .to_grid()
}
