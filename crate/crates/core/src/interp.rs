//! Trigonometric interpolation at arbitrary points.
//!
//! Two evaluation routes share one interface:
//!
//! * [`EvalMethod::Direct`] sums the real Fourier series at every target
//!   point, `O(N)` per point.
//! * [`EvalMethod::Gridded`] is a Gaussian-gridding non-uniform FFT (type 2):
//!   the coefficients are deconvolved by the Gaussian's Fourier transform,
//!   synthesized on a 2x oversampled grid, and each target is recovered by a
//!   short Gaussian-weighted sum over its nearest fine-grid neighbours. Cost
//!   is `O(N log N)` plus a fixed stencil per point.
//!
//! Both reproduce the grid samples at grid points; the direct route is the
//! reference the gridded one is tested against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::spectral::{fft_real, inverse_plan, wavenumber};

/// Grid sizes up to this use [`EvalMethod::Direct`] under [`EvalMethod::Auto`].
pub const DIRECT_MAX_N: usize = 64;

/// Oversampling ratio of the fine grid.
const OVERSAMPLE: usize = 2;
/// Half-width of the spreading stencil in fine-grid cells.
const SPREAD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMethod {
    #[default]
    Auto,
    Direct,
    Gridded,
}

impl EvalMethod {
    fn resolve(self, n: usize) -> EvalMethod {
        match self {
            EvalMethod::Auto if n <= DIRECT_MAX_N => EvalMethod::Direct,
            EvalMethod::Auto => EvalMethod::Gridded,
            m => m,
        }
    }
}

enum Repr {
    /// `a_0 = c_0`, `a_k = 2 c_k` for `0 < k < N/2`, `a_{N/2} = c_{-N/2}`;
    /// `f(θ) = Re Σ a_k e^{ikθ}`.
    Direct(Vec<Complex64>),
    /// Values on the oversampled grid after deconvolution.
    Gridded(Vec<f64>),
}

struct Gaussian {
    tau: f64,
    fine_n: usize,
    /// `exp(-(jΔ)²/(4τ))` for `j = 0..=SPREAD`.
    tail: Vec<f64>,
}

impl Gaussian {
    fn new(n: usize) -> Self {
        let r = OVERSAMPLE as f64;
        let tau = PI * SPREAD as f64 / ((n * n) as f64 * r * (r - 0.5));
        let fine_n = OVERSAMPLE * n;
        let h = TAU / fine_n as f64;
        let tail = (0..=SPREAD)
            .map(|j| {
                let d = j as f64 * h;
                (-d * d / (4.0 * tau)).exp()
            })
            .collect();
        Gaussian { tau, fine_n, tail }
    }

    /// Fourier coefficient of the periodized Gaussian at mode `k`.
    fn hat(&self, k: i64) -> f64 {
        let k = k as f64;
        (self.tau / PI).sqrt() * (-k * k * self.tau).exp()
    }

    /// First fine index of the stencil and its `2·SPREAD` weights.
    fn weights(&self, theta: f64, w: &mut [f64; 2 * SPREAD]) -> usize {
        let h = TAU / self.fine_n as f64;
        let m0 = ((theta / h).floor() as usize).min(self.fine_n - 1);
        let delta = theta - m0 as f64 * h;
        let e1 = (-delta * delta / (4.0 * self.tau)).exp();
        let e2 = (delta * h / (2.0 * self.tau)).exp();
        let e2_inv = 1.0 / e2;
        // Offsets j = 0..=SPREAD to the right of m0 and 1..SPREAD to the left.
        let mut p = e1;
        for j in 0..=SPREAD {
            w[SPREAD - 1 + j] = p * self.tail[j];
            if j < SPREAD {
                p *= e2;
            }
        }
        let mut p = e1;
        for j in 1..SPREAD {
            p *= e2_inv;
            w[SPREAD - 1 - j] = p * self.tail[j];
        }
        (m0 + self.fine_n - (SPREAD - 1)) % self.fine_n
    }
}

/// Evaluates one or more grid functions (sharing a grid) off-grid.
pub struct TrigEvaluator {
    grid: Grid,
    reprs: Vec<Repr>,
    gaussian: Option<Gaussian>,
}

impl TrigEvaluator {
    pub fn new(funcs: &[&GridFunction], method: EvalMethod) -> Result<Self> {
        let first = funcs
            .first()
            .ok_or_else(|| Error::InvalidInput("no functions to evaluate".into()))?;
        let grid = first.grid();
        for f in funcs {
            grid.ensure_same(&f.grid())?;
            f.ensure_finite()?;
        }
        let n = grid.n();
        match method.resolve(n) {
            EvalMethod::Gridded => {
                let g = Gaussian::new(n);
                let reprs = funcs.iter().map(|f| Repr::Gridded(spread_coeffs(f, &g))).collect();
                Ok(TrigEvaluator {
                    grid,
                    reprs,
                    gaussian: Some(g),
                })
            }
            _ => {
                let reprs = funcs
                    .iter()
                    .map(|f| {
                        let c = fft_real(f.samples());
                        let mut a = Vec::with_capacity(n / 2 + 1);
                        a.push(c[0]);
                        a.extend(c[1..n / 2].iter().map(|v| v * 2.0));
                        a.push(Complex64::new(c[n / 2].re, 0.0));
                        Repr::Direct(a)
                    })
                    .collect();
                Ok(TrigEvaluator {
                    grid,
                    reprs,
                    gaussian: None,
                })
            }
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Evaluate every function at every point; `out[i][p]` is function `i`
    /// at `points[p]`. Points may lie outside `[0, L)`.
    pub fn eval(&self, points: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; points.len()]; self.reprs.len()];
        let scale = TAU / self.grid.length();
        match &self.gaussian {
            None => {
                let n2 = self.grid.n() / 2;
                let mut acc = vec![Complex64::new(0.0, 0.0); self.reprs.len()];
                for (p, &x) in points.iter().enumerate() {
                    let theta = (x * scale).rem_euclid(TAU);
                    let w = Complex64::new(theta.cos(), theta.sin());
                    acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
                    let mut pw = Complex64::new(1.0, 0.0);
                    for k in 0..=n2 {
                        for (a, r) in acc.iter_mut().zip(&self.reprs) {
                            if let Repr::Direct(c) = r {
                                *a += c[k] * pw;
                            }
                        }
                        pw *= w;
                    }
                    for (o, a) in out.iter_mut().zip(&acc) {
                        o[p] = a.re;
                    }
                }
            }
            Some(g) => {
                let mut w = [0.0; 2 * SPREAD];
                let inv_m = 1.0 / g.fine_n as f64;
                for (p, &x) in points.iter().enumerate() {
                    let theta = (x * scale).rem_euclid(TAU);
                    let start = g.weights(theta, &mut w);
                    for (o, r) in out.iter_mut().zip(&self.reprs) {
                        if let Repr::Gridded(fine) = r {
                            let mut s = 0.0;
                            if start + 2 * SPREAD <= g.fine_n {
                                for (f, wj) in fine[start..start + 2 * SPREAD].iter().zip(&w) {
                                    s += f * wj;
                                }
                            } else {
                                for (j, wj) in w.iter().enumerate() {
                                    s += fine[(start + j) % g.fine_n] * wj;
                                }
                            }
                            o[p] = s * inv_m;
                        }
                    }
                }
            }
        }
        out
    }

    /// Evaluate the first function at a single point.
    pub fn eval_one(&self, x: f64) -> f64 {
        self.eval(&[x])[0][0]
    }
}

fn spread_coeffs(f: &GridFunction, g: &Gaussian) -> Vec<f64> {
    let n = f.len();
    let c = fft_real(f.samples());
    let m = g.fine_n as i64;
    let mut fine = vec![Complex64::new(0.0, 0.0); g.fine_n];
    for (i, ci) in c.iter().enumerate() {
        let k = wavenumber(i, n);
        if k == -(n as i64) / 2 {
            // Split the real Nyquist coefficient symmetrically over ±N/2.
            let half = 0.5 * ci.re;
            let kk = n as i64 / 2;
            fine[kk.rem_euclid(m) as usize] += half / g.hat(kk);
            fine[(-kk).rem_euclid(m) as usize] += half / g.hat(kk);
        } else {
            fine[k.rem_euclid(m) as usize] += ci / g.hat(k);
        }
    }
    inverse_plan(g.fine_n).process(&mut fine);
    fine.into_iter().map(|v| v.re).collect()
}

/// Evaluate `f` at the given points.
pub fn evaluate(f: &GridFunction, points: &[f64], method: EvalMethod) -> Result<Vec<f64>> {
    Ok(TrigEvaluator::new(&[f], method)?.eval(points).swap_remove(0))
}

/// Evaluate `f` at a single point.
pub fn evaluate_at(f: &GridFunction, x: f64) -> Result<f64> {
    Ok(TrigEvaluator::new(&[f], EvalMethod::Auto)?.eval_one(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_fn(n: usize) -> GridFunction {
        GridFunction::from_fn(Grid::periodic(n).unwrap(), |x| {
            (x.sin() + 0.3 * (5.0 * x).cos()).exp() + 0.1 * (11.0 * x).sin()
        })
        .unwrap()
    }

    #[test]
    fn reproduces_grid_samples() {
        let f = test_fn(64);
        let pts: Vec<f64> = f.grid().points().collect();
        for m in [EvalMethod::Direct, EvalMethod::Gridded] {
            let v = evaluate(&f, &pts, m).unwrap();
            for (a, b) in v.iter().zip(f.samples()) {
                assert!((a - b).abs() < 1e-12, "{m:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn interpolates_band_limited_functions_exactly() {
        let g = Grid::periodic(32).unwrap();
        let exact = |x: f64| 1.0 + (3.0 * x).sin() - 0.25 * (7.0 * x).cos() + 0.5 * (16.0 * x).cos();
        let f = GridFunction::from_fn(g, exact).unwrap();
        let pts = [0.123, 1.0, 3.3, 6.2, -0.4, 7.0];
        // The Nyquist mode interpolates as cos(16x).
        for m in [EvalMethod::Direct, EvalMethod::Gridded] {
            let v = evaluate(&f, &pts, m).unwrap();
            for (x, val) in pts.iter().zip(&v) {
                assert!((val - exact(*x)).abs() < 1e-12, "{m:?} at {x}: {val}");
            }
        }
    }

    #[test]
    fn gridded_matches_direct() {
        for n in [64, 256, 1024] {
            let f = test_fn(n);
            let pts: Vec<f64> = (0..500).map(|i| i as f64 * 0.01731 - 1.0).collect();
            let a = evaluate(&f, &pts, EvalMethod::Direct).unwrap();
            let b = evaluate(&f, &pts, EvalMethod::Gridded).unwrap();
            let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-12, "n = {n}: {err:e}");
        }
    }

    #[test]
    fn non_default_domain_length() {
        let g = Grid::new(64, 5.0).unwrap();
        let f = GridFunction::from_fn(g, |x| (TAU * x / 5.0).sin()).unwrap();
        for m in [EvalMethod::Direct, EvalMethod::Gridded] {
            let v = evaluate(&f, &[1.3, 6.3], m).unwrap();
            assert!((v[0] - (TAU * 1.3 / 5.0).sin()).abs() < 1e-12);
            assert!((v[1] - (TAU * 1.3 / 5.0).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn several_functions_share_points() {
        let g = Grid::periodic(32).unwrap();
        let a = GridFunction::from_fn(g, f64::sin).unwrap();
        let b = GridFunction::from_fn(g, f64::cos).unwrap();
        let ev = TrigEvaluator::new(&[&a, &b], EvalMethod::Auto).unwrap();
        let out = ev.eval(&[0.5]);
        assert!((out[0][0] - 0.5f64.sin()).abs() < 1e-14);
        assert!((out[1][0] - 0.5f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = GridFunction::zeros(Grid::periodic(32).unwrap());
        let b = GridFunction::zeros(Grid::periodic(64).unwrap());
        assert!(TrigEvaluator::new(&[&a, &b], EvalMethod::Auto).is_err());
    }
}
