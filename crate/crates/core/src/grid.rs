//! Uniform periodic grids and the real-valued functions sampled on them.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_POINTS: usize = 16;

/// A uniform grid `x_j = j * length / n`, `j = 0..n`, on a periodic domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_POINTS || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid size must be even and at least {MIN_POINTS}, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        Ok(Grid { n, length })
    }

    /// Grid of `n` points on `[0, 2π)`.
    pub fn periodic(n: usize) -> Result<Self> {
        Grid::new(n, TAU)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    /// Angular wavenumber `2πk/L` of integer mode `k`.
    pub fn angular(&self, k: i64) -> f64 {
        TAU * k as f64 / self.length
    }

    /// Reduce `x` into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.length);
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(N = {}, L = {}) vs (N = {}, L = {})",
                self.n, self.length, other.n, other.length
            )));
        }
        Ok(())
    }
}

/// A periodic real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.n(),
                samples.len()
            )));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample {} at index {j}",
                samples[j]
            )));
        }
        Ok(GridFunction { grid, samples })
    }

    /// Trusted constructor for kernel outputs; finiteness is the caller's
    /// responsibility and is re-checked by the integrators.
    pub(crate) fn from_raw(grid: Grid, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.n());
        GridFunction { grid, samples }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new(grid, grid.points().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction::from_raw(grid, vec![0.0; grid.n()])
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GridFunction::new(grid, vec![c; grid.n()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if let Some(j) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample {} at index {j}",
                self.samples[j]
            )));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_raw(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.grid.ensure_same(&other.grid)?;
        Ok(GridFunction::from_raw(
            self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        self.map(|v| v * a)
    }

    /// Sup-norm distance; grids must match.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    /// Circular shift by `shift` grid cells: `out[j] = self[j - shift]`.
    pub fn roll(&self, shift: isize) -> GridFunction {
        let n = self.len() as isize;
        GridFunction::from_raw(
            self.grid,
            (0..n)
                .map(|j| self.samples[(j - shift).rem_euclid(n) as usize])
                .collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct GridFunctionRepr {
    domain_length: f64,
    samples: Vec<f64>,
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridFunctionRepr {
            domain_length: self.grid.length(),
            samples: self.samples.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GridFunctionRepr::deserialize(d)?;
        let grid = Grid::new(repr.samples.len(), repr.domain_length)
            .map_err(serde::de::Error::custom)?;
        GridFunction::new(grid, repr.samples).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(15, 1.0).is_err());
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(32, 0.0).is_err());
        assert!(Grid::new(32, f64::NAN).is_err());
        assert!(Grid::new(32, 2.0).is_ok());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = Grid::periodic(16).unwrap();
        let mut s = vec![0.0; 16];
        s[3] = f64::INFINITY;
        assert!(matches!(
            GridFunction::new(g, s),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn arithmetic_requires_matching_grids() {
        let a = GridFunction::zeros(Grid::periodic(16).unwrap());
        let b = GridFunction::zeros(Grid::periodic(32).unwrap());
        let c = GridFunction::zeros(Grid::new(16, 1.0).unwrap());
        assert!(matches!(a.add(&b), Err(Error::GridMismatch(_))));
        assert!(matches!(a.add(&c), Err(Error::GridMismatch(_))));
        assert!(a.add(&a).is_ok());
    }

    #[test]
    fn wrap_stays_in_domain() {
        let g = Grid::new(16, 3.0).unwrap();
        for x in [-3.0, -1e-17, 0.0, 2.999, 3.0, 7.5] {
            let w = g.wrap(x);
            assert!((0.0..3.0).contains(&w), "{x} -> {w}");
        }
    }

    #[test]
    fn json_uses_domain_length_and_samples() {
        let g = Grid::new(16, 2.0).unwrap();
        let f = GridFunction::from_fn(g, |x| x * x).unwrap();
        let json = serde_json::to_value(&f).unwrap();
        assert_eq!(json["domain_length"], 2.0);
        assert_eq!(json["samples"].as_array().unwrap().len(), 16);
        let back: GridFunction = serde_json::from_value(json).unwrap();
        assert_eq!(back, f);
    }
}
