//! Shared inputs for the benchmarks.

use rodflow_core::{Diffeo, Grid, GridFunction};

/// A smooth velocity with a few active modes.
pub fn velocity(n: usize) -> GridFunction {
    let grid = Grid::periodic(n).expect("valid grid");
    GridFunction::from_fn(grid, |x| 0.1 * x.sin() + 0.05 * (2.0 * x + 0.3).cos()).expect("finite")
}

/// A moderately deformed diffeomorphism (`min φ_x ≈ 0.6`).
pub fn diffeo(n: usize) -> Diffeo {
    let grid = Grid::periodic(n).expect("valid grid");
    let d = GridFunction::from_fn(grid, |x| 0.3 * x.sin() + 0.05 * (2.0 * x).cos()).expect("finite");
    Diffeo::from_displacement(d).expect("orientation preserving")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_valid() {
        assert_eq!(velocity(64).len(), 64);
        assert!(diffeo(64).min_phi_x() > 0.5);
    }
}
