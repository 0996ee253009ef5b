use rodflow_core::lagrangian::d_exp;
use rodflow_core::{exp_map, integrate_spray, GridFunction, SolverConfig};

fn cfg(dt: f64) -> SolverConfig {
    SolverConfig {
        gamma: 2.0,
        n: 128,
        dt: Some(dt),
        ..Default::default()
    }
}

#[test]
fn exp_of_zero_is_identity() {
    let c = cfg(0.1);
    let phi = exp_map(&GridFunction::zeros(c.grid().unwrap()), &c).unwrap();
    assert!(phi.displacement().samples().iter().all(|&d| d == 0.0));
}

#[test]
fn exp_of_constant_is_translation() {
    let c = cfg(0.1);
    for k in [-0.7, 0.25, 1.5] {
        let phi = exp_map(&GridFunction::constant(c.grid().unwrap(), k).unwrap(), &c).unwrap();
        let err = phi.displacement().samples().iter().map(|d| (d - k).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "c = {k}: {err:e}");
    }
}

#[test]
fn flow_property() {
    // exp(t v0) = φ(t; v0)
    let c = cfg(1e-2);
    let v0 = GridFunction::from_fn(c.grid().unwrap(), |x| 0.1 * x.sin() + 0.05 * (2.0 * x).cos()).unwrap();
    for t in [0.5, 1.0] {
        let lhs = exp_map(&v0.scale(t), &c).unwrap();
        let rhs = integrate_spray(&v0, t, &c).unwrap();
        let d = lhs.sup_distance(&rhs.last().phi).unwrap();
        assert!(d <= 1e-8, "t = {t}: {d:e}");
    }
}

#[test]
fn differential_at_zero_is_identity() {
    let c = cfg(0.05);
    let grid = c.grid().unwrap();
    let h = GridFunction::from_fn(grid, |x| x.sin() + 0.5 * (2.0 * x).cos()).unwrap();
    let zero = GridFunction::zeros(grid);
    let d = d_exp(&zero, &h, &c, None).unwrap();
    assert!(d.sup_distance(&h).unwrap() <= 1e-6);

    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| d_exp(&zero, &h, &c, Some(eps)).unwrap().sup_distance(&h).unwrap())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn differential_is_linear_in_direction() {
    let c = cfg(0.05);
    let grid = c.grid().unwrap();
    let v0 = GridFunction::from_fn(grid, |x| 0.1 * x.cos()).unwrap();
    let h = GridFunction::from_fn(grid, |x| (2.0 * x).sin()).unwrap();
    let d1 = d_exp(&v0, &h, &c, Some(1e-4)).unwrap();
    let d2 = d_exp(&v0, &h.scale(2.0), &c, Some(0.5e-4)).unwrap();
    assert!(d2.sup_distance(&d1.scale(2.0)).unwrap() <= 1e-8);
}
