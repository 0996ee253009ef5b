//! Pairs of initial data whose distance vanishes while the distance of the
//! time-1 solutions does not.
//!
//! Around a base point `v0` with probe direction `g` and probe point `x0`:
//!
//! * `r_n = m ‖g‖_s / (8n)`,
//! * `w_n` a smooth bump supported in `(x0 - r_n/L, x0 + r_n/L)` with
//!   `‖w_n‖_s = R/4`,
//! * `z_n = v0 + w_n`, `z̃_n = z_n + g/n`.
//!
//! The flows of `z_n` and `z̃_n` carry the bump to locations separated by
//! roughly `|d exp(g)(x0)| / n`, which exceeds the bump width, so the time-1
//! solutions stay a fixed distance apart.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::conservation::y_of;
use crate::error::{Error, Result};
use crate::eulerian::integrate_eulerian_until;
use crate::grid::{Grid, GridFunction};
use crate::interp::TrigEvaluator;
use crate::lagrangian::{estimate_m_l, integrate_spray, MLEstimate};
use crate::spectral::{bump, resample, sobolev_norm};

/// Coarse grids tried for estimating `m` and `L` when the base data are
/// band-limited.
const ESTIMATE_GRIDS: [usize; 4] = [128, 256, 512, 1024];
/// Largest grid used for the Eulerian cross-check.
const CROSS_CHECK_MAX_N: usize = 8192;
/// Relative spectral energy a resampling may discard.
const RESAMPLE_LOSS: f64 = 1e-26;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    pub v0: GridFunction,
    pub g: GridFunction,
    pub x0: f64,
    pub radius: f64,
    pub n_values: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let grid = self.solver.grid()?;
        grid.ensure_same(&self.v0.grid())?;
        grid.ensure_same(&self.g.grid())?;
        self.v0.ensure_finite()?;
        self.g.ensure_finite()?;
        if !(sobolev_norm(&self.g, self.solver.s.value()) > 0.0) {
            return Err(Error::Parameter("probe direction g must be nonzero".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Parameter(format!("R must be positive, got {}", self.radius)));
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0 && self.x0 < grid.length()) {
            return Err(Error::Parameter(format!(
                "x0 = {} must lie in [0, {})",
                self.x0,
                grid.length()
            )));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Parameter("n_values must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    fn s(&self) -> f64 {
        self.solver.s.value()
    }
}

/// `z_n`, `z̃_n` and the bump that separates them from `v0`.
#[derive(Debug, Clone)]
pub struct BumpPair {
    pub n: usize,
    pub r_n: f64,
    /// Bump half-width `r_n / L`.
    pub halfwidth: f64,
    pub w: GridFunction,
    pub z: GridFunction,
    pub z_tilde: GridFunction,
}

pub fn radius_n(m: f64, g_norm: f64, n: usize) -> f64 {
    m * g_norm / (8.0 * n as f64)
}

pub fn build_pair(ec: &ExperimentConfig, n: usize, m: f64, lipschitz: f64) -> Result<BumpPair> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if !(m > 0.0 && lipschitz > 0.0) {
        return Err(Error::Parameter(format!("m and L must be positive, got {m}, {lipschitz}")));
    }
    let s = ec.s();
    let g_norm = sobolev_norm(&ec.g, s);
    let r_n = radius_n(m, g_norm, n);
    let halfwidth = r_n / lipschitz;
    let w = bump(ec.x0, halfwidth, s, ec.radius / 4.0, ec.v0.grid())?;
    let z = ec.v0.add(&w)?;
    let z_tilde = z.axpy(1.0 / n as f64, &ec.g)?;
    Ok(BumpPair {
        n,
        r_n,
        halfwidth,
        w,
        z,
        z_tilde,
    })
}

/// Spatial part of the time rescaling `ṽ(t, x) = λ v(λt, x)`.
pub fn rescale_to_time_t(v: &GridFunction, lambda: f64) -> Result<GridFunction> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be nonzero, got {lambda}")));
    }
    Ok(v.scale(lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub r_n: f64,
    pub halfwidth: f64,
    /// `‖z̃_n - z_n‖_s`
    pub initial_gap: f64,
    /// `‖v_n(1) - ṽ_n(1)‖_s`
    pub final_gap_s: Option<f64>,
    /// `‖y_n(1) - ỹ_n(1)‖_{s-2}`
    pub final_gap_y_s2: Option<f64>,
    /// `|φ_n(x0) - φ̃_n(x0)|`
    pub phi_separation: Option<f64>,
    pub supports_disjoint: bool,
    pub bump_norm: f64,
    /// Every nonzero bump sample lies inside the prescribed interval.
    pub bump_support_ok: bool,
    /// Sup-norm gap between Lagrangian and Eulerian time-1 velocities of
    /// `z_n` (smallest `n` only).
    pub eulerian_cross_check: Option<f64>,
    /// Set when either flow left the discrete domain.
    pub failure: Option<String>,
}

impl ExperimentRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub construction_exact: bool,
    pub separation_bound: bool,
    pub supports_disjoint: bool,
    pub non_uniformity_witness: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.construction_exact && self.separation_bound && self.supports_disjoint && self.non_uniformity_witness
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub m: f64,
    pub lipschitz: f64,
    pub g_norm: f64,
    pub radius: f64,
    /// Grid used to estimate `m` and `L`.
    pub estimate_n: usize,
    /// `initial_gap(n_i) / initial_gap(n_{i+1})` in increasing `n`.
    pub initial_gap_ratios: Vec<f64>,
    pub initial_gap_decrease: f64,
    pub min_final_gap_s_upper_half: f64,
    pub min_final_gap_y_upper_half: f64,
    pub median_final_gap_y: f64,
    pub min_final_gap_y_two_largest: f64,
    /// `min_final_gap_y_upper_half / R`, the measured lower-bound constant.
    pub empirical_constant: f64,
    pub failed_records: usize,
    pub verdicts: Verdicts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<ExperimentRecord>,
    pub summary: ExperimentSummary,
}

/// Relative tolerance for the exact-construction checks.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Slack on the separation lower bound `m ‖g‖_s / (2n)`.
pub const SEPARATION_SLACK: f64 = 0.8;
/// Required ratio of late final gaps to the median final gap.
pub const WITNESS_FRACTION: f64 = 0.5;
/// Required total decrease of the initial gap across the sweep.
pub const MIN_INITIAL_DECREASE: f64 = 8.0;

fn coarse_for_estimate(ec: &ExperimentConfig) -> Result<(SolverConfig, GridFunction, GridFunction)> {
    let n = ec.solver.n;
    for &ne in ESTIMATE_GRIDS.iter().filter(|&&ne| ne < n) {
        let (v0c, lv) = resample(&ec.v0, ne)?;
        let (gc, lg) = resample(&ec.g, ne)?;
        if lv <= RESAMPLE_LOSS && lg <= RESAMPLE_LOSS {
            let cfg = SolverConfig { n: ne, ..ec.solver.clone() };
            return Ok((cfg, v0c, gc));
        }
    }
    Ok((ec.solver.clone(), ec.v0.clone(), ec.g.clone()))
}

/// `m` and `L` at the configured base point, computed on the coarsest grid
/// that represents `v0` and `g` to round-off.
pub fn estimate_for(ec: &ExperimentConfig) -> Result<(MLEstimate, usize)> {
    let (cfg, v0, g) = coarse_for_estimate(ec)?;
    let est = estimate_m_l(&v0, &g, ec.x0, &cfg)?;
    Ok((est, cfg.n))
}

fn support_ok(w: &GridFunction, center: f64, halfwidth: f64) -> bool {
    let grid = w.grid();
    let l = grid.length();
    let ok = grid.points().zip(w.samples()).all(|(x, &v)| {
        let d = (x - center + l / 2.0).rem_euclid(l) - l / 2.0;
        v == 0.0 || d.abs() < halfwidth
    });
    ok
}

fn time_one_velocity(data: &GridFunction, cfg: &SolverConfig) -> Result<(GridFunction, GridFunction)> {
    let flow = integrate_spray(data, 1.0, cfg)?;
    if let Some(t) = &flow.termination {
        return Err(Error::EarlyTermination {
            time: t.time,
            reason: t.reason.clone(),
        });
    }
    let last = flow.last();
    Ok((last.eulerian_velocity()?, last.phi.displacement().clone()))
}

fn cross_check(z: &GridFunction, halfwidth: f64, cfg: &SolverConfig) -> Result<Option<f64>> {
    let nc = cfg.n.min(CROSS_CHECK_MAX_N);
    let grid = Grid::new(nc, cfg.domain_length)?;
    if halfwidth < 4.0 * grid.dx() {
        return Ok(None);
    }
    let zc = if nc == cfg.n { z.clone() } else { resample(z, nc)?.0 };
    let lag_cfg = SolverConfig { n: nc, snapshot_stride: usize::MAX, ..cfg.clone() };
    let (v_lag, _) = time_one_velocity(&zc, &lag_cfg)?;
    let eul_cfg = SolverConfig { dt: None, ..lag_cfg };
    let traj = integrate_eulerian_until(&zc, 1.0, &eul_cfg)?;
    if !traj.completed() {
        return Ok(None);
    }
    Ok(Some(traj.last().sup_distance(&v_lag)?))
}

fn run_record(
    ec: &ExperimentConfig,
    n: usize,
    est: &MLEstimate,
    cfg: &SolverConfig,
    with_cross_check: bool,
) -> Result<ExperimentRecord> {
    let s = ec.s();
    let pair = build_pair(ec, n, est.m, est.lipschitz)?;
    let initial_gap = sobolev_norm(&pair.z_tilde.sub(&pair.z)?, s);
    let mut rec = ExperimentRecord {
        n,
        r_n: pair.r_n,
        halfwidth: pair.halfwidth,
        initial_gap,
        final_gap_s: None,
        final_gap_y_s2: None,
        phi_separation: None,
        supports_disjoint: false,
        bump_norm: sobolev_norm(&pair.w, s),
        bump_support_ok: support_ok(&pair.w, ec.x0, pair.halfwidth),
        eulerian_cross_check: None,
        failure: None,
    };
    let outcome = time_one_velocity(&pair.z, cfg).and_then(|a| Ok((a, time_one_velocity(&pair.z_tilde, cfg)?)));
    let ((v1, d1), (v1t, d1t)) = match outcome {
        Ok(x) => x,
        Err(e) => {
            rec.failure = Some(e.to_string());
            return Ok(rec);
        }
    };
    let gamma = cfg.gamma;
    rec.final_gap_s = Some(sobolev_norm(&v1.sub(&v1t)?, s));
    rec.final_gap_y_s2 = Some(sobolev_norm(&y_of(&v1, gamma)?.sub(&y_of(&v1t, gamma)?)?, s - 2.0));
    let sep = TrigEvaluator::new(&[&d1, &d1t], cfg.eval_method)?.eval(&[ec.x0]);
    let phi_separation = (sep[0][0] - sep[1][0]).abs();
    rec.phi_separation = Some(phi_separation);
    rec.supports_disjoint = rec.r_n <= phi_separation / 4.0;
    if with_cross_check {
        rec.eulerian_cross_check = cross_check(&pair.z, pair.halfwidth, cfg)?;
    }
    Ok(rec)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn summarize(ec: &ExperimentConfig, est: &MLEstimate, estimate_n: usize, records: &[ExperimentRecord]) -> ExperimentSummary {
    let g_norm = est.g_norm;
    let quarter = ec.radius / 4.0;
    let construction_exact = records.iter().all(|r| {
        ((r.initial_gap * r.n as f64 - g_norm) / g_norm).abs() <= CONSTRUCTION_TOL
            && ((r.bump_norm - quarter) / quarter).abs() <= CONSTRUCTION_TOL
            && r.bump_support_ok
    });
    let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.ok()).collect();
    let separation_bound = !ok.is_empty()
        && ok.iter().all(|r| {
            r.phi_separation.unwrap_or(0.0) >= SEPARATION_SLACK * est.m * g_norm / (2.0 * r.n as f64)
        });
    let supports_disjoint = !ok.is_empty() && ok.iter().all(|r| r.supports_disjoint);

    let initial_gap_ratios: Vec<f64> = records.windows(2).map(|w| w[0].initial_gap / w[1].initial_gap).collect();
    let initial_gap_decrease = match (records.first(), records.last()) {
        (Some(a), Some(b)) => a.initial_gap / b.initial_gap,
        _ => f64::NAN,
    };
    let upper = &ok[ok.len() / 2..];
    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let min_final_gap_s_upper_half = min_of(&mut upper.iter().filter_map(|r| r.final_gap_s));
    let min_final_gap_y_upper_half = min_of(&mut upper.iter().filter_map(|r| r.final_gap_y_s2));
    let median_final_gap_y = median(ok.iter().filter_map(|r| r.final_gap_y_s2).collect());
    let min_final_gap_y_two_largest = min_of(&mut ok.iter().rev().take(2).filter_map(|r| r.final_gap_y_s2));
    let non_uniformity_witness = ok.len() == records.len()
        && ok.len() >= 2
        && min_final_gap_y_two_largest >= WITNESS_FRACTION * median_final_gap_y
        && initial_gap_decrease >= MIN_INITIAL_DECREASE * (1.0 - CONSTRUCTION_TOL);

    ExperimentSummary {
        m: est.m,
        lipschitz: est.lipschitz,
        g_norm,
        radius: ec.radius,
        estimate_n,
        initial_gap_ratios,
        initial_gap_decrease,
        min_final_gap_s_upper_half,
        min_final_gap_y_upper_half,
        median_final_gap_y,
        min_final_gap_y_two_largest,
        empirical_constant: min_final_gap_y_upper_half / ec.radius,
        failed_records: records.len() - ok.len(),
        verdicts: Verdicts {
            construction_exact,
            separation_bound,
            supports_disjoint,
            non_uniformity_witness,
        },
    }
}

/// Run the full experiment. Records are ordered by `n`; a record whose flow
/// leaves the discrete domain is flagged and the sweep continues. Fails only
/// on invalid configuration, unresolvable bumps, or when every record fails.
pub fn run_experiment(ec: &ExperimentConfig) -> Result<ExperimentReport> {
    ec.validate()?;
    let (est, estimate_n) = estimate_for(ec)?;
    run_experiment_with(ec, &est, estimate_n)
}

/// As [`run_experiment`] with precomputed `m` and `L`.
pub fn run_experiment_with(ec: &ExperimentConfig, est: &MLEstimate, estimate_n: usize) -> Result<ExperimentReport> {
    ec.validate()?;
    let mut ns = ec.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    // Fail fast on bumps the grid cannot hold, naming the grid the finest
    // bump needs.
    for &n in ns.iter().rev() {
        build_pair(ec, n, est.m, est.lipschitz)?;
    }
    let cfg = SolverConfig {
        snapshot_stride: usize::MAX,
        ..ec.solver.clone()
    };
    let smallest = ns[0];
    let records: Vec<ExperimentRecord> = ns
        .par_iter()
        .map(|&n| run_record(ec, n, est, &cfg, n == smallest))
        .collect::<Result<_>>()?;
    if records.iter().all(|r| !r.ok()) {
        return Err(Error::EarlyTermination {
            time: f64::NAN,
            reason: format!(
                "every record failed; first: {}",
                records[0].failure.clone().unwrap_or_default()
            ),
        });
    }
    let summary = summarize(ec, est, estimate_n, &records);
    Ok(ExperimentReport { records, summary })
}
