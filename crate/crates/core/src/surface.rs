//! Geometric checks on sampled blow-up surfaces and the experiments that
//! exercise them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::extended::{evolve_extended, ExtendedGrid};
use crate::modulation::{fit_profile, param_distance};
use crate::profiles::{kappa_star_scalar, ModelParams, ProfileParams, Sign};
use crate::simvars::{to_selfsim, Bump, FieldSnapshot, YGrid};
use crate::wave::{build_surface, BlowupSurface, SurfaceBuild};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max |T(x) - T(x')| / |x - x'|` over sample pairs.
    pub max_ratio: f64,
    pub worst_pair: (f64, f64),
    /// Pairs whose ratio exceeds `1 + sigma_factor (σ + σ') / |x - x'|`.
    pub violations: usize,
    pub passed: bool,
}

/// Pairwise slope bound of the surface; each pair may exceed 1 by
/// `sigma_factor` combined fit uncertainties over the pair distance.
pub fn lipschitz_report(surf: &BlowupSurface, sigma_factor: f64) -> Result<LipschitzReport> {
    let s = surf.samples();
    if s.len() < 2 {
        return Err(Error::InvalidField("a Lipschitz check needs two samples".into()));
    }
    let mut report = LipschitzReport { max_ratio: 0.0, worst_pair: (s[0].x, s[1].x), violations: 0, passed: true };
    for (i, a) in s.iter().enumerate() {
        for b in &s[i + 1..] {
            let dx = (b.x - a.x).abs();
            if dx == 0.0 {
                continue;
            }
            let ratio = (b.t - a.t).abs() / dx;
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst_pair = (a.x, b.x);
            }
            if ratio > 1.0 + sigma_factor * (a.sigma + b.sigma) / dx {
                report.violations += 1;
            }
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}

/// `T(x)` by linear interpolation between samples.
pub fn interpolate(surf: &BlowupSurface, x: f64) -> Result<f64> {
    let s = surf.samples();
    let (first, last) = match (s.first(), s.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidField("empty surface".into())),
    };
    if !(x >= first.x && x <= last.x) {
        return Err(Error::OutOfDomain(format!("{x} outside the sampled range [{}, {}]", first.x, last.x)));
    }
    let k = s.partition_point(|p| p.x < x);
    if s[k].x == x || k == 0 {
        return Ok(s[k].t);
    }
    let (a, b) = (&s[k - 1], &s[k]);
    Ok(a.t + (b.t - a.t) * (x - a.x) / (b.x - a.x))
}

/// Whether every sample lies on or above the backward cone
/// `T(x0) - delta0 |x - x0|`, up to `tol`.
pub fn cone_test(surf: &BlowupSurface, x0: f64, delta0: f64, tol: f64) -> Result<bool> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::InvalidConfig(format!("cone slope {delta0} must lie in (0, 1)")));
    }
    let t0 = interpolate(surf, x0)?;
    Ok(surf.samples().iter().all(|p| p.t >= t0 - delta0 * (p.x - x0).abs() - tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilSlope {
    pub radius: f64,
    pub points: usize,
    pub slope: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub x0: f64,
    pub fitted_d: f64,
    /// Largest stencil first.
    pub stencils: Vec<StencilSlope>,
    /// Richardson limit of the two smallest stencils (line fits are `O(r²)`
    /// accurate on symmetric stencils).
    pub slope_limit: f64,
    pub gap: f64,
}

fn line_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let tbar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let sxt: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - tbar)).sum();
    sxt / sxx
}

/// Least-squares slopes of `T` on the stencils `|x - x0| ≤ r0 / 2^k`, kept
/// while each side holds at least `min_side` samples, compared with
/// `fitted_d`. Each stencil keeps the same number of samples on both sides
/// (the nearest ones), so even terms of `T` do not bias the slope.
pub fn gradient_vs_d(surf: &BlowupSurface, x0: f64, fitted_d: f64, r0: f64, min_side: usize) -> Result<GradientReport> {
    if !(r0 > 0.0) || min_side == 0 {
        return Err(Error::InvalidConfig("stencil radius and side count must be positive".into()));
    }
    let s = surf.samples();
    let mut stencils = Vec::new();
    let mut r = r0;
    loop {
        let reach = r * (1.0 + 1e-9);
        let mut left: Vec<(f64, f64)> = s.iter().filter(|p| p.x < x0 && x0 - p.x <= reach).map(|p| (p.x, p.t)).collect();
        let mut right: Vec<(f64, f64)> = s.iter().filter(|p| p.x > x0 && p.x - x0 <= reach).map(|p| (p.x, p.t)).collect();
        let side = left.len().min(right.len());
        if side < min_side {
            break;
        }
        left.drain(..left.len() - side);
        right.truncate(side);
        let mut pts = left;
        pts.extend(s.iter().filter(|p| p.x == x0).map(|p| (p.x, p.t)));
        pts.extend(right);
        let slope = line_slope(&pts);
        stencils.push(StencilSlope { radius: r, points: pts.len(), slope, gap: (slope - fitted_d).abs() });
        r *= 0.5;
    }
    let slope_limit = match stencils.as_slice() {
        [.., a, b] => (4.0 * b.slope - a.slope) / 3.0,
        _ => {
            return Err(Error::IllConditioned(format!(
                "fewer than two stencils around {x0} hold {min_side} samples per side"
            )))
        }
    };
    Ok(GradientReport { x0, fitted_d, stencils, slope_limit, gap: (slope_limit - fitted_d).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub x: f64,
    pub t: f64,
    /// Centred difference of the two neighbours.
    pub gradient: f64,
    /// `param_distance(d, 0)` of the supplied fit at `x`, if any.
    pub kappa0_distance: Option<f64>,
    pub fitted: Option<ProfileParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinReport {
    pub minima: Vec<LocalMinimum>,
}

/// Strict interior discrete minima of `T`; `fits` supplies modulation fits
/// at sample locations.
pub fn local_min_report(surf: &BlowupSurface, fits: &[(f64, ProfileParams)]) -> Result<LocalMinReport> {
    let s = surf.samples();
    if s.len() < 3 {
        return Err(Error::InvalidField("a minimum search needs three samples".into()));
    }
    let mut minima = Vec::new();
    for w in s.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if b.t < a.t && b.t < c.t {
            let fitted = fits.iter().find(|(x, _)| *x == b.x).map(|(_, f)| f.clone());
            let kappa0_distance = match &fitted {
                Some(f) => Some(param_distance(f.d(), &vec![0.0; f.d().len()])?),
                None => None,
            };
            minima.push(LocalMinimum {
                x: b.x,
                t: b.t,
                gradient: (c.t - a.t) / (c.x - a.x),
                kappa0_distance,
                fitted,
            });
        }
    }
    Ok(LocalMinReport { minima })
}

/// Modulation fit at a surface point from the snapshot recorded for it,
/// transported to similarity variables about `(x, T(x))`.
pub fn fit_at(snapshot: &FieldSnapshot, x: f64, t: f64, grid: &Arc<YGrid>) -> Result<(ProfileParams, f64)> {
    let frame = to_selfsim(snapshot, x, t, grid)?;
    fit_profile(&frame, None)
}

/// Outer extension used by [`rigidity_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Extension {
    /// Seeded bump supported in `1.2 < |y| < 1.5`.
    Seeded(u64),
    /// A given bump added to `κ(d*)`, which may reach into the unit ball.
    Bump(Bump),
}

impl Extension {
    /// The bump added to `κ(d*)`; radial problems mirror it to stay even.
    pub fn bump(&self, params: &ModelParams) -> Bump {
        match *self {
            Extension::Seeded(seed) => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let side = if params.is_radial() || rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let width = rng.gen_range(0.05..=0.15);
                let center = side * rng.gen_range(1.2 + width..=1.5 - width);
                let amplitude = rng.gen_range(-1.0..=1.0) * params.kappa0();
                Bump { center, width, amplitude }
            }
            Extension::Bump(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigiditySetup {
    pub intervals: Vec<usize>,
    pub span: f64,
    pub cfl: f64,
    pub output_interval: f64,
    pub u_max: f64,
    pub tolerance: f64,
}

impl Default for RigiditySetup {
    fn default() -> Self {
        Self { intervals: vec![800, 1600, 3200], span: 3.0, cfl: 0.5, output_interval: 0.25, u_max: 1e6, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRun {
    pub intervals: usize,
    pub deviation: Vec<(f64, f64)>,
    pub max_deviation: f64,
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub d_star: f64,
    pub a_star: f64,
    pub bump: Bump,
    /// Whether the data equal `κ(d*)` on `|y| < 1`.
    pub hypothesis_holds: bool,
    pub runs: Vec<RigidityRun>,
    pub refinement_nonincreasing: bool,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Evolves `κ(d*)` plus an outer extension on `|y| < A*` and measures the
/// deviation from `κ(d*)` on the unit ball. Only persistence over a finite
/// `s` interval is observable; the ancient-solution setting is not.
pub fn rigidity_experiment(
    params: &ModelParams,
    d_star: f64,
    a_star: f64,
    extension: Extension,
    setup: &RigiditySetup,
) -> Result<RigidityReport> {
    if params.is_radial() && d_star != 0.0 {
        return Err(Error::InvalidProfile("radial problems only admit d* = 0".into()));
    }
    if !(d_star.abs() < 1.0 && a_star * d_star.abs() < 1.0) {
        return Err(Error::InvalidProfile(format!("κ(d*) with d* = {d_star} is singular inside |y| < {a_star}")));
    }
    if setup.intervals.is_empty() {
        return Err(Error::InvalidConfig("rigidity needs at least one resolution".into()));
    }
    let bump = extension.bump(params);
    let (lo, hi) = bump.support();
    let hypothesis_holds = lo >= 1.0 || hi <= -1.0;
    let mut notes = vec!["inner-ball persistence over a finite s interval; the ancient-solution setting is not simulated".to_string()];
    if !hypothesis_holds {
        notes.push(format!("hypothesis violated: extension support [{lo}, {hi}] meets the unit ball"));
    }
    let mut runs = Vec::with_capacity(setup.intervals.len());
    for &intervals in &setup.intervals {
        let grid = ExtendedGrid::new(params, a_star, intervals)?;
        let radial = params.is_radial();
        let reference: Vec<f64> = grid.nodes().iter().map(|&y| kappa_star_scalar(params, d_star, 0.0, y).0).collect();
        let w0: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&reference)
            .map(|(&y, k)| k + bump.eval(if radial { y.abs() } else { y }))
            .collect();
        let ws0 = vec![0.0; w0.len()];
        let run = evolve_extended(&grid, w0, ws0, &reference, setup.span, setup.cfl, setup.output_interval, setup.u_max)?;
        if let Some(s) = run.diverged_at {
            notes.push(format!("{intervals} intervals: extension diverged at s = {s}"));
        }
        runs.push(RigidityRun {
            intervals,
            max_deviation: run.max_deviation(),
            deviation: run.deviation,
            diverged_at: run.diverged_at,
        });
    }
    let refinement_nonincreasing = runs.windows(2).all(|w| w[1].max_deviation <= w[0].max_deviation);
    let finest = runs.last().map_or(f64::INFINITY, |r| r.max_deviation);
    let passed = hypothesis_holds && refinement_nonincreasing && finest < setup.tolerance;
    Ok(RigidityReport { d_star, a_star, bump, hypothesis_holds, runs, refinement_nonincreasing, passed, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySetup {
    /// Perturbation shape; rescaled to physical `H¹` norm `ε`.
    pub bump: Bump,
    pub delta0: f64,
    /// Cells of the unit-ball grid used for probe fits.
    pub fit_cells: usize,
    /// Point whose blow-up time carries the continuity check.
    pub center: f64,
    /// Cone-test slack in units of the combined fit uncertainty.
    pub sigma_factor: f64,
    /// Scheme error of `T` on the matching closed-form case; the floor is
    /// ten times this.
    pub scheme_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCheck {
    pub x: f64,
    pub t: f64,
    pub cone: bool,
    pub fit: Option<ProfileParams>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonResult {
    pub eps: f64,
    /// `|T_ε - T_0|` at the centre probe.
    pub gap_center: f64,
    pub gap_max: f64,
    pub missing: Vec<f64>,
    pub probes: Vec<ProbeCheck>,
    /// Every probe present, in its cone and fitted with the base sign.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub floor: f64,
    pub base_sign: Option<Sign>,
    pub results: Vec<EpsilonResult>,
    /// `gap_center` decreases with `|ε|` until it reaches the floor.
    pub continuity: bool,
    /// Largest grid value with every check passing; no claim that it
    /// approximates the theoretical radius.
    pub largest_passing_eps: Option<f64>,
    pub passed: bool,
}

fn check_probes(build: &SurfaceBuild, setup: &StabilitySetup, grid: &Arc<YGrid>, tol: f64) -> Vec<ProbeCheck> {
    let surf = &build.surface;
    surf.samples()
        .iter()
        .map(|p| {
            let cone = cone_test(surf, p.x, setup.delta0, tol + setup.sigma_factor * p.sigma).unwrap_or(false);
            let snap = build.probes.iter().position(|&x| x == p.x).and_then(|k| build.snapshots[k].as_ref());
            let (fit, fit_error) = match snap.map(|s| fit_at(s, p.x, p.t, grid)) {
                Some(Ok((f, _))) => (Some(f), None),
                Some(Err(e)) => (None, Some(e.to_string())),
                None => (None, Some("no snapshot recorded".into())),
            };
            ProbeCheck { x: p.x, t: p.t, cone, fit, fit_error }
        })
        .collect()
}

/// Rebuilds the surface from `base + ε b` for each `ε` in `eps_grid`
/// (`b` of unit physical norm) and compares with the unperturbed surface.
pub fn stability_experiment(
    base: &FieldSnapshot,
    cfg: &SolverConfig,
    eps_grid: &[f64],
    probes: &[f64],
    setup: &StabilitySetup,
) -> Result<StabilityReport> {
    let params = *base.params();
    let norm = setup.bump.physical_h1_norm(&params);
    if !(norm > 0.0) {
        return Err(Error::InvalidField("perturbation has zero norm".into()));
    }
    let unit = Bump { amplitude: setup.bump.amplitude / norm, ..setup.bump };
    let grid = YGrid::unit_ball(&params, setup.fit_cells)?;
    let floor = 10.0 * setup.scheme_error;
    let base_build = build_surface(base, cfg, probes)?;
    let base_checks = check_probes(&base_build, setup, &grid, floor);
    let base_sign = base_checks.iter().find_map(|c| c.fit.as_ref().map(|f| f.e()));
    let t0 = |x: f64| base_build.surface.samples().iter().find(|p| p.x == x).map(|p| p.t);
    let center = *base_build
        .probes
        .iter()
        .min_by(|a, b| (*a - setup.center).abs().total_cmp(&(*b - setup.center).abs()))
        .ok_or_else(|| Error::InvalidConfig("no probes".into()))?;
    let mut results = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let build = if eps == 0.0 {
            base_build.clone()
        } else {
            let u: Vec<f64> = base.grid().iter().zip(base.u()).map(|(&x, u)| u + eps * unit.eval(x)).collect();
            let data = FieldSnapshot::new(params, base.grid().clone(), u, base.ut().to_vec(), base.t())?;
            build_surface(&data, cfg, probes)?
        };
        let checks = if eps == 0.0 { base_checks.clone() } else { check_probes(&build, setup, &grid, floor) };
        let mut gap_max: f64 = 0.0;
        let mut gap_center = f64::INFINITY;
        let mut missing = Vec::new();
        for &x in &build.probes {
            let te = build.surface.samples().iter().find(|p| p.x == x).map(|p| p.t);
            match (te, t0(x)) {
                (Some(a), Some(b)) => {
                    gap_max = gap_max.max((a - b).abs());
                    if x == center {
                        gap_center = (a - b).abs();
                    }
                }
                _ => missing.push(x),
            }
        }
        let passed = missing.is_empty()
            && checks.iter().all(|c| c.cone && c.fit.as_ref().is_some_and(|f| Some(f.e()) == base_sign));
        results.push(EpsilonResult { eps, gap_center, gap_max, missing, probes: checks, passed });
    }
    let mut nonzero: Vec<&EpsilonResult> = results.iter().filter(|r| r.eps != 0.0).collect();
    nonzero.sort_by(|a, b| b.eps.abs().total_cmp(&a.eps.abs()));
    let continuity = nonzero.windows(2).all(|w| w[1].gap_center < w[0].gap_center || w[1].gap_center <= floor)
        && results.iter().filter(|r| r.eps == 0.0).all(|r| r.gap_max == 0.0);
    let largest_passing_eps = results.iter().filter(|r| r.passed).map(|r| r.eps.abs()).fold(None, |m: Option<f64>, e| {
        Some(m.map_or(e, |m| m.max(e)))
    });
    let passed = continuity && results.iter().all(|r| r.passed);
    Ok(StabilityReport { floor, base_sign, results, continuity, largest_passing_eps, passed })
}
