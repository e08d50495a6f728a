//! The Lyapunov functional
//!
//! `E(w, ∂_s w) = ∫ (½(∂_s w)² + ½|∇w|² - ½(y·∇w)² + (p+1)/(p-1)² w² - |w|^{p+1}/(p+1)) ρ dy`
//!
//! evaluated with the same cell weights and face differences as the 𝓗 norm.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::profiles::{ModelParams, ProfileParams};
use crate::selfsim::{evolve_observed, Evolution};
use crate::simvars::{fmt17, h_norm, SelfSimFrame, YGrid};

pub fn lyapunov(frame: &SelfSimFrame) -> f64 {
    let grid = frame.grid();
    let params = frame.params();
    let half_mass = 0.5 * params.mass();
    let p1 = params.p() + 1.0;
    let local: f64 = frame
        .w()
        .iter()
        .zip(frame.ws())
        .zip(grid.cell_weights())
        .map(|((&w, &ws), wgt)| (0.5 * ws * ws + half_mass * w * w - params.abs_pow_p1(w) / p1) * wgt)
        .sum();
    local + 0.5 * grid.gradient_form(frame.w())
}

/// `E` along one run, strictly increasing in `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    params: ModelParams,
    samples: Vec<(f64, f64)>,
}

impl EnergyTrace {
    pub fn new(params: ModelParams) -> Self {
        Self { params, samples: Vec::new() }
    }

    pub fn push(&mut self, s: f64, e: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.last() {
            if !(s > last) {
                return Err(Error::InvalidField(format!("trace times must increase: {s} after {last}")));
            }
        }
        self.samples.push((s, e));
        Ok(())
    }

    pub fn from_frames(frames: &[SelfSimFrame]) -> Result<Self> {
        let params = *frames
            .first()
            .ok_or_else(|| Error::InvalidField("no frames".into()))?
            .params();
        let mut trace = Self::new(params);
        for f in frames {
            trace.push(f.s(), lyapunov(f))?;
        }
        Ok(trace)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Largest single-step increase (zero when `E` never increases).
    pub fn max_increase(&self) -> f64 {
        self.samples.windows(2).map(|p| p[1].1 - p[0].1).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,E")?;
        for (s, e) in &self.samples {
            writeln!(out, "{},{}", fmt17(*s), fmt17(*e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub passed: bool,
    pub tol: f64,
    pub max_increase: f64,
    /// `(s, E(s) - E(s_prev))` for every increment above `tol`.
    pub violations: Vec<(f64, f64)>,
}

pub fn check_monotone(trace: &EnergyTrace, tol: f64) -> MonotoneReport {
    let violations: Vec<(f64, f64)> = trace
        .samples
        .windows(2)
        .map(|p| (p[1].0, p[1].1 - p[0].1))
        .filter(|(_, inc)| *inc > tol)
        .collect();
    MonotoneReport { passed: violations.is_empty(), tol, max_increase: trace.max_increase(), violations }
}

/// True iff `E(frame) < 0`, which forces finite-time divergence.
pub fn blowup_criterion(frame: &SelfSimFrame) -> bool {
    lyapunov(frame) < 0.0
}

/// `(|E(A) - E(B)|, C (1 + ‖A‖^p + ‖B‖^p) ‖A - B‖)` in the 𝓗 norm.
pub fn continuity_gap(a: &SelfSimFrame, b: &SelfSimFrame, c: f64) -> Result<(f64, f64)> {
    let diff = a.difference(b)?;
    let lhs = (lyapunov(a) - lyapunov(b)).abs();
    Ok((lhs, c * continuity_scale(a, b, &diff)))
}

fn continuity_scale(a: &SelfSimFrame, b: &SelfSimFrame, diff: &SelfSimFrame) -> f64 {
    let p = a.params().p();
    (1.0 + h_norm(a).powf(p) + h_norm(b).powf(p)) * h_norm(diff)
}

/// Twice the largest ratio `|E(A) - E(B)| / ((1 + ‖A‖^p + ‖B‖^p) ‖A - B‖)`
/// over a validation family.
pub fn calibrate_continuity_constant(family: &[(SelfSimFrame, SelfSimFrame)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b) in family {
        let diff = a.difference(b)?;
        let scale = continuity_scale(a, b, &diff);
        if scale > 0.0 {
            worst = worst.max((lyapunov(a) - lyapunov(b)).abs() / scale);
        }
    }
    if worst == 0.0 {
        return Err(Error::InvalidField("validation family has no distinct pairs".into()));
    }
    Ok(2.0 * worst)
}

/// Largest `|E(s) - E(s₀)|` along the evolution of the exact profile
/// `profile` over `[s0, s0 + span]` on `grid`; the profile is stationary or
/// explicit, so any drift is discretisation error. Floored at a few ulps of
/// `E(s₀)`.
pub fn energy_scheme_error(
    grid: &Arc<YGrid>,
    profile: &ProfileParams,
    s0: f64,
    span: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let frame = SelfSimFrame::from_profile(grid.clone(), s0, profile)?;
    let (ev, trace) = evolve_monitored(&frame, s0 + span, cfg, f64::INFINITY)?;
    if ev.diverged() {
        return Err(Error::InvalidField("reference profile diverged".into()));
    }
    let e0 = trace.samples[0].1;
    let drift = trace.samples.iter().map(|(_, e)| (e - e0).abs()).fold(0.0, f64::max);
    Ok(drift.max(64.0 * f64::EPSILON * e0.abs().max(1.0)))
}

/// Evolves while recording `E` at every output frame; an increase above
/// `tol` aborts with [`Error::EnergyIncrease`].
pub fn evolve_monitored(frame: &SelfSimFrame, s_end: f64, cfg: &SolverConfig, tol: f64) -> Result<(Evolution, EnergyTrace)> {
    let mut trace = EnergyTrace::new(*frame.params());
    let ev = evolve_observed(frame, s_end, cfg, |f| {
        let e = lyapunov(f);
        if let Some(&(_, prev)) = trace.samples.last() {
            if e - prev > tol {
                return Err(Error::EnergyIncrease { s: f.s(), increase: e - prev, tol });
            }
        }
        trace.push(f.s(), e)
    })?;
    Ok((ev, trace))
}
