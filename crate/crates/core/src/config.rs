use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Sign;

/// Closed-form Lorentz soliton `e κ₀ (1-d²)^{1/(p-1)} / (T* - t + d (x - x*))^{2/(p-1)}`
/// used as initial data and as pinned boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzData {
    pub e: Sign,
    pub d: f64,
    pub x_star: f64,
    pub t_star: f64,
}

/// Outer boundary treatment of the physical solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Boundary {
    /// Damping layer of the given width in front of a reflecting end.
    Sponge { width: f64, strength: f64 },
    /// Boundary nodes pinned to a known closed-form solution.
    Exact(LorentzData),
}

/// Discretisation and stopping parameters shared by both solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Courant number, `dt <= cfl · h`.
    pub cfl: f64,
    /// Divergence threshold on `max |u|` (physical) or `max |w|` (self-similar).
    pub u_max: f64,
    pub dt_min: f64,
    /// Number of halvings used by convergence studies.
    pub refine_levels: usize,
    /// Half-width of the physical interval (1D) or ball radius (radial).
    pub domain: f64,
    /// Physical cells (1D: across the interval, radial: across the radius).
    pub cells: usize,
    pub boundary: Boundary,
    /// Final physical time; probes not diverged by then are reported missing.
    pub t_end: f64,
    /// Near blow-up, `dt <= fraction · (max|u| / κ₀)^{-(p-1)/2}`.
    pub blowup_step_fraction: f64,
    /// Probe histories stop once the ODE time-to-blow-up estimate
    /// `(|u| / κ₀)^{-(p-1)/2}` drops below `h / resolve_ratio`.
    pub resolve_ratio: f64,
    /// Nodes are frozen once the ODE time-to-blow-up estimate drops below
    /// `mask_cells · h`; 0 disables masking.
    pub mask_cells: f64,
    /// Probe snapshots are captured when the ODE time-to-blow-up estimate
    /// drops below this many cells.
    pub snapshot_cells: f64,
    /// Record a trace row every this many steps.
    pub trace_every: usize,
    /// Spacing in `s` of frames returned by the self-similar solver.
    pub output_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            u_max: 1e6,
            dt_min: 1e-14,
            refine_levels: 2,
            domain: 3.0,
            cells: 1200,
            boundary: Boundary::Sponge { width: 0.5, strength: 20.0 },
            t_end: 5.0,
            blowup_step_fraction: 0.02,
            resolve_ratio: 0.1,
            mask_cells: 1.0,
            snapshot_cells: 16.0,
            trace_every: 10,
            output_interval: 0.1,
        }
    }
}

impl SolverConfig {
    /// Defaults for the self-similar solver (`cfl = 0.4`).
    pub fn selfsim() -> Self {
        Self { cfl: 0.4, u_max: 1e4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.u_max > 0.0) {
            return bad("u_max must be positive");
        }
        if !(self.dt_min > 0.0) {
            return bad("dt_min must be positive");
        }
        if !(self.domain > 0.0) {
            return bad("domain must be positive");
        }
        if self.cells < 8 {
            return bad("need at least 8 cells");
        }
        if !(self.blowup_step_fraction > 0.0 && self.blowup_step_fraction < 1.0) {
            return bad("blowup_step_fraction must lie in (0, 1)");
        }
        if !(self.resolve_ratio > 0.0) {
            return bad("resolve_ratio must be positive");
        }
        if !(self.mask_cells >= 0.0) {
            return bad("mask_cells must be non-negative");
        }
        if !(self.snapshot_cells > 0.0) {
            return bad("snapshot_cells must be positive");
        }
        if !(self.output_interval > 0.0) {
            return bad("output_interval must be positive");
        }
        if self.trace_every == 0 {
            return bad("trace_every must be at least 1");
        }
        if let Boundary::Sponge { width, strength } = self.boundary {
            if !(width >= 0.0 && strength >= 0.0) {
                return bad("sponge width and strength must be non-negative");
            }
        }
        if let Boundary::Exact(l) = self.boundary {
            if !(l.d.abs() < 1.0) {
                return bad("boundary soliton needs |d| < 1");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SolverConfig::default().validate().unwrap();
        SolverConfig::selfsim().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = SolverConfig::default();
        c.cfl = 1.5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.u_max = 0.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.dt_min = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let ok: SolverConfig = toml::from_str("cfl = 0.3\nboundary = { sponge = { width = 1.0, strength = 5.0 } }").unwrap();
        assert_eq!(ok.cfl, 0.3);
        assert!(toml::from_str::<SolverConfig>("cfll = 0.3").is_err());
    }
}
