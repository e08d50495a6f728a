//! The self-similar equation on the enlarged interval `|y| < A`, `A > 1`.
//!
//! Outside the unit ball the weight `ρ` is undefined, so the equation is
//! taken in non-divergence form. Its principal part factors as
//! `(∂_s + (y+1)∂_y)(∂_s + (y-1)∂_y)`, which gives the transport system
//!
//! `∂_s w = z - (y-1) ∂_y w`,
//! `∂_s z = -(y+1) ∂_y z + ((y+1) - 2(p+1)/(p-1) y + (p+3)/(p-1) (y-1)) ∂_y w`
//! `        + (N-1)/y ∂_y w - (p+3)/(p-1) z - 2(p+1)/(p-1)² w + |w|^{p-1} w`,
//!
//! discretised with second-order upwind differences on a uniform node grid.
//! Both speeds point outwards at `|y| = A`, so the ends need no data. Radial
//! problems are solved as even functions on `[-A, A]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::ModelParams;

/// Uniform nodes on `[-A, A]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGrid {
    params: ModelParams,
    radius: f64,
    nodes: Vec<f64>,
    h: f64,
}

impl ExtendedGrid {
    /// `intervals` must be even so that `y = 0` is a node.
    pub fn new(params: &ModelParams, radius: f64, intervals: usize) -> Result<Self> {
        if !(radius > 1.0) {
            return Err(Error::InvalidConfig(format!("extended radius {radius} must exceed 1")));
        }
        if intervals < 16 || intervals % 2 != 0 {
            return Err(Error::InvalidConfig("extended grid needs an even number (>= 16) of intervals".into()));
        }
        let h = 2.0 * radius / intervals as f64;
        if radius - 1.0 < 3.0 * h {
            return Err(Error::InvalidConfig("extended grid too coarse for its radius".into()));
        }
        let nodes = (0..=intervals).map(|j| -radius + j as f64 * h).collect();
        Ok(Self { params: *params, radius, nodes, h })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Second-order centred derivative, one-sided at the ends.
    fn centred(&self, f: &[f64], j: usize) -> f64 {
        let n = f.len();
        if j == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * self.h)
        } else if j == n - 1 {
            (3.0 * f[j] - 4.0 * f[j - 1] + f[j - 2]) / (2.0 * self.h)
        } else {
            (f[j + 1] - f[j - 1]) / (2.0 * self.h)
        }
    }

    /// Second-order upwind derivative for transport at speed `c`.
    fn upwind(&self, f: &[f64], j: usize, c: f64) -> f64 {
        let n = f.len();
        if c > 0.0 && j >= 2 {
            (3.0 * f[j] - 4.0 * f[j - 1] + f[j - 2]) / (2.0 * self.h)
        } else if c < 0.0 && j + 2 < n {
            (-3.0 * f[j] + 4.0 * f[j + 1] - f[j + 2]) / (2.0 * self.h)
        } else {
            self.centred(f, j)
        }
    }

    /// Right-hand side of the transport system. At the radial origin
    /// `∂_y w / y` is replaced by its limit `∂²_y w(0)`.
    fn rhs(&self, w: &[f64], z: &[f64], dw: &mut [f64], dz: &mut [f64]) {
        let p = &self.params;
        let curv = if p.is_radial() { p.n() as f64 - 1.0 } else { 0.0 };
        let (drift, damping, mass) = (p.drift(), p.damping(), p.mass());
        let h2 = self.h * self.h;
        for (j, &y) in self.nodes.iter().enumerate() {
            let wy = self.centred(w, j);
            dw[j] = z[j] - (y - 1.0) * self.upwind(w, j, y - 1.0);
            let radial_term = if curv == 0.0 {
                0.0
            } else if y.abs() < 0.5 * self.h {
                curv * (w[j + 1] - 2.0 * w[j] + w[j - 1]) / h2
            } else {
                curv * wy / y
            };
            dz[j] = -(y + 1.0) * self.upwind(z, j, y + 1.0)
                + ((y + 1.0) - drift * y + damping * (y - 1.0)) * wy
                + radial_term
                - damping * z[j]
                - mass * w[j]
                + p.nonlinearity(w[j]);
        }
    }
}

/// `(s, sup_{|y|<1} |w - reference|)` samples and how the run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedRun {
    pub deviation: Vec<(f64, f64)>,
    pub diverged_at: Option<f64>,
    pub w_final: Vec<f64>,
}

impl ExtendedRun {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().fold(0.0, |m, (_, d)| m.max(*d))
    }
}

/// RK4 evolution of `(w, ∂_s w)` on `grid` over `[0, span]` with step
/// `cfl · h / (A + 1)`, recording the deviation from `reference` on the unit
/// ball every `output_interval`. Stops early once `max |w| > u_max`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_extended(
    grid: &ExtendedGrid,
    w0: Vec<f64>,
    ws0: Vec<f64>,
    reference: &[f64],
    span: f64,
    cfl: f64,
    output_interval: f64,
    u_max: f64,
) -> Result<ExtendedRun> {
    let n = grid.nodes.len();
    if w0.len() != n || ws0.len() != n || reference.len() != n {
        return Err(Error::InvalidField("extended data do not match the grid".into()));
    }
    if w0.iter().chain(&ws0).any(|v| !v.is_finite()) {
        return Err(Error::InvalidField("non-finite extended data".into()));
    }
    if !(span > 0.0 && cfl > 0.0 && output_interval > 0.0) {
        return Err(Error::InvalidConfig("span, cfl and output interval must be positive".into()));
    }
    let inner: Vec<usize> = (0..n).filter(|&j| grid.nodes[j].abs() < 1.0).collect();
    let deviation = |w: &[f64]| inner.iter().map(|&j| (w[j] - reference[j]).abs()).fold(0.0, f64::max);
    let dt_max = cfl * grid.h / (grid.radius + 1.0);
    let mut w = w0;
    let mut z: Vec<f64> = (0..n).map(|j| ws0[j] + (grid.nodes[j] - 1.0) * grid.upwind(&w, j, grid.nodes[j] - 1.0)).collect();
    let mut k: [Vec<f64>; 8] = std::array::from_fn(|_| vec![0.0; n]);
    let (mut tw, mut tz) = (vec![0.0; n], vec![0.0; n]);
    let mut run = ExtendedRun { deviation: vec![(0.0, deviation(&w))], diverged_at: None, w_final: Vec::new() };
    let mut s = 0.0;
    let mut outputs = 1usize;
    while s < span {
        let next = (outputs as f64 * output_interval).min(span);
        while s < next {
            let dt = dt_max.min(next - s);
            let [k1w, k1z, k2w, k2z, k3w, k3z, k4w, k4z] = &mut k;
            grid.rhs(&w, &z, k1w, k1z);
            for j in 0..n {
                tw[j] = w[j] + 0.5 * dt * k1w[j];
                tz[j] = z[j] + 0.5 * dt * k1z[j];
            }
            grid.rhs(&tw, &tz, k2w, k2z);
            for j in 0..n {
                tw[j] = w[j] + 0.5 * dt * k2w[j];
                tz[j] = z[j] + 0.5 * dt * k2z[j];
            }
            grid.rhs(&tw, &tz, k3w, k3z);
            for j in 0..n {
                tw[j] = w[j] + dt * k3w[j];
                tz[j] = z[j] + dt * k3z[j];
            }
            grid.rhs(&tw, &tz, k4w, k4z);
            for j in 0..n {
                w[j] += dt / 6.0 * (k1w[j] + 2.0 * k2w[j] + 2.0 * k3w[j] + k4w[j]);
                z[j] += dt / 6.0 * (k1z[j] + 2.0 * k2z[j] + 2.0 * k3z[j] + k4z[j]);
            }
            s = if next - s <= dt { next } else { s + dt };
            let sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !(sup <= u_max) {
                run.diverged_at = Some(s);
                run.w_final = w;
                return Ok(run);
            }
        }
        run.deviation.push((s, deviation(&w)));
        outputs += 1;
    }
    run.w_final = w;
    Ok(run)
}
