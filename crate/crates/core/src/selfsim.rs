//! Direct evolution of the self-similar equation
//!
//! `∂²_s w - 𝓛w + 2(p+1)/(p-1)² w - |w|^{p-1} w = -(p+3)/(p-1) ∂_s w - 2 y·∇∂_s w`
//!
//! on the unit ball, with `𝓛w = ρ^{-1} div(ρ ∇w - ρ (y·∇w) y)`.
//!
//! `𝓛` is discretised in flux form: the flux `ρ (1 - |y|²) ∂_r w` is taken
//! at interior cell faces and its divergence is divided by the cell's
//! weighted measure. The flux through `|y| = 1` is zero because the face
//! coefficient vanishes there, so the stencil never reaches outside the
//! ball. Time integration is classical RK4 on the first-order system.

use std::sync::Arc;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::simvars::{h_norm, lagrange_derivative, Geometry, SelfSimFrame, YGrid};

/// `𝓛w` on the frame's grid.
pub fn apply_l(frame: &SelfSimFrame) -> Vec<f64> {
    let mut out = vec![0.0; frame.grid().cells()];
    apply_l_into(frame.grid(), frame.w(), &mut out);
    out
}

fn apply_l_into(grid: &YGrid, w: &[f64], out: &mut [f64]) {
    let coef = grid.face_coefs();
    let weight = grid.cell_weights();
    let n = w.len();
    let mut flux_left = 0.0;
    for i in 0..n {
        let flux_right = if i + 1 < n { coef[i] * grid.face_slope(w, i) } else { 0.0 };
        out[i] = (flux_right - flux_left) / weight[i];
        flux_left = flux_right;
    }
}

/// Precomputed stencils of the right-hand side on one grid.
pub(crate) struct Operator {
    /// Interior cell `i` uses entry `i - 2` of each column: five weights on
    /// `w_{i-2..=i+2}` followed by five on `v_{i-2..=i+2}`. They act on
    /// differences from the cell value, so the centre entries are unused and
    /// constants are annihilated exactly.
    cols: [Vec<f64>; 10],
    /// Cells within two of either end, with their own stencils.
    ends: Vec<EndCell>,
    params: crate::profiles::ModelParams,
}

/// Explicit stencil of an end cell, `(index, weight)` pairs acting on
/// differences from the cell value.
struct EndCell {
    cell: usize,
    w: Vec<(usize, f64)>,
    v: Vec<(usize, f64)>,
}

impl EndCell {
    fn eval(&self, params: &crate::profiles::ModelParams, w: &[f64], v: &[f64]) -> f64 {
        let (wc, vc) = (w[self.cell], v[self.cell]);
        let lin: f64 = self.w.iter().map(|(j, k)| k * (w[*j] - wc)).sum::<f64>()
            + self.v.iter().map(|(j, k)| k * (v[*j] - vc)).sum::<f64>();
        lin - params.mass() * wc - params.damping() * vc + params.nonlinearity(wc)
    }
}

impl Operator {
    pub(crate) fn new(grid: &YGrid) -> Self {
        let n = grid.cells();
        let params = *grid.params();
        let (coef, weight) = (grid.face_coefs(), grid.cell_weights());
        let y = grid.points();
        let mut w_st: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut v_st: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut ws = Vec::new();
            // Flux out through the right face, in through the left face.
            for (face, sign) in [(i, 1.0), (i.wrapping_sub(1), -1.0)] {
                if face < n - 1 {
                    let (j, c) = grid.face_derivs()[face];
                    for (k, c) in c.iter().enumerate() {
                        ws.push((j + k, sign * coef[face] * c / weight[i]));
                    }
                }
            }
            let (j, cg) = gradient_stencil(grid, i);
            let mut vs = Vec::new();
            for (k, cg) in cg.iter().enumerate() {
                vs.push((j + k, -2.0 * y[i] * cg));
            }
            w_st.push(ws);
            v_st.push(vs);
        }
        let dense = |st: &[(usize, f64)], i: usize| {
            let mut c = [0.0; 5];
            for (j, k) in st {
                debug_assert!(j + 2 >= i && *j <= i + 2);
                c[j + 2 - i] += k;
            }
            c
        };
        let mut cols: [Vec<f64>; 10] = std::array::from_fn(|_| Vec::with_capacity(n.saturating_sub(4)));
        let mut ends = Vec::new();
        for i in 0..n {
            if i < 2 || i + 2 >= n {
                let off = |st: &[(usize, f64)]| st.iter().copied().filter(|(j, _)| *j != i).collect();
                ends.push(EndCell { cell: i, w: off(&w_st[i]), v: off(&v_st[i]) });
                continue;
            }
            let (a, b) = (dense(&w_st[i], i), dense(&v_st[i], i));
            for k in 0..5 {
                cols[k].push(a[k]);
                cols[k + 5].push(b[k]);
            }
        }
        Self { cols, ends, params }
    }

    fn eval(&self, w: &[f64], v: &[f64], dw: &mut [f64], dv: &mut [f64]) {
        let p = self.params.p();
        match p {
            2.0 => self.interior(w, v, dv, |x| x * x.abs()),
            3.0 => self.interior(w, v, dv, |x| x * x * x),
            5.0 => self.interior(w, v, dv, |x| {
                let x2 = x * x;
                x2 * x2 * x
            }),
            _ => self.interior(w, v, dv, |x| self.params.nonlinearity(x)),
        }
        for end in &self.ends {
            dv[end.cell] = end.eval(&self.params, w, v);
        }
        dw.copy_from_slice(v);
    }

    #[inline(always)]
    fn interior<F: Fn(f64) -> f64>(&self, w: &[f64], v: &[f64], dv: &mut [f64], nl: F) {
        let m = w.len() - 4;
        let ws: [&[f64]; 5] = std::array::from_fn(|k| &w[k..k + m]);
        let vs: [&[f64]; 5] = std::array::from_fn(|k| &v[k..k + m]);
        let c: [&[f64]; 10] = std::array::from_fn(|k| &self.cols[k][..m]);
        let out = &mut dv[2..2 + m];
        let (mass, damping) = (self.params.mass(), self.params.damping());
        for i in 0..m {
            let (wc, vc) = (ws[2][i], vs[2][i]);
            let wl = (c[0][i] * (ws[0][i] - wc) + c[1][i] * (ws[1][i] - wc)) + (c[3][i] * (ws[3][i] - wc) + c[4][i] * (ws[4][i] - wc));
            let vl = (c[5][i] * (vs[0][i] - vc) + c[6][i] * (vs[1][i] - vc)) + (c[8][i] * (vs[3][i] - vc) + c[9][i] * (vs[4][i] - vc));
            let mid = (nl(wc) - mass * wc) - damping * vc;
            out[i] = (wl + vl) + mid;
        }
    }
}

/// Start index and weights of the three-point derivative at cell `i`.
fn gradient_stencil(grid: &YGrid, i: usize) -> (usize, [f64; 3]) {
    let y = grid.points();
    let n = y.len();
    if i == 0 {
        if let Geometry::Radial { .. } = grid.geometry() {
            let d = lagrange_derivative([-y[0], y[0], y[1]], y[0]);
            return (0, [d[0] + d[1], d[2], 0.0]);
        }
    }
    let j = i.saturating_sub(1).min(n - 3);
    (j, lagrange_derivative([y[j], y[j + 1], y[j + 2]], y[i]))
}

/// Classical RK4 stepper with preallocated stages.
pub(crate) struct Rk4 {
    op: Operator,
    k: [Vec<f64>; 8],
    tmp_w: Vec<f64>,
    tmp_v: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(grid: &YGrid) -> Self {
        let n = grid.cells();
        Self {
            op: Operator::new(grid),
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp_w: vec![0.0; n],
            tmp_v: vec![0.0; n],
        }
    }

    pub(crate) fn step(&mut self, w: &mut [f64], v: &mut [f64], dt: f64) {
        let n = w.len();
        let [k1w, k1v, k2w, k2v, k3w, k3v, k4w, k4v] = &mut self.k;
        self.op.eval(w, v, k1w, k1v);
        for i in 0..n {
            self.tmp_w[i] = w[i] + 0.5 * dt * k1w[i];
            self.tmp_v[i] = v[i] + 0.5 * dt * k1v[i];
        }
        self.op.eval(&self.tmp_w, &self.tmp_v, k2w, k2v);
        for i in 0..n {
            self.tmp_w[i] = w[i] + 0.5 * dt * k2w[i];
            self.tmp_v[i] = v[i] + 0.5 * dt * k2v[i];
        }
        self.op.eval(&self.tmp_w, &self.tmp_v, k3w, k3v);
        for i in 0..n {
            self.tmp_w[i] = w[i] + dt * k3w[i];
            self.tmp_v[i] = v[i] + dt * k3v[i];
        }
        self.op.eval(&self.tmp_w, &self.tmp_v, k4w, k4v);
        for i in 0..n {
            w[i] += dt / 6.0 * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i]);
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
}

/// How an evolution ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolveOutcome {
    Completed,
    /// `max |w|` or the 𝓗 norm exceeded `u_max`.
    Diverged { s: f64, sup_w: f64 },
}

/// Output frames (the initial frame first) and the outcome.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub frames: Vec<SelfSimFrame>,
    pub outcome: EvolveOutcome,
}

impl Evolution {
    pub fn last(&self) -> &SelfSimFrame {
        self.frames.last().expect("evolution holds the initial frame")
    }

    pub fn diverged(&self) -> bool {
        matches!(self.outcome, EvolveOutcome::Diverged { .. })
    }
}

/// Base time step `cfl · min_f gap_f / (1 + |y_f|)`.
pub fn base_step(grid: &YGrid, cfl: f64) -> f64 {
    let bound = grid
        .face_gaps()
        .iter()
        .zip(grid.faces())
        .fold(f64::INFINITY, |m, (g, y)| m.min(g / (1.0 + y.abs())));
    cfl * bound
}

/// Evolves `frame` to `s_end`, returning frames every `cfg.output_interval`.
pub fn evolve(frame: &SelfSimFrame, s_end: f64, cfg: &SolverConfig) -> Result<Evolution> {
    evolve_observed(frame, s_end, cfg, |_| Ok(()))
}

/// As [`evolve`], calling `observer` on every output frame; an observer
/// error aborts the run.
pub fn evolve_observed<F>(frame: &SelfSimFrame, s_end: f64, cfg: &SolverConfig, mut observer: F) -> Result<Evolution>
where
    F: FnMut(&SelfSimFrame) -> Result<()>,
{
    cfg.validate()?;
    if !(s_end > frame.s()) {
        return Err(Error::InvalidConfig(format!("s_end = {s_end} must exceed s = {}", frame.s())));
    }
    let grid: Arc<YGrid> = frame.grid().clone();
    let params = *grid.params();
    let dt_base = base_step(&grid, cfg.cfl);
    let mut stepper = Rk4::new(&grid);
    let (mut w, mut v, mut s) = frame.clone().into_parts();
    let mut frames = vec![frame.clone()];
    observer(frame)?;
    let s0 = frame.s();
    let mut outputs = 1usize;
    let mut next_out = (s0 + cfg.output_interval).min(s_end);
    loop {
        let sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(sup <= cfg.u_max) {
            return Ok(Evolution { frames, outcome: EvolveOutcome::Diverged { s, sup_w: sup } });
        }
        // Resolve the nonlinear time scale |w|^{-(p-1)/2} near blow-up.
        let stiff = cfg.blowup_step_fraction * 25.0 / (params.p() * sup.powf(params.p() - 1.0)).sqrt().max(1.0);
        let dt_max = dt_base.min(stiff);
        if dt_max < cfg.dt_min {
            return Err(Error::DtUnderflow { dt: dt_max, dt_min: cfg.dt_min, t: s });
        }
        let remaining = next_out - s;
        let hits = remaining <= dt_max * (1.0 + 1e-9);
        let dt = if hits { remaining } else { dt_max };
        stepper.step(&mut w, &mut v, dt);
        s = if hits { next_out } else { s + dt };
        if w.iter().chain(&v).any(|x| !x.is_finite()) {
            return Ok(Evolution { frames, outcome: EvolveOutcome::Diverged { s, sup_w: f64::INFINITY } });
        }
        if hits {
            let out = SelfSimFrame::new(grid.clone(), w.clone(), v.clone(), s)?;
            let norm = h_norm(&out);
            if !(norm <= cfg.u_max) {
                let sup_w = out.sup_w();
                frames.push(out);
                return Ok(Evolution { frames, outcome: EvolveOutcome::Diverged { s, sup_w } });
            }
            observer(&out)?;
            frames.push(out);
            if s >= s_end {
                return Ok(Evolution { frames, outcome: EvolveOutcome::Completed });
            }
            outputs += 1;
            next_out = (s0 + outputs as f64 * cfg.output_interval).min(s_end);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{kappa_star_scalar, ModelParams, ProfileParams, Sign};

    fn m13() -> ModelParams {
        ModelParams::new(1, 3.0).unwrap()
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = YGrid::unit_ball(&m13(), 64).unwrap();
        let f = SelfSimFrame::from_fn(g, 0.0, |_| (2.5, 0.0)).unwrap();
        assert!(apply_l(&f).iter().all(|v| v.abs() < 1e-12));
    }

    /// `𝓛 κ(d) = 2(p+1)/(p-1)² κ - κ^p` pointwise.
    fn soliton_residual(cells: usize) -> f64 {
        let m = m13();
        let g = YGrid::unit_ball(&m, cells).unwrap();
        let prof = ProfileParams::soliton(Sign::Plus, vec![0.3]).unwrap();
        let f = SelfSimFrame::from_profile(g.clone(), 0.0, &prof).unwrap();
        let lw = apply_l(&f);
        // Interior points away from the boundary cells.
        g.points()
            .iter()
            .zip(&lw)
            .zip(f.w())
            .filter(|((y, _), _)| y.abs() < 0.9)
            .map(|((_, l), k)| (l - (m.mass() * k - m.nonlinearity(*k))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn soliton_satisfies_stationary_equation() {
        let (r1, r2) = (soliton_residual(100), soliton_residual(200));
        assert!(r2 < 1e-3, "{r2}");
        assert!((r1 / r2).log2() > 1.9, "{r1} {r2}");
    }

    /// Symbolic value for `w = y`, N = 1, p = 3: `𝓛w = -4y`.
    #[test]
    fn linear_function_matches_symbolic() {
        let m = m13();
        let g = YGrid::unit_ball(&m, 400).unwrap();
        let f = SelfSimFrame::from_fn(g.clone(), 0.0, |y| (y, 0.0)).unwrap();
        let lw = apply_l(&f);
        let n = g.cells();
        for k in 0..10 {
            let i = 20 + k * (n - 40) / 9;
            let y = g.points()[i];
            assert!((lw[i] + 4.0 * y).abs() < 1e-3, "y = {y}: {}", lw[i]);
        }
    }

    #[test]
    fn radial_operator_on_quadratic() {
        // N = 3, p = 2 (α = 1): 𝓛 r² = (1 - r²) 2 + (2/r) 2r - 6 r · 2r = 6 - 14 r².
        let m = ModelParams::new(3, 2.0).unwrap();
        let g = YGrid::unit_ball(&m, 200).unwrap();
        let f = SelfSimFrame::from_fn(g.clone(), 0.0, |r| (r * r, 0.0)).unwrap();
        let lw = apply_l(&f);
        for (i, &r) in g.points().iter().enumerate().filter(|(_, r)| **r < 0.95) {
            assert!((lw[i] - (6.0 - 14.0 * r * r)).abs() < 1e-3, "r = {r}: {}", lw[i]);
        }
    }

    /// Largest pointwise truncation of the full right-hand side on exact
    /// `κ*` data, against `∂_s v = ν ∂_ν κ₂*` by central differences.
    fn max_truncation(cells: usize) -> f64 {
        let m = m13();
        let (d, nu) = (0.6, 0.3);
        let g = YGrid::unit_ball(&m, cells).unwrap();
        let y = g.points();
        let w: Vec<f64> = y.iter().map(|&y| kappa_star_scalar(&m, d, nu, y).0).collect();
        let v: Vec<f64> = y.iter().map(|&y| kappa_star_scalar(&m, d, nu, y).1).collect();
        let (mut dw, mut dv) = (vec![0.0; cells], vec![0.0; cells]);
        Operator::new(&g).eval(&w, &v, &mut dw, &mut dv);
        let del: f64 = 1e-4;
        y.iter()
            .zip(&dv)
            .map(|(&y, dv)| {
                let hi = kappa_star_scalar(&m, d, nu * del.exp(), y).1;
                let lo = kappa_star_scalar(&m, d, nu * (-del).exp(), y).1;
                (dv - (hi - lo) / (2.0 * del)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn truncation_is_second_order_up_to_the_sphere() {
        let (t1, t2) = (max_truncation(400), max_truncation(800));
        assert!((t1 / t2).log2() > 1.9, "{t1} {t2}");
    }

    #[test]
    fn zero_stays_zero() {
        let g = YGrid::unit_ball(&m13(), 50).unwrap();
        let ev = evolve(&SelfSimFrame::zeros(g, 0.0), 1.0, &SolverConfig::selfsim()).unwrap();
        assert!(ev.last().w().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_times_are_exact() {
        let g = YGrid::unit_ball(&m13(), 40).unwrap();
        let f = SelfSimFrame::from_fn(g, 0.5, |_| (m13().kappa0(), 0.0)).unwrap();
        let mut cfg = SolverConfig::selfsim();
        cfg.output_interval = 0.25;
        let ev = evolve(&f, 1.5, &cfg).unwrap();
        let times: Vec<f64> = ev.frames.iter().map(|f| f.s()).collect();
        assert_eq!(times.len(), 5);
        for (k, s) in times.iter().enumerate() {
            assert!((s - (0.5 + 0.25 * k as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn supercritical_constant_diverges() {
        let m = m13();
        let g = YGrid::unit_ball(&m, 40).unwrap();
        let f = SelfSimFrame::from_fn(g, 0.0, |_| (1.5 * m.kappa0(), 0.0)).unwrap();
        let ev = evolve(&f, 50.0, &SolverConfig::selfsim()).unwrap();
        match ev.outcome {
            EvolveOutcome::Diverged { s, .. } => assert!(s < 50.0),
            EvolveOutcome::Completed => panic!("expected divergence"),
        }
    }

    #[test]
    fn kappa_star_is_tracked() {
        let m = m13();
        let g = YGrid::unit_ball(&m, 200).unwrap();
        let (d, mu) = (0.3, 0.1);
        let f = SelfSimFrame::from_fn(g.clone(), 0.0, |y| kappa_star_scalar(&m, d, mu, y)).unwrap();
        let ev = evolve(&f, 1.0, &SolverConfig::selfsim()).unwrap();
        let last = ev.last();
        let exact = SelfSimFrame::from_fn(g, 1.0, |y| kappa_star_scalar(&m, d, mu * 1f64.exp(), y)).unwrap();
        assert!(last.sup_distance(&exact) < 1e-3);
    }
}
