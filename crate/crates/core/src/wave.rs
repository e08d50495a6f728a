//! Physical-variable solver for `∂²u/∂t² = Δu + |u|^{p-1} u` on a line or a
//! ball (radial), with pointwise blow-up detection and blow-up time fits.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{Boundary, LorentzData, SolverConfig};
use crate::error::{Error, Result};
use crate::profiles::{lorentz_pair_scalar, ModelParams};
use crate::simvars::{fmt17, FieldSnapshot};

/// Uniform nodes for `params`: `[-domain, domain]` on the line, `[0, domain]`
/// in radius otherwise; `cells + 1` nodes either way.
pub fn physical_grid(params: &ModelParams, domain: f64, cells: usize) -> Result<Arc<Vec<f64>>> {
    if !(domain > 0.0) || cells < 4 {
        return Err(Error::InvalidConfig(format!("bad physical grid: domain {domain}, {cells} cells")));
    }
    let (lo, len) = if params.is_radial() { (0.0, domain) } else { (-domain, 2.0 * domain) };
    let h = len / cells as f64;
    let mut x: Vec<f64> = (0..=cells).map(|i| lo + i as f64 * h).collect();
    x[cells] = lo + len;
    Ok(Arc::new(x))
}

/// `(u, ∂_t u)` of a boundary soliton at `(x, t)`, or `None` past its
/// blow-up surface.
fn lorentz_value(params: &ModelParams, l: &LorentzData, x: f64, t: f64) -> Option<(f64, f64)> {
    if l.t_star - t + l.d * (x - l.x_star) > 0.0 {
        let (u, ut, _) = lorentz_pair_scalar(params, l.e, l.d, l.x_star, l.t_star, x, t);
        Some((u, ut))
    } else {
        None
    }
}

/// Samples the Lorentz soliton on `grid` at time `t`.
pub fn lorentz_snapshot(params: &ModelParams, l: &LorentzData, grid: Arc<Vec<f64>>, t: f64) -> Result<FieldSnapshot> {
    if params.is_radial() && l.d != 0.0 {
        return Err(Error::InvalidProfile("radial soliton data need d = 0".into()));
    }
    let mut u = Vec::with_capacity(grid.len());
    let mut ut = Vec::with_capacity(grid.len());
    for &x in grid.iter() {
        let (a, b) = lorentz_value(params, l, x, t)
            .ok_or_else(|| Error::OutOfDomain(format!("soliton already blew up at x = {x}, t = {t}")))?;
        u.push(a);
        ut.push(b);
    }
    FieldSnapshot::new(*params, grid, u, ut, t)
}

#[derive(Debug, Clone, Copy)]
struct Stencil {
    left: usize,
    right: usize,
    cl: f64,
    c0: f64,
    cr: f64,
}

/// Outcome of a single [`step`].
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Advanced(FieldSnapshot),
    /// Some node exceeded `u_max` (or its masking threshold) during the step.
    Diverged { snapshot: FieldSnapshot, max_abs_u: f64 },
}

/// One leapfrog step of the first-order system from `state`.
pub fn step(state: &FieldSnapshot, cfg: &SolverConfig) -> Result<StepResult> {
    let mut st = Stepper::new(state, cfg)?;
    st.advance()?;
    let max_abs_u = st.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let snapshot = st.snapshot();
    if st.masked_count() > 0 {
        Ok(StepResult::Diverged { snapshot, max_abs_u })
    } else {
        Ok(StepResult::Advanced(snapshot))
    }
}

/// Velocity-Verlet integrator with adaptive step and node masking.
///
/// A node is frozen (masked) once `|u| > u_max` or its ODE time-to-blow-up
/// `(|u|/κ₀)^{-(p-1)/2}` falls below `mask_cells · h`; the rest of the
/// domain keeps evolving.
pub struct Stepper {
    params: ModelParams,
    cfg: SolverConfig,
    x: Arc<Vec<f64>>,
    h: f64,
    u: Vec<f64>,
    ut: Vec<f64>,
    acc: Vec<f64>,
    half: Vec<f64>,
    t: f64,
    masked: Vec<bool>,
    active: usize,
    damping: Vec<f64>,
    stencil: Vec<Stencil>,
    pinned: Vec<usize>,
    lorentz: Option<LorentzData>,
    u_mask: f64,
    steps: usize,
}

impl Stepper {
    pub fn new(state: &FieldSnapshot, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let params = *state.params();
        let x = state.grid().clone();
        let n = x.len();
        let h = (x[n - 1] - x[0]) / (n - 1) as f64;
        if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::InvalidField("physical solver needs a uniform grid".into()));
        }
        let radial = params.is_radial();
        if radial && x[0] != 0.0 {
            return Err(Error::InvalidField("radial grid must start at r = 0".into()));
        }
        let ih2 = 1.0 / (h * h);
        let dim = params.n() as f64;
        let stencil = (0..n)
            .map(|i| {
                if i == 0 {
                    if radial {
                        Stencil { left: 1, right: 1, cl: dim * ih2, c0: -2.0 * dim * ih2, cr: dim * ih2 }
                    } else {
                        Stencil { left: 1, right: 1, cl: ih2, c0: -2.0 * ih2, cr: ih2 }
                    }
                } else {
                    let right = if i == n - 1 { n - 2 } else { i + 1 };
                    let drift = if radial && i < n - 1 { (dim - 1.0) / (2.0 * h * x[i]) } else { 0.0 };
                    Stencil { left: i - 1, right, cl: ih2 - drift, c0: -2.0 * ih2, cr: ih2 + drift }
                }
            })
            .collect();
        let (damping, pinned, lorentz) = match cfg.boundary {
            Boundary::Sponge { width, strength } => {
                let (lo, hi) = (x[0], x[n - 1]);
                let damping = x
                    .iter()
                    .map(|&xi| {
                        let depth = if radial { hi - xi } else { (xi - lo).min(hi - xi) };
                        if width > 0.0 && depth < width {
                            strength * (1.0 - depth / width).powi(2)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (damping, Vec::new(), None)
            }
            Boundary::Exact(l) => {
                if radial && l.d != 0.0 {
                    return Err(Error::InvalidConfig("radial boundary soliton needs d = 0".into()));
                }
                let pinned = if radial { vec![n - 1] } else { vec![0, n - 1] };
                (vec![0.0; n], pinned, Some(l))
            }
        };
        let a = params.scaling();
        let u_mask = if cfg.mask_cells > 0.0 {
            cfg.u_max.min(params.kappa0() * (cfg.mask_cells * h).powf(-a))
        } else {
            cfg.u_max
        };
        let mut st = Self {
            params,
            cfg: cfg.clone(),
            x,
            h,
            u: state.u().to_vec(),
            ut: state.ut().to_vec(),
            acc: vec![0.0; n],
            half: vec![0.0; n],
            t: state.t(),
            masked: vec![false; n],
            active: n,
            damping,
            stencil,
            pinned,
            lorentz,
            u_mask,
            steps: 0,
        };
        st.pin();
        st.update_mask();
        let mut acc = std::mem::take(&mut st.acc);
        st.accel(&st.u, &st.ut, &mut acc);
        st.acc = acc;
        Ok(st)
    }

    fn accel(&self, u: &[f64], ut: &[f64], out: &mut [f64]) {
        for (i, s) in self.stencil.iter().enumerate() {
            out[i] = if self.masked[i] {
                0.0
            } else {
                s.cl * u[s.left] + s.c0 * u[i] + s.cr * u[s.right] + self.params.nonlinearity(u[i]) - self.damping[i] * ut[i]
            };
        }
    }

    fn pin(&mut self) {
        if let Some(l) = self.lorentz {
            for &i in &self.pinned {
                if self.masked[i] {
                    continue;
                }
                match lorentz_value(&self.params, &l, self.x[i], self.t) {
                    Some((u, ut)) => {
                        self.u[i] = u;
                        self.ut[i] = ut;
                    }
                    None => {
                        self.masked[i] = true;
                        self.active -= 1;
                    }
                }
            }
        }
    }

    fn update_mask(&mut self) {
        for i in 0..self.u.len() {
            if !self.masked[i] && !(self.u[i].abs() <= self.u_mask) {
                self.masked[i] = true;
                self.active -= 1;
            }
        }
    }

    /// Largest `|u|` over the nodes still evolving.
    pub fn max_active_u(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.masked)
            .filter(|(_, m)| !**m)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
    }

    /// `min(cfl·h, fraction·(max|u|/κ₀)^{-(p-1)/2}, t_end - t)`.
    pub fn time_step(&self) -> f64 {
        let mut dt = self.cfg.cfl * self.h;
        let top = self.max_active_u();
        if top > 0.0 {
            let tau = (top / self.params.kappa0()).powf(-(self.params.p() - 1.0) / 2.0);
            dt = dt.min(self.cfg.blowup_step_fraction * tau);
        }
        dt.min(self.cfg.t_end - self.t)
    }

    /// True once `t_end` is reached or every node is masked.
    pub fn finished(&self) -> bool {
        self.active == 0 || self.t >= self.cfg.t_end
    }

    /// Advances one step and returns its size.
    pub fn advance(&mut self) -> Result<f64> {
        let dt = self.time_step();
        if !(dt >= self.cfg.dt_min) {
            return Err(Error::DtUnderflow { dt, dt_min: self.cfg.dt_min, t: self.t });
        }
        let hdt = 0.5 * dt;
        for i in 0..self.u.len() {
            if !self.masked[i] {
                self.half[i] = self.ut[i] + hdt * self.acc[i];
                self.u[i] += dt * self.half[i];
            } else {
                self.half[i] = self.ut[i];
            }
        }
        self.t += dt;
        if self.cfg.t_end - self.t < 1e-12 * self.cfg.t_end.abs().max(1.0) {
            self.t = self.t.max(self.cfg.t_end);
        }
        self.pin();
        let mut acc = std::mem::take(&mut self.acc);
        self.accel(&self.u, &self.half, &mut acc);
        self.acc = acc;
        for i in 0..self.u.len() {
            if !self.masked[i] && !self.pinned.contains(&i) {
                self.ut[i] = self.half[i] + hdt * self.acc[i];
            }
        }
        self.update_mask();
        self.steps += 1;
        Ok(dt)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    pub fn masked_count(&self) -> usize {
        self.u.len() - self.active
    }

    pub fn snapshot(&self) -> FieldSnapshot {
        FieldSnapshot::from_parts_unchecked(self.params, self.x.clone(), self.u.clone(), self.ut.clone(), self.t)
    }
}

/// Least-squares fit of `|u|^{-(p-1)/2} = c (T - t)` over the last decade
/// of growth in `samples = [(t, u)]`; returns `(T, sigma)`.
pub fn fit_blowup_time(params: &ModelParams, x: f64, samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let no_growth = |reason: &str| Error::NoGrowth { x, reason: reason.to_string() };
    let &(t_last, u_last) = samples.last().ok_or_else(|| no_growth("empty history"))?;
    let top = u_last.abs();
    if !(top > 0.0) || !top.is_finite() {
        return Err(no_growth("no growth"));
    }
    let floor = top / 10.0;
    let start = samples
        .iter()
        .rposition(|(_, u)| u.abs() < floor)
        .ok_or_else(|| no_growth("history does not span a decade of growth"))?
        + 1;
    let window = &samples[start..];
    if window.len() < 4 {
        return Err(no_growth("fewer than 4 samples in the fit window"));
    }
    if window.windows(2).any(|w| !(w[1].1.abs() > w[0].1.abs() && w[1].0 > w[0].0)) {
        return Err(no_growth("non-monotone growth in the fit window"));
    }
    let expo = -(params.p() - 1.0) / 2.0;
    let m = window.len() as f64;
    let tbar = window.iter().map(|(t, _)| t).sum::<f64>() / m;
    let z: Vec<f64> = window.iter().map(|(_, u)| u.abs().powf(expo)).collect();
    let zbar = z.iter().sum::<f64>() / m;
    let stt: f64 = window.iter().map(|(t, _)| (t - tbar).powi(2)).sum();
    let stz: f64 = window.iter().zip(&z).map(|((t, _), z)| (t - tbar) * (z - zbar)).sum();
    let slope = stz / stt;
    if !(slope < 0.0) {
        return Err(no_growth("transformed amplitude is not decreasing"));
    }
    let root = tbar - zbar / slope;
    let rss: f64 = window.iter().zip(&z).map(|((t, _), z)| (z - zbar - slope * (t - tbar)).powi(2)).sum();
    let s2 = if window.len() > 2 { rss / (m - 2.0) } else { 0.0 };
    let var = s2 / m / (slope * slope) + zbar * zbar / slope.powi(4) * s2 / stt;
    let sigma = var.sqrt().max(4.0 * f64::EPSILON * root.abs());
    if !(root >= t_last) {
        return Err(no_growth("extrapolated blow-up time precedes the data"));
    }
    Ok((root, sigma))
}

/// [`fit_blowup_time`] on `u(x, ·)` interpolated from a snapshot history.
pub fn estimate_blowup_time(history: &[FieldSnapshot], x: f64) -> Result<(f64, f64)> {
    let first = history.first().ok_or_else(|| Error::NoGrowth { x, reason: "empty history".into() })?;
    let samples = history.iter().map(|s| Ok((s.t(), s.sample(x)?.0))).collect::<Result<Vec<_>>>()?;
    fit_blowup_time(first.params(), x, &samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub x: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma: f64,
}

/// Sampled blow-up surface `x ↦ T(x)`; `x` is a coordinate on the line or a
/// radius for radial runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSurface {
    params: ModelParams,
    samples: Vec<SurfaceSample>,
}

impl BlowupSurface {
    /// Samples are sorted by `x`; every `T` must be finite and after
    /// `t_start`.
    pub fn new(params: ModelParams, mut samples: Vec<SurfaceSample>, t_start: f64) -> Result<Self> {
        for s in &samples {
            if !(s.t.is_finite() && s.t > t_start && s.x.is_finite() && s.sigma >= 0.0) {
                return Err(Error::InvalidField(format!("bad surface sample at x = {}: T = {}", s.x, s.t)));
            }
        }
        samples.sort_by(|a, b| a.x.total_cmp(&b.x));
        Ok(Self { params, samples })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn samples(&self) -> &[SurfaceSample] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,T,sigma")?;
        for s in &self.samples {
            writeln!(out, "{},{},{}", fmt17(s.x), fmt17(s.t), fmt17(s.sigma))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(params: ModelParams, input: R) -> Result<Self> {
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "x,T,sigma" => {}
            _ => return Err(Error::Format("surface CSV must start with x,T,sigma".into())),
        }
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Format(format!("{line}: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::Format(format!("expected 3 columns: {line}")));
            }
            samples.push(SurfaceSample { x: v[0], t: v[1], sigma: v[2] });
        }
        Self::new(params, samples, f64::NEG_INFINITY)
    }
}

/// Rows `(t, max|u|, u at each probe)` recorded during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTrace {
    pub probes: Vec<f64>,
    pub rows: Vec<(f64, f64, Vec<f64>)>,
}

impl WaveTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t,max_abs_u")?;
        for x in &self.probes {
            write!(out, ",u({})", fmt17(*x))?;
        }
        writeln!(out)?;
        for (t, m, us) in &self.rows {
            write!(out, "{},{}", fmt17(*t), fmt17(*m))?;
            for u in us {
                write!(out, ",{}", fmt17(*u))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub x: f64,
    pub reason: String,
}

/// Everything [`build_surface`] produces.
#[derive(Debug, Clone)]
pub struct SurfaceBuild {
    pub surface: BlowupSurface,
    pub failures: Vec<ProbeFailure>,
    pub trace: WaveTrace,
    /// Probe locations snapped to the nearest node.
    pub probes: Vec<f64>,
    /// Per probe, the field when its ODE time-to-blow-up first dropped below
    /// `snapshot_cells · h`.
    pub snapshots: Vec<Option<FieldSnapshot>>,
    pub t_final: f64,
    pub steps: usize,
}

impl SurfaceBuild {
    /// The report line for an empty surface.
    pub fn empty_report(&self) -> Option<String> {
        self.surface.is_empty().then(|| format!("no probe diverged before t = {}", self.t_final))
    }
}

/// Runs to blow-up (or `t_end`) and fits `T` at every probe.
pub fn build_surface(data: &FieldSnapshot, cfg: &SolverConfig, probes: &[f64]) -> Result<SurfaceBuild> {
    let mut st = Stepper::new(data, cfg)?;
    let params = *data.params();
    let x = data.grid().clone();
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let mut idx = Vec::with_capacity(probes.len());
    for &p in probes {
        if !(p >= lo && p <= hi) {
            return Err(Error::InvalidConfig(format!("probe {p} outside [{lo}, {hi}]")));
        }
        idx.push(((p - lo) / st.h).round() as usize);
    }
    let probe_x: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let a = params.scaling();
    let k0 = params.kappa0();
    let u_resolved = k0 * (st.h / cfg.resolve_ratio).powf(-a);
    let u_snap = k0 * (cfg.snapshot_cells * st.h).powf(-a);
    let mut hist: Vec<Vec<(f64, f64)>> = idx.iter().map(|&i| vec![(st.t, st.u[i])]).collect();
    let mut open = vec![true; idx.len()];
    let mut last_finite = vec![st.t; idx.len()];
    let mut snapshots: Vec<Option<FieldSnapshot>> = vec![None; idx.len()];
    let mut trace = WaveTrace { probes: probe_x.clone(), rows: Vec::new() };
    let record = |st: &Stepper, trace: &mut WaveTrace| {
        trace.rows.push((st.t, st.max_active_u(), idx.iter().map(|&i| st.u[i]).collect()));
    };
    record(&st, &mut trace);
    while !st.finished() && idx.iter().any(|&i| !st.masked[i]) {
        st.advance()?;
        if st.steps % cfg.trace_every == 0 {
            record(&st, &mut trace);
        }
        for (k, &i) in idx.iter().enumerate() {
            if st.masked[i] {
                open[k] = false;
                continue;
            }
            last_finite[k] = st.t;
            let v = st.u[i].abs();
            if snapshots[k].is_none() && v >= u_snap {
                snapshots[k] = Some(st.snapshot());
            }
            if open[k] {
                hist[k].push((st.t, st.u[i]));
                if v >= u_resolved {
                    open[k] = false;
                }
            }
        }
    }
    if st.steps % cfg.trace_every != 0 {
        record(&st, &mut trace);
    }
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (k, &px) in probe_x.iter().enumerate() {
        if !st.masked[idx[k]] {
            failures.push(ProbeFailure { x: px, reason: format!("no blow-up before t = {}", st.t) });
            continue;
        }
        match fit_blowup_time(&params, px, &hist[k]) {
            Ok((t, sigma)) if t >= last_finite[k] => samples.push(SurfaceSample { x: px, t, sigma }),
            Ok((t, _)) => failures.push(ProbeFailure {
                x: px,
                reason: format!("fitted T = {t} precedes last finite time {}", last_finite[k]),
            }),
            Err(e) => failures.push(ProbeFailure { x: px, reason: e.to_string() }),
        }
    }
    Ok(SurfaceBuild {
        surface: BlowupSurface::new(params, samples, data.t())?,
        failures,
        trace,
        probes: probe_x,
        snapshots,
        t_final: st.t,
        steps: st.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ode_solution, Sign};

    fn m13() -> ModelParams {
        ModelParams::new(1, 3.0).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = m13();
        let g = physical_grid(&m, 1.0, 40).unwrap();
        let z = FieldSnapshot::from_fn(m, g, 0.0, |_| (0.0, 0.0)).unwrap();
        let cfg = SolverConfig { t_end: 0.5, ..SolverConfig::default() };
        match step(&z, &cfg).unwrap() {
            StepResult::Advanced(s) => assert!(s.u().iter().all(|&v| v == 0.0)),
            other => panic!("{other:?}"),
        }
        let b = build_surface(&z, &cfg, &[0.0]).unwrap();
        assert!(b.surface.is_empty());
        assert!(b.empty_report().is_some());
        assert_eq!(b.failures.len(), 1);
    }

    #[test]
    fn exact_ode_trace_fit() {
        let m = m13();
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|k| {
                let t = 1.0 - 0.97f64.powi(k);
                (t, ode_solution(&m, 1.0, t).unwrap())
            })
            .collect();
        let (t, sigma) = fit_blowup_time(&m, 0.0, &samples).unwrap();
        assert!((t - 1.0).abs() < 1e-6, "{t}");
        assert!(sigma < 1e-6);
        assert!(fit_blowup_time(&m, 0.0, &[(0.0, 0.0), (1.0, 0.0)]).is_err());
        let mut wobble = samples.clone();
        let n = wobble.len();
        wobble[n - 3].1 *= 2.0;
        assert!(fit_blowup_time(&m, 0.0, &wobble).is_err());
    }

    #[test]
    fn lorentz_boundary_values_match() {
        let m = m13();
        let l = LorentzData { e: Sign::Minus, d: 0.5, x_star: 0.0, t_star: 2.0 };
        let (u, ut) = lorentz_value(&m, &l, 0.0, 1.0).unwrap();
        assert!((u + m.kappa0() * 0.75f64.sqrt()).abs() < 1e-14);
        assert!((ut - u).abs() < 1e-14);
        assert!(lorentz_value(&m, &l, -2.0, 1.0).is_none());
    }

    #[test]
    fn surface_csv_round_trip() {
        let m = m13();
        let s = BlowupSurface::new(
            m,
            vec![SurfaceSample { x: 0.5, t: 1.25, sigma: 1e-5 }, SurfaceSample { x: -0.5, t: 0.75, sigma: 0.0 }],
            0.0,
        )
        .unwrap();
        assert_eq!(s.samples()[0].x, -0.5);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = BlowupSurface::read_csv(m, &buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(BlowupSurface::new(m, vec![SurfaceSample { x: 0.0, t: -1.0, sigma: 0.0 }], 0.0).is_err());
    }
}
