//! Decomposition of frames near the soliton family: fitted `(e, d, ν)`,
//! the residual `q`, decay rates and the trapping check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{kappa_star_scalar, ProfileParams, Sign};
use crate::simvars::{fmt17, Geometry, SelfSimFrame, YGrid};

/// Controls for [`fit_profile_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Fits whose `‖q‖_𝓗 / ‖e κ*‖_𝓗` exceeds this are rejected.
    pub trust_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, trust_ratio: 0.25 }
    }
}

/// Residual `q = (w, ∂_s w) - e κ*(d, ν)` scaled so that its squared
/// Euclidean norm is `‖q‖²_𝓗`.
struct Residual<'a> {
    frame: &'a SelfSimFrame,
    sqrt_w: Vec<f64>,
    sqrt_face: Vec<f64>,
}

impl<'a> Residual<'a> {
    fn new(frame: &'a SelfSimFrame) -> Self {
        let g = frame.grid();
        Self {
            frame,
            sqrt_w: g.cell_weights().iter().map(|w| w.sqrt()).collect(),
            sqrt_face: g.face_gaps().iter().zip(g.face_coefs()).map(|(a, b)| (a * b).sqrt()).collect(),
        }
    }

    fn grid(&self) -> &YGrid {
        self.frame.grid()
    }

    fn eval(&self, e: f64, d: f64, nu: f64, out: &mut Vec<f64>) {
        let g = self.grid();
        let params = g.params();
        let n = g.cells();
        out.clear();
        let mut q1 = Vec::with_capacity(n);
        for (i, &y) in g.points().iter().enumerate() {
            let (k1, k2) = kappa_star_scalar(params, d, nu, y);
            q1.push(self.frame.w()[i] - e * k1);
            out.push(self.sqrt_w[i] * q1[i]);
            out.push(self.sqrt_w[i] * (self.frame.ws()[i] - e * k2));
        }
        for (k, s) in self.sqrt_face.iter().enumerate() {
            out.push(s * g.face_slope(&q1, k));
        }
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Maps unconstrained `(ξ, η)` to `(d, ν)` with `|d| < 1`, `ν > -1 + |d|`.
fn to_params(theta: &[f64; 2], radial: bool) -> (f64, f64) {
    let d = if radial { 0.0 } else { theta[0].clamp(-15.0, 15.0).tanh() };
    (d, -1.0 + d.abs() + theta[1].clamp(-30.0, 30.0).exp())
}

fn from_params(d: f64, nu: f64) -> [f64; 2] {
    let d = d.clamp(-0.999, 0.999);
    [d.atanh(), (nu + 1.0 - d.abs()).max(1e-6).ln()]
}

/// Levenberg–Marquardt on `‖q‖²` for a fixed sign; returns `(d, ν, ‖q‖)`
/// and whether it converged.
fn lm(res: &Residual, e: f64, start: (f64, f64), max_iter: usize) -> (f64, f64, f64, bool) {
    let radial = res.grid().geometry() != Geometry::Line;
    let dims = if radial { 1 } else { 2 };
    let mut theta = from_params(start.0, start.1);
    let eval = |th: &[f64; 2], out: &mut Vec<f64>| {
        let (d, nu) = to_params(th, radial);
        res.eval(e, d, nu, out);
    };
    let mut r = Vec::new();
    eval(&theta, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let (mut rp, mut rm, mut trial) = (Vec::new(), Vec::new(), Vec::new());
    let mut converged = false;
    for _ in 0..max_iter {
        let mut jac = [vec![0.0; r.len()], vec![0.0; r.len()]];
        for k in 0..dims {
            let step = 1e-6 * (1.0 + theta[k].abs());
            let (mut tp, mut tm) = (theta, theta);
            tp[k] += step;
            tm[k] -= step;
            eval(&tp, &mut rp);
            eval(&tm, &mut rm);
            for (j, (a, b)) in rp.iter().zip(&rm).enumerate() {
                jac[k][j] = (a - b) / (2.0 * step);
            }
        }
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for a in 0..dims {
            jtr[a] = jac[a].iter().zip(&r).map(|(x, y)| x * y).sum();
            for b in 0..dims {
                jtj[a][b] = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
            }
        }
        let grad = (jtr[0] * jtr[0] + jtr[1] * jtr[1]).sqrt();
        if grad <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let a00 = jtj[0][0] * (1.0 + lambda) + 1e-300;
            let delta = if dims == 1 {
                [-jtr[0] / a00, 0.0]
            } else {
                let a11 = jtj[1][1] * (1.0 + lambda) + 1e-300;
                let det = a00 * a11 - jtj[0][1] * jtj[1][0];
                [-(a11 * jtr[0] - jtj[0][1] * jtr[1]) / det, -(a00 * jtr[1] - jtj[1][0] * jtr[0]) / det]
            };
            let cand = [theta[0] + delta[0], theta[1] + delta[1]];
            eval(&cand, &mut trial);
            let c = sum_sq(&trial);
            if c.is_finite() && c <= cost {
                let small = delta[0].abs().max(delta[1].abs()) < 1e-13 * (1.0 + theta[0].abs().max(theta[1].abs()));
                let flat = cost - c <= 1e-15 * cost;
                theta = cand;
                std::mem::swap(&mut r, &mut trial);
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                converged = small || (flat && lambda <= 1e-9);
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at this precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let (d, nu) = to_params(&theta, radial);
    (d, nu, cost.sqrt(), converged)
}

/// Initial `(e, d, ν)`: the sign of the weighted mean of `w`, `d` from the
/// weighted mean slope of `log|w|`, `ν = 0`.
pub fn initial_guess(frame: &SelfSimFrame) -> (Sign, f64, f64) {
    let g = frame.grid();
    let e = Sign::of(g.integrate(frame.w()));
    if g.geometry() != Geometry::Line {
        return (e, 0.0, 0.0);
    }
    let logs: Vec<f64> = frame.w().iter().map(|w| w.abs().max(1e-300).ln()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..g.faces().len() {
        let wgt = g.face_gaps()[k] * g.face_coefs()[k];
        num += wgt * g.face_slope(&logs, k);
        den += wgt;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    let d = (-slope / g.params().scaling()).clamp(-0.9, 0.9);
    (e, if d.is_finite() { d } else { 0.0 }, 0.0)
}

/// [`fit_profile_with`] under default options.
pub fn fit_profile(frame: &SelfSimFrame, init: Option<&ProfileParams>) -> Result<(ProfileParams, f64)> {
    fit_profile_with(frame, init, &FitOptions::default())
}

/// Minimises `‖(w, ∂_s w) - e κ*(d, ν)‖_𝓗` over both signs and `(d, ν)`;
/// returns the minimiser and the attained distance.
pub fn fit_profile_with(frame: &SelfSimFrame, init: Option<&ProfileParams>, opts: &FitOptions) -> Result<(ProfileParams, f64)> {
    let res = Residual::new(frame);
    let radial = frame.grid().geometry() != Geometry::Line;
    let guess = initial_guess(frame);
    let mut starts = vec![(guess.1, guess.2)];
    if let Some(p) = init {
        starts.insert(0, (if radial { 0.0 } else { p.d()[0] }, p.nu()));
    }
    if !radial {
        starts.push((0.0, 0.0));
    }
    let mut best: Option<(Sign, f64, f64, f64, bool)> = None;
    for e in [guess.0, guess.0.flip()] {
        for &start in &starts {
            let (d, nu, dist, ok) = lm(&res, e.value(), start, opts.max_iterations);
            if best.as_ref().map_or(true, |b| dist < b.3) {
                best = Some((e, d, nu, dist, ok));
            }
        }
    }
    let (e, d, nu, dist, ok) = best.expect("at least one start");
    if !ok {
        return Err(Error::FitNotConverged { iterations: opts.max_iterations, distance: dist });
    }
    let dim = frame.params().n();
    let mut dv = vec![0.0; dim];
    dv[0] = d;
    let prof = ProfileParams::new(e, dv, nu)?;
    let scale = crate::simvars::h_norm(&SelfSimFrame::from_profile(frame.grid().clone(), frame.s(), &prof)?);
    let threshold = opts.trust_ratio * scale;
    if dist > threshold {
        return Err(Error::OutsideTrustRegion { distance: dist, threshold });
    }
    Ok((prof, dist))
}

/// `|artanh|d₁| - artanh|d₂|| + |d₁ - d₂| / √(1 - |d₁|)`; not symmetric.
pub fn param_distance(d1: &[f64], d2: &[f64]) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::InvalidProfile("velocity vectors differ in dimension".into()));
    }
    let n1 = d1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n2 = d2.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n1 < 1.0 && n2 < 1.0) {
        return Err(Error::OutOfDomain(format!("velocities must lie in the open unit ball: {n1}, {n2}")));
    }
    let diff = d1.iter().zip(d2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok((n1.atanh() - n2.atanh()).abs() + diff / (1.0 - n1).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSample {
    pub s: f64,
    pub prof: ProfileParams,
    pub qnorm: f64,
}

/// Fitted parameters along a run, strictly increasing in `s`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModulationTrace {
    samples: Vec<ModulationSample>,
}

impl ModulationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: f64, prof: ProfileParams, qnorm: f64) -> Result<()> {
        if !(qnorm >= 0.0) {
            return Err(Error::InvalidField(format!("qnorm must be non-negative, got {qnorm}")));
        }
        if let Some(last) = self.samples.last() {
            if !(s > last.s) {
                return Err(Error::InvalidField(format!("trace times must increase: {s} after {}", last.s)));
            }
        }
        self.samples.push(ModulationSample { s, prof, qnorm });
        Ok(())
    }

    pub fn samples(&self) -> &[ModulationSample] {
        &self.samples
    }

    /// Fits every frame in order, warm-starting from the previous fit.
    pub fn from_frames(frames: &[SelfSimFrame]) -> Result<Self> {
        let mut trace = Self::new();
        let mut prev: Option<ProfileParams> = None;
        for f in frames {
            let (prof, q) = fit_profile(f, prev.as_ref())?;
            trace.push(f.s(), prof.clone(), q)?;
            prev = Some(prof);
        }
        Ok(trace)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.samples.first().map_or(1, |s| s.prof.d().len());
        write!(out, "s,e")?;
        for k in 0..dim {
            write!(out, ",d{k}")?;
        }
        writeln!(out, ",nu,qnorm")?;
        for s in &self.samples {
            write!(out, "{},{}", fmt17(s.s), s.prof.e().value())?;
            for d in s.prof.d() {
                write!(out, ",{}", fmt17(*d))?;
            }
            writeln!(out, ",{},{}", fmt17(s.prof.nu()), fmt17(s.qnorm))?;
        }
        Ok(())
    }
}

/// `qnorm ≈ prefactor · e^{-mu (s - s_lo)}` on the fit window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub mu: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Least-squares line through `(s, log qnorm)` over `window`; `floor` is the
/// attainable quadrature level of `qnorm`.
pub fn estimate_decay_rate(trace: &ModulationTrace, window: (f64, f64), floor: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|p| p.s >= window.0 && p.s <= window.1)
        .map(|p| (p.s, p.qnorm))
        .collect();
    if pts.len() < 8 {
        return Err(Error::Unresolvable(format!("{} samples in window, need 8", pts.len())));
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 > 10.0 * floor)) {
        return Err(Error::Unresolvable(format!("qnorm {} at s = {} is at the floor {floor}", p.1, p.0)));
    }
    let m = pts.len() as f64;
    let sbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let logs: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let lbar = logs.iter().sum::<f64>() / m;
    let sss: f64 = pts.iter().map(|p| (p.0 - sbar).powi(2)).sum();
    let ssl: f64 = pts.iter().zip(&logs).map(|(p, l)| (p.0 - sbar) * (l - lbar)).sum();
    let slope = ssl / sss;
    let tot: f64 = logs.iter().map(|l| (l - lbar).powi(2)).sum();
    let rss: f64 = pts.iter().zip(&logs).map(|(p, l)| (l - lbar - slope * (p.0 - sbar)).powi(2)).sum();
    let r2 = if tot > 0.0 { 1.0 - rss / tot } else { 1.0 };
    let prefactor = (lbar + slope * (window.0.max(pts[0].0) - sbar)).exp();
    Ok(DecayFit { mu: -slope, prefactor, r2, samples: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappingReport {
    pub passed: bool,
    pub epsilon_bar: f64,
    pub decay: Option<DecayFit>,
    pub window: Option<(f64, f64)>,
    /// Smallest `K` with `qnorm(s) ≤ K ε̄ e^{-mu (s - s̄)}` up to the window end.
    pub k_decay: f64,
    /// `param_distance(d̄, d_final) / ε̄`.
    pub k_param: f64,
    pub d_final: Vec<f64>,
    pub notes: Vec<String>,
}

/// `ε̄ = ‖frame - e κ(d̄)‖_𝓗`, refused above `eps0`: data that far from the
/// soliton are not a trapping test.
pub fn trapping_precondition(frame: &SelfSimFrame, e: Sign, d_bar: &[f64], eps0: f64) -> Result<f64> {
    let eps = crate::simvars::h_distance_to_profile(frame, &ProfileParams::soliton(e, d_bar.to_vec())?)?;
    if !(eps <= eps0) {
        return Err(Error::OutsideTrustRegion { distance: eps, threshold: eps0 });
    }
    Ok(eps)
}

/// Similarity time for characteristics (`dy/ds = y ± 1`) starting in
/// `|y| ≤ radius` to leave the unit ball.
pub fn transport_time(radius: f64) -> f64 {
    (2.0 / (1.0 - radius.clamp(0.0, 1.0 - 1e-12))).ln()
}

/// Checks exponential decay of `qnorm` and closeness of the final velocity
/// to `d_bar`. The rate is fitted on `[s̄ + skip, s₁]`, where `s₁` ends the
/// leading run of samples with `qnorm > 10 · floor`; `K` covers every sample
/// up to `s₁`. Pass requires `mu > 0`, `r² > min_r2` and `k_param ≤ k_decay`;
/// a trace at the floor from the start passes iff `k_param ≤ 1`.
pub fn trapping_check(
    trace: &ModulationTrace,
    epsilon_bar: f64,
    d_bar: &[f64],
    skip: f64,
    floor: f64,
    min_r2: f64,
) -> Result<TrappingReport> {
    let last = trace.samples.last().ok_or_else(|| Error::InvalidField("empty modulation trace".into()))?;
    let d_final = last.prof.d().to_vec();
    let k_param = param_distance(d_bar, &d_final)? / epsilon_bar;
    let mut report = TrappingReport {
        passed: false,
        epsilon_bar,
        decay: None,
        window: None,
        k_decay: 0.0,
        k_param,
        d_final,
        notes: Vec::new(),
    };
    let lead = trace.samples.iter().take_while(|p| p.qnorm > 10.0 * floor).count();
    if lead == 0 {
        report.notes.push("qnorm at the floor from the start".into());
        report.passed = k_param <= 1.0;
        return Ok(report);
    }
    let s_bar = trace.samples[0].s;
    let window = (s_bar + skip, trace.samples[lead - 1].s);
    report.window = Some(window);
    let decay = match estimate_decay_rate(trace, window, floor) {
        Ok(f) => f,
        Err(e) => {
            report.notes.push(e.to_string());
            return Ok(report);
        }
    };
    report.k_decay = trace.samples[..lead]
        .iter()
        .map(|p| p.qnorm / (epsilon_bar * (-decay.mu * (p.s - s_bar)).exp()))
        .fold(0.0, f64::max);
    if !(decay.mu > 0.0) {
        report.notes.push(format!("no decay: mu = {}", decay.mu));
    }
    if !(decay.r2 > min_r2) {
        report.notes.push(format!("poor exponential fit: r2 = {}", decay.r2));
    }
    if !(k_param <= report.k_decay) {
        report.notes.push(format!("velocity drift {k_param} exceeds K = {}", report.k_decay));
    }
    report.passed = decay.mu > 0.0 && decay.r2 > min_r2 && k_param <= report.k_decay;
    report.decay = Some(decay);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ModelParams;
    use std::sync::Arc;

    fn grid() -> Arc<YGrid> {
        YGrid::unit_ball(&ModelParams::new(1, 3.0).unwrap(), 200).unwrap()
    }

    #[test]
    fn exact_member_is_recovered() {
        let prof = ProfileParams::new(Sign::Plus, vec![0.3], 0.1).unwrap();
        let f = SelfSimFrame::from_profile(grid(), 0.0, &prof).unwrap();
        let (fit, q) = fit_profile(&f, None).unwrap();
        assert_eq!(fit.e(), Sign::Plus);
        assert!((fit.d()[0] - 0.3).abs() < 1e-6 && (fit.nu() - 0.1).abs() < 1e-6, "{fit:?}");
        assert!(q < 1e-8, "{q}");
    }

    #[test]
    fn negative_constant_is_recovered() {
        let g = grid();
        let k0 = g.params().kappa0();
        let f = SelfSimFrame::from_fn(g, 0.0, |_| (-k0, 0.0)).unwrap();
        let (fit, q) = fit_profile(&f, None).unwrap();
        assert_eq!(fit.e(), Sign::Minus);
        assert!(fit.d()[0].abs() < 1e-6 && fit.nu().abs() < 1e-6);
        assert!(q < 1e-8);
    }

    #[test]
    fn far_frames_are_rejected() {
        let g = grid();
        let f = SelfSimFrame::from_fn(g, 0.0, |y| ((5.0 * y).sin(), 0.0)).unwrap();
        assert!(matches!(fit_profile(&f, None), Err(Error::OutsideTrustRegion { .. })));
    }

    #[test]
    fn param_distance_examples() {
        assert_eq!(param_distance(&[0.4], &[0.4]).unwrap(), 0.0);
        assert!((param_distance(&[0.0], &[0.5]).unwrap() - 1.049306).abs() < 1e-6);
        assert!((param_distance(&[0.9], &[0.91]).unwrap() - 0.086928).abs() < 1e-6);
        assert!(param_distance(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn planted_exponent_is_recovered() {
        let mut t = ModulationTrace::new();
        let prof = ProfileParams::soliton(Sign::Plus, vec![0.0]).unwrap();
        for k in 0..20 {
            let s = 0.25 * k as f64;
            t.push(s, prof.clone(), 3.0 * (-0.5 * s).exp()).unwrap();
        }
        let fit = estimate_decay_rate(&t, (0.0, 5.0), 1e-14).unwrap();
        assert!((fit.mu - 0.5).abs() < 1e-10 * 0.5);
        assert!((fit.prefactor - 3.0).abs() < 1e-10 * 3.0);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(estimate_decay_rate(&t, (0.0, 5.0), 1.0).is_err());
    }

    #[test]
    fn constant_trace_has_zero_rate() {
        let mut t = ModulationTrace::new();
        let prof = ProfileParams::soliton(Sign::Plus, vec![0.0]).unwrap();
        for k in 0..10 {
            t.push(k as f64, prof.clone(), 1e-3).unwrap();
        }
        assert_eq!(estimate_decay_rate(&t, (0.0, 10.0), 1e-14).unwrap().mu, 0.0);
        assert!(estimate_decay_rate(&t, (0.0, 10.0), 1e-3).is_err());
    }

    #[test]
    fn exact_soliton_trace_passes_trapping() {
        let mut t = ModulationTrace::new();
        let prof = ProfileParams::soliton(Sign::Minus, vec![0.3]).unwrap();
        for k in 0..10 {
            t.push(k as f64, prof.clone(), 0.0).unwrap();
        }
        let r = trapping_check(&t, 1e-2, &[0.3], 0.0, 1e-12, 0.95).unwrap();
        assert!(r.passed && r.k_param == 0.0);
    }
}
