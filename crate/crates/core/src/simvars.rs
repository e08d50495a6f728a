//! Similarity variables: the transform between physical snapshots and
//! self-similar frames, the weight `ρ`, and the weighted energy norm.
//!
//! Frames live on a cell-centred grid of the open unit ball (a symmetric
//! interval in 1D, radii in `(0, 1)` for radial N-D data). The outermost
//! cell centre sits half a cell inside `|y| = 1`. Integrals use
//! product quadrature: every cell carries the exact weighted measure
//! `∫_cell ρ dμ`, and gradient terms live on the interior cell faces where
//! the coefficient `ρ (1 - |y|²)` is evaluated pointwise.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{kappa_star_scalar, norm, pos_pow, ModelParams, ProfileParams};
use crate::quadrature::{gauss_legendre, sphere_area};

/// Spatial layout implied by the model dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// N = 1, signed coordinate.
    Line,
    /// N >= 2, radial functions, coordinate is the radius.
    Radial { dim: usize },
}

impl Geometry {
    pub fn of(params: &ModelParams) -> Geometry {
        if params.n() == 1 {
            Geometry::Line
        } else {
            Geometry::Radial { dim: params.n() }
        }
    }

    /// Area factor of the measure at coordinate `r`: 1 in 1D,
    /// `|S^{N-1}| r^{N-1}` for radial data.
    #[inline]
    pub fn area(&self, r: f64) -> f64 {
        match *self {
            Geometry::Line => 1.0,
            Geometry::Radial { dim } => sphere_area(dim) * r.abs().powi(dim as i32 - 1),
        }
    }
}

/// `ρ(y) = (1 - |y|²)^α`, vanishing on the unit sphere.
pub fn rho_weight(params: &ModelParams, y: &[f64]) -> Result<f64> {
    let r = norm(y);
    if r > 1.0 {
        return Err(Error::OutOfDomain(format!("|y| = {r} exceeds 1")));
    }
    Ok(rho_scalar(params, r))
}

#[inline]
pub(crate) fn rho_scalar(params: &ModelParams, r: f64) -> f64 {
    let base = 1.0 - r * r;
    if base <= 0.0 {
        0.0
    } else {
        pos_pow(base, params.alpha())
    }
}

/// Cell-centred grid of the unit ball with its quadrature data.
///
/// Cells are uniform in a reference coordinate `ξ` and mapped by
/// `y = ξ + c sin(πξ)/π`, so `c > 0` refines towards `|y| = 1` by the
/// factor `(1 + c)/(1 - c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct YGrid {
    params: ModelParams,
    geometry: Geometry,
    stretch: f64,
    centers: Vec<f64>,
    /// `∫_cell ρ dμ` per cell.
    cell_weight: Vec<f64>,
    /// Positions of the interior faces (between cell `i` and `i + 1`).
    faces: Vec<f64>,
    /// `area(y_f) ρ(y_f) (1 - y_f²)` per interior face.
    face_coef: Vec<f64>,
    /// Distance between the centres adjacent to each interior face.
    face_gap: Vec<f64>,
    /// Derivative at each interior face as weights on three consecutive
    /// nodes starting at the given index.
    face_deriv: Vec<(usize, [f64; 3])>,
}

/// Weights of the three-point Lagrange derivative at `at`; they sum to
/// zero exactly.
pub(crate) fn lagrange_derivative(y: [f64; 3], at: f64) -> [f64; 3] {
    let d0 = (2.0 * at - y[1] - y[2]) / ((y[0] - y[1]) * (y[0] - y[2]));
    let d2 = (2.0 * at - y[0] - y[1]) / ((y[2] - y[0]) * (y[2] - y[1]));
    [d0, -(d0 + d2), d2]
}

fn stretch_map(c: f64, xi: f64) -> f64 {
    xi + c * (std::f64::consts::PI * xi).sin() / std::f64::consts::PI
}

impl YGrid {
    /// `cells` uniform cells across `(-1, 1)` in 1D, across `(0, 1)` radially.
    pub fn unit_ball(params: &ModelParams, cells: usize) -> Result<Arc<YGrid>> {
        Self::stretched(params, cells, 0.0)
    }

    /// As [`YGrid::unit_ball`] with boundary refinement `stretch ∈ [0, 1)`.
    pub fn stretched(params: &ModelParams, cells: usize, stretch: f64) -> Result<Arc<YGrid>> {
        if cells < 4 {
            return Err(Error::InvalidField(format!("need at least 4 cells, got {cells}")));
        }
        if !(0.0..1.0).contains(&stretch) {
            return Err(Error::InvalidField(format!("stretch must lie in [0, 1), got {stretch}")));
        }
        let geometry = Geometry::of(params);
        let (lo, dxi) = match geometry {
            Geometry::Line => (-1.0, 2.0 / cells as f64),
            Geometry::Radial { .. } => (0.0, 1.0 / cells as f64),
        };
        let map = |xi: f64| if stretch == 0.0 { xi } else { stretch_map(stretch, xi) };
        let edges: Vec<f64> = (0..=cells)
            .map(|i| match i {
                0 => lo,
                i if i == cells => 1.0,
                i => map(lo + i as f64 * dxi),
            })
            .collect();
        let (gx, gw) = gauss_legendre(12);
        let (bx, bw) = gauss_legendre(48);
        // Nodes sit at the ρ-centroid of their cell (area factor excluded):
        // near |y| = 1 the geometric centre would make the one-point rule
        // first order, while at the radial origin the area factor would
        // break the symmetry of the face differences.
        let (cell_weight, centers): (Vec<f64>, Vec<f64>) = (0..cells)
            .map(|i| {
                let (a, b) = (edges[i], edges[i + 1]);
                let edge = i == 0 || i + 1 == cells;
                let (xs, ws) = if edge { (&bx, &bw) } else { (&gx, &gw) };
                let (m0, r0, r1) = xs.iter().zip(ws).fold((0.0, 0.0, 0.0), |(m0, r0, r1), (x, w)| {
                    let y = a + 0.5 * (b - a) * (1.0 + x);
                    let dr = 0.5 * (b - a) * w * rho_scalar(params, y);
                    (m0 + dr * geometry.area(y), r0 + dr, r1 + dr * y)
                });
                (m0, r1 / r0)
            })
            .unzip();
        let faces: Vec<f64> = edges[1..cells].to_vec();
        let face_coef = faces
            .iter()
            .map(|&f| geometry.area(f) * rho_scalar(params, f) * (1.0 - f * f))
            .collect();
        let face_gap: Vec<f64> = centers.windows(2).map(|c| c[1] - c[0]).collect();
        // Faces sit off the midpoint of their two nodes (by O(h/k) at k cells
        // from |y| = 1), so each face derivative is that of the quadratic
        // through its nodes and the next node away from the sphere.
        let face_deriv = (0..cells - 1)
            .map(|f| {
                let j = if faces[f] < 0.0 || f == 0 { f } else { (f - 1).min(cells - 3) };
                let j = j.min(cells - 3);
                (j, lagrange_derivative([centers[j], centers[j + 1], centers[j + 2]], faces[f]))
            })
            .collect();
        Ok(Arc::new(YGrid {
            params: *params,
            geometry,
            stretch,
            centers,
            cell_weight,
            faces,
            face_coef,
            face_gap,
            face_deriv,
        }))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    /// Largest centre-to-centre distance.
    pub fn h(&self) -> f64 {
        self.face_gap.iter().fold(0.0, |m: f64, g| m.max(*g))
    }

    /// Derivative stencil of each interior face.
    pub(crate) fn face_derivs(&self) -> &[(usize, [f64; 3])] {
        &self.face_deriv
    }

    /// Derivative of `f` at interior face `k`.
    pub(crate) fn face_slope(&self, f: &[f64], k: usize) -> f64 {
        let (j, c) = self.face_deriv[k];
        c[0] * (f[j] - f[j + 1]) + c[2] * (f[j + 2] - f[j + 1])
    }

    /// Centre-to-centre distance across each interior face.
    pub fn face_gaps(&self) -> &[f64] {
        &self.face_gap
    }

    pub fn points(&self) -> &[f64] {
        &self.centers
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weight
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn face_coefs(&self) -> &[f64] {
        &self.face_coef
    }

    /// `∫ f ρ dμ` for nodal values `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.cell_weight).map(|(a, b)| a * b).sum()
    }

    /// `∫ (|∇f|² - (y·∇f)²) ρ dμ` from face differences.
    pub fn gradient_form(&self, f: &[f64]) -> f64 {
        (0..self.faces.len())
            .map(|k| {
                let g = self.face_slope(f, k);
                self.face_gap[k] * self.face_coef[k] * g * g
            })
            .sum()
    }
}

/// `(w, ∂_s w)` sampled on a unit-ball grid at similarity time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimFrame {
    grid: Arc<YGrid>,
    w: Vec<f64>,
    ws: Vec<f64>,
    s: f64,
}

impl SelfSimFrame {
    pub fn new(grid: Arc<YGrid>, w: Vec<f64>, ws: Vec<f64>, s: f64) -> Result<Self> {
        let n = grid.cells();
        if w.len() != n || ws.len() != n {
            return Err(Error::InvalidField(format!(
                "frame needs {n} values, got w: {}, ws: {}",
                w.len(),
                ws.len()
            )));
        }
        if let Some(i) = w.iter().chain(&ws).position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at index {}", i % n)));
        }
        if !s.is_finite() {
            return Err(Error::InvalidField("non-finite similarity time".into()));
        }
        Ok(Self { grid, w, ws, s })
    }

    /// Samples `f(y) -> (w, ∂_s w)` at the grid points.
    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(grid: Arc<YGrid>, s: f64, f: F) -> Result<Self> {
        let (w, ws) = grid.points().iter().map(|&y| f(y)).unzip();
        Self::new(grid, w, ws, s)
    }

    /// `e κ*(d, ν)` sampled on the grid.
    pub fn from_profile(grid: Arc<YGrid>, s: f64, prof: &ProfileParams) -> Result<Self> {
        let d = profile_direction(grid.geometry(), prof)?;
        let params = *grid.params();
        let e = prof.e().value();
        Self::from_fn(grid, s, |y| {
            let (k1, k2) = kappa_star_scalar(&params, d, prof.nu(), y);
            (e * k1, e * k2)
        })
    }

    pub fn zeros(grid: Arc<YGrid>, s: f64) -> Self {
        let n = grid.cells();
        Self { grid, w: vec![0.0; n], ws: vec![0.0; n], s }
    }

    pub fn grid(&self) -> &Arc<YGrid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        self.grid.params()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn ws(&self) -> &[f64] {
        &self.ws
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, f64) {
        (self.w, self.ws, self.s)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            w: self.w.iter().map(|v| factor * v).collect(),
            ws: self.ws.iter().map(|v| factor * v).collect(),
            s: self.s,
        }
    }

    /// Componentwise difference; both frames must share a grid.
    pub fn difference(&self, other: &SelfSimFrame) -> Result<SelfSimFrame> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            w: self.w.iter().zip(&other.w).map(|(a, b)| a - b).collect(),
            ws: self.ws.iter().zip(&other.ws).map(|(a, b)| a - b).collect(),
            s: self.s,
        })
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &SelfSimFrame) -> Result<SelfSimFrame> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            w: self.w.iter().zip(&other.w).map(|(a, b)| a + factor * b).collect(),
            ws: self.ws.iter().zip(&other.ws).map(|(a, b)| a + factor * b).collect(),
            s: self.s,
        })
    }

    pub(crate) fn check_same_grid(&self, other: &SelfSimFrame) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::InvalidField("frames live on different grids".into()))
        }
    }

    /// `max |w|` over the grid.
    pub fn sup_w(&self) -> f64 {
        self.w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance of `w` to another frame's `w`.
    pub fn sup_distance(&self, other: &SelfSimFrame) -> f64 {
        self.w.iter().zip(&other.w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Scalar velocity along the grid axis; radial frames only admit `d = 0`.
pub(crate) fn profile_direction(geometry: Geometry, prof: &ProfileParams) -> Result<f64> {
    match geometry {
        Geometry::Line => Ok(prof.d()[0]),
        Geometry::Radial { .. } => {
            if norm(prof.d()) != 0.0 {
                Err(Error::InvalidProfile("radial frames only admit d = 0".into()))
            } else {
                Ok(0.0)
            }
        }
    }
}

/// `‖(q₁, q₂)‖²` in the energy space.
pub fn h_norm_sq_parts(grid: &YGrid, q1: &[f64], q2: &[f64]) -> f64 {
    let mass: f64 = q1
        .iter()
        .zip(q2)
        .zip(grid.cell_weights())
        .map(|((a, b), wgt)| (a * a + b * b) * wgt)
        .sum();
    mass + grid.gradient_form(q1)
}

/// `‖(w, ∂_s w)‖_𝓗`.
pub fn h_norm(frame: &SelfSimFrame) -> f64 {
    h_norm_sq_parts(frame.grid(), frame.w(), frame.ws()).sqrt()
}

/// `‖(w, ∂_s w) - e κ*(d, ν)‖_𝓗` on the frame's grid.
pub fn h_distance_to_profile(frame: &SelfSimFrame, prof: &ProfileParams) -> Result<f64> {
    let grid = frame.grid();
    let d = profile_direction(grid.geometry(), prof)?;
    let params = frame.params();
    let e = prof.e().value();
    let mut q1 = Vec::with_capacity(grid.cells());
    let mut q2 = Vec::with_capacity(grid.cells());
    for ((&y, &w), &ws) in grid.points().iter().zip(frame.w()).zip(frame.ws()) {
        let (k1, k2) = kappa_star_scalar(params, d, prof.nu(), y);
        q1.push(w - e * k1);
        q2.push(ws - e * k2);
    }
    Ok(h_norm_sq_parts(grid, &q1, &q2).sqrt())
}

/// Quintic bump `1 - 10r³ + 15r⁴ - 6r⁵` in `r = |x - center| / width < 1`,
/// zero outside; C² everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: f64, width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0 && center.is_finite() && amplitude.is_finite()) {
            return Err(Error::InvalidField(format!("bad bump: center {center}, width {width}")));
        }
        Ok(Self { center, width, amplitude })
    }

    /// Centre and width drawn uniformly from the given ranges, sign at random.
    pub fn seeded(seed: u64, centers: (f64, f64), widths: (f64, f64)) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let center = rng.gen_range(centers.0..=centers.1);
        let width = rng.gen_range(widths.0..=widths.1);
        let amplitude = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        Self { center, width, amplitude }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let r = ((x - self.center) / self.width).abs();
        if r >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - r * r * r * (10.0 - 15.0 * r + 6.0 * r * r))
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        let r = z.abs();
        if r >= 1.0 {
            0.0
        } else {
            -self.amplitude * 30.0 * r * r * (1.0 - r) * (1.0 - r) * z.signum() / self.width
        }
    }

    /// `(∫ (b'² + b²) dμ)^{1/2}` over physical space, `dμ` the line or
    /// radial measure of `params`.
    pub fn physical_h1_norm(&self, params: &ModelParams) -> f64 {
        let geom = Geometry::of(params);
        let (a, b) = self.support();
        let a = if geom == Geometry::Line { a } else { a.max(0.0) };
        if !(b > a) {
            return 0.0;
        }
        let f = |x: f64| (self.derivative(x).powi(2) + self.eval(x).powi(2)) * geom.area(x.abs());
        crate::quadrature::integrate(f, a, b, 12, 16).sqrt()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    /// `(bump, 0)` on a unit-ball grid.
    pub fn frame(&self, grid: &Arc<YGrid>, s: f64) -> Result<SelfSimFrame> {
        SelfSimFrame::from_fn(grid.clone(), s, |y| (self.eval(y), 0.0))
    }

    /// The same shape rescaled so that `‖(bump, 0)‖_𝓗 = eps` on `grid`.
    pub fn with_h_norm(&self, grid: &Arc<YGrid>, eps: f64) -> Result<Self> {
        let n = h_norm(&self.frame(grid, 0.0)?);
        if !(n > 0.0) {
            return Err(Error::InvalidField("bump misses the unit ball".into()));
        }
        Ok(Self { amplitude: self.amplitude * eps / n, ..*self })
    }
}

/// `(u, ∂_t u)` on a physical grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    grid: Arc<Vec<f64>>,
    u: Vec<f64>,
    ut: Vec<f64>,
    t: f64,
    params: ModelParams,
}

impl FieldSnapshot {
    pub fn new(params: ModelParams, grid: Arc<Vec<f64>>, u: Vec<f64>, ut: Vec<f64>, t: f64) -> Result<Self> {
        if grid.len() < 4 {
            return Err(Error::InvalidField("snapshot grid needs at least 4 points".into()));
        }
        if u.len() != grid.len() || ut.len() != grid.len() {
            return Err(Error::InvalidField("snapshot arrays do not match grid".into()));
        }
        if grid.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidField("snapshot grid must be strictly increasing".into()));
        }
        if params.is_radial() && grid[0] < 0.0 {
            return Err(Error::InvalidField("radial grid must have non-negative radii".into()));
        }
        if u.iter().chain(&ut).any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::InvalidField("non-finite snapshot value".into()));
        }
        Ok(Self { grid, u, ut, t, params })
    }

    /// Samples `f(x) -> (u, ∂_t u)` on `grid`.
    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(
        params: ModelParams,
        grid: Arc<Vec<f64>>,
        t: f64,
        f: F,
    ) -> Result<Self> {
        let (u, ut) = grid.iter().map(|&x| f(x)).unzip();
        Self::new(params, grid, u, ut, t)
    }

    pub(crate) fn from_parts_unchecked(
        params: ModelParams,
        grid: Arc<Vec<f64>>,
        u: Vec<f64>,
        ut: Vec<f64>,
        t: f64,
    ) -> Self {
        Self { grid, u, ut, t, params }
    }

    pub fn grid(&self) -> &Arc<Vec<f64>> {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn ut(&self) -> &[f64] {
        &self.ut
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Cubic interpolant of `u` and its derivative at `x`.
    pub fn sample(&self, x: f64) -> Result<(f64, f64)> {
        CubicInterp::new(&self.grid, &self.u, self.params.is_radial()).eval(x)
    }
}

/// Local four-point Lagrange interpolation on a sorted, possibly
/// non-uniform grid; radial data are extended evenly through the origin.
pub struct CubicInterp {
    xs: Vec<f64>,
    fs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl CubicInterp {
    pub fn new(xs: &[f64], fs: &[f64], even: bool) -> Self {
        let lo = if even { 0.0 } else { xs[0] };
        let hi = xs[xs.len() - 1];
        if even {
            let mirrored = xs.iter().zip(fs).rev().filter(|(x, _)| **x > 0.0);
            let (mut mx, mut mf): (Vec<f64>, Vec<f64>) = mirrored.map(|(x, f)| (-x, *f)).unzip();
            mx.extend_from_slice(xs);
            mf.extend_from_slice(fs);
            Self { xs: mx, fs: mf, lo, hi }
        } else {
            Self { xs: xs.to_vec(), fs: fs.to_vec(), lo, hi }
        }
    }

    /// Value and derivative at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let span = self.hi - self.lo;
        let slack = 1e-12 * span.max(1.0);
        if !(x >= self.lo - slack && x <= self.hi + slack) {
            return Err(Error::OutOfDomain(format!(
                "x = {x} outside interpolation range [{}, {}]",
                self.lo, self.hi
            )));
        }
        let n = self.xs.len();
        // Interval j with xs[j] <= x < xs[j+1], snapping to nearby nodes so
        // that evaluation at a node always uses the same stencil.
        let mut j = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        if j + 1 < n {
            let gap = self.xs[j + 1] - self.xs[j];
            if (self.xs[j + 1] - x).abs() <= 1e-9 * gap {
                j += 1;
            }
        }
        let start = j.saturating_sub(1).min(n - 4);
        let pts = &self.xs[start..start + 4];
        let vals = &self.fs[start..start + 4];
        let mut f = 0.0;
        let mut df = 0.0;
        for i in 0..4 {
            let mut li = 1.0;
            let mut dli = 0.0;
            for k in 0..4 {
                if k == i {
                    continue;
                }
                let denom = pts[i] - pts[k];
                let factor = (x - pts[k]) / denom;
                dli = dli * factor + li / denom;
                li *= factor;
            }
            f += vals[i] * li;
            df += vals[i] * dli;
        }
        Ok((f, df))
    }
}

/// Transforms a physical snapshot into similarity variables about
/// `(x0, T0)` on the given unit-ball grid:
/// `w = τ^{2/(p-1)} u(x0 + τ y)`, `∂_s w = τ^{2/(p-1)} (-a u + τ (∂_t u - y ∂_x u))`
/// with `τ = T0 - t` and `s = -log τ`.
pub fn to_selfsim(snap: &FieldSnapshot, x0: f64, t0: f64, grid: &Arc<YGrid>) -> Result<SelfSimFrame> {
    if grid.params() != snap.params() {
        return Err(Error::InvalidField("snapshot and grid use different models".into()));
    }
    let tau = t0 - snap.t();
    if !(tau > 0.0) {
        return Err(Error::OutOfDomain(format!("t = {} is not before T0 = {t0}", snap.t())));
    }
    let radial = snap.params().is_radial();
    if radial && x0 != 0.0 {
        return Err(Error::OutOfDomain("radial transforms are centred at the origin".into()));
    }
    let a = snap.params().scaling();
    let scale = pos_pow(tau, a);
    let u_interp = CubicInterp::new(snap.grid(), snap.u(), radial);
    let ut_interp = CubicInterp::new(snap.grid(), snap.ut(), radial);
    let mut w = Vec::with_capacity(grid.cells());
    let mut ws = Vec::with_capacity(grid.cells());
    for &y in grid.points() {
        let x = x0 + tau * y;
        let (u, ux) = u_interp.eval(x)?;
        let (ut, _) = ut_interp.eval(x)?;
        w.push(scale * u);
        ws.push(scale * (-a * u + tau * (ut - y * ux)));
    }
    SelfSimFrame::new(grid.clone(), w, ws, -tau.ln())
}

/// Inverse transform: the snapshot at `t = T0 - e^{-s}` on the physical
/// points `x0 + e^{-s} y` of the frame's grid.
pub fn from_selfsim(frame: &SelfSimFrame, x0: f64, t0: f64) -> Result<FieldSnapshot> {
    let params = *frame.params();
    let radial = params.is_radial();
    if radial && x0 != 0.0 {
        return Err(Error::OutOfDomain("radial transforms are centred at the origin".into()));
    }
    let tau = (-frame.s()).exp();
    let a = params.scaling();
    let inv_scale = pos_pow(tau, -a);
    let ys = frame.grid().points();
    let w_interp = CubicInterp::new(ys, frame.w(), radial);
    let mut grid = Vec::with_capacity(ys.len());
    let mut u = Vec::with_capacity(ys.len());
    let mut ut = Vec::with_capacity(ys.len());
    for ((&y, &w), &ws) in ys.iter().zip(frame.w()).zip(frame.ws()) {
        let x = x0 + tau * y;
        let (_, wy) = w_interp.eval(y)?;
        let uu = inv_scale * w;
        let ux = inv_scale * wy / tau;
        grid.push(x);
        u.push(uu);
        ut.push((inv_scale * ws + a * uu) / tau + y * ux);
    }
    FieldSnapshot::new(params, Arc::new(grid), u, ut, t0 - tau)
}

#[derive(Serialize, Deserialize)]
struct FrameHeader {
    params: ModelParams,
    cells: usize,
    #[serde(default)]
    stretch: f64,
    s: f64,
}

/// Formats a float with 17 significant digits.
pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a frame as `# {json header}` followed by `y,w,ws` rows.
pub fn write_frame_csv<W: Write>(frame: &SelfSimFrame, mut out: W) -> Result<()> {
    let header = FrameHeader {
        params: *frame.params(),
        cells: frame.grid().cells(),
        stretch: frame.grid().stretch(),
        s: frame.s(),
    };
    writeln!(out, "# {}", serde_json::to_string(&header)?)?;
    writeln!(out, "y,w,ws")?;
    for ((y, w), ws) in frame.grid().points().iter().zip(frame.w()).zip(frame.ws()) {
        writeln!(out, "{},{},{}", fmt17(*y), fmt17(*w), fmt17(*ws))?;
    }
    Ok(())
}

/// Reads a frame written by [`write_frame_csv`].
pub fn read_frame_csv<R: BufRead>(input: R) -> Result<SelfSimFrame> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty frame file".into()))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing JSON header line".into()))?;
    let header: FrameHeader = serde_json::from_str(json)?;
    let columns = lines.next().ok_or_else(|| Error::Format("missing column line".into()))??;
    if columns.trim() != "y,w,ws" {
        return Err(Error::Format(format!("unexpected columns '{columns}'")));
    }
    let grid = YGrid::stretched(&header.params, header.cells, header.stretch)?;
    let mut w = Vec::with_capacity(header.cells);
    let mut ws = Vec::with_capacity(header.cells);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("row {i}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(Error::Format(format!("row {i}: expected 3 columns")));
        }
        let expected = grid.points().get(i).copied().unwrap_or(f64::NAN);
        if vals[0] != expected {
            return Err(Error::Format(format!("row {i}: y = {} does not match grid {expected}", vals[0])));
        }
        w.push(vals[1]);
        ws.push(vals[2]);
    }
    SelfSimFrame::new(grid, w, ws, header.s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{lorentz_pair_scalar, Sign};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m13() -> ModelParams {
        ModelParams::new(1, 3.0).unwrap()
    }

    #[test]
    fn rho_examples() {
        let m = m13();
        assert_eq!(rho_weight(&m, &[0.0]).unwrap(), 1.0);
        assert_relative_eq!(rho_weight(&m, &[0.6]).unwrap(), 0.64, epsilon = 1e-15);
        assert_eq!(rho_weight(&m, &[1.0]).unwrap(), 0.0);
        assert!(rho_weight(&m, &[1.0001]).is_err());
    }

    #[test]
    fn weight_integral_matches_closed_form() {
        let m = m13();
        for cells in [8, 33, 400] {
            let g = YGrid::unit_ball(&m, cells).unwrap();
            let total: f64 = g.cell_weights().iter().sum();
            assert!((total - 4.0 / 3.0).abs() < 1e-10, "cells {cells}: {total}");
        }
        // N = 3, p = 2: α = 1, ∫_{|y|<1} (1-|y|²) dy = 4π (1/3 - 1/5).
        let m3 = ModelParams::new(3, 2.0).unwrap();
        let g = YGrid::unit_ball(&m3, 50).unwrap();
        let total: f64 = g.cell_weights().iter().sum();
        let exact = 4.0 * std::f64::consts::PI * (1.0 / 3.0 - 1.0 / 5.0);
        assert!((total - exact).abs() < 1e-10);
    }

    #[test]
    fn h_norm_examples() {
        let m = m13();
        let g = YGrid::unit_ball(&m, 200).unwrap();
        let one = SelfSimFrame::from_fn(g.clone(), 0.0, |_| (1.0, 0.0)).unwrap();
        assert_relative_eq!(h_norm(&one), (4.0f64 / 3.0).sqrt(), epsilon = 1e-10);
        assert_eq!(h_norm(&SelfSimFrame::zeros(g.clone(), 0.0)), 0.0);
        let f = SelfSimFrame::from_fn(g, 0.0, |y| (y.sin() + 0.3, y * y)).unwrap();
        assert_relative_eq!(h_norm(&f.scaled(2.0)), 2.0 * h_norm(&f), max_relative = 1e-14);
    }

    #[test]
    fn distance_examples() {
        let m = m13();
        let g = YGrid::unit_ball(&m, 200).unwrap();
        let k0 = SelfSimFrame::from_fn(g.clone(), 0.0, |_| (m.kappa0(), 0.0)).unwrap();
        let plus = ProfileParams::soliton(Sign::Plus, vec![0.0]).unwrap();
        let minus = ProfileParams::soliton(Sign::Minus, vec![0.0]).unwrap();
        assert!(h_distance_to_profile(&k0, &plus).unwrap() < 1e-14);
        assert_relative_eq!(h_distance_to_profile(&k0, &minus).unwrap(), 3.265986, epsilon = 1e-6);
        let prof = ProfileParams::new(Sign::Minus, vec![0.3], 0.1).unwrap();
        let exact = SelfSimFrame::from_profile(g, 0.0, &prof).unwrap();
        assert!(h_distance_to_profile(&exact, &prof).unwrap() < 1e-14);
    }

    /// Smooth-field norm converges at second order.
    #[test]
    fn h_norm_second_order() {
        let m = m13();
        // w = cos(y), ws = 0: ∫ (cos² + (1-y²) sin²)(1-y²) dy.
        let exact = crate::quadrature::integrate(
            |y| (y.cos().powi(2) + (1.0 - y * y) * y.sin().powi(2)) * (1.0 - y * y),
            -1.0,
            1.0,
            10,
            20,
        );
        let err = |cells| {
            let g = YGrid::unit_ball(&m, cells).unwrap();
            let f = SelfSimFrame::from_fn(g, 0.0, |y| (y.cos(), 0.0)).unwrap();
            (h_norm(&f).powi(2) - exact).abs()
        };
        let order = (err(100) / err(200)).log2();
        assert!(order > 1.9, "order {order}");
    }

    fn physical_grid(lo: f64, hi: f64, n: usize) -> Arc<Vec<f64>> {
        let h = (hi - lo) / (n - 1) as f64;
        Arc::new((0..n).map(|i| lo + i as f64 * h).collect())
    }

    #[test]
    fn ode_solution_is_constant_profile() {
        let m = m13();
        let grid = physical_grid(-2.0, 2.0, 801);
        let t = 0.5;
        let snap = FieldSnapshot::from_fn(m, grid, t, |x| {
            let (u, ut, _) = lorentz_pair_scalar(&m, Sign::Plus, 0.0, 0.0, 1.0, x, t);
            (u, ut)
        })
        .unwrap();
        let yg = YGrid::unit_ball(&m, 64).unwrap();
        let frame = to_selfsim(&snap, 0.1, 1.0, &yg).unwrap();
        for (w, ws) in frame.w().iter().zip(frame.ws()) {
            assert!((w - m.kappa0()).abs() < 1e-12);
            assert!(ws.abs() < 1e-10);
        }
        assert_relative_eq!(frame.s(), -(0.5f64.ln()), epsilon = 1e-15);
        let back = from_selfsim(&frame, 0.1, 1.0).unwrap();
        for (x, u) in back.grid().iter().zip(back.u()) {
            let exact = crate::profiles::ode_solution(&m, 1.0, 0.5).unwrap();
            assert!((u - exact).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn lorentz_soliton_is_fixed_by_the_transform() {
        let m = m13();
        let d = 0.5;
        let (x_star, t_star) = (0.2, 1.0);
        let yg = YGrid::unit_ball(&m, 64).unwrap();
        let prof = ProfileParams::soliton(Sign::Plus, vec![d]).unwrap();
        // Recentre about several points of the singular line T = T* + d (x - x*).
        for &(x0, t) in &[(0.2, 0.5), (0.5, 0.7), (-0.4, 0.3)] {
            let t0 = t_star + d * (x0 - x_star);
            let tau = t0 - t;
            let grid = physical_grid(x0 - 1.2 * tau, x0 + 1.2 * tau, 2001);
            let snap = FieldSnapshot::from_fn(m, grid.clone(), t, |x| {
                let (u, ut, _) = lorentz_pair_scalar(&m, Sign::Plus, d, x_star, t_star, x, t);
                (u, ut)
            })
            .unwrap();
            let frame = to_selfsim(&snap, x0, t0, &yg).unwrap();
            let expected = SelfSimFrame::from_profile(yg.clone(), frame.s(), &prof).unwrap();
            assert!(frame.sup_distance(&expected) < 1e-6, "x0 = {x0}");
            assert!(frame.ws().iter().all(|v| v.abs() < 1e-5));
            assert!(h_distance_to_profile(&frame, &prof).unwrap() < 1e-5);
        }
    }

    #[test]
    fn round_trip_reproduces_snapshot() {
        let m = m13();
        let yg = YGrid::unit_ball(&m, 2000).unwrap();
        let frame = SelfSimFrame::from_fn(yg.clone(), 1.3, |y| (1.0 + 0.3 * (2.0 * y).sin(), 0.2 * y.cos())).unwrap();
        let snap = from_selfsim(&frame, 0.4, 2.0).unwrap();
        let again = to_selfsim(&snap, 0.4, 2.0, &yg).unwrap();
        for i in 0..yg.cells() {
            assert!((again.w()[i] - frame.w()[i]).abs() < 1e-8);
            assert!((again.ws()[i] - frame.ws()[i]).abs() < 1e-8);
        }
        let back = from_selfsim(&again, 0.4, 2.0).unwrap();
        for i in 0..yg.cells() {
            assert!((back.u()[i] - snap.u()[i]).abs() < 1e-8 * snap.u()[i].abs().max(1.0));
            assert!((back.ut()[i] - snap.ut()[i]).abs() < 1e-8 * snap.ut()[i].abs().max(1.0));
        }
    }

    #[test]
    fn radial_transform_of_ode_solution() {
        let m = ModelParams::new(3, 2.0).unwrap();
        let grid = physical_grid(0.0, 2.0, 401);
        let snap = FieldSnapshot::from_fn(m, grid, 0.2, |_| {
            let tau: f64 = 0.8;
            (m.kappa0() / tau.powi(2), 2.0 * m.kappa0() / tau.powi(3))
        })
        .unwrap();
        let yg = YGrid::unit_ball(&m, 40).unwrap();
        let frame = to_selfsim(&snap, 0.0, 1.0, &yg).unwrap();
        assert!(frame.w().iter().all(|w| (w - m.kappa0()).abs() < 1e-12));
        assert!(frame.ws().iter().all(|w| w.abs() < 1e-10));
        assert!(to_selfsim(&snap, 0.1, 1.0, &yg).is_err());
    }

    #[test]
    fn transform_errors() {
        let m = m13();
        let grid = physical_grid(-0.5, 0.5, 101);
        let snap = FieldSnapshot::from_fn(m, grid, 0.0, |_| (1.0, 0.0)).unwrap();
        let yg = YGrid::unit_ball(&m, 16).unwrap();
        assert!(to_selfsim(&snap, 0.0, 0.0, &yg).is_err());
        // τ = 1 maps the ball onto (-1, 1), wider than the snapshot.
        assert!(to_selfsim(&snap, 0.0, 1.0, &yg).is_err());
        assert!(to_selfsim(&snap, 0.0, 0.4, &yg).is_ok());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = m13();
        let yg = YGrid::unit_ball(&m, 37).unwrap();
        let frame = SelfSimFrame::from_fn(yg, 0.123456789, |y| ((3.0 * y).exp() / 7.0, y.sin() * 1e-9)).unwrap();
        let mut buf = Vec::new();
        write_frame_csv(&frame, &mut buf).unwrap();
        let back = read_frame_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, frame);
        let mut again = Vec::new();
        write_frame_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn csv_rejects_mismatched_grid() {
        let text = "# {\"params\":{\"n\":1,\"p\":3.0},\"cells\":4,\"s\":0.0}\ny,w,ws\n0.1,1,1\n";
        assert!(read_frame_csv(std::io::Cursor::new(text)).is_err());
    }

    proptest! {
        #[test]
        fn h_form_is_nonnegative(coeffs in prop::collection::vec(-3.0f64..3.0, 6)) {
            let m = m13();
            let g = YGrid::unit_ball(&m, 40).unwrap();
            let f = SelfSimFrame::from_fn(g, 0.0, |y| {
                let w = coeffs[0] + coeffs[1] * y + coeffs[2] * (3.0 * y).sin();
                let ws = coeffs[3] + coeffs[4] * y * y + coeffs[5] * (2.0 * y).cos();
                (w, ws)
            }).unwrap();
            let n = h_norm(&f);
            prop_assert!(n >= 0.0);
            if coeffs.iter().any(|c| c.abs() > 1e-3) {
                prop_assert!(n > 0.0);
            }
        }
    }

    #[test]
    fn bump_shape_and_scaling() {
        let b = Bump::new(0.2, 0.5, 2.0).unwrap();
        assert_eq!(b.eval(0.2), 2.0);
        assert!(b.eval(0.7).abs() < 1e-14 && b.eval(0.71) == 0.0);
        assert!(b.eval(0.7 - 1e-4).abs() < 1e-9);
        assert!((b.eval(0.2 + 0.25) - 2.0 * 0.5).abs() < 1e-15);
        let g = YGrid::unit_ball(&ModelParams::new(1, 3.0).unwrap(), 100).unwrap();
        let scaled = b.with_h_norm(&g, 1e-2).unwrap();
        assert!((h_norm(&scaled.frame(&g, 0.0).unwrap()) - 1e-2).abs() < 1e-15);
        assert_eq!(Bump::seeded(3, (-0.5, 0.5), (0.1, 0.3)), Bump::seeded(3, (-0.5, 0.5), (0.1, 0.3)));
    }

    #[test]
    fn bump_derivative_and_physical_norm() {
        let b = Bump::new(0.2, 0.5, 2.0).unwrap();
        for x in [-0.25, 0.0, 0.1, 0.3, 0.6] {
            let fd = (b.eval(x + 1e-6) - b.eval(x - 1e-6)) / 2e-6;
            assert!((b.derivative(x) - fd).abs() < 1e-7, "{x}");
        }
        // ∫b² = 2w·A²·181/462, ∫b'² = A²·20/(7w)
        let exact = (4.0f64 * (2.0 * 0.5 * 181.0 / 462.0 + 20.0 / 3.5)).sqrt();
        let m = ModelParams::new(1, 3.0).unwrap();
        assert!((b.physical_h1_norm(&m) - exact).abs() < 1e-12);
    }
}
