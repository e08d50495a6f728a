//! Closed-form objects of the blow-up theory: model constants, the soliton
//! families, the explicit blow-up solution in similarity variables, the
//! Lorentz-boosted soliton in physical variables and the ODE solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `base^exponent` for a strictly positive base.
///
/// Every fractional power in the crate goes through here so that signs are
/// carried explicitly and a negative base is a logic error, not a NaN.
#[inline]
pub(crate) fn pos_pow(base: f64, exponent: f64) -> f64 {
    debug_assert!(base > 0.0, "pos_pow called with non-positive base {base}");
    base.powf(exponent)
}

/// `base^exponent` with a multiplication fast path for small integer
/// exponents.
#[inline]
pub(crate) fn fast_pow(base: f64, exponent: f64) -> f64 {
    match exponent {
        2.0 => base * base,
        3.0 => base * base * base,
        4.0 => {
            let b2 = base * base;
            b2 * b2
        }
        5.0 => {
            let b2 = base * base;
            b2 * b2 * base
        }
        _ => base.powf(exponent),
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dimension and exponent of `∂²u/∂t² = Δu + |u|^{p-1} u`, with the derived
/// constants every other module uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelParams {
    n: usize,
    p: f64,
    kappa0: f64,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: usize,
    p: f64,
}

impl TryFrom<RawModel> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        ModelParams::new(raw.n, raw.p)
    }
}

impl From<ModelParams> for RawModel {
    fn from(m: ModelParams) -> Self {
        RawModel { n: m.n, p: m.p }
    }
}

impl ModelParams {
    /// Validates `p > 1` and, for `n >= 2`, the subconformal bound
    /// `p < (n + 3) / (n - 1)`.
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidModel(format!("exponent p = {p} must exceed 1")));
        }
        if n >= 2 {
            let bound = (n as f64 + 3.0) / (n as f64 - 1.0);
            if p >= bound {
                return Err(Error::InvalidModel(format!(
                    "p = {p} is not subconformal in dimension {n} (need p < {bound})"
                )));
            }
        }
        let mass = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
        let kappa0 = pos_pow(mass, 1.0 / (p - 1.0));
        let alpha = 2.0 / (p - 1.0) - (n as f64 - 1.0) / 2.0;
        debug_assert!(alpha > 0.0);
        Ok(Self { n, p, kappa0, alpha })
    }

    /// Space dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(2(p+1)/(p-1)^2)^{1/(p-1)}`, the constant self-similar profile.
    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// Exponent of the weight `ρ(y) = (1 - |y|^2)^α`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `2/(p-1)`, the self-similar scaling exponent of `u`.
    pub fn scaling(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `2(p+1)/(p-1)^2`, the linear coefficient in the self-similar equation.
    pub fn mass(&self) -> f64 {
        2.0 * (self.p + 1.0) / ((self.p - 1.0) * (self.p - 1.0))
    }

    /// `(p+3)/(p-1)`, the damping coefficient on `∂_s w`.
    pub fn damping(&self) -> f64 {
        (self.p + 3.0) / (self.p - 1.0)
    }

    /// `2(p+1)/(p-1)`, coefficient of `y·∇w` in the non-divergence form of 𝓛.
    pub fn drift(&self) -> f64 {
        2.0 * (self.p + 1.0) / (self.p - 1.0)
    }

    /// `|w|^{p-1} w`.
    #[inline]
    pub fn nonlinearity(&self, w: f64) -> f64 {
        w * fast_pow(w.abs(), self.p - 1.0)
    }

    /// `|w|^{p+1}`.
    #[inline]
    pub(crate) fn abs_pow_p1(&self, w: f64) -> f64 {
        if w == 0.0 {
            0.0
        } else {
            fast_pow(w.abs(), self.p + 1.0)
        }
    }

    /// True when the model has radial N-D geometry (N >= 2).
    pub fn is_radial(&self) -> bool {
        self.n >= 2
    }

    fn check_dim(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::OutOfDomain(format!(
                "{what} has {} components, model dimension is {}",
                v.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

/// Modulation coordinates `(e, d, ν)` of the `κ*` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    e: Sign,
    d: Vec<f64>,
    nu: f64,
}

impl ProfileParams {
    /// Rejects `|d| >= 1` and `ν <= -1 + |d|`.
    pub fn new(e: Sign, d: Vec<f64>, nu: f64) -> Result<Self> {
        let dn = norm(&d);
        if !(dn < 1.0) {
            return Err(Error::InvalidProfile(format!("|d| = {dn} must be < 1")));
        }
        if !nu.is_finite() || nu <= -1.0 + dn {
            return Err(Error::InvalidProfile(format!(
                "nu = {nu} must exceed -1 + |d| = {}",
                -1.0 + dn
            )));
        }
        Ok(Self { e, d, nu })
    }

    /// Stationary soliton `e·κ(d)`.
    pub fn soliton(e: Sign, d: Vec<f64>) -> Result<Self> {
        Self::new(e, d, 0.0)
    }

    pub fn e(&self) -> Sign {
        self.e
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn with_sign(&self, e: Sign) -> Self {
        Self { e, ..self.clone() }
    }
}

fn check_unit_ball(y: &[f64], what: &str) -> Result<()> {
    let r = norm(y);
    if !(r < 1.0) {
        return Err(Error::OutOfDomain(format!("|{what}| = {r} must be < 1")));
    }
    Ok(())
}

/// The soliton `κ(d, y) = κ₀ (1-|d|²)^{1/(p-1)} / (1 + d·y)^{2/(p-1)}`.
pub fn kappa(params: &ModelParams, d: &[f64], y: &[f64]) -> Result<f64> {
    params.check_dim(d, "d")?;
    params.check_dim(y, "y")?;
    check_unit_ball(d, "d")?;
    check_unit_ball(y, "y")?;
    Ok(kappa_unchecked(params, d, y, 0.0))
}

/// `κ₁*(d, ν, y)` without validation; `1 + d·y + ν` must be positive.
#[inline]
pub(crate) fn kappa_unchecked(params: &ModelParams, d: &[f64], y: &[f64], nu: f64) -> f64 {
    let p = params.p();
    let d2 = dot(d, d);
    let denom = 1.0 + dot(d, y) + nu;
    params.kappa0() * pos_pow(1.0 - d2, 1.0 / (p - 1.0)) / pos_pow(denom, 2.0 / (p - 1.0))
}

/// The pair `(κ₁*, κ₂*)(d, ν, y)`; `κ₂* = ν ∂_ν κ₁*`.
pub fn kappa_star(params: &ModelParams, prof: &ProfileParams, y: &[f64]) -> Result<(f64, f64)> {
    params.check_dim(prof.d(), "d")?;
    params.check_dim(y, "y")?;
    check_unit_ball(y, "y")?;
    Ok(kappa_star_unchecked(params, prof.d(), prof.nu(), y))
}

#[inline]
pub(crate) fn kappa_star_unchecked(params: &ModelParams, d: &[f64], nu: f64, y: &[f64]) -> (f64, f64) {
    let k1 = kappa_unchecked(params, d, y, nu);
    let denom = 1.0 + dot(d, y) + nu;
    let k2 = -params.scaling() * nu * k1 / denom;
    (k1, k2)
}

/// Scalar-coordinate `κ*` for 1D and radial frames: `y` is the signed
/// coordinate (1D) or the radius (radial, where only `d = 0` is admissible).
#[inline]
pub(crate) fn kappa_star_scalar(params: &ModelParams, d: f64, nu: f64, y: f64) -> (f64, f64) {
    let p = params.p();
    let denom = 1.0 + d * y + nu;
    let k1 = params.kappa0() * pos_pow(1.0 - d * d, 1.0 / (p - 1.0)) / pos_pow(denom, 2.0 / (p - 1.0));
    let k2 = -params.scaling() * nu * k1 / denom;
    (k1, k2)
}

/// The explicit blow-up solution
/// `w₋(y, s) = κ₀ (1-|d₀|²)^{1/(p-1)} / (1 - eˢ + d₀·y)^{2/(p-1)}`,
/// defined for `s < log(1 - |d₀|)`.
pub fn w_minus(params: &ModelParams, d0: &[f64], y: &[f64], s: f64) -> Result<f64> {
    params.check_dim(d0, "d0")?;
    params.check_dim(y, "y")?;
    check_unit_ball(d0, "d0")?;
    check_unit_ball(y, "y")?;
    let bound = (1.0 - norm(d0)).ln();
    if !(s < bound) {
        return Err(Error::OutOfDomain(format!(
            "s = {s} must be below log(1 - |d0|) = {bound}"
        )));
    }
    Ok(w_minus_pair(params, d0, y, s).0)
}

/// `(w₋, ∂_s w₋)`; caller guarantees admissibility.
pub(crate) fn w_minus_pair(params: &ModelParams, d0: &[f64], y: &[f64], s: f64) -> (f64, f64) {
    // w₋(s) = κ₁*(d₀, -eˢ, y), so ∂_s w₋ = κ₂*(d₀, -eˢ, y).
    kappa_star_unchecked(params, d0, -s.exp(), y)
}

/// The Lorentz-boosted soliton in physical variables,
/// `u(x, t) = e κ₀ (1-|d|²)^{1/(p-1)} / (T* - t + d·(x - x*))^{2/(p-1)}`.
/// Its blow-up surface is the hyperplane `T(x) = T* + d·(x - x*)`.
pub fn lorentz_soliton(
    params: &ModelParams,
    e: Sign,
    d: &[f64],
    x_star: &[f64],
    t_star: f64,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    params.check_dim(d, "d")?;
    params.check_dim(x_star, "x*")?;
    params.check_dim(x, "x")?;
    check_unit_ball(d, "d")?;
    let shift: Vec<f64> = x.iter().zip(x_star).map(|(a, b)| a - b).collect();
    let denom = t_star - t + dot(d, &shift);
    if !(denom > 0.0) {
        return Err(Error::OutOfDomain(format!(
            "T* - t + d·(x - x*) = {denom} must be positive"
        )));
    }
    Ok(lorentz_pair_scalar(params, e, norm_signed(d), 0.0, t_star, dot_unit(d, &shift), t).0)
}

fn norm_signed(d: &[f64]) -> f64 {
    if d.len() == 1 {
        d[0]
    } else {
        norm(d)
    }
}

fn dot_unit(d: &[f64], v: &[f64]) -> f64 {
    if d.len() == 1 {
        v[0]
    } else {
        let n = norm(d);
        if n == 0.0 {
            0.0
        } else {
            dot(d, v) / n
        }
    }
}

/// `(u, ∂_t u, ∂_x u)` of the 1D Lorentz soliton (or its projection along
/// `d`); `denom = T* - t + d (x - x*)` must be positive.
#[inline]
pub(crate) fn lorentz_pair_scalar(
    params: &ModelParams,
    e: Sign,
    d: f64,
    x_star: f64,
    t_star: f64,
    x: f64,
    t: f64,
) -> (f64, f64, f64) {
    let a = params.scaling();
    let denom = t_star - t + d * (x - x_star);
    let amp = params.kappa0() * pos_pow(1.0 - d * d, 1.0 / (params.p() - 1.0));
    let u = e.value() * amp / pos_pow(denom, a);
    (u, a * u / denom, -a * d * u / denom)
}

/// The space-independent solution `κ₀ (T - t)^{-2/(p-1)}` of `u'' = u^p`.
pub fn ode_solution(params: &ModelParams, t_blowup: f64, t: f64) -> Result<f64> {
    if !(t < t_blowup) {
        return Err(Error::OutOfDomain(format!("t = {t} must be before T = {t_blowup}")));
    }
    Ok(params.kappa0() * pos_pow(t_blowup - t, -params.scaling()))
}
