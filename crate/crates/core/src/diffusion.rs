//! The reduced one-dimensional diffusion on the coexistence line.
//!
//! Applying the projection `m*(d, m)` to the rescaled chain and expanding to
//! second order turns the fast two-dimensional fluctuations into a slow
//! diffusion in `m*`. The first-order term cancels identically — the
//! projection is constant along the mean flow — leaving a drift built from
//! the second derivatives of `m*` against the covariance `a`, and a
//! variance built from the gradient of `m*` against `a`:
//!
//! ```text
//! beta  = ½ m*_dd a_dd + ½ m*_mm a_mm + m*_dm a_dm
//! alpha = (m*_d)² a_dd + 2 m*_d m*_m a_dm + (m*_m)² a_mm
//! ```
//!
//! `alpha` is the infinitesimal *variance*: paths follow
//! `dx = beta dt + sqrt(alpha) dw`. Time is in units of `N²` chain-time.
//!
//! On the line itself at `q = 1/2` these reduce to `beta(x) = x` and
//! `alpha(x) = 2x(1 - x)`.
//!
//! After the generalist dies the surviving specialists perform a
//! mean-reverting random walk on the `m = 0` edge with noise of order
//! `1/sqrt(N)`; [`simulate_dstar`] covers that fixation phase.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flow::mstar_raw;
use crate::model::moments_raw;
use crate::sim::Species;

/// Partial derivatives of the trajectory constant `C(d, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CPartials {
    pub d: f64,
    pub m: f64,
    pub dd: f64,
    pub mm: f64,
    pub dm: f64,
}

/// Partial derivatives of the projection `m*(d, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstarPartials {
    pub d: f64,
    pub m: f64,
    pub dd: f64,
    pub mm: f64,
    pub dm: f64,
}

/// Drift and infinitesimal variance of a reduced diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCoeffs {
    pub beta: f64,
    /// Infinitesimal variance; the noise coefficient is its square root.
    pub alpha: f64,
}

/// First and second partials of `C(d, m) = (-1 + 2m + d²)/m²`.
pub fn c_partials(d: f64, m: f64) -> Result<CPartials> {
    if m <= 0.0 {
        return Err(Error::UndefinedConstant);
    }
    let m2 = m * m;
    let m3 = m2 * m;
    let m4 = m2 * m2;
    Ok(CPartials {
        d: 2.0 * d / m2,
        m: 2.0 * (1.0 - d * d - m) / m3,
        dd: 2.0 / m2,
        mm: -2.0 * (3.0 - 3.0 * d * d - 2.0 * m) / m4,
        dm: -4.0 * d / m3,
    })
}

/// Partials of the projection via the chain rule through the trajectory
/// constant: `m* = g(C)` with `g(C) = A / (1 + sqrt(1 - A C))`,
/// `A = 4q(1-q)`, so
///
/// ```text
/// g'  = (m*)³ / (2(A - m*))
/// g'' = (m*)⁵ (3A - 2m*) / (4(A - m*)³)
/// ```
///
/// Nearly singular as `m*` approaches `A` (the radicand vanishes).
pub fn mstar_partials(d: f64, m: f64, q: f64) -> Result<MstarPartials> {
    let mstar = mstar_raw(d, m, q)?;
    let a = 4.0 * q * (1.0 - q);
    let gap = a - mstar;
    if gap.abs() < 1e-10 {
        return Err(Error::NearSingular { gap: gap.abs() });
    }
    let c = c_partials(d, m)?;
    let m3 = mstar.powi(3);
    let g1 = m3 / (2.0 * gap);
    let g2 = m3 * mstar * mstar * (3.0 * a - 2.0 * mstar) / (4.0 * gap.powi(3));
    Ok(MstarPartials {
        d: g1 * c.d,
        m: g1 * c.m,
        dd: g1 * c.dd + g2 * c.d * c.d,
        mm: g1 * c.mm + g2 * c.m * c.m,
        dm: g1 * c.dm + g2 * c.d * c.m,
    })
}

/// Drift and variance of the projected process at `(d, m)`.
///
/// The drift contains second-order terms only: the first-order term is the
/// directional derivative of `m*` along the mean flow, which vanishes
/// identically (see [`drift_cancellation_residual`]). Tiny negative
/// variances from roundoff are clamped to zero.
pub fn ito_coefficients(d: f64, m: f64, q: f64) -> Result<GammaCoeffs> {
    let p = mstar_partials(d, m, q)?;
    let a = moments_raw(d, m, q);
    let beta = 0.5 * p.dd * a.a_dd + 0.5 * p.mm * a.a_mm + p.dm * a.a_dm;
    let mut alpha = p.d * p.d * a.a_dd + 2.0 * p.d * p.m * a.a_dm + p.m * p.m * a.a_mm;
    if alpha < 0.0 {
        if alpha < -1e-9 {
            return Err(Error::Quadrature {
                location: m,
                reason: format!("negative variance {alpha} at ({d}, {m})"),
            });
        }
        alpha = 0.0;
    }
    Ok(GammaCoeffs { beta, alpha })
}

/// First-order drift term of the projected process,
/// `(∂m*/∂d) b_d + (∂m*/∂m) b_m`. Identically zero in exact arithmetic; the
/// returned value is pure roundoff.
pub fn drift_cancellation_residual(d: f64, m: f64, q: f64) -> Result<f64> {
    let p = mstar_partials(d, m, q)?;
    let a = moments_raw(d, m, q);
    Ok(p.d * a.b_d + p.m * a.b_m)
}

/// Reduced coefficients on the coexistence line, as functions of the
/// position `x ∈ (0, 1)`: [`ito_coefficients`] at `(2q - 1, x)`.
pub fn gamma_coefficients(x: f64, q: f64) -> Result<GammaCoeffs> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParams(format!("x = {x} not in (0, 1)")));
    }
    ito_coefficients(2.0 * q - 1.0, x, q)
}

/// The explicit symmetric-environment closed forms for the reduced
/// coefficients, evaluated verbatim.
///
/// Provided as a cross-check surface only: the variance agrees with
/// [`ito_coefficients`] on the line, but the drift disagrees off a common
/// normalization (e.g. 4 versus 1/2 at `(0, 0.5)`) and is not used
/// downstream. Undefined at `m = 1` where the radical vanishes.
pub fn symmetric_explicit_coeffs(d: f64, m: f64) -> Result<GammaCoeffs> {
    let r = -d * d + (m - 1.0) * (m - 1.0);
    if r <= 0.0 {
        return Err(Error::UndefinedAtOne);
    }
    let s = r.sqrt();
    let numerator = -m
        * (-2.0 * d.powi(4) - 2.0 * (m - 1.0) * (-2.0 + 3.0 * s + 3.0 * m)
            + d * d * (6.0 - 4.0 * m + 3.0 * m * s + 3.0 * m * m));
    let denominator = 2.0 * (-1.0 + d * d) * s * s.powi(3);
    let beta = numerator / denominator;
    let alpha = -m * (-2.0 + d * d + 2.0 * m) / (s + m).powi(4);
    Ok(GammaCoeffs { beta, alpha })
}

/// Where an Euler-Maruyama path of the coexistence diffusion was absorbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `x = 0`: the generalist died first.
    Zero,
    /// `x = 1`: the generalist fixed, both specialists died.
    One,
}

/// Euler-Maruyama path of the coexistence diffusion
/// `dx = beta dt + sqrt(alpha) dw`, absorbed at 0 and 1 by clamping.
///
/// Time is in `N²` chain-time units. Where the drift is large the step is
/// halved until `|beta| dt <= 1e-3`. Points within `1e-7` of 1 count as
/// absorbed: the coefficient map is singular at 1 and its radicand loses
/// all precision a decade earlier.
pub fn simulate_mstar<R: Rng + ?Sized>(
    x0: f64,
    q: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(Boundary, f64)> {
    if dt <= 0.0 {
        return Err(Error::InvalidStep(dt));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidParams(format!("x0 = {x0} not in [0, 1]")));
    }
    let mut x = x0;
    let mut t = 0.0;
    loop {
        if x <= 0.0 {
            return Ok((Boundary::Zero, t));
        }
        if x >= 1.0 - 1e-7 {
            return Ok((Boundary::One, t));
        }
        let GammaCoeffs { beta, alpha } = gamma_coefficients(x, q)?;
        let mut step = dt;
        while beta.abs() * step > 1e-3 {
            step *= 0.5;
        }
        let z: f64 = rng.sample(StandardNormal);
        x += beta * step + (alpha * step).sqrt() * z;
        t += step;
    }
}

/// Euler-Maruyama path of the specialist-only fixation diffusion on the
/// `m = 0` edge: mean reversion to `2q - 1` with small noise,
/// `dd = -(d - (2q-1)) dt + sqrt((2 - 2d(2q-1))/N) dw`, absorbed at ±1.
///
/// Returns the fixed species (`C` at +1, `H` at -1) and the absorption
/// time in `N²` chain-time units.
pub fn simulate_dstar<R: Rng + ?Sized>(
    d0: f64,
    q: f64,
    n: u32,
    dt: f64,
    rng: &mut R,
) -> Result<(Species, f64)> {
    if dt <= 0.0 {
        return Err(Error::InvalidStep(dt));
    }
    if !(-1.0..=1.0).contains(&d0) {
        return Err(Error::InvalidParams(format!("d0 = {d0} not in [-1, 1]")));
    }
    if n < 2 {
        return Err(Error::InvalidParams(format!("population size {n} < 2")));
    }
    let center = 2.0 * q - 1.0;
    let nf = f64::from(n);
    let mut d = d0;
    let mut t = 0.0;
    loop {
        if d >= 1.0 {
            return Ok((Species::C, t));
        }
        if d <= -1.0 {
            return Ok((Species::H, t));
        }
        let beta = -(d - center);
        let alpha = (2.0 - 2.0 * d * center).max(0.0);
        let z: f64 = rng.sample(StandardNormal);
        d += beta * dt + (alpha / nf * dt).sqrt() * z;
        t += dt;
    }
}
