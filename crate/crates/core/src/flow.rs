//! Deterministic mean flow on the state triangle and the projection onto
//! the coexistence line.
//!
//! The drift field pushes `d` monotonically towards `2q - 1` while `m`
//! moves along the conserved family of curves indexed by
//! `C(d, m) = (-1 + 2m + d²) / m²`; the value of `C` identifies the flow
//! line through a point, and the intersection of that line with
//! `Gamma = {d = 2q - 1}` has m-coordinate
//! `m* = 4q(1-q) / (1 + sqrt(1 - C · 4q(1-q)))`.

use crate::error::{Error, Result};
use crate::model::{moments_raw, ScaledPoint};

/// Fixed-step integration options.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// RK4 step size.
    pub dt: f64,
    /// Stop when `|d - (2q-1)| <= gamma_tol`.
    pub gamma_tol: f64,
    /// Hard time cap.
    pub t_max: f64,
    /// Stop within this distance of a corner of the triangle.
    pub corner_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt: 1e-3,
            gamma_tol: 1e-8,
            t_max: 1e3,
            corner_tol: 1e-6,
        }
    }
}

impl FlowOptions {
    fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.gamma_tol <= 0.0 || self.t_max <= 0.0 || self.corner_tol <= 0.0 {
            return Err(Error::Config("flow options must be positive".into()));
        }
        Ok(())
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GammaReached,
    CornerNeighborhood,
    TMax,
}

/// An integrated mean-flow trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(t, point)` at every accepted step, starting at `t = 0`.
    pub points: Vec<(f64, ScaledPoint)>,
    pub terminal_reason: StopReason,
}

impl Trajectory {
    pub fn terminal(&self) -> (f64, ScaledPoint) {
        *self.points.last().expect("trajectory is never empty")
    }
}

/// Mean drift `(b_d, b_m)` at a point of the triangle.
pub fn drift(y: ScaledPoint, q: f64) -> Result<(f64, f64)> {
    if !y.in_interior() {
        return Err(Error::SingularPoint);
    }
    let ms = moments_raw(y.d(), y.m(), q);
    Ok((ms.b_d, ms.b_m))
}

#[inline]
fn drift_raw(d: f64, m: f64, q: f64) -> (f64, f64) {
    let ms = moments_raw(d, m, q);
    (ms.b_d, ms.b_m)
}

/// Project a point that stepped marginally outside the triangle back onto
/// it. Excursions are bounded by `tol`; anything larger is an integration
/// failure reported by the caller.
fn clamp_to_triangle(d: f64, m: f64, tol: f64) -> Option<(f64, f64)> {
    let (mut d, mut m) = (d, m);
    if m < 0.0 {
        if m < -tol {
            return None;
        }
        m = 0.0;
    }
    for sign in [1.0, -1.0] {
        let excess = m + sign * d - 1.0;
        if excess > 0.0 {
            if excess > tol {
                return None;
            }
            d -= sign * excess / 2.0;
            m -= excess / 2.0;
        }
    }
    Some((d, m))
}

/// Integrate the mean flow from `y0` with classical fourth-order
/// Runge-Kutta at fixed step.
///
/// Stops on reaching the coexistence line (`gamma_tol`), a corner
/// neighbourhood (`corner_tol`), or `t_max`. Starting at a corner is an
/// error: corners are fixed points of the flow.
pub fn integrate_flow(y0: ScaledPoint, q: f64, opts: &FlowOptions) -> Result<Trajectory> {
    opts.validate()?;
    if y0.corner_distance() <= opts.corner_tol {
        return Err(Error::FixedPoint);
    }
    if !y0.in_interior() {
        return Err(Error::SingularPoint);
    }
    let d_gamma = 2.0 * q - 1.0;
    let mut points = vec![(0.0, y0)];
    let (mut d, mut m) = (y0.d(), y0.m());
    let mut t = 0.0;
    let h = opts.dt;

    let terminal_reason = loop {
        if (d - d_gamma).abs() <= opts.gamma_tol {
            break StopReason::GammaReached;
        }
        let here = ScaledPoint::new(d, m).expect("point stays in the triangle");
        if here.corner_distance() <= opts.corner_tol {
            break StopReason::CornerNeighborhood;
        }
        if t >= opts.t_max {
            break StopReason::TMax;
        }

        let (k1d, k1m) = drift_raw(d, m, q);
        let (k2d, k2m) = drift_raw(d + 0.5 * h * k1d, m + 0.5 * h * k1m, q);
        let (k3d, k3m) = drift_raw(d + 0.5 * h * k2d, m + 0.5 * h * k2m, q);
        let (k4d, k4m) = drift_raw(d + h * k3d, m + h * k3m, q);
        let nd = d + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        let nm = m + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        t += h;
        match clamp_to_triangle(nd, nm, 1e-12) {
            Some((cd, cm)) => {
                d = cd;
                m = cm;
            }
            None => {
                return Err(Error::LeftDomain { t, d: nd, m: nm });
            }
        }
        points.push((t, ScaledPoint::new(d, m).expect("clamped into the triangle")));
    };

    Ok(Trajectory {
        points,
        terminal_reason,
    })
}

/// The conserved quantity `C(d, m) = (-1 + 2m + d²) / m²` indexing flow
/// lines. Undefined on the `m = 0` edge.
pub fn trajectory_constant(y: ScaledPoint) -> Result<f64> {
    if y.m() <= 0.0 {
        return Err(Error::UndefinedConstant);
    }
    let (d, m) = (y.d(), y.m());
    Ok((-1.0 + 2.0 * m + d * d) / (m * m))
}

/// m-coordinate of the flow line through `(d, m)` at `d = 2q - 1`, via the
/// conserved quantity. Requires `|d| < 1` and `m > 0`.
pub(crate) fn mstar_raw(d: f64, m: f64, q: f64) -> Result<f64> {
    if m <= 0.0 {
        return Err(Error::UndefinedConstant);
    }
    let c = (-1.0 + 2.0 * m + d * d) / (m * m);
    let a = 4.0 * q * (1.0 - q);
    let mut radicand = 1.0 - c * a;
    if radicand < 0.0 {
        if radicand < -1e-12 {
            return Err(Error::ProjectionDomain { radicand });
        }
        radicand = 0.0;
    }
    Ok(a / (1.0 + radicand.sqrt()))
}

/// Closed-form projection of a starting point onto the coexistence line:
/// the `m*` value where the mean flow from `y0` meets `{d = 2q - 1}`.
/// Points already on the line are fixed by the projection.
pub fn project_mstar(y0: ScaledPoint, q: f64) -> Result<f64> {
    if !y0.in_interior() {
        return Err(Error::SingularPoint);
    }
    mstar_raw(y0.d(), y0.m(), q)
}

/// Numerical projection: terminal `m` of the integrated flow. Independent
/// of the closed form; used as its oracle.
pub fn project_mstar_numeric(y0: ScaledPoint, q: f64, opts: &FlowOptions) -> Result<f64> {
    let traj = integrate_flow(y0, q, opts)?;
    let (_, end) = traj.terminal();
    Ok(end.m())
}

/// Dissipation of the squared distance to the coexistence line along the
/// flow: `∇φ · b` for `φ(y) = (d - 2q + 1)²`. Nonpositive on the triangle,
/// zero exactly on the line.
pub fn lyapunov_dissipation(y: ScaledPoint, q: f64) -> Result<f64> {
    if !y.in_interior() {
        return Err(Error::SingularPoint);
    }
    let (d, m) = (y.d(), y.m());
    let w = 1.0 + d - 2.0 * q;
    Ok(-2.0 * (1.0 - m - d * d) * w * w / ((1.0 - d) * (1.0 + d)))
}

/// The attracting eigenvalue of the drift Jacobian at `(2q - 1, m)`:
/// `λ = -(1 - m - d²)/(1 - d²)` with `d = 2q - 1`. Strictly negative for
/// admissible `m`; the other eigenvalue is zero along the line.
pub fn gamma_jacobian_eigenvalue(m: f64, q: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParams(format!("m = {m} not in (0, 1)")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParams(format!("q = {q} not in (0, 1)")));
    }
    let d = 2.0 * q - 1.0;
    Ok(-(1.0 - m - d * d) / (1.0 - d * d))
}
