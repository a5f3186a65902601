//! Scale-function analytics for the reduced diffusion: extinction
//! probability, Green's function, and expected absorption time.
//!
//! For a diffusion `dx = beta(x) dt + sqrt(alpha(x)) dw` on `(0, 1)` the
//! natural scale function
//!
//! ```text
//! phi(x) = ∫ᶻ⁰˒ˣ exp{ ∫ᶻ⁰˒ʸ -2 beta(z)/alpha(z) dz } dy
//! ```
//!
//! (unique up to an affine map) turns hitting probabilities into ratios of
//! `phi`-increments, and the expected absorption time is the integral of
//! the Green's function
//!
//! ```text
//! G(x, y) = 2 (phi(1) - phi(x)) (phi(y) - phi(0)) / ((phi(1) - phi(0)) phi'(y) alpha(y)),  y <= x
//!           2 (phi(x) - phi(0)) (phi(1) - phi(y)) / ((phi(1) - phi(0)) phi'(y) alpha(y)),  y >  x
//! ```
//!
//! The speed-density factor is evaluated at the occupation point `y`; with
//! the constant coefficients `beta = 0`, `alpha = 1` this reproduces the
//! Brownian expected exit time `x(1 - x)`, which the tests pin down.
//!
//! Tables are built on a uniform grid over `[eps, 1 - eps]`; the integrand
//! `-2 beta/alpha` is integrable but unbounded at the ends, so the inner
//! integral is refined adaptively inside each cell while the outer
//! integrals stay composite Simpson on the grid. `phi` is extended to
//! `{0, 1}` by linear continuation of its boundary slopes.

use crate::diffusion::gamma_coefficients;
use crate::error::{Error, Result};
use crate::flow::project_mstar;
use crate::model::{Params, ScaledPoint};

/// Tabulated natural scale function of a reduced diffusion on `[lo, hi]`.
///
/// Besides `phi` itself the table keeps the upper tail
/// `tail[k] = phi(hi) - phi(grid[k])`, accumulated from the same per-cell
/// increments. Near the upper boundary the increments of `phi` can be many
/// orders below `phi` itself, so hitting probabilities and Green's-function
/// numerators are formed from the tails, never by subtracting large
/// `phi` values.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    grid: Vec<f64>,
    phi: Vec<f64>,
    tail: Vec<f64>,
    dphi: Vec<f64>,
    alpha: Vec<f64>,
    q: Option<f64>,
    lo: f64,
    hi: f64,
    h: f64,
}

impl ScaleTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphi(&self) -> &[f64] {
        &self.dphi
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Environment parameter the table was built for; `None` for injected
    /// coefficient functions.
    pub fn q(&self) -> Option<f64> {
        self.q
    }

    /// `phi` extended to 0 by linear continuation of the lower slope.
    pub fn phi0(&self) -> f64 {
        self.phi[0] - self.lo * self.dphi[0]
    }

    /// `phi` extended to 1 by linear continuation of the upper slope.
    pub fn phi1(&self) -> f64 {
        let n = self.grid.len() - 1;
        self.phi[n] + (1.0 - self.hi) * self.dphi[n]
    }

    /// `phi(x) - phi(0)`, accurate relative to itself near the lower end.
    pub fn lower_increment(&self, x: f64) -> f64 {
        (self.phi_at(x) - self.phi[0]) + self.lo * self.dphi[0]
    }

    /// `phi(1) - phi(x)`, accurate relative to itself near the upper end.
    pub fn upper_increment(&self, x: f64) -> f64 {
        self.tail_at(x) + (1.0 - self.hi) * self.dphi[self.grid.len() - 1]
    }

    /// `phi(1) - phi(0)`.
    pub fn full_increment(&self) -> f64 {
        let n = self.grid.len() - 1;
        (self.phi[n] - self.phi[0]) + self.lo * self.dphi[0] + (1.0 - self.hi) * self.dphi[n]
    }

    /// Upper tail `phi(hi) - phi(x)`: Hermite on the tail values (slopes
    /// are `-phi'`), linear continuation outside.
    fn tail_at(&self, x: f64) -> f64 {
        if x <= self.lo {
            return self.tail[0] + (self.lo - x) * self.dphi[0];
        }
        if x >= self.hi {
            let n = self.grid.len() - 1;
            return -(x - self.hi) * self.dphi[n];
        }
        let k = self.cell_of(x);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let t = (x - x0) / (x1 - x0);
        hermite(
            t,
            self.tail[k],
            self.tail[k + 1],
            -self.dphi[k] * self.h,
            -self.dphi[k + 1] * self.h,
        )
    }

    fn cell_of(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.h).floor() as isize;
        k.clamp(0, self.grid.len() as isize - 2) as usize
    }

    /// `phi(x)`: cubic Hermite inside `[lo, hi]` (the stored slopes are the
    /// exact integrand values), linear continuation outside.
    pub fn phi_at(&self, x: f64) -> f64 {
        if x <= self.lo {
            return self.phi[0] - (self.lo - x) * self.dphi[0];
        }
        if x >= self.hi {
            let n = self.grid.len() - 1;
            return self.phi[n] + (x - self.hi) * self.dphi[n];
        }
        let k = self.cell_of(x);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let t = (x - x0) / (x1 - x0);
        hermite(
            t,
            self.phi[k],
            self.phi[k + 1],
            self.dphi[k] * self.h,
            self.dphi[k + 1] * self.h,
        )
    }

    /// `phi'(x)`: derivative of the same Hermite cubic, clamped to the
    /// boundary slopes outside `[lo, hi]`.
    pub fn dphi_at(&self, x: f64) -> f64 {
        if x <= self.lo {
            return self.dphi[0];
        }
        if x >= self.hi {
            return self.dphi[self.grid.len() - 1];
        }
        let k = self.cell_of(x);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let t = (x - x0) / (x1 - x0);
        hermite_deriv(
            t,
            self.phi[k],
            self.phi[k + 1],
            self.dphi[k] * self.h,
            self.dphi[k + 1] * self.h,
        ) / self.h
    }

    /// Linear interpolation of the variance coefficient on the grid.
    fn alpha_at(&self, x: f64) -> f64 {
        if x <= self.lo {
            return self.alpha[0];
        }
        if x >= self.hi {
            return self.alpha[self.alpha.len() - 1];
        }
        let k = self.cell_of(x);
        let t = (x - self.grid[k]) / self.h;
        self.alpha[k] * (1.0 - t) + self.alpha[k + 1] * t
    }
}

fn hermite(t: f64, p0: f64, p1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * p1
        + (t3 - t2) * m1
}

fn hermite_deriv(t: f64, p0: f64, p1: f64, m0: f64, m1: f64) -> f64 {
    let t2 = t * t;
    (6.0 * t2 - 6.0 * t) * p0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * p1
        + (3.0 * t2 - 2.0 * t) * m1
}

/// Adaptive Simpson refinement of `∫ f` over `[a, b]`.
///
/// `tol` is the accepted error per refined panel (not halved on descent;
/// the panel count near an integrable singularity stays logarithmic and
/// the accumulated error stays a small multiple of `tol`).
fn adaptive_simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_step(f, a, b, fa, fb, fm, whole, tol, 30)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let l = adaptive_step(f, a, m, fa, fm, flm, left, tol, depth - 1)?;
        let r = adaptive_step(f, m, b, fm, fb, frm, right, tol, depth - 1)?;
        Ok(l + r)
    }
}

/// Build the scale table for the reduced coexistence diffusion at `q`.
///
/// `n_grid >= 100` cells on `[eps, 1 - eps]` with `eps ∈ (0, 0.01]`; the
/// inner integral runs from the reference point `z0 = 1/2` (its choice only
/// shifts `phi` affinely). Coefficient singularities inside the interval
/// surface as quadrature errors with their location.
pub fn build_scale_table(q: f64, n_grid: usize, eps: f64) -> Result<ScaleTable> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParams(format!("q = {q} not in (0, 1)")));
    }
    build_scale_table_from(
        move |x: f64| gamma_coefficients(x, q).map(|g| (g.beta, g.alpha)),
        n_grid,
        eps,
        Some(q),
    )
}

/// Build a scale table for separate coefficient functions; the injection
/// point for oracle coefficients in tests and cross-checks.
pub fn build_scale_table_with<B, A>(
    beta: B,
    alpha: A,
    n_grid: usize,
    eps: f64,
    q: Option<f64>,
) -> Result<ScaleTable>
where
    B: Fn(f64) -> Result<f64>,
    A: Fn(f64) -> Result<f64>,
{
    build_scale_table_from(move |x| Ok((beta(x)?, alpha(x)?)), n_grid, eps, q)
}

fn build_scale_table_from<C>(coeffs: C, n_grid: usize, eps: f64, q: Option<f64>) -> Result<ScaleTable>
where
    C: Fn(f64) -> Result<(f64, f64)>,
{
    if n_grid < 100 {
        return Err(Error::Config(format!("n_grid = {n_grid} < 100")));
    }
    if !(eps > 0.0 && eps <= 0.01) {
        return Err(Error::Config(format!("eps = {eps} not in (0, 0.01]")));
    }
    let n = n_grid + n_grid % 2; // even, so the grid midpoint is z0 = 1/2
    let lo = eps;
    let hi = 1.0 - eps;
    let h = (hi - lo) / n as f64;
    let mut grid: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    grid[n] = hi;

    let f = |z: f64| -> Result<f64> {
        let (b, a) = coeffs(z)?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Quadrature {
                location: z,
                reason: format!("variance coefficient {a} is not positive"),
            });
        }
        let v = -2.0 * b / a;
        if !v.is_finite() {
            return Err(Error::Quadrature {
                location: z,
                reason: "log-slope integrand is not finite".into(),
            });
        }
        Ok(v)
    };

    // Cumulative inner integral from the central reference point.
    let i0 = n / 2;
    let mut inner = vec![0.0f64; n + 1];
    for k in i0..n {
        inner[k + 1] = inner[k] + adaptive_simpson(&f, grid[k], grid[k + 1], 1e-11)?;
    }
    for k in (0..i0).rev() {
        inner[k] = inner[k + 1] - adaptive_simpson(&f, grid[k], grid[k + 1], 1e-11)?;
    }

    // phi by Simpson per cell; midpoint slopes need the inner integral there.
    let mut increments = vec![0.0f64; n];
    let mut phi = vec![0.0f64; n + 1];
    let mut tail = vec![0.0f64; n + 1];
    let mut dphi = vec![0.0f64; n + 1];
    dphi[0] = inner[0].exp();
    for k in 0..n {
        let mid = 0.5 * (grid[k] + grid[k + 1]);
        let inner_mid = inner[k] + adaptive_simpson(&f, grid[k], mid, 1e-11)?;
        let g0 = inner[k].exp();
        let gm = inner_mid.exp();
        let g1 = inner[k + 1].exp();
        increments[k] = h / 6.0 * (g0 + 4.0 * gm + g1);
        phi[k + 1] = phi[k] + increments[k];
        dphi[k + 1] = g1;
    }
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + increments[k];
    }

    for k in 0..n {
        if !(increments[k] > 0.0) || !phi[k + 1].is_finite() {
            return Err(Error::Quadrature {
                location: grid[k + 1],
                reason: "scale function is not strictly increasing".into(),
            });
        }
    }

    let mut alpha_vals = Vec::with_capacity(n + 1);
    for &x in &grid {
        alpha_vals.push(coeffs(x)?.1);
    }

    Ok(ScaleTable {
        grid,
        phi,
        tail,
        dphi,
        alpha: alpha_vals,
        q,
        lo,
        hi,
        h,
    })
}

/// Probability that the diffusion started at `x` is absorbed at 0 (the
/// generalist dies first): `(phi(1) - phi(x)) / (phi(1) - phi(0))`,
/// clamped to `[0, 1]`. Decreasing in `x`, with `p(0) = 1` and `p(1) = 0`.
pub fn hit_prob_pm(x: f64, table: &ScaleTable) -> f64 {
    (table.upper_increment(x) / table.full_increment()).clamp(0.0, 1.0)
}

/// Green's function of the absorbed diffusion: expected occupation density
/// at `y` before absorption, started from `x`. Nonnegative and continuous
/// at `y = x`.
pub fn greens(x: f64, y: f64, table: &ScaleTable) -> f64 {
    let denom = table.full_increment();
    let speed = table.dphi_at(y) * table.alpha_at(y);
    let g = if y <= x {
        2.0 * table.upper_increment(x) * table.lower_increment(y) / (denom * speed)
    } else {
        2.0 * table.lower_increment(x) * table.upper_increment(y) / (denom * speed)
    };
    g.max(0.0)
}

/// Expected absorption time from `x`: `∫ G(x, y) dy` by composite Simpson
/// over the table grid, splitting the cell containing `x` at the kink. The
/// two boundary cells are refined adaptively: where a variance coefficient
/// vanishes at an endpoint the integrand steepens like `1/y` there.
pub fn expected_tau(x: f64, table: &ScaleTable) -> f64 {
    let g = |y: f64| greens(x, y, table);
    let simpson3 = |a: f64, b: f64| (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
    let adaptive = |a: f64, b: f64| {
        adaptive_simpson(&|y: f64| Ok(g(y)), a, b, 1e-10).expect("integrand is total")
    };
    let n = table.grid.len() - 1;
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (table.grid[k], table.grid[k + 1]);
        if a < x && x < b {
            total += simpson3(a, x) + simpson3(x, b);
        } else if k == 0 || k == n - 1 {
            total += adaptive(a, b);
        } else {
            total += simpson3(a, b);
        }
    }
    total.max(0.0)
}

/// Extinction report for a chain started at a scaled point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AbsorptionReport {
    /// Projection of the start onto the coexistence line.
    pub x_start: f64,
    /// Probability the generalist dies first.
    pub p_m: f64,
    /// Expected first-extinction time in line-diffusion units.
    pub expected_tau_gamma_units: f64,
    /// The same time in chain-time units, `N²` times larger.
    pub expected_tau_chain_units: f64,
    pub q: f64,
    pub n: u32,
}

/// First-extinction probability and expected time for a chain started at
/// `y0`: project onto the coexistence line, then read the table.
pub fn extinction_report(y0: ScaledPoint, p: Params, table: &ScaleTable) -> Result<AbsorptionReport> {
    if let Some(tq) = table.q() {
        if (tq - p.q).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "table was built for q = {tq}, parameters have q = {}",
                p.q
            )));
        }
    }
    let x = project_mstar(y0, p.q)?;
    let x_eval = x.clamp(table.lo(), table.hi());
    let tau = expected_tau(x_eval, table);
    let n2 = f64::from(p.n) * f64::from(p.n);
    Ok(AbsorptionReport {
        x_start: x,
        p_m: hit_prob_pm(x, table),
        expected_tau_gamma_units: tau,
        expected_tau_chain_units: tau * n2,
        q: p.q,
        n: p.n,
    })
}
