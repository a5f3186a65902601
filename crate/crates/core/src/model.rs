//! Exact state space, jump rates, and conditional moments of the
//! three-species Moran chain, plus their diffusion rescaling.
//!
//! The population holds `C + H + M = N` individuals. Each replacement event
//! kills a uniformly chosen individual and replaces it with a species drawn
//! in proportion to fitness in the current environment state (`C` fit only
//! in the first state, `H` only in the second, `M` half-fit in both). With
//! the environment i.i.d. across events, the chain in
//! `(D, M) = (C - H, M)` coordinates is Markov with six jump kinds and one
//! hold kind whose probabilities sum to exactly 1 per event: a unit-rate
//! jump chain.
//!
//! Absorbing states are `(N, 0)`, `(-N, 0)` and `(0, N)`. The jump-rate
//! expressions have vanishing denominators at `(±N, 0)`, so absorbing
//! states are detected first and never evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Population size, at least 2.
    pub n: u32,
    /// Probability of the environment state favouring `C`, strictly in (0, 1).
    pub q: f64,
}

impl Params {
    pub fn new(n: u32, q: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("population size {n} < 2")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParams(format!("q = {q} not in (0, 1)")));
        }
        Ok(Params { n, q })
    }

    #[inline]
    pub(crate) fn n_i64(&self) -> i64 {
        i64::from(self.n)
    }
}

/// Species counts `(C, H, M)` with `C + H + M = N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub c: u32,
    pub h: u32,
    pub m: u32,
}

impl Composition {
    pub fn new(c: u32, h: u32, m: u32, p: Params) -> Result<Self> {
        let total = u64::from(c) + u64::from(h) + u64::from(m);
        if total != u64::from(p.n) {
            return Err(Error::InvalidState(format!(
                "counts ({c}, {h}, {m}) sum to {total}, expected N = {}",
                p.n
            )));
        }
        Ok(Composition { c, h, m })
    }
}

/// Chain state in `(D, M) = (C - H, M)` coordinates.
///
/// Valid states satisfy `|D| <= N`, `0 <= M <= N`, `M + |D| <= N` and the
/// parity constraint `D + M ≡ N (mod 2)` (both sides are congruent to
/// `C + H + M`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DMState {
    pub d: i64,
    pub m: i64,
}

impl DMState {
    pub fn new(d: i64, m: i64, p: Params) -> Result<Self> {
        let s = DMState { d, m };
        s.validate(p)?;
        Ok(s)
    }

    pub fn validate(&self, p: Params) -> Result<()> {
        let n = p.n_i64();
        if self.m < 0 || self.m > n || self.d.abs() > n || self.m + self.d.abs() > n {
            return Err(Error::InvalidState(format!(
                "(D, M) = ({}, {}) outside the lattice for N = {n}",
                self.d, self.m
            )));
        }
        if (self.d + self.m - n) % 2 != 0 {
            return Err(Error::InvalidState(format!(
                "(D, M) = ({}, {}) violates parity D + M ≡ N (mod 2) for N = {n}",
                self.d, self.m
            )));
        }
        Ok(())
    }

    /// True at the three fixation states `(N, 0)`, `(-N, 0)`, `(0, N)`.
    #[inline]
    pub fn is_absorbing(&self, p: Params) -> bool {
        let n = p.n_i64();
        (self.m == 0 && self.d.abs() == n) || self.m == n
    }

    /// The rescaled point `(D/N, M/N)`.
    pub fn scaled(&self, p: Params) -> ScaledPoint {
        let n = f64::from(p.n);
        ScaledPoint {
            d: self.d as f64 / n,
            m: self.m as f64 / n,
        }
    }
}

/// The seven event kinds of the chain, named replacement-over-death.
/// `COverM` means a `C` individual is born and an `M` individual dies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpKind {
    /// `Δ(D, M) = (1, -1)`
    COverM,
    /// `Δ(D, M) = (2, 0)`
    COverH,
    /// `Δ(D, M) = (-1, -1)`
    HOverM,
    /// `Δ(D, M) = (-2, 0)`
    HOverC,
    /// `Δ(D, M) = (1, 1)`
    MOverH,
    /// `Δ(D, M) = (-1, 1)`
    MOverC,
    /// `Δ(D, M) = (0, 0)`: the replacement matches the death.
    Hold,
}

impl JumpKind {
    /// The six state-changing kinds, in the fixed order used by [`RateVector`].
    pub const JUMPS: [JumpKind; 6] = [
        JumpKind::COverM,
        JumpKind::COverH,
        JumpKind::HOverM,
        JumpKind::HOverC,
        JumpKind::MOverH,
        JumpKind::MOverC,
    ];

    /// State change `(ΔD, ΔM)`.
    #[inline]
    pub fn delta(self) -> (i64, i64) {
        match self {
            JumpKind::COverM => (1, -1),
            JumpKind::COverH => (2, 0),
            JumpKind::HOverM => (-1, -1),
            JumpKind::HOverC => (-2, 0),
            JumpKind::MOverH => (1, 1),
            JumpKind::MOverC => (-1, 1),
            JumpKind::Hold => (0, 0),
        }
    }
}

/// Per-event probabilities of the seven outcomes at one state.
///
/// All entries are nonnegative and sum to exactly 1 (within roundoff): the
/// birth rates sum to 1 over species and so do the death rates, so the
/// seven products partition the unit event rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateVector {
    jumps: [f64; 6],
    hold: f64,
}

impl RateVector {
    #[inline]
    pub fn rate(&self, k: JumpKind) -> f64 {
        match k {
            JumpKind::COverM => self.jumps[0],
            JumpKind::COverH => self.jumps[1],
            JumpKind::HOverM => self.jumps[2],
            JumpKind::HOverC => self.jumps[3],
            JumpKind::MOverH => self.jumps[4],
            JumpKind::MOverC => self.jumps[5],
            JumpKind::Hold => self.hold,
        }
    }

    #[inline]
    pub fn hold(&self) -> f64 {
        self.hold
    }

    /// Sum of the six state-changing rates.
    #[inline]
    pub fn total_jump_rate(&self) -> f64 {
        self.jumps.iter().sum()
    }

    /// The six `(kind, rate)` pairs in [`JumpKind::JUMPS`] order.
    pub fn iter(&self) -> impl Iterator<Item = (JumpKind, f64)> + '_ {
        JumpKind::JUMPS.iter().copied().zip(self.jumps.iter().copied())
    }
}

/// A point `(d, m)` of the rescaled state triangle
/// `S = {|d| <= 1, 0 <= m <= 1, m + d <= 1, m - d <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledPoint {
    d: f64,
    m: f64,
}

impl ScaledPoint {
    pub fn new(d: f64, m: f64) -> Result<Self> {
        if !(d.is_finite() && m.is_finite()) || m < 0.0 || m + d > 1.0 || m - d > 1.0 {
            return Err(Error::InvalidState(format!(
                "({d}, {m}) is outside the state triangle"
            )));
        }
        Ok(ScaledPoint { d, m })
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.d
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.m
    }

    /// True away from the singular edges `|d| = 1`.
    #[inline]
    pub fn in_interior(&self) -> bool {
        self.d.abs() < 1.0
    }

    /// Euclidean distance to the nearest corner `(±1, 0)`, `(0, 1)`.
    pub fn corner_distance(&self) -> f64 {
        let corners = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0)];
        corners
            .iter()
            .map(|&(cd, cm)| ((self.d - cd).powi(2) + (self.m - cm).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Drift vector and covariance matrix of the rescaled process at a point:
/// `b = (b_d, b_m)` and symmetric `a = [[a_dd, a_dm], [a_dm, a_mm]]`.
///
/// The covariance is consumed directly everywhere downstream; no matrix
/// square root is ever materialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub b_d: f64,
    pub b_m: f64,
    pub a_dd: f64,
    pub a_mm: f64,
    pub a_dm: f64,
}

/// Convert species counts to `(D, M)` coordinates.
pub fn composition_to_dm(c: Composition, p: Params) -> Result<DMState> {
    Composition::new(c.c, c.h, c.m, p)?;
    DMState::new(i64::from(c.c) - i64::from(c.h), i64::from(c.m), p)
}

/// Recover species counts from `(D, M)`: `C = (N - M + D)/2`, `H = (N - M - D)/2`.
pub fn dm_to_composition(s: DMState, p: Params) -> Result<Composition> {
    s.validate(p)?;
    let n = p.n_i64();
    let c2 = n - s.m + s.d;
    let h2 = n - s.m - s.d;
    debug_assert!(c2 % 2 == 0 && h2 % 2 == 0, "parity already validated");
    Ok(Composition {
        c: u32::try_from(c2 / 2).expect("validated range"),
        h: u32::try_from(h2 / 2).expect("validated range"),
        m: u32::try_from(s.m).expect("validated range"),
    })
}

/// Per-event probabilities of the seven outcomes at state `s`.
///
/// At an absorbing state every jump rate is 0 and the hold rate is 1; the
/// rate expressions themselves are never evaluated there (their denominators
/// vanish at `(±N, 0)`).
pub fn jump_rates(s: DMState, p: Params) -> Result<RateVector> {
    s.validate(p)?;
    if s.is_absorbing(p) {
        return Ok(RateVector {
            jumps: [0.0; 6],
            hold: 1.0,
        });
    }
    let q = p.q;
    let n = f64::from(p.n);
    let d = s.d as f64;
    let m = s.m as f64;
    let a = n + d - m; // 2C
    let b = n - d - m; // 2H
    let np = n + d;
    let nm = n - d;
    let w = n + d - 2.0 * q * d; // q(N-D) + (1-q)(N+D)

    let jumps = [
        q * m * a / (n * np),
        q * a * b / (2.0 * n * np),
        (1.0 - q) * m * b / (n * nm),
        (1.0 - q) * a * b / (2.0 * n * nm),
        m * b * w / (2.0 * n * np * nm),
        m * a * w / (2.0 * n * np * nm),
    ];
    let hold = q * (a * a + 2.0 * m * m) / (2.0 * n * np)
        + (1.0 - q) * (b * b + 2.0 * m * m) / (2.0 * n * nm);
    Ok(RateVector { jumps, hold })
}

/// Conditional mean change `(E[ΔD | s], E[ΔM | s])` per event.
///
/// Vanishes identically on the coexistence line `D = N(2q - 1)` and at the
/// absorbing states (where it is defined as zero).
pub fn dm_drift(s: DMState, p: Params) -> Result<(f64, f64)> {
    s.validate(p)?;
    if s.is_absorbing(p) {
        return Ok((0.0, 0.0));
    }
    let q = p.q;
    let n = f64::from(p.n);
    let d = s.d as f64;
    let m = s.m as f64;
    let w = n + d - 2.0 * q * n;
    let denom = n * (n + d) * (n - d);
    Ok((
        -(n * n - n * m - d * d) * w / denom,
        d * m * w / denom,
    ))
}

/// Conditional second moments `(E[(ΔD)² | s], E[(ΔM)² | s], E[ΔD ΔM | s])`
/// per event, in closed form.
///
/// The expressions are validated against direct summation over the rate
/// table ([`moments_from_rates`]) to full double precision.
pub fn dm_second_moments(s: DMState, p: Params) -> Result<(f64, f64, f64)> {
    s.validate(p)?;
    if s.is_absorbing(p) {
        return Ok((0.0, 0.0, 0.0));
    }
    let q = p.q;
    let n = f64::from(p.n);
    let d = s.d as f64;
    let m = s.m as f64;
    let fp = 1.0 / (n * (n + d));
    let fm = 1.0 / (n * (n - d));
    let dd = q * (m * d + 2.0 * n * n - 2.0 * d * d - 2.0 * m * n) * fp
        + (1.0 - q) * (-m * d + 2.0 * n * n - 2.0 * d * d - 2.0 * m * n) * fm;
    let mm = q * m * (2.0 * n + d - 2.0 * m) * fp + (1.0 - q) * m * (2.0 * n - d - 2.0 * m) * fm;
    let dm = q * m * (m - n - 2.0 * d) * fp + (1.0 - q) * m * (n - 2.0 * d - m) * fm;
    Ok((dd, mm, dm))
}

/// Independent moment oracle: sums `rate × jump` and `rate × jump ⊗ jump`
/// over the rate table. Agrees with [`dm_drift`] and [`dm_second_moments`]
/// to within accumulated roundoff.
pub fn moments_from_rates(s: DMState, p: Params) -> Result<((f64, f64), (f64, f64, f64))> {
    let rates = jump_rates(s, p)?;
    let mut drift = (0.0, 0.0);
    let mut second = (0.0, 0.0, 0.0);
    for (kind, rate) in rates.iter() {
        let (dd, dm) = kind.delta();
        let (dd, dm) = (dd as f64, dm as f64);
        drift.0 += rate * dd;
        drift.1 += rate * dm;
        second.0 += rate * dd * dd;
        second.1 += rate * dm * dm;
        second.2 += rate * dd * dm;
    }
    Ok((drift, second))
}

/// Drift and covariance of the rescaled process at a scaled point.
///
/// With `y = (D/N, M/N)`, the entries satisfy `b(y) = E[Δ(D, M) | Y]` and
/// `a(y) = E[Δ(D, M) ⊗ Δ(D, M) | Y]` evaluated at the scaled coordinates
/// (equivalently `N · E[Δ(d, m)]` and `N² · E[Δ(d, m) ⊗ Δ(d, m)]` per
/// event).
pub fn scaled_moments(y: ScaledPoint, q: f64) -> Result<MomentSet> {
    if !y.in_interior() {
        return Err(Error::SingularPoint);
    }
    Ok(moments_raw(y.d, y.m, q))
}

/// Unchecked evaluation of the scaled moment formulas. Requires `|d| < 1`;
/// used internally where the coexistence line of a biased environment runs
/// outside the state triangle.
pub(crate) fn moments_raw(d: f64, m: f64, q: f64) -> MomentSet {
    debug_assert!(d.abs() < 1.0);
    let op = 1.0 + d;
    let om = 1.0 - d;
    let w = 1.0 + d - 2.0 * q;
    let b_d = -(1.0 - m - d * d) * w / (op * om);
    let b_m = d * m * w / (op * om);
    let a_dd = q * (m * d + 2.0 - 2.0 * d * d - 2.0 * m) / op
        + (1.0 - q) * (-m * d + 2.0 - 2.0 * d * d - 2.0 * m) / om;
    let a_mm = q * m * (2.0 + d - 2.0 * m) / op + (1.0 - q) * m * (2.0 - d - 2.0 * m) / om;
    let a_dm = q * m * (-1.0 - 2.0 * d + m) / op + (1.0 - q) * m * (1.0 - 2.0 * d - m) / om;
    MomentSet {
        b_d,
        b_m,
        a_dd,
        a_mm,
        a_dm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn params(n: u32, q: f64) -> Params {
        Params::new(n, q).unwrap()
    }

    #[test]
    fn composition_round_trip() {
        let p = params(4, 0.5);
        let c = Composition::new(3, 1, 0, p).unwrap();
        let s = composition_to_dm(c, p).unwrap();
        assert_eq!((s.d, s.m), (2, 0));
        assert_eq!(dm_to_composition(s, p).unwrap(), c);
    }

    #[test]
    fn m_fixation_corner_maps_to_all_m() {
        let p = params(7, 0.3);
        let s = DMState::new(0, 7, p).unwrap();
        let c = dm_to_composition(s, p).unwrap();
        assert_eq!((c.c, c.h, c.m), (0, 0, 7));
    }

    #[test]
    fn parity_violation_rejected() {
        let p = params(4, 0.5);
        assert!(matches!(
            DMState::new(1, 2, p),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn range_violation_rejected() {
        let p = params(4, 0.5);
        assert!(DMState::new(3, 3, p).is_err());
        assert!(DMState::new(-5, 1, p).is_err());
        assert!(DMState::new(0, -2, p).is_err());
    }

    #[test]
    fn rates_at_reference_state() {
        // N = 4, (D, M) = (0, 2), q = 1/2: direct evaluation of the table.
        let p = params(4, 0.5);
        let s = DMState::new(0, 2, p).unwrap();
        let r = jump_rates(s, p).unwrap();
        assert_abs_diff_eq!(r.rate(JumpKind::COverM), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rate(JumpKind::COverH), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rate(JumpKind::HOverM), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rate(JumpKind::HOverC), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rate(JumpKind::MOverH), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rate(JumpKind::MOverC), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(r.hold(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn absorbing_state_holds() {
        let p = params(6, 0.4);
        for s in [
            DMState::new(6, 0, p).unwrap(),
            DMState::new(-6, 0, p).unwrap(),
            DMState::new(0, 6, p).unwrap(),
        ] {
            let r = jump_rates(s, p).unwrap();
            assert_eq!(r.total_jump_rate(), 0.0);
            assert_eq!(r.hold(), 1.0);
        }
    }

    #[test]
    fn symmetric_environment_rate_symmetry() {
        // q = 1/2 and D = 0: C-side and H-side rates coincide.
        let p = params(4, 0.5);
        let s = DMState::new(0, 2, p).unwrap();
        let r = jump_rates(s, p).unwrap();
        assert_eq!(r.rate(JumpKind::COverM), r.rate(JumpKind::HOverM));
        assert_eq!(r.rate(JumpKind::COverH), r.rate(JumpKind::HOverC));
    }

    #[test]
    fn drift_examples() {
        // Symmetric environment, D = 0: no drift.
        let p = params(10, 0.5);
        let s = DMState::new(0, 4, p).unwrap();
        assert_eq!(dm_drift(s, p).unwrap(), (0.0, 0.0));

        // N = 4, (0, 2), q = 3/4.
        let p = params(4, 0.75);
        let s = DMState::new(0, 2, p).unwrap();
        let (ed, em) = dm_drift(s, p).unwrap();
        assert_abs_diff_eq!(ed, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(em, 0.0, epsilon = 1e-15);

        // On the coexistence lattice line D = N(2q - 1).
        let p = params(10, 0.7);
        let s = DMState::new(4, 2, p).unwrap();
        let (ed, em) = dm_drift(s, p).unwrap();
        assert_abs_diff_eq!(ed, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(em, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn second_moments_match_rate_summation() {
        let p = params(4, 0.5);
        let s = DMState::new(0, 2, p).unwrap();
        let (dd, mm, dm) = dm_second_moments(s, p).unwrap();
        let (_, (odd, omm, odm)) = moments_from_rates(s, p).unwrap();
        assert_relative_eq!(dd, odd, max_relative = 1e-13);
        assert_relative_eq!(mm, omm, max_relative = 1e-13);
        assert_abs_diff_eq!(dm, odm, epsilon = 1e-13);

        let p = params(10, 0.3);
        let s = DMState::new(2, 4, p).unwrap();
        let ((ed, em), (odd, omm, odm)) = moments_from_rates(s, p).unwrap();
        let (cd, cm) = dm_drift(s, p).unwrap();
        let (dd, mm, dm) = dm_second_moments(s, p).unwrap();
        assert_relative_eq!(ed, cd, max_relative = 1e-12);
        assert_relative_eq!(em, cm, max_relative = 1e-12);
        assert_relative_eq!(dd, odd, max_relative = 1e-12);
        assert_relative_eq!(mm, omm, max_relative = 1e-12);
        assert_relative_eq!(dm, odm, max_relative = 1e-12);
    }

    #[test]
    fn m_zero_states_have_no_m_variance() {
        let p = params(8, 0.6);
        let s = DMState::new(2, 0, p).unwrap();
        let (_, mm, dm) = dm_second_moments(s, p).unwrap();
        assert_eq!(mm, 0.0);
        assert_eq!(dm, 0.0);
    }

    #[test]
    fn absorbing_moments_are_zero() {
        let p = params(8, 0.6);
        let s = DMState::new(8, 0, p).unwrap();
        assert_eq!(dm_drift(s, p).unwrap(), (0.0, 0.0));
        assert_eq!(dm_second_moments(s, p).unwrap(), (0.0, 0.0, 0.0));
        let ((ed, em), (dd, mm, dm)) = moments_from_rates(s, p).unwrap();
        assert_eq!((ed, em, dd, mm, dm), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn scaled_moments_on_coexistence_line_have_no_drift() {
        for q in [0.3f64, 0.5, 0.7] {
            let d = 2.0 * q - 1.0;
            // The line meets the triangle only up to m = 1 - |2q - 1|.
            for frac in [0.2, 0.6, 0.95] {
                let m = frac * (1.0 - d.abs());
                let y = ScaledPoint::new(d, m).unwrap();
                let ms = scaled_moments(y, q).unwrap();
                assert_abs_diff_eq!(ms.b_d, 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(ms.b_m, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn scaled_moments_reference_values() {
        let y = ScaledPoint::new(0.5, 0.25).unwrap();
        let ms = scaled_moments(y, 0.5).unwrap();
        assert_relative_eq!(ms.b_d, -1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(ms.b_m, 1.0 / 12.0, max_relative = 1e-14);

        let y = ScaledPoint::new(0.0, 0.5).unwrap();
        let ms = scaled_moments(y, 0.5).unwrap();
        assert_relative_eq!(ms.a_dd, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ms.a_mm, 0.5, max_relative = 1e-14);
        assert_abs_diff_eq!(ms.a_dm, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scaled_moments_singular_on_edges() {
        let y = ScaledPoint::new(1.0, 0.0).unwrap();
        assert!(matches!(scaled_moments(y, 0.5), Err(Error::SingularPoint)));
    }

    #[test]
    fn scaling_consistency_with_chain_moments() {
        // b(y) = E[Δ(D,M)] and a(y) = second-moment matrix of Δ(D,M),
        // evaluated at y = (D/N, M/N).
        for n in [100u32, 1000] {
            let p = params(n, 0.37);
            let ni = p.n_i64();
            for (dfrac, mfrac) in [(0.2, 0.3), (-0.4, 0.1), (0.0, 0.64)] {
                let mut d = (dfrac * n as f64).round() as i64;
                let m = (mfrac * n as f64).round() as i64;
                if (d + m - ni) % 2 != 0 {
                    d += 1;
                }
                let s = DMState::new(d, m, p).unwrap();
                let ms = scaled_moments(s.scaled(p), p.q).unwrap();
                let (ed, em) = dm_drift(s, p).unwrap();
                let (dd, mm, dm) = dm_second_moments(s, p).unwrap();
                assert_relative_eq!(ms.b_d, ed, max_relative = 1e-12);
                assert_relative_eq!(ms.b_m, em, max_relative = 1e-12);
                assert_relative_eq!(ms.a_dd, dd, max_relative = 1e-12);
                assert_relative_eq!(ms.a_mm, mm, max_relative = 1e-12);
                assert_abs_diff_eq!(ms.a_dm, dm, epsilon = 1e-12);
            }
        }
    }

    /// Rate table from the three-species coordinates: birth rate of the
    /// replacement species times death rate of the replaced species. Used
    /// as an independent check of the `(D, M)` expressions.
    fn chm_rate(s: DMState, p: Params, k: JumpKind) -> f64 {
        let comp = dm_to_composition(s, p).unwrap();
        let n = f64::from(p.n);
        let (c, h, m) = (f64::from(comp.c), f64::from(comp.h), f64::from(comp.m));
        let q = p.q;
        let lam_c = q * 2.0 * c / (2.0 * c + m);
        let lam_h = (1.0 - q) * 2.0 * h / (2.0 * h + m);
        let lam_m = q * m / (2.0 * c + m) + (1.0 - q) * m / (2.0 * h + m);
        let (mu_c, mu_h, mu_m) = (c / n, h / n, m / n);
        match k {
            JumpKind::COverM => lam_c * mu_m,
            JumpKind::COverH => lam_c * mu_h,
            JumpKind::HOverM => lam_h * mu_m,
            JumpKind::HOverC => lam_h * mu_c,
            JumpKind::MOverH => lam_m * mu_h,
            JumpKind::MOverC => lam_m * mu_c,
            JumpKind::Hold => lam_c * mu_c + lam_h * mu_h + lam_m * mu_m,
        }
    }

    fn valid_state_strategy() -> impl Strategy<Value = (Params, DMState)> {
        (2i64..=200, 0.01f64..0.99).prop_flat_map(|(n, q)| {
            (Just(n), Just(q), 0..=n).prop_flat_map(|(n, q, m)| {
                (Just(n), Just(q), Just(m), 0..=(n - m)).prop_map(|(n, q, m, k)| {
                    let d = -(n - m) + 2 * k;
                    let p = Params::new(n as u32, q).unwrap();
                    (p, DMState::new(d, m, p).unwrap())
                })
            })
        })
    }

    proptest! {
        #[test]
        fn rates_normalize_and_are_nonnegative((p, s) in valid_state_strategy()) {
            let r = jump_rates(s, p).unwrap();
            let mut total = r.hold();
            prop_assert!(r.hold() >= 0.0);
            for (_, rate) in r.iter() {
                prop_assert!(rate >= 0.0);
                total += rate;
            }
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn closed_moments_match_summation_oracle((p, s) in valid_state_strategy()) {
            let ((ed, em), (odd, omm, odm)) = moments_from_rates(s, p).unwrap();
            let (cd, cm) = dm_drift(s, p).unwrap();
            let (dd, mm, dm) = dm_second_moments(s, p).unwrap();
            prop_assert!((cd - ed).abs() <= 1e-12 * (1.0 + cd.abs()));
            prop_assert!((cm - em).abs() <= 1e-12 * (1.0 + cm.abs()));
            prop_assert!((dd - odd).abs() <= 1e-12 * (1.0 + dd.abs()));
            prop_assert!((mm - omm).abs() <= 1e-12 * (1.0 + mm.abs()));
            prop_assert!((dm - odm).abs() <= 1e-12 * (1.0 + dm.abs()));
        }

        #[test]
        fn dm_table_agrees_with_species_products((p, s) in valid_state_strategy()) {
            // The species-side birth rates are 0/0 at the absorbing corners.
            prop_assume!(!s.is_absorbing(p));
            let r = jump_rates(s, p).unwrap();
            for (kind, rate) in r.iter() {
                let expect = chm_rate(s, p, kind);
                prop_assert!((rate - expect).abs() <= 1e-13 * (1.0 + expect.abs()),
                    "{kind:?}: {rate} vs {expect}");
            }
            let hold = chm_rate(s, p, JumpKind::Hold);
            prop_assert!((r.hold() - hold).abs() <= 1e-13 * (1.0 + hold.abs()));
        }

        #[test]
        fn jumps_preserve_parity((p, s) in valid_state_strategy()) {
            let n = p.n_i64();
            for kind in JumpKind::JUMPS {
                let (dd, dm) = kind.delta();
                prop_assert_eq!((s.d + dd + s.m + dm - n).rem_euclid(2), (s.d + s.m - n).rem_euclid(2));
            }
        }

        #[test]
        fn second_moments_are_nonnegative((p, s) in valid_state_strategy()) {
            let (dd, mm, _) = dm_second_moments(s, p).unwrap();
            prop_assert!(dd >= 0.0);
            prop_assert!(mm >= 0.0);
        }

        #[test]
        fn covariance_positive_semidefinite(
            d in -0.95f64..0.95,
            t in 0.01f64..0.99,
            q in 0.05f64..0.95,
        ) {
            // m strictly inside the triangle section at this d.
            let m = t * (1.0 - d.abs());
            let y = ScaledPoint::new(d, m).unwrap();
            let ms = scaled_moments(y, q).unwrap();
            prop_assert!(ms.a_dd >= 0.0);
            prop_assert!(ms.a_mm >= 0.0);
            prop_assert!(ms.a_dd * ms.a_mm - ms.a_dm * ms.a_dm >= -1e-9);
        }
    }
}
