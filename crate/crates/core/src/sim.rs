//! Exact continuous-time simulation of the chain to first extinction or
//! fixation.
//!
//! Hold events never change the state, so they are skipped exactly: with
//! `R` the total rate of the six state-changing jumps, the waiting time to
//! the next true jump is `Exp(R)` and the jump kind is drawn with
//! probability `rate / R`. This keeps the cost of a replicate proportional
//! to the number of true jumps. All reported times are in the chain's own
//! unit-event-rate time; the `N` and `N²` scalings of the competitive and
//! coexistence phases apply to this clock.
//!
//! Replicates draw from independent random streams derived deterministically
//! from `(master_seed, replicate_index)`, so batches reproduce bit-for-bit
//! regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{jump_rates, DMState, JumpKind, Params};

/// Stopping rule for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stop when the first species count reaches zero.
    ToFirstExtinction,
    /// Run until an absorbing state (single surviving species).
    ToFixation,
    /// Stop at the first of: coexistence-line hit, first extinction.
    /// Used when only the order of the two events matters.
    ToGammaOrExtinction,
}

/// One simulation's configuration.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub params: Params,
    pub init: DMState,
    pub mode: Mode,
    /// A state counts as on the coexistence line when
    /// `|D - round(N(2q-1))| <= gamma_tolerance`. The continuous condition
    /// `d = 2q - 1` is unattainable on the lattice (parity, integrality);
    /// the default tolerance 1 accepts the parity-compatible neighbours,
    /// within O(1/N) of the line.
    pub gamma_tolerance: i64,
    pub record_path: bool,
    /// Keep every k-th event when recording the path.
    pub path_stride: u64,
    /// Guard against misconfigured sweeps; hitting the cap is an error,
    /// never a silent truncation.
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(params: Params, init: DMState, mode: Mode) -> Self {
        SimConfig {
            params,
            init,
            mode,
            gamma_tolerance: 1,
            record_path: false,
            path_stride: 1,
            max_events: 10_000_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate(self.params)?;
        if self.gamma_tolerance < 0 {
            return Err(Error::Config("gamma_tolerance must be >= 0".into()));
        }
        if self.path_stride == 0 {
            return Err(Error::Config("path_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// A single species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    C,
    H,
    M,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Species::C => "C",
            Species::H => "H",
            Species::M => "M",
        })
    }
}

/// Which species died first. Reaching the all-`M` corner kills both
/// specialists at once; that tie is recorded explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extinct {
    C,
    H,
    M,
    #[serde(rename = "C+H")]
    BothSpecialists,
}

impl std::fmt::Display for Extinct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Extinct::C => "C",
            Extinct::H => "H",
            Extinct::M => "M",
            Extinct::BothSpecialists => "C+H",
        })
    }
}

/// Stopping data of one replicate. Chain-time fields are `None` when the
/// corresponding event did not occur before the run's stopping rule fired.
#[derive(Debug, Clone, Serialize)]
pub struct StoppingRecord {
    /// First time the state is within `gamma_tolerance` of the coexistence
    /// lattice line, if that happened.
    pub tau_gamma: Option<f64>,
    /// Time of the first extinction.
    pub tau_e: Option<f64>,
    pub first_extinct: Option<Extinct>,
    /// Time of fixation (second extinction).
    pub tau_f: Option<f64>,
    pub fixed: Option<Species>,
    pub event_count: u64,
}

/// Recorded path: strictly increasing times with the state after each
/// recorded event.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub samples: Vec<(f64, DMState)>,
}

/// Waiting time and kind of the next state-changing event.
///
/// The waiting time is `Exp(R)` with `R` the total jump rate, and the kind
/// is drawn with probability `rate / R`. Errors on an absorbing state.
pub fn next_event<R: Rng + ?Sized>(
    s: DMState,
    p: Params,
    rng: &mut R,
) -> Result<(f64, JumpKind)> {
    if s.is_absorbing(p) {
        return Err(Error::Absorbing { d: s.d, m: s.m });
    }
    let rates = jump_rates(s, p)?;
    Ok(sample_jump(&rates, rng))
}

#[inline]
fn sample_jump<R: Rng + ?Sized>(rates: &crate::model::RateVector, rng: &mut R) -> (f64, JumpKind) {
    let total = rates.total_jump_rate();
    debug_assert!(total > 0.0);
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    let dt = -u.ln() / total;

    let v = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    let mut last_positive = JumpKind::COverM;
    for (kind, rate) in rates.iter() {
        if rate > 0.0 {
            last_positive = kind;
        }
        acc += rate;
        if v < acc && rate > 0.0 {
            chosen = Some(kind);
            break;
        }
    }
    (dt, chosen.unwrap_or(last_positive))
}

/// Which species (if any) are extinct at `s`; ties at the all-`M` corner
/// report both specialists. At the specialist corners `(±N, 0)` the
/// generalist is reported (the surviving species is identified separately).
fn extinct_at(s: DMState, n: i64) -> Option<Extinct> {
    if s.m == n {
        return Some(Extinct::BothSpecialists);
    }
    if s.m == 0 {
        return Some(Extinct::M);
    }
    if s.d == s.m - n {
        return Some(Extinct::C);
    }
    if s.d == n - s.m {
        return Some(Extinct::H);
    }
    None
}

fn fixed_at(s: DMState, n: i64) -> Option<Species> {
    if s.m == n {
        Some(Species::M)
    } else if s.m == 0 && s.d == n {
        Some(Species::C)
    } else if s.m == 0 && s.d == -n {
        Some(Species::H)
    } else {
        None
    }
}

/// Run one replicate under `cfg`'s stopping rule.
///
/// In `ToFixation` mode the run continues past the first extinction; on the
/// `M = 0` line only the `(±2, 0)` jumps have positive rate, and if the
/// generalist fixes first the fixation time equals the first-extinction
/// time.
pub fn run_to_fixation<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(StoppingRecord, Option<PathSample>)> {
    cfg.validate()?;
    let p = cfg.params;
    let n = p.n_i64();
    let d_gamma = (f64::from(p.n) * (2.0 * p.q - 1.0)).round() as i64;

    let mut s = cfg.init;
    let mut t = 0.0f64;
    let mut events = 0u64;
    let mut path = cfg.record_path.then(|| PathSample {
        samples: vec![(t, s)],
    });

    let mut tau_gamma: Option<f64> = None;
    let mut tau_e: Option<f64> = None;
    let mut first_extinct: Option<Extinct> = None;

    loop {
        if tau_gamma.is_none() && (s.d - d_gamma).abs() <= cfg.gamma_tolerance {
            tau_gamma = Some(t);
        }
        if tau_e.is_none() {
            if let Some(e) = extinct_at(s, n) {
                tau_e = Some(t);
                first_extinct = Some(e);
            }
        }
        let done = match cfg.mode {
            Mode::ToFirstExtinction => tau_e.is_some(),
            Mode::ToFixation => s.is_absorbing(p),
            Mode::ToGammaOrExtinction => tau_e.is_some() || tau_gamma.is_some(),
        };
        if done || s.is_absorbing(p) {
            break;
        }

        let (dt, kind) = next_event(s, p, rng)?;
        let (dd, dm) = kind.delta();
        t += dt;
        s.d += dd;
        s.m += dm;
        events += 1;
        debug_assert!(s.validate(p).is_ok(), "jump left the state lattice");
        if events > cfg.max_events {
            return Err(Error::TruncatedRun { events });
        }
        if let Some(path) = path.as_mut() {
            if events % cfg.path_stride == 0 {
                path.samples.push((t, s));
            }
        }
    }

    let mut tau_f = None;
    let mut fixed = None;
    if let Some(species) = fixed_at(s, n) {
        tau_f = Some(t);
        fixed = Some(species);
    }
    if let Some(path) = path.as_mut() {
        if path.samples.last().map(|&(pt, _)| pt < t).unwrap_or(false) {
            path.samples.push((t, s));
        }
    }

    Ok((
        StoppingRecord {
            tau_gamma,
            tau_e,
            first_extinct,
            tau_f,
            fixed,
            event_count: events,
        },
        path,
    ))
}

/// SplitMix64 finalizer over `(master_seed, replicate)`. The stream of
/// replicate `i` depends only on this pair, so reruns and alternative
/// implementations can reproduce any single replicate.
pub fn replicate_seed(master_seed: u64, replicate: u64) -> u64 {
    let mut z = master_seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for one replicate of a batch.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(master_seed, replicate))
}

/// Run `n_runs` independent replicates, in parallel, ordered by replicate
/// index. Bit-for-bit reproducible for a fixed `(cfg, master_seed)`.
pub fn run_batch(cfg: &SimConfig, n_runs: u64, master_seed: u64) -> Result<Vec<StoppingRecord>> {
    cfg.validate()?;
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(master_seed, i);
            run_to_fixation(cfg, &mut rng).map(|(rec, _)| rec)
        })
        .collect()
}

/// Round a scaled starting point onto the state lattice.
///
/// `D = round(d N)` and `M = round(m N)`, with `M` nudged by one (upwards
/// when possible) to restore the parity constraint.
pub fn state_from_scaled(d: f64, m: f64, p: Params) -> Result<DMState> {
    let n = p.n_i64();
    let nf = f64::from(p.n);
    let d0 = (d * nf).round() as i64;
    let mut m0 = (m * nf).round() as i64;
    if (d0 + m0 - n) % 2 != 0 {
        if m0 + 1 + d0.abs() <= n {
            m0 += 1;
        } else {
            m0 -= 1;
        }
    }
    DMState::new(d0, m0, p)
}
