//! Three-species Moran model in a random two-state environment.
//!
//! Two specialist species (`C`, `H`) and one generalist (`M`) compete in a
//! fixed-size population. At each replacement event the environment is in
//! one of two states (probability `q` for the state favouring `C`), and the
//! replacement is drawn in proportion to fitness in that state. The
//! specialist counts are driven towards the coexistence line
//! `Gamma = {C - H = N(2q - 1)}`, along which the generalist proportion
//! performs a slow one-dimensional diffusion until the first extinction.
//!
//! The crate provides:
//!
//! - [`model`]: exact jump rates and conditional moments of the chain in
//!   `(D, M) = (C - H, M)` coordinates, and their diffusion rescaling.
//! - [`sim`]: exact event-by-event simulation to first extinction or
//!   fixation with reproducible per-replicate random streams.
//! - [`flow`]: the deterministic mean flow, its conserved quantity, and the
//!   projection onto the coexistence line.
//! - [`diffusion`]: drift and variance of the reduced diffusion on the
//!   coexistence line, plus Euler-Maruyama simulators for both the
//!   coexistence phase and the specialist-only fixation phase.
//! - [`analytics`]: scale function, hitting probabilities, Green's function,
//!   and expected absorption times by quadrature.
//! - [`experiment`]: seeded Monte Carlo experiment harness with CSV output.
//! - [`stats`]: summary statistics, histograms, and Kolmogorov-Smirnov
//!   distances used by the harness and the test suite.

pub mod analytics;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod model;
pub mod sim;
pub mod stats;

pub use analytics::{AbsorptionReport, ScaleTable};
pub use diffusion::GammaCoeffs;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentKind};
pub use flow::{FlowOptions, Trajectory};
pub use model::{Composition, DMState, JumpKind, MomentSet, Params, RateVector, ScaledPoint};
pub use sim::{Extinct, Mode, SimConfig, Species, StoppingRecord};
pub use stats::SummaryStats;
