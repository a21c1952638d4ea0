//! Uniform Markov chain Monte Carlo sampling of naturally labeled partial
//! orders.
//!
//! The chain mixes two moves with equal probability: a *relation move*,
//! which toggles a single relation between a linked or critical pair, and a
//! *link move*, which toggles a single edge of the Hasse diagram between a
//! linked or suitable pair. Both moves are their own inverse and are
//! proposed uniformly over pairs, so the chain is reversible with respect to
//! the uniform distribution on naturally labeled `n`-orders.
//!
//! Besides the sampler the crate provides order invariants, exact
//! enumeration for small `n`, post-processing of chain traces, and the run
//! driver used by the `poset-mcmc` command-line tool.

pub mod analysis;
pub mod bits;
pub mod chain;
pub mod enumeration;
pub mod error;
pub mod moves;
pub mod observables;
pub mod pipeline;
pub mod poset;
pub mod rng;

pub use error::{Error, Result};
pub use poset::{Poset, StartKind};
pub use rng::RandomStream;
