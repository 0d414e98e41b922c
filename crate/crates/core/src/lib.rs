//! Simulation of randomness amplification with GHZ-game rounds fed by a
//! single weak min-entropy source.
//!
//! Three-qubit measurement statistics come from [`quantum`], the game and
//! classical strategies from [`game`], weak sources from [`source`], attack
//! trees from [`adversary`], the inner-product extractor from [`extractor`]
//! and whole protocol runs from [`engine`].
//!
//! Heavy enumerations take an [`Execution`]. With the default `parallel`
//! feature they can run on rayon; without it everything is sequential and
//! produces the same numbers.

pub mod adversary;
pub mod engine;
pub mod error;
pub mod exec;
pub mod extractor;
pub mod game;
pub mod quantum;
pub mod source;

pub use error::{Error, Result};
pub use exec::Execution;
