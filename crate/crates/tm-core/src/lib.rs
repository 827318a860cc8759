//! Transition matching on low-dimensional toy distributions.
//!
//! A discrete-time Markov chain carries source noise to a target distribution
//! in `T` transitions. Each transition kernel is parameterized through a latent
//! `Y` whose conditional law is learned by conditional flow matching: a token
//! backbone summarizes the current state, a small per-token head integrates a
//! learned velocity field over an inner time `s`. The crate provides the
//! supervising processes that generate training pairs, the four end-to-end
//! procedures (difference-latent, autoregressive, full-history, and a plain
//! flow-matching baseline), closed-form and Monte-Carlo oracles for everything
//! checkable, a convergence harness for the small-step limit, and the
//! distributional metrics used to gate quality.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod mat;
pub mod net;
pub mod oracle;
pub mod parameterizations;
pub mod processes;
pub mod real;
pub mod rng;
pub mod state;
pub mod tape;
pub mod theorem;
pub mod toy_data;
pub mod train;
pub mod variants;
pub mod verify;

pub use error::Error;
pub use state::State;
