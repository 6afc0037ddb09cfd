//! Symmetric 2x2 games played through EPR-Bohm joint-probability boxes.
//!
//! A game is played by two players who each pick one of two measurement
//! settings on a shared bipartite system. The sixteen joint outcome
//! probabilities (a "box") weight the payoff matrix entries. Factorizable
//! boxes reproduce the classical mixed-strategy game; non-factorizable
//! boxes that keep the same embedding constraints give the quantum game.
//!
//! Modules:
//! - [`game_model`]: payoff matrices, the omega quantities and ordering classes.
//! - [`joint_box`]: the sixteen-probability box, validation, factorization,
//!   completion from eight independent probabilities and CHSH quantities.
//! - [`payoff_engine`]: pure and mixed payoffs, Nash checks, fitness and ESS.
//! - [`embedding`]: classical embedding constraints and the constrained
//!   quantum family built from four free probabilities.
//! - [`oracle`]: brute-force re-derivation of every closed form and sweeps.
//! - [`cli`]: the `eprgame` command-line front end.

pub mod cli;
pub mod embedding;
pub mod error;
pub mod game_model;
pub mod joint_box;
pub mod oracle;
pub mod payoff_engine;

pub use error::{Error, Result};

/// Absolute tolerance used for every equality-style check unless overridden.
pub const DEFAULT_TOL: f64 = 1e-9;
