//! Tabular-MDP toolkit for entropy-based exploration: steady-state entropy
//! bounds, convex policy optimization toward fast-mixing uniform behavior,
//! and model-based learning loops built on those objectives.

pub mod agent;
pub mod env;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod objective;
pub mod solver;

pub use error::{ExploreError, Result};
