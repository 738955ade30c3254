//! Device-independent randomness certification for broadcast quantum networks.
//!
//! A bipartite state is split by a broadcast isometry into three parties
//! (Alice, Bob₁, Bob₂). From the resulting behavior the toolkit bounds an
//! adversary's guessing probability with moment-matrix relaxations, tests
//! broadcast-locality by linear programming, and turns the resulting
//! min-entropy into finite-size randomness-expansion rates.
//!
//! Module map:
//!
//! - [`quantum`]: dense states, channels and dichotomic qubit observables.
//! - [`behavior`]: conditional probability tables and their validation.
//! - [`functionals`]: correlator Bell functionals, nonlocal games, see-saw.
//! - [`locality`]: vertex sets and LP membership with Farkas certificates.
//! - [`npa`]: operator words and guessing-probability SDP compilation.
//! - [`sdp`]: conic programs, the interior-point solver, SDPA interchange.
//! - [`randomness`]: min-entropy, protocol simulation, Toeplitz extraction, rates.

#![forbid(unsafe_code)]

pub mod behavior;
pub mod error;
pub mod functionals;
pub mod locality;
pub mod npa;
pub mod quantum;
pub mod randomness;
pub mod sdp;

pub use error::{Error, Result};
