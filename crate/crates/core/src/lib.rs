//! Energy-saving lab for O-RAN radio-card switching.
//!
//! - [`netmodel`]: geometry, free-space path loss, RSS association, constraints.
//! - [`env`]: episodic MDP (state encoders, action decoding, reward).
//! - [`dqn`]: Q-network, backprop, AdamW, replay memory, target network.
//! - [`trainer`]: training loop, logs, greedy evaluation.
//! - [`policies`]: baseline, heuristic stand-in, always-on and DQN xApps.
//! - [`oracle`]: exhaustive maximum switch-off search.
//! - [`harness`]: run configuration, benchmark protocol, CSV/SVG output.

pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod stats;
pub mod trainer;
