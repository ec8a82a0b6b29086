//! Multi-cell downlink simulator with distance-thresholded UAV
//! amplify-and-forward relays, and a DQN agent that learns per-BS transmit
//! power levels.
//!
//! Modules build on each other bottom-up: [`topology`] drops users and pairs
//! UAVs, [`channel`] and [`radio`] turn geometry and powers into per-user
//! rates, [`env`] wraps that in an episodic MDP, and [`nn`] plus [`dqn`]
//! implement the learner.

// Negated float comparisons in validation are there to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod dqn;
pub mod env;
pub mod error;
pub mod nn;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod radio;
pub mod topology;

pub use config::{Fading, NetworkConfig, RelayMode};
pub use dqn::{Agent, AgentConfig, SlotRecord, TrainingLog, Transition};
pub use env::{Env, EnvState, StepOutcome};
pub use error::{Error, Result};
pub use nn::Mlp;
pub use radio::PowerAction;
pub use topology::{NetworkSnapshot, Point2, Point3};
