//! Sequential shot-attribute editing with an actor-critic learner, plus an
//! event-driven multi-camera broadcast simulator.

pub mod attributes;
pub mod broadcast;
pub mod error;
pub mod evaluation;
pub mod policy;
pub mod representation;
pub mod training;

pub use error::{Result, ShotError};
