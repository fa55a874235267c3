//! Collapse-aware retrieval planning for boxes stacked on a shelf.
//!
//! A single front view of the stack is turned into several depth
//! hypotheses ([`reconstruct`]), each hypothesis is simulated rigidly
//! ([`physics`]) while a box is pulled out, and the observed motion of the
//! remaining boxes is classified ([`collapse`]). The planners in
//! [`planners`] use those rollouts to order removals; [`bench`] compares
//! them with a top-down baseline on generated corpora.

pub mod bench;
pub mod collapse;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod physics;
pub mod planners;
pub mod reconstruct;
pub mod render;
pub mod scene;

pub use error::{Error, Result};
