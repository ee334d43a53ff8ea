//! Compositional verification for systems with neural-network components.

pub mod app;
pub mod compose;
pub mod contracts;
pub mod guard;
pub mod network;
pub mod regions;
pub mod verifier;
