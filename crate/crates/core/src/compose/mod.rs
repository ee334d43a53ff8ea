//! Finite-state component models, synchronous composition, property
//! checking and assume-guarantee reasoning.

pub mod ag;
pub mod check;
pub mod model;
pub mod monitor;
pub mod system;

use thiserror::Error;

pub use ag::{
    abstract_dnn_component, check_assume_guarantee, AbstractionConfig, AgReport, Peer,
    PremiseReport,
};
pub use check::{check_property, replay, CheckResult, TraceStep};
pub use model::{ComponentBuilder, ComponentModel, ComponentSpec, Port, Valuation};
pub use monitor::{
    contract_monitor, monitor_trace, most_general_environment, property_monitor, response_step,
    ContractMonitor, ContractState,
};
pub use system::{
    compose, flatten, parse_system, render_system, Product, Signal, System, SystemFile, Wire,
};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("wiring: {0}")]
    Wiring(String),
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("`{value}` is not a value of port `{port}`")]
    UnknownValue { port: String, value: String },
    #[error("replay: {0}")]
    Replay(String),
    #[error("contract: {0}")]
    Contract(String),
}
