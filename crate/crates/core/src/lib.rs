//! Slot-synchronous simulator and scheduling library for NFV service
//! chaining with predictive request admission.

pub mod config;
pub mod error;
pub mod experiment;
pub mod forecast;
pub mod golden;
pub mod metrics;
pub mod model;
pub mod poscars;
pub mod queues;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod variants;
pub mod window;
pub mod workload;
