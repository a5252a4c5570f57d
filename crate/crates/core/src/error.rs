use std::path::PathBuf;

use thiserror::Error;

use crate::model::{ResourceVector, ServiceId, Violation, VnfId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("allocation {alloc} is not an admissible option of {vnf}")]
    InvalidOption { vnf: VnfId, alloc: ResourceVector },
    #[error("unknown VNF {0}")]
    UnknownVnf(VnfId),
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("invalid model: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology parameter: {0}")]
    InvalidParameter(String),
    #[error("graph is disconnected: {0} unreachable server pairs")]
    Disconnected(usize),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A scheduler decision or queue transition broke a model constraint.
/// Any of these aborts the run: they indicate a scheduler bug.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("admission for {service}: admitted {admitted} outside [{lower}, {upper}]")]
    AdmissionBounds {
        service: ServiceId,
        admitted: u64,
        lower: u64,
        upper: u64,
    },
    #[error("admission for {service}: per-slot split sums to {split}, admitted total is {total}")]
    AdmissionSplit {
        service: ServiceId,
        split: u64,
        total: u64,
    },
    #[error("admission for {service}: slot {slot} asked {asked}, holds {held}")]
    AdmissionExceedsSlot {
        service: ServiceId,
        slot: usize,
        asked: u64,
        held: u64,
    },
    #[error("admission for {service} targets a server without an ingress instance")]
    AdmissionTarget { service: ServiceId },
    #[error("instance {instance} has no valid successor designation")]
    Chaining { instance: usize },
    #[error("instance {instance}: forwarded {routed} requests but carries {carry}")]
    ForwardingMismatch {
        instance: usize,
        routed: u64,
        carry: u64,
    },
    #[error("server {server}: allocations exceed capacity")]
    Capacity { server: usize },
    #[error("instance {instance}: allocation {alloc} is not an option")]
    Option {
        instance: usize,
        alloc: ResourceVector,
    },
    #[error("no reachable successor for instance {instance}")]
    NoReachableSuccessor { instance: usize },
    #[error("invariant violated at slot {slot}: {what}")]
    Invariant { slot: u64, what: String },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
