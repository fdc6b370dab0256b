//! Scheduling engine for the digital value chain (DVC) of vehicle production.
//!
//! The digital value chain covers the ECU-related processes that run alongside
//! physical assembly: ID check, software flash, configuration, and calibration
//! & commissioning. This crate ingests the heterogeneous planning sources
//! (vehicle topology, assembly precedence graph, commissioning specification,
//! vehicle order), recovers assembly and power information from free text,
//! assigns every DVC task to a production station under the bus/power/signal
//! constraint catalog, and materializes the result as a station-annotated
//! precedence graph with utilization and parallelization metrics.
//!
//! Numeric kernels (classifier, objective, metrics) are generic over a
//! [`Real`] scalar from `num-traits`; `f64` is the default everywhere and the
//! crate root re-exports concrete `*64` aliases.

pub mod constraints;
pub mod extract;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod real;
pub mod sched;
pub mod synth;

pub use model::{
    BusType, DiagnosticClass, Ecu, EcuId, Instance, ProcessType, SignalCap, Station, StationPower,
    Task, Terminal,
};
pub use real::Real;

/// Gaussian Naive Bayes model over the default scalar.
pub type NbModel64 = extract::nb::NbModel<f64>;
/// Schedule over the default scalar.
pub type Schedule64 = sched::Schedule<f64>;
/// Utilization/parallelization metrics over the default scalar.
pub type Metrics64 = sched::Metrics<f64>;
