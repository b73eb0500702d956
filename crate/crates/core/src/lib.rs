//! Simulation of resilient coordinated movement for networked double-integrator
//! vehicles under MSR-style filtering, with an exact (r,s)-robustness certifier.

pub mod adversary;
pub mod engine;
pub mod export;
pub mod graph;
pub mod model;
pub mod presets;
pub mod protocol;
pub mod scenario;
