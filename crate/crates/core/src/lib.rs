//! Intro-stabilizing Byzantine-fault-tolerant clock synchronization on a
//! completely connected bipartite network: parameter derivation, protocol
//! state machines, a discrete-event engine and a coin-level reduced model.

pub mod engine;
pub mod netmodel;
pub mod params;
pub mod protocol;
pub mod reduced;
pub mod ring;
pub mod stats;

/// System parameters in seconds as used by the simulators.
pub type SystemParamsF64 = params::SystemParams<f64>;
/// Derived parameters in seconds as used by the simulators.
pub type DerivedParamsF64 = params::DerivedParams<f64>;
