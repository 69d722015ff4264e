//! Network-slice orchestration toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`slicing`]: slice kinds, live slice state and the admission algorithm
//!   (overload threshold, master-slice fallback, failure rerouting).
//! - [`traffic`]: device profiles, synthetic request streams, dataset
//!   ingestion and feature encoding.
//! - [`models`]: the rule oracle, the layered slice predictor, the recurrent
//!   load forecaster and finite-difference gradient checks.
//! - [`sim`]: the discrete-event loop, scenarios and the shipped presets.
//! - [`metrics`]: confusion matrices, classification reports and series export.

pub mod metrics;
pub mod models;
pub mod sim;
pub mod slicing;
pub mod time;
pub mod traffic;

pub use slicing::{
    classify_need, AdmissionDecision, AdmissionError, AdmissionReason, NetworkState, ServiceNeed,
    SliceKind, SliceSnapshot, SliceState,
};
pub use time::SimTime;
pub use traffic::RequestRecord;
