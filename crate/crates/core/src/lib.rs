//! Secure non-public health network: a continuous-authentication trust
//! engine driving a deterministic simulation of health IoT devices on a
//! sliced private network with anomaly-triggered isolation.
//!
//! Module map:
//! - [`trust`]: score fusion, trust update, access policy, EER harness
//! - [`authn`]: authentication server, envelopes, audit log
//! - [`sim`]: topology, routing, anomaly baselines, event loop
//! - [`devices`]: Tier-1 device agents and compromise injection
//! - [`scenario`]: scenario config, runner and metrics report

pub mod authn;
pub mod devices;
pub mod fixed;
pub mod ids;
pub mod scenario;
pub mod sim;
pub mod trust;

pub use fixed::Fixed4;
pub use ids::{DeviceId, NodeId, SessionId, SliceId, Tick, UserId};

/// Real-valued pieces (anomaly baselines, error rates) are generic over the
/// float type; these are the instantiations the simulator uses.
pub type AnomalyBaseline = sim::AnomalyBaseline<f64>;
pub type AnomalyBaseline32 = sim::AnomalyBaseline<f32>;
pub type Eer = trust::Eer<f64>;
pub type Eer32 = trust::Eer<f32>;
