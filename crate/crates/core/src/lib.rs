//! Simulator for two-flow downlink broadcast erasure channels with
//! inter-session XOR coding and deficit max-weight scheduling.
//!
//! Layering, bottom up: [`channel`] draws qualities, receptions and arrivals;
//! [`vrnet`] holds the source's virtual queues; [`spn`] is the generic
//! scheduler; [`codec`] moves real payloads and decodes them at the
//! receivers; [`rateadapt`] and [`baselines`] add alternative decision rules;
//! [`engine`] ties everything into trials and sweeps.

pub mod baselines;
pub mod channel;
pub mod codec;
pub mod engine;
pub mod error;
pub mod presets;
pub mod rateadapt;
pub mod scenario;
pub mod spn;
pub mod vrnet;

pub use channel::{ReceptionStatus, ReceptionVector};
pub use engine::{run_trial, run_trials, stability_sweep, MetricsSeries, Verdict};
pub use scenario::{load_scenario, Scenario, Scheme};
pub use vrnet::{IncOp, PacketId, QueueId, Session, VrState};
