//! Deterministic-policy actor-critic learners and the training loop that
//! runs them on the supply-chain game, with or without the manager.

mod agent;
mod buffer;
mod metrics;
mod train;

pub use agent::{quantize_order, AgentDims, DdpgAgent, UpdateStats};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use metrics::{metrics_from_csv, metrics_to_csv, EpisodeMetrics, METRICS_HEADER};
pub use train::{noise_schedule, Learner, ManagerPolicy, Trainer};
