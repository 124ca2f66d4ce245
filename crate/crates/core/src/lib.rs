//! Fleet rebalancing game for shared air mobility, its observation graphs,
//! heterogeneous graph-attention policies, PPO training and baselines.

pub mod baselines;
pub mod config;
pub mod episode;
pub mod obsgraph;
pub mod policy;
mod error;
pub mod sim;
pub mod train;

pub use config::{EpisodeConfig, Mode, RateSet};
pub use episode::{run_episode, run_world, Decision, EpisodeMetrics, EpisodeRun, FleetController};
pub use error::{Error, Result};
