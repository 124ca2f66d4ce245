//! Shared-parameter PPO over active-timestep decisions.

mod gae;
mod ppo;
mod rollout;

use std::fmt::Write as _;

use aam_nn::Adam;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gae::{compute_gae, normalize};
pub use ppo::{minibatch_loss, ppo_update, MinibatchLoss, PpoConfig, UpdateStats};
pub use rollout::{collect_rollouts, ControlOptions, PolicyController, RolloutBuffer, Transition};

use crate::config::EpisodeConfig;
use crate::policy::{Architecture, Policy};
use crate::sim::mix_seed;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EpisodeConfig,
    pub arch: Architecture,
    pub masked: bool,
    pub ppo: PpoConfig,
    /// Active timesteps (recorded decisions) to train for.
    pub budget: u64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(env: EpisodeConfig, arch: Architecture, masked: bool, budget: u64, seed: u64) -> Self {
        Self {
            env,
            arch,
            masked,
            ppo: PpoConfig {
                entropy_coef: arch.default_entropy_coef(),
                ..PpoConfig::default()
            },
            budget,
            seed,
        }
    }

    pub fn control(&self) -> ControlOptions {
        ControlOptions {
            k_v: self.env.k_v,
            k_d: self.env.k_d,
            use_mask: self.masked,
            greedy: false,
        }
    }
}

/// One row of the learning curve, taken after each update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub active_timesteps: u64,
    /// Mean over the episodes collected for this update.
    pub mean_fleet_reward: f64,
    pub mean_fulfillment: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

pub const CURVE_HEADER: &str = "active_timesteps,mean_fleet_reward,mean_fulfillment,entropy,clip_fraction";

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in curve {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            p.active_timesteps, p.mean_fleet_reward, p.mean_fulfillment, p.entropy, p.clip_fraction
        );
    }
    out
}

pub struct TrainOutcome {
    pub policy: Policy,
    pub curve: Vec<CurvePoint>,
}

/// Alternates rollout collection and updates until the budget is spent.
/// `on_update` sees the policy and curve after every update.
pub fn train_with(config: &TrainConfig, mut on_update: impl FnMut(&Policy, &CurvePoint) -> Result<()>) -> Result<TrainOutcome> {
    config.env.validate()?;
    config.ppo.validate()?;
    let mut policy = Policy::new(config.arch, config.seed)?;
    let mut optimizer = Adam::default();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1));
    let mut curve = Vec::new();
    let mut steps = 0u64;
    // episode seeds are drawn from a range disjoint from evaluation seeds
    let mut next_episode = 1u64 << 32;
    let mut round = 0u64;
    while steps < config.budget {
        let count = (config.budget - steps).min(config.ppo.batch as u64) as usize;
        let buffer = collect_rollouts(
            &config.env,
            &policy,
            config.control(),
            count,
            next_episode,
            mix_seed(config.seed, 1000 + round),
            config.ppo.gamma,
            config.ppo.lambda,
        )?;
        next_episode += buffer.episodes.len() as u64;
        let lr = config.ppo.learning_rate(steps);
        let stats = ppo_update(&buffer.transitions, &mut policy, &mut optimizer, &config.ppo, lr, &mut shuffle_rng)?;
        steps += count as u64;
        round += 1;
        let n = buffer.episodes.len().max(1) as f64;
        let point = CurvePoint {
            active_timesteps: steps,
            mean_fleet_reward: buffer.episodes.iter().map(|m| m.fleet_reward).sum::<f64>() / n,
            mean_fulfillment: buffer.episodes.iter().map(|m| m.fulfillment_ratio).sum::<f64>() / n,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        on_update(&policy, &point)?;
        curve.push(point);
    }
    Ok(TrainOutcome { policy, curve })
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(config, |_, _| Ok(()))
}
