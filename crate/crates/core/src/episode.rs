//! Drives a world through one episode under a fleet controller.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::EpisodeConfig;
use crate::sim::{Completion, World};
use crate::{Error, Result};

/// What an active vehicle does with its decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Commit to a depot (counts against the decision budget).
    Depot(usize),
    /// Wait without committing; the vehicle is offered again at the next
    /// tick on which any vehicle becomes active or the queues refill.
    Hold,
}

/// Maps the vehicles deciding at a tick to their decisions. All of them see
/// the same snapshot; commitments are then applied in vehicle-id order.
pub trait FleetController {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>>;

    /// Called for every job that finishes, in the tick it finishes.
    fn on_completion(&mut self, _world: &World, _completion: &Completion) {}
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub fleet_reward: f64,
    pub fulfillment_ratio: f64,
    /// Credited reward summed over vehicles of capacity 1, 2 and 3.
    pub rewards_by_class: [f64; 3],
    pub arrived: u64,
    pub fulfilled: u64,
    pub dropped: u64,
}

impl EpisodeMetrics {
    pub fn from_world(world: &World) -> Self {
        let c = &world.counters;
        let mut rewards_by_class = [0.0; 3];
        for (v, r) in world.vehicles.iter().zip(&c.vehicle_rewards) {
            rewards_by_class[usize::from(v.capacity) - 1] += r;
        }
        Self {
            fleet_reward: world.fleet_reward(),
            fulfillment_ratio: fulfillment_ratio(c.fulfilled, c.arrived + c.dropped),
            rewards_by_class,
            arrived: c.arrived,
            fulfilled: c.fulfilled,
            dropped: c.dropped,
        }
    }
}

/// Dropped requests count as demand that went unserved; no demand at all
/// scores 1.
pub fn fulfillment_ratio(fulfilled: u64, demand: u64) -> f64 {
    if demand == 0 {
        1.0
    } else {
        fulfilled as f64 / demand as f64
    }
}

pub struct EpisodeRun {
    pub metrics: EpisodeMetrics,
    pub world: World,
}

pub fn run_episode(config: &EpisodeConfig, episode_seed: u64, controller: &mut dyn FleetController) -> Result<EpisodeRun> {
    let world = World::new(config, episode_seed)?;
    run_world(world, controller)
}

/// Runs an already constructed world to the end of its episode.
pub fn run_world(mut world: World, controller: &mut dyn FleetController) -> Result<EpisodeRun> {
    let budget = world.config.max_decisions;
    let mut fresh: Vec<usize> = (0..world.vehicles.len()).collect();
    let mut held = BTreeSet::new();
    let mut trigger = true;

    while !world.finished() {
        let eligible = |v: usize| world.vehicles[v].available && world.vehicles[v].decisions < budget;
        let mut deciding: BTreeSet<usize> = fresh.iter().copied().filter(|&v| eligible(v)).collect();
        if trigger {
            deciding.extend(held.iter().copied().filter(|&v| eligible(v)));
        }
        if !deciding.is_empty() {
            let deciding: Vec<usize> = deciding.into_iter().collect();
            let decisions = controller.decide(&world, &deciding)?;
            if decisions.len() != deciding.len() {
                return Err(Error::DecisionCount {
                    expected: deciding.len(),
                    got: decisions.len(),
                });
            }
            for (&v, decision) in deciding.iter().zip(decisions) {
                match decision {
                    Decision::Depot(d) => {
                        held.remove(&v);
                        world.commit_vehicle(v, d)?;
                    }
                    Decision::Hold => {
                        held.insert(v);
                    }
                }
            }
        }
        let outcome = world.step();
        for c in &outcome.completions {
            controller.on_completion(&world, c);
        }
        trigger = !outcome.active.is_empty() || outcome.populated;
        fresh = outcome.active;
    }
    Ok(EpisodeRun {
        metrics: EpisodeMetrics::from_world(&world),
        world,
    })
}

/// A controller from a closure over `(world, vehicle)`.
pub struct PerVehicle<F>(pub F);

impl<F> FleetController for PerVehicle<F>
where
    F: FnMut(&World, usize) -> Result<Decision>,
{
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>> {
        deciding.iter().map(|&v| (self.0)(world, v)).collect()
    }
}
