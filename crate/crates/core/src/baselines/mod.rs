//! Non-learned controllers: the fully observed assignment oracle and a
//! uniform random policy.

mod lap;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use lap::{lap_solve, matching_cost};

use crate::episode::{Decision, FleetController};
use crate::sim::{assign_payload, net_reward, PayloadRequest, World};
use crate::Result;

/// Rows are `vehicles`, columns are `requests`; entries are the negated net
/// reward, or infinity when the request is too large for the vehicle.
pub fn cost_matrix(world: &World, vehicles: &[usize], requests: &[&PayloadRequest]) -> Vec<Vec<f64>> {
    vehicles
        .iter()
        .map(|&v| {
            let veh = &world.vehicles[v];
            requests
                .iter()
                .map(|p| {
                    if p.capacity > veh.capacity {
                        f64::INFINITY
                    } else {
                        -net_reward(veh.position, world.depots[p.origin].position, Some(p))
                    }
                })
                .collect()
        })
        .collect()
}

/// Every queued request, depot by depot in queue order.
pub fn queued_requests(world: &World) -> Vec<&PayloadRequest> {
    world.depots.iter().flat_map(|d| d.queue.iter()).collect()
}

/// One oracle round: the depot each deciding vehicle should go to, or
/// `Hold`. A vehicle is only sent if the depot's own assignment rule will
/// hand it a payload once the vehicles before it have been served.
pub fn odla_step(world: &World, deciding: &[usize]) -> Vec<Decision> {
    let requests = queued_requests(world);
    let cost = cost_matrix(world, deciding, &requests);
    let mut target: BTreeMap<usize, usize> = BTreeMap::new();
    for (row, col) in lap_solve(&cost) {
        target.insert(deciding[row], requests[col].origin);
    }

    // Replay the commits in vehicle order against copies of the queues.
    let mut queues: BTreeMap<usize, VecDeque<PayloadRequest>> = BTreeMap::new();
    deciding
        .iter()
        .map(|v| match target.get(v) {
            Some(&d) => {
                let q = queues.entry(d).or_insert_with(|| world.depots[d].queue.clone());
                match assign_payload(world.vehicles[*v].capacity, q) {
                    Some(_) => Decision::Depot(d),
                    None => Decision::Hold,
                }
            }
            None => Decision::Hold,
        })
        .collect()
}

/// The fully observed oracle as a controller. Idle vehicles wait and are
/// re-planned whenever fleet availability or demand changes.
#[derive(Clone, Debug, Default)]
pub struct OdlaController;

impl FleetController for OdlaController {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>> {
        Ok(odla_step(world, deciding))
    }
}

/// Picks a depot uniformly at random for every decision.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn choose(&mut self, depots: usize) -> usize {
        self.rng.random_range(0..depots)
    }
}

impl FleetController for RandomController {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>> {
        Ok(deciding.iter().map(|_| Decision::Depot(self.choose(world.depots.len()))).collect())
    }
}
