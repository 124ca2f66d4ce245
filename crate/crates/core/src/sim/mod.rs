//! World state and the discrete-tick transition function of the fleet game.
//!
//! Vehicles only decide when their availability flips (an "active" tick).
//! Between decisions they fly straight, constant-velocity legs: first to
//! the chosen depot, then, if the depot handed them a payload, on to its
//! destination. Rewards are credited when the job completes.

mod events;
mod reward;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

pub use events::{format_log, Event, EventKind, EVENT_LOG_HEADER};
pub use reward::{
    assign_payload, net_reward, payoff, payoff_for_distance, payoff_vertex, INVALID_DEPOT_PENALTY, Q1,
    Q2, Q3, Q4,
};

use crate::config::{EpisodeConfig, Mode, ARRIVAL_INTERVAL, GRID_SIZE, QUEUE_CAPACITY, SIZE_STD, VEHICLE_SPEED};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves `step` units toward `target`, stopping on it.
    pub fn toward(self, target: Point, step: f64) -> Point {
        let d = self.distance(target);
        if d <= step || d == 0.0 {
            return target;
        }
        let f = step / d;
        Point::new(self.x + (target.x - self.x) * f, self.y + (target.y - self.y) * f)
    }
}

/// Depots occupy node ids `0..depots`, clients follow.
pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadRequest {
    pub id: u64,
    /// Depot the request waits at.
    pub origin: usize,
    pub destination: NodeId,
    /// Minimum vehicle capacity, 1..=3.
    pub capacity: u8,
    /// Cached payoff for the origin-destination trip.
    pub payoff: f64,
    pub arrival_tick: u64,
}

#[derive(Clone, Debug)]
pub struct Depot {
    pub id: usize,
    pub position: Point,
    /// Expected arrivals per tick.
    pub arrival_rate: f64,
    /// Expected payload size, in `[1, 3]`.
    pub expected_size: f64,
    /// FIFO queue, never longer than [`QUEUE_CAPACITY`].
    pub queue: VecDeque<PayloadRequest>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    ToDepot,
    ToDestination,
}

/// A vehicle's current commitment.
#[derive(Clone, Debug)]
pub struct Job {
    pub depot: usize,
    pub payload: Option<PayloadRequest>,
    pub leg: Leg,
    /// Net reward credited when the job completes.
    pub reward: f64,
    /// Index of the decision that created the job (per vehicle).
    pub decision: u32,
    leg_start: Point,
    leg_target: Point,
    leg_start_tick: u64,
    pub arrival_tick: u64,
}

#[derive(Clone, Debug)]
pub struct Vehicle {
    pub id: usize,
    pub position: Point,
    pub capacity: u8,
    pub available: bool,
    pub prev_stop: NodeId,
    pub next_stop: NodeId,
    pub job: Option<Job>,
    /// Decisions taken so far this episode.
    pub decisions: u32,
}

impl Vehicle {
    pub fn committed_payload(&self) -> Option<&PayloadRequest> {
        self.job.as_ref().and_then(|j| j.payload.as_ref())
    }

    pub fn arrival_tick(&self) -> Option<u64> {
        self.job.as_ref().map(|j| j.arrival_tick)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Counters {
    /// Requests accepted into a queue.
    pub arrived: u64,
    pub fulfilled: u64,
    /// Requests discarded on a full queue.
    pub dropped: u64,
    /// Cumulative credited reward per vehicle.
    pub vehicle_rewards: Vec<f64>,
}

/// A job that finished this tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub vehicle: usize,
    pub decision: u32,
    pub reward: f64,
    pub fulfilled: bool,
}

#[derive(Clone, Debug, Default)]
pub struct StepOutcome {
    /// Vehicles whose availability flipped this tick.
    pub active: Vec<usize>,
    pub completions: Vec<Completion>,
    /// Whether queues were refilled this tick.
    pub populated: bool,
}

#[derive(Clone, Debug)]
pub struct CommitOutcome {
    pub payload: Option<PayloadRequest>,
    /// Reward that will be credited on completion.
    pub reward: f64,
    pub completion_tick: u64,
}

#[derive(Clone, Debug)]
pub struct World {
    pub config: EpisodeConfig,
    pub clock: u64,
    pub vehicles: Vec<Vehicle>,
    pub depots: Vec<Depot>,
    pub clients: Vec<Point>,
    pub counters: Counters,
    events: Vec<Event>,
    rng: ChaCha8Rng,
    next_payload_id: u64,
}

impl World {
    /// Builds the layout from `config.seed` and everything stochastic about
    /// the episode (rates, sizes, start depots, arrivals) from `episode_seed`,
    /// then fills the queues for tick 0.
    pub fn new(config: &EpisodeConfig, episode_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut layout_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let positions = stratified_positions(config.depots + config.clients, &mut layout_rng);
        let (depot_pos, client_pos) = positions.split_at(config.depots);

        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, episode_seed));
        let rates = config.rates.values();
        let depots = depot_pos
            .iter()
            .enumerate()
            .map(|(id, &position)| Depot {
                id,
                position,
                arrival_rate: rates[rng.random_range(0..rates.len())],
                expected_size: rng.random_range(1.0..=3.0),
                queue: VecDeque::with_capacity(QUEUE_CAPACITY),
            })
            .collect::<Vec<_>>();

        let mut vehicles = Vec::with_capacity(config.vehicle_count());
        for (class, &count) in config.fleet.iter().enumerate() {
            for _ in 0..count {
                let start = rng.random_range(0..depots.len());
                vehicles.push(Vehicle {
                    id: vehicles.len(),
                    position: depots[start].position,
                    capacity: class as u8 + 1,
                    available: true,
                    prev_stop: start,
                    next_stop: start,
                    job: None,
                    decisions: 0,
                });
            }
        }

        let mut world = Self {
            config: config.clone(),
            clock: 0,
            counters: Counters {
                vehicle_rewards: vec![0.0; vehicles.len()],
                ..Counters::default()
            },
            vehicles,
            depots,
            clients: client_pos.to_vec(),
            events: Vec::new(),
            rng,
            next_payload_id: 0,
        };
        world.populate_all();
        Ok(world)
    }

    /// Builds a world from explicit parts; nothing is populated.
    pub fn from_parts(
        config: &EpisodeConfig,
        depots: Vec<Depot>,
        clients: Vec<Point>,
        vehicles: Vec<Vehicle>,
        seed: u64,
    ) -> Self {
        let next_payload_id = depots
            .iter()
            .flat_map(|d| d.queue.iter().map(|p| p.id + 1))
            .max()
            .unwrap_or(0);
        let arrived = depots.iter().map(|d| d.queue.len() as u64).sum();
        Self {
            config: config.clone(),
            clock: 0,
            counters: Counters {
                arrived,
                vehicle_rewards: vec![0.0; vehicles.len()],
                ..Counters::default()
            },
            vehicles,
            depots,
            clients,
            events: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_payload_id,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn grid_size(&self) -> u32 {
        GRID_SIZE
    }

    pub fn node_count(&self) -> usize {
        self.depots.len() + self.clients.len()
    }

    pub fn node_position(&self, node: NodeId) -> Point {
        if node < self.depots.len() {
            self.depots[node].position
        } else {
            self.clients[node - self.depots.len()]
        }
    }

    pub fn fleet_reward(&self) -> f64 {
        self.counters.vehicle_rewards.iter().sum()
    }

    pub fn queued_requests(&self) -> u64 {
        self.depots.iter().map(|d| d.queue.len() as u64).sum()
    }

    /// Requests assigned to a vehicle but not yet delivered.
    pub fn in_flight(&self) -> u64 {
        self.vehicles.iter().filter(|v| v.committed_payload().is_some()).count() as u64
    }

    /// The episode ends at the duration, or in one-shot mode once every
    /// request has been delivered.
    pub fn finished(&self) -> bool {
        self.clock >= self.config.duration_ticks
            || (self.config.mode == Mode::OneShot && self.queued_requests() == 0 && self.in_flight() == 0)
    }

    fn emit(&mut self, kind: EventKind, vehicle: Option<usize>, depot: Option<usize>, payload: Option<PayloadRequest>, reward: Option<f64>) {
        self.events.push(Event {
            tick: self.clock,
            kind,
            vehicle,
            depot,
            payload,
            reward,
        });
    }

    fn populate_all(&mut self) {
        for d in 0..self.depots.len() {
            self.populate_depot(d);
        }
    }

    /// Draws one interval's worth of requests for depot `d` and appends the
    /// ones that fit. Returns the accepted requests.
    pub fn populate_depot(&mut self, d: usize) -> Vec<PayloadRequest> {
        let mean = self.depots[d].arrival_rate * ARRIVAL_INTERVAL as f64;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(&mut self.rng) as u64
        } else {
            0
        };
        let mut accepted = Vec::new();
        for _ in 0..count {
            let request = self.sample_request(d);
            if self.depots[d].queue.len() < QUEUE_CAPACITY {
                self.depots[d].queue.push_back(request.clone());
                self.counters.arrived += 1;
                self.emit(EventKind::Arrive, None, Some(d), Some(request.clone()), None);
                accepted.push(request);
            } else {
                self.counters.dropped += 1;
                self.emit(EventKind::DropRequest, None, Some(d), Some(request), None);
            }
        }
        accepted
    }

    fn sample_request(&mut self, d: usize) -> PayloadRequest {
        let depot = &self.depots[d];
        let size = Normal::new(depot.expected_size, SIZE_STD)
            .expect("finite std")
            .sample(&mut self.rng);
        let capacity = size.round().clamp(1.0, 3.0) as u8;

        // Candidates sorted nearest first; the index is half-normal so near
        // destinations are the most likely.
        let origin = depot.position;
        let mut candidates: Vec<NodeId> = (0..self.node_count()).filter(|&n| n != d).collect();
        candidates.sort_by(|&a, &b| {
            let (da, db) = (origin.distance(self.node_position(a)), origin.distance(self.node_position(b)));
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let spread = candidates.len() as f64 / 3.0;
        let draw: f64 = Normal::new(0.0, spread).expect("finite std").sample(&mut self.rng);
        let idx = (draw.abs().round() as usize).min(candidates.len() - 1);
        let destination = candidates[idx];

        let id = self.next_payload_id;
        self.next_payload_id += 1;
        PayloadRequest {
            id,
            origin: d,
            destination,
            capacity,
            payoff: payoff(origin, self.node_position(destination), capacity),
            arrival_tick: self.clock,
        }
    }

    /// Sends an available vehicle to `depot`. The depot's assignment rule
    /// picks the payload (if any) immediately; rewards arrive on completion.
    pub fn commit_vehicle(&mut self, vehicle: usize, depot: usize) -> Result<CommitOutcome> {
        let v = self.vehicles.get(vehicle).ok_or(Error::UnknownVehicle(vehicle))?;
        if depot >= self.depots.len() {
            return Err(Error::UnknownDepot(depot));
        }
        if !v.available {
            return Err(Error::VehicleUnavailable(vehicle));
        }
        let (from, capacity) = (v.position, v.capacity);
        let depot_pos = self.depots[depot].position;
        let payload = assign_payload(capacity, &mut self.depots[depot].queue);
        let reward = net_reward(from, depot_pos, payload.as_ref());
        let decision = self.vehicles[vehicle].decisions;
        self.emit(EventKind::Decide, Some(vehicle), Some(depot), payload.clone(), None);

        let now = self.clock;
        let to_depot = travel_ticks(from.distance(depot_pos));
        let mut job = Job {
            depot,
            payload,
            leg: Leg::ToDepot,
            reward,
            decision,
            leg_start: from,
            leg_target: depot_pos,
            leg_start_tick: now,
            // Staying put still takes one tick so the vehicle flips back.
            arrival_tick: now + to_depot.max(1),
        };
        let v = &mut self.vehicles[vehicle];
        v.available = false;
        v.decisions += 1;
        v.next_stop = depot;
        if to_depot == 0 {
            if let Some(p) = job.payload.clone() {
                // Already at the depot: load now and head out.
                let dest = self.node_position(p.destination);
                job.leg = Leg::ToDestination;
                job.leg_target = dest;
                job.arrival_tick = now + travel_ticks(from.distance(dest));
                let v = &mut self.vehicles[vehicle];
                v.prev_stop = depot;
                v.next_stop = p.destination;
                self.emit(EventKind::Pickup, Some(vehicle), Some(depot), Some(p), None);
            }
        }
        let outcome = CommitOutcome {
            payload: job.payload.clone(),
            reward,
            completion_tick: match (&job.payload, job.leg) {
                (Some(p), Leg::ToDepot) => {
                    job.arrival_tick + travel_ticks(depot_pos.distance(self.node_position(p.destination)))
                }
                _ => job.arrival_tick,
            },
        };
        self.vehicles[vehicle].job = Some(job);
        Ok(outcome)
    }

    /// Advances the clock by one tick: moves committed vehicles, completes
    /// legs due now, and refills queues on interval boundaries (on-demand).
    pub fn step(&mut self) -> StepOutcome {
        self.clock += 1;
        let now = self.clock;
        let mut outcome = StepOutcome::default();

        for i in 0..self.vehicles.len() {
            let Some(job) = self.vehicles[i].job.as_ref() else {
                continue;
            };
            let elapsed = (now - job.leg_start_tick) as f64 * VEHICLE_SPEED;
            let position = job.leg_start.toward(job.leg_target, elapsed);
            let due = now >= job.arrival_tick;
            self.vehicles[i].position = position;
            if !due {
                continue;
            }
            let job = self.vehicles[i].job.take().expect("checked above");
            self.vehicles[i].position = job.leg_target;
            match (job.leg, job.payload.clone()) {
                (Leg::ToDepot, Some(p)) => {
                    let dest = self.node_position(p.destination);
                    let v = &mut self.vehicles[i];
                    v.prev_stop = job.depot;
                    v.next_stop = p.destination;
                    let next = Job {
                        leg: Leg::ToDestination,
                        leg_start: job.leg_target,
                        leg_target: dest,
                        leg_start_tick: now,
                        arrival_tick: now + travel_ticks(job.leg_target.distance(dest)),
                        ..job
                    };
                    v.job = Some(next);
                    self.emit(EventKind::Pickup, Some(i), Some(job.depot), Some(p), None);
                }
                (Leg::ToDepot, None) => {
                    let v = &mut self.vehicles[i];
                    v.prev_stop = job.depot;
                    v.next_stop = job.depot;
                    self.finish(i, &job, false, &mut outcome);
                    self.emit(EventKind::Penalty, Some(i), Some(job.depot), None, Some(job.reward));
                }
                (Leg::ToDestination, Some(p)) => {
                    let v = &mut self.vehicles[i];
                    v.prev_stop = p.destination;
                    v.next_stop = p.destination;
                    self.counters.fulfilled += 1;
                    self.finish(i, &job, true, &mut outcome);
                    self.emit(EventKind::Dropoff, Some(i), Some(job.depot), Some(p), Some(job.reward));
                }
                (Leg::ToDestination, None) => unreachable!("delivery leg without payload"),
            }
        }

        if self.config.mode == Mode::OnDemand
            && now.is_multiple_of(ARRIVAL_INTERVAL)
            && now < self.config.duration_ticks
        {
            self.populate_all();
            outcome.populated = true;
        }
        outcome
    }

    fn finish(&mut self, i: usize, job: &Job, fulfilled: bool, outcome: &mut StepOutcome) {
        self.vehicles[i].available = true;
        self.counters.vehicle_rewards[i] += job.reward;
        outcome.active.push(i);
        outcome.completions.push(Completion {
            vehicle: i,
            decision: job.decision,
            reward: job.reward,
            fulfilled,
        });
    }
}

/// Whole ticks needed to cover `distance` at [`VEHICLE_SPEED`].
pub fn travel_ticks(distance: f64) -> u64 {
    (distance / VEHICLE_SPEED - 1e-9).ceil().max(0.0) as u64
}

/// Combines a layout seed and an episode seed into one stream seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Distinct integer cells, cycling through the four quadrants so each gets
/// an even share of the nodes.
fn stratified_positions(count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let half = GRID_SIZE / 2;
    let mut taken = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let quadrant = (k % 4) as u32;
        let (qx, qy) = ((quadrant % 2) * half, (quadrant / 2) * half);
        // A full quadrant falls back to the whole grid.
        let quadrant_full = k / 4 >= (half * half) as usize;
        loop {
            let cell = if quadrant_full {
                (rng.random_range(0..GRID_SIZE), rng.random_range(0..GRID_SIZE))
            } else {
                (qx + rng.random_range(0..half), qy + rng.random_range(0..half))
            };
            if taken.insert(cell) {
                out.push(Point::new(f64::from(cell.0), f64::from(cell.1)));
                break;
            }
        }
    }
    out
}
