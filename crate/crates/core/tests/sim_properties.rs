use std::collections::VecDeque;

use aam_core::sim::{
    assign_payload, format_log, net_reward, payoff, payoff_for_distance, payoff_vertex, EventKind, PayloadRequest, Point, World,
};
use aam_core::{run_episode, Decision, EpisodeConfig, FleetController, Mode, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Uniform(ChaCha8Rng);

impl FleetController for Uniform {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>> {
        Ok(deciding
            .iter()
            .map(|_| Decision::Depot(self.0.random_range(0..world.depots.len())))
            .collect())
    }
}

fn config_strategy() -> impl Strategy<Value = EpisodeConfig> {
    (0usize..3, 0usize..3, 1usize..3, 1usize..7, 1usize..7, any::<bool>(), 0u64..1000).prop_map(
        |(a, b, c, depots, clients, on_demand, seed)| {
            let fleet = [a, b, c];
            let mut config = if on_demand {
                EpisodeConfig::on_demand(fleet, depots, clients)
            } else {
                EpisodeConfig::one_shot(fleet, depots, clients)
            };
            config.seed = seed;
            config
        },
    )
}

fn request(id: u64, capacity: u8) -> PayloadRequest {
    PayloadRequest {
        id,
        origin: 0,
        destination: 1,
        capacity,
        payoff: 0.0,
        arrival_tick: id,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every accepted request is fulfilled, waiting or on board at every tick.
    #[test]
    fn requests_are_conserved(config in config_strategy(), episode in 0u64..50, policy_seed in 0u64..50) {
        let mut world = World::new(&config, episode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(policy_seed);
        let mut last_clock = world.clock;
        while !world.finished() {
            for v in 0..world.vehicles.len() {
                let veh = &world.vehicles[v];
                prop_assert_eq!(veh.available, veh.job.is_none());
                if veh.available && veh.decisions < config.max_decisions {
                    let d = rng.random_range(0..world.depots.len());
                    world.commit_vehicle(v, d).unwrap();
                }
            }
            let c = &world.counters;
            prop_assert_eq!(c.arrived, c.fulfilled + world.queued_requests() + world.in_flight());
            for d in &world.depots {
                prop_assert!(d.queue.len() <= 5);
                prop_assert!(d.queue.iter().zip(d.queue.iter().skip(1)).all(|(a, b)| a.arrival_tick <= b.arrival_tick));
            }
            for v in &world.vehicles {
                prop_assert!((0.0..24.0).contains(&v.position.x) && (0.0..24.0).contains(&v.position.y));
                prop_assert!(v.job.as_ref().is_none_or(|j| j.payload.as_ref().is_none_or(|p| p.capacity <= v.capacity)));
            }
            world.step();
            prop_assert!(world.clock > last_clock);
            last_clock = world.clock;
        }
        let c = &world.counters;
        prop_assert_eq!(c.arrived, c.fulfilled + world.queued_requests() + world.in_flight());
    }

    /// Two runs with the same seeds write the same event log.
    #[test]
    fn episodes_are_reproducible(config in config_strategy(), episode in 0u64..50) {
        let a = run_episode(&config, episode, &mut Uniform(ChaCha8Rng::seed_from_u64(9))).unwrap();
        let b = run_episode(&config, episode, &mut Uniform(ChaCha8Rng::seed_from_u64(9))).unwrap();
        prop_assert_eq!(format_log(a.world.events()), format_log(b.world.events()));
        prop_assert_eq!(a.metrics, b.metrics);
    }

    /// The fleet reward equals the sum of rewards logged on completion.
    #[test]
    fn fleet_reward_matches_logged_rewards(config in config_strategy(), episode in 0u64..50) {
        let run = run_episode(&config, episode, &mut Uniform(ChaCha8Rng::seed_from_u64(1))).unwrap();
        let logged: f64 = run.world.events().iter().filter_map(|e| e.reward).sum();
        prop_assert!((logged - run.metrics.fleet_reward).abs() < 1e-9);
        let by_class: f64 = run.metrics.rewards_by_class.iter().sum();
        prop_assert!((by_class - run.metrics.fleet_reward).abs() < 1e-9);
        let deliveries = run.world.events().iter().filter(|e| e.kind == EventKind::Dropoff).count() as u64;
        prop_assert_eq!(deliveries, run.metrics.fulfilled);
    }

    /// The assignment rule hands out the earliest suitable request and keeps the rest in order.
    #[test]
    fn assignment_is_first_in_first_out(caps in prop::collection::vec(1u8..=3, 0..6), capacity in 1u8..=3) {
        let mut queue: VecDeque<PayloadRequest> = caps.iter().enumerate().map(|(i, &c)| request(i as u64, c)).collect();
        let before: Vec<u64> = queue.iter().map(|p| p.id).collect();
        let expected = queue.iter().filter(|p| p.capacity <= capacity).map(|p| p.arrival_tick).min();
        let got = assign_payload(capacity, &mut queue);
        prop_assert_eq!(got.as_ref().map(|p| p.arrival_tick), expected);
        let mut rest = before.clone();
        if let Some(p) = &got {
            rest.retain(|&id| id != p.id);
        }
        prop_assert_eq!(queue.iter().map(|p| p.id).collect::<Vec<_>>(), rest);
    }

    /// Payoff rises up to the vertex and falls after it.
    #[test]
    fn payoff_is_concave_around_the_vertex(a in 0.0f64..60.0, b in 0.0f64..60.0, cap in 1u8..=3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let v = payoff_vertex();
        if hi <= v {
            prop_assert!(payoff_for_distance(lo, cap) < payoff_for_distance(hi, cap));
        } else if lo >= v {
            prop_assert!(payoff_for_distance(lo, cap) > payoff_for_distance(hi, cap));
        }
    }
}

#[test]
fn fifo_holds_on_a_thousand_random_queues() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..1000 {
        let len = rng.random_range(0..=5);
        // increasing arrival ticks with random gaps
        let mut queue: VecDeque<PayloadRequest> = (0..len)
            .map(|i| {
                let mut p = request(i, rng.random_range(1..=3));
                p.arrival_tick = 10 * i + rng.random_range(0..10);
                p
            })
            .collect();
        let capacity = rng.random_range(1..=3);
        let suitable: Vec<u64> = queue.iter().filter(|p| p.capacity <= capacity).map(|p| p.arrival_tick).collect();
        let got = assign_payload(capacity, &mut queue);
        assert_eq!(got.map(|p| p.arrival_tick), suitable.iter().copied().min());
        assert!(queue.iter().zip(queue.iter().skip(1)).all(|(a, b)| a.arrival_tick < b.arrival_tick));
    }
}

#[test]
fn assignment_examples() {
    let mut queue: VecDeque<PayloadRequest> = [3, 1, 2].iter().enumerate().map(|(i, &c)| request(i as u64, c)).collect();
    assert_eq!(assign_payload(2, &mut queue).map(|p| p.capacity), Some(1));
    assert_eq!(queue.iter().map(|p| p.capacity).collect::<Vec<_>>(), vec![3, 2]);
    let mut single: VecDeque<_> = [request(0, 2)].into();
    assert_eq!(assign_payload(3, &mut single).map(|p| p.capacity), Some(2));
    let mut none: VecDeque<_> = [request(0, 2), request(1, 3)].into();
    assert!(assign_payload(1, &mut none).is_none());
    assert_eq!(none.len(), 2);
}

#[test]
fn reward_examples() {
    assert!((payoff_vertex() - 29.940_119_760_479_04).abs() < 1e-9);
    assert!((payoff_vertex() - 29.94).abs() < 1e-2);
    assert!((payoff_for_distance(0.0, 2) - 4.0).abs() < 1e-12);
    assert!((payoff_for_distance(30.0, 1) - 16.97).abs() < 1e-9);
    assert!((payoff_for_distance(10.0, 1) - 10.33).abs() < 1e-9);

    let depot = Point::new(5.0, 0.0);
    let mut p = request(0, 1);
    p.payoff = payoff(depot, Point::new(15.0, 0.0), 1);
    assert!((net_reward(Point::new(0.0, 0.0), depot, Some(&p)) - 9.33).abs() < 1e-9);
    assert_eq!(net_reward(depot, depot, None), 0.0);
    assert_eq!(net_reward(Point::new(0.0, 0.0), depot, None), -5.0);
}

#[test]
fn small_mean_size_gives_unit_payloads() {
    let config = EpisodeConfig::on_demand([1, 0, 0], 1, 3);
    let mut world = World::new(&config, 0).unwrap();
    world.depots[0].expected_size = 1.0;
    world.depots[0].arrival_rate = 0.05;
    let mut caps = Vec::new();
    for _ in 0..1000 {
        world.depots[0].queue.clear();
        caps.extend(world.populate_depot(0).iter().map(|p| p.capacity));
    }
    assert!(caps.len() > 2000);
    let ones = caps.iter().filter(|&&c| c == 1).count() as f64 / caps.len() as f64;
    assert!(ones >= 0.99, "{ones}");
}

#[test]
fn mean_arrivals_match_the_rate() {
    // 8 intervals of 50 ticks at 0.05 per tick
    let config = EpisodeConfig::on_demand([1, 0, 0], 1, 3);
    let mut world = World::new(&config, 3).unwrap();
    world.depots[0].arrival_rate = 0.05;
    let mut total = 0usize;
    let episodes = 500;
    for _ in 0..episodes * 8 {
        world.depots[0].queue.clear();
        total += world.populate_depot(0).len();
    }
    let per_episode = total as f64 / episodes as f64;
    assert!((per_episode - 20.0).abs() < 0.6, "{per_episode}");
}

#[test]
fn full_queues_drop_new_requests() {
    let config = EpisodeConfig::on_demand([1, 0, 0], 1, 3);
    let mut world = World::new(&config, 0).unwrap();
    world.depots[0].arrival_rate = 0.05;
    while world.depots[0].queue.len() < 5 {
        world.populate_depot(0);
    }
    let ids: Vec<u64> = world.depots[0].queue.iter().map(|p| p.id).collect();
    let dropped = world.counters.dropped;
    let arrived = world.counters.arrived;
    let added = world.populate_depot(0);
    assert!(added.is_empty());
    assert_eq!(world.depots[0].queue.iter().map(|p| p.id).collect::<Vec<_>>(), ids);
    assert!(world.counters.dropped >= dropped);
    assert_eq!(world.counters.arrived, arrived);
}

#[test]
fn requests_never_target_their_origin() {
    for seed in 0..20 {
        let config = EpisodeConfig::on_demand([1, 1, 1], 6, 4);
        let run = run_episode(&config, seed, &mut Uniform(ChaCha8Rng::seed_from_u64(seed))).unwrap();
        for e in run.world.events().iter().filter(|e| e.kind == EventKind::Arrive) {
            let p = e.payload.as_ref().unwrap();
            assert_ne!(p.destination, p.origin);
            assert!(p.destination < 10);
            let expected = payoff(run.world.depots[p.origin].position, run.world.node_position(p.destination), p.capacity);
            assert_eq!(p.payoff, expected);
        }
    }
}

#[test]
fn one_shot_populates_only_at_the_start() {
    let config = EpisodeConfig::one_shot([1, 1, 1], 5, 5);
    assert_eq!(config.mode, Mode::OneShot);
    for seed in 0..10 {
        let run = run_episode(&config, seed, &mut Uniform(ChaCha8Rng::seed_from_u64(seed))).unwrap();
        assert!(run
            .world
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Arrive | EventKind::DropRequest))
            .all(|e| e.tick == 0));
        assert!(run.world.clock <= 100);
    }
}
