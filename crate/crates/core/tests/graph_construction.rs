use std::collections::VecDeque;

use aam_core::obsgraph::{build_hdg, build_hig, depot_row, observe, payload_row, vehicle_row, MetaType, Neighborhood, Relation};
use aam_core::sim::{payoff, Depot, PayloadRequest, Point, Vehicle, World};
use aam_core::EpisodeConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn depot(id: usize, x: f64, y: f64) -> Depot {
    Depot {
        id,
        position: Point::new(x, y),
        arrival_rate: 0.05,
        expected_size: 2.0,
        queue: VecDeque::new(),
    }
}

fn vehicle(id: usize, at: usize, position: Point, capacity: u8) -> Vehicle {
    Vehicle {
        id,
        position,
        capacity,
        available: true,
        prev_stop: at,
        next_stop: at,
        job: None,
        decisions: 0,
    }
}

fn push_request(depots: &mut [Depot], id: u64, origin: usize, destination: usize, capacity: u8) {
    depots[origin].queue.push_back(PayloadRequest {
        id,
        origin,
        destination,
        capacity,
        payoff: 1.0,
        arrival_tick: id,
    });
}

/// Random world with requests spread over the depots.
fn random_world(rng: &mut ChaCha8Rng) -> World {
    let n_depots = rng.random_range(1..=8);
    let n_clients = rng.random_range(1..=4);
    let n_vehicles = rng.random_range(1..=6);
    let mut depots: Vec<Depot> = (0..n_depots)
        .map(|id| depot(id, rng.random_range(0..24) as f64, rng.random_range(0..24) as f64))
        .collect();
    let clients = (0..n_clients)
        .map(|_| Point::new(rng.random_range(0..24) as f64, rng.random_range(0..24) as f64))
        .collect();
    let mut next = 0;
    for d in 0..n_depots {
        for _ in 0..rng.random_range(0..=5) {
            let destination = n_depots + rng.random_range(0..n_clients);
            push_request(&mut depots, next, d, destination, rng.random_range(1..=3));
            next += 1;
        }
    }
    let vehicles = (0..n_vehicles)
        .map(|id| {
            let at = rng.random_range(0..n_depots);
            vehicle(id, at, depots[at].position, rng.random_range(1..=3))
        })
        .collect();
    let config = EpisodeConfig::one_shot([n_vehicles, 0, 0], n_depots, n_clients);
    World::from_parts(&config, depots, clients, vehicles, 0)
}

/// Recounts every relation by testing each candidate (source, target) pair.
fn brute_force_counts(world: &World, nb: &Neighborhood) -> [usize; 5] {
    let caps: Vec<u8> = nb.vehicles.iter().map(|&v| world.vehicles[v].capacity).collect();
    let n_depots = world.depots.len();
    let (mut visits, mut communicates, mut has, mut assigned, mut depends) = (0, 0, 0, 0, 0);
    for _ in &nb.vehicles {
        visits += (0..n_depots).count();
        communicates += nb.vehicles.len();
    }
    for (i, p) in nb.payloads.iter().enumerate() {
        has += (0..n_depots).filter(|&d| d == p.origin).count();
        depends += (0..nb.payloads.len()).filter(|&j| j == i).count();
        assigned += caps.iter().filter(|&&c| p.capacity <= c).count();
    }
    [visits, communicates, has, assigned, depends]
}

fn hig_counts(world: &World, nb: &Neighborhood) -> [usize; 5] {
    let g = build_hig(world, nb).unwrap();
    [
        g.edge_count(Relation::Visits),
        g.edge_count(Relation::Communicates),
        g.edge_count(Relation::Has),
        g.edge_count(Relation::AssignedTo),
        g.edge_count(Relation::Depends),
    ]
}

#[test]
fn worked_edge_count_example() {
    let mut depots = vec![depot(0, 2.0, 3.0), depot(1, 10.0, 4.0), depot(2, 20.0, 18.0)];
    push_request(&mut depots, 0, 0, 3, 1);
    push_request(&mut depots, 1, 1, 4, 3);
    let positions: Vec<Point> = depots.iter().map(|d| d.position).collect();
    let vehicles = vec![vehicle(0, 0, positions[0], 2), vehicle(1, 1, positions[1], 3)];
    let clients = vec![Point::new(6.0, 15.0), Point::new(17.0, 7.0)];
    let config = EpisodeConfig::one_shot([0, 1, 1], 3, 2);
    let world = World::from_parts(&config, depots, clients, vehicles, 0);
    let nb = observe(&world, 0, 2, 2).unwrap();
    assert_eq!(nb.vehicles.len(), 2);
    assert_eq!(nb.depots, vec![0, 1]);
    assert_eq!(hig_counts(&world, &nb), [6, 4, 2, 3, 2]);
}

#[test]
fn edge_counts_match_formulas_and_recounts() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..200 {
        let world = random_world(&mut rng);
        let k_v = rng.random_range(1..=world.vehicles.len());
        let k_d = rng.random_range(1..=world.depots.len());
        let ego = rng.random_range(0..world.vehicles.len());
        let nb = observe(&world, ego, k_v, k_d).unwrap();
        assert_eq!(nb.vehicles[0], ego);
        assert_eq!(nb.vehicles.len(), k_v);
        assert_eq!(nb.depots.len(), k_d);

        let (v, d, p) = (nb.vehicles.len(), world.depots.len(), nb.payloads.len());
        let assigned: usize = nb
            .payloads
            .iter()
            .map(|pl| nb.vehicles.iter().filter(|&&u| pl.capacity <= world.vehicles[u].capacity).count())
            .sum();
        let counts = hig_counts(&world, &nb);
        assert_eq!(counts, [v * d, v * v, p, assigned, p]);
        assert_eq!(counts, brute_force_counts(&world, &nb));

        let g = build_hig(&world, &nb).unwrap();
        g.validate().unwrap();
        assert_eq!(g.node_count(MetaType::Depot), d);
        // rebuilding gives the same graph
        assert_eq!(build_hig(&world, &observe(&world, ego, k_v, k_d).unwrap()).unwrap(), g);
        // every has edge points at the payload's own depot
        for &(s, t) in g.edges(Relation::Has) {
            assert_eq!(nb.payloads[s].origin, t);
        }
    }
}

#[test]
fn minimal_and_capacity_filtered_graphs() {
    let depots = vec![depot(0, 1.0, 1.0), depot(1, 9.0, 9.0)];
    let vehicles = vec![vehicle(0, 0, Point::new(1.0, 1.0), 1)];
    let config = EpisodeConfig::one_shot([1, 0, 0], 2, 1);
    let world = World::from_parts(&config, depots.clone(), vec![Point::new(5.0, 5.0)], vehicles.clone(), 0);
    let nb = observe(&world, 0, 1, 2).unwrap();
    let g = build_hig(&world, &nb).unwrap();
    assert_eq!(g.edge_count(Relation::Visits), 2);
    assert_eq!(g.edge_count(Relation::Communicates), 1);
    assert_eq!(g.total_edges(), 3);

    let mut loaded = depots;
    push_request(&mut loaded, 0, 0, 2, 3);
    let world = World::from_parts(&config, loaded, vec![Point::new(5.0, 5.0)], vehicles, 0);
    let nb = observe(&world, 0, 1, 2).unwrap();
    assert_eq!(build_hig(&world, &nb).unwrap().edge_count(Relation::AssignedTo), 0);
}

#[test]
fn payloads_of_unobserved_depots_are_rejected() {
    let mut depots = vec![depot(0, 1.0, 1.0), depot(1, 20.0, 20.0)];
    push_request(&mut depots, 0, 1, 2, 1);
    let config = EpisodeConfig::one_shot([1, 0, 0], 2, 1);
    let world = World::from_parts(&config, depots, vec![Point::new(5.0, 5.0)], vec![vehicle(0, 0, Point::new(1.0, 1.0), 3)], 0);
    let mut nb = observe(&world, 0, 1, 1).unwrap();
    assert!(nb.payloads.is_empty());
    nb.payloads.push(world.depots[1].queue[0].clone());
    assert!(build_hig(&world, &nb).is_err());
}

#[test]
fn nearest_depots_break_ties_by_id() {
    // distances 1, 2, 2 for ids 7, 3, 5
    let mut depots: Vec<Depot> = (0..8).map(|id| depot(id, 23.0, 23.0)).collect();
    depots[7].position = Point::new(1.0, 0.0);
    depots[3].position = Point::new(0.0, 2.0);
    depots[5].position = Point::new(2.0, 0.0);
    let config = EpisodeConfig::one_shot([1, 0, 0], 8, 1);
    let world = World::from_parts(&config, depots, vec![Point::new(5.0, 5.0)], vec![vehicle(0, 7, Point::new(0.0, 0.0), 1)], 0);
    let nb = observe(&world, 0, 1, 2).unwrap();
    assert_eq!(nb.depots, vec![7, 3]);
    assert_eq!(nb.vehicles, vec![0]);
    assert_eq!(observe(&world, 0, 1, 8).unwrap().depots.len(), 8);
}

#[test]
fn feature_row_examples() {
    let mut depots = vec![depot(0, 12.0, 12.0), depot(1, 3.0, 6.0)];
    depots[0].arrival_rate = 0.05;
    depots[0].expected_size = 2.0;
    let clients = vec![Point::new(0.0, 0.0)];
    let vehicles = vec![vehicle(0, 1, Point::new(3.0, 6.0), 2)];
    let config = EpisodeConfig::one_shot([0, 1, 0], 2, 1);
    let world = World::from_parts(&config, depots, clients, vehicles, 0);
    assert_eq!(depot_row(&world, 0), [0.5, 0.5, 0.05, 2.0]);
    let p = PayloadRequest {
        id: 0,
        origin: 0,
        destination: 2,
        capacity: 1,
        payoff: 10.33,
        arrival_tick: 0,
    };
    assert_eq!(payload_row(&world, &p), [10.33, 0.0, 0.0, 1.0]);
    assert_eq!(vehicle_row(&world, 0), [0.125, 0.25, 0.125, 0.25, 2.0]);
    assert!((payoff(Point::new(12.0, 12.0), Point::new(0.0, 0.0), 1) - 2.0 - 288f64.sqrt() + 0.0167 * 288.0).abs() < 1e-12);
}

#[test]
fn decoder_graph_counts() {
    let one = build_hdg(1);
    for r in Relation::DECODER {
        assert_eq!(one.edge_count(r), 1, "{r:?}");
    }
    assert_eq!(build_hdg(3).total_edges(), 16);
    assert_eq!(build_hdg(10).edge_count(Relation::DNearD), 100);
    let g = build_hdg(4);
    g.validate().unwrap();
    assert_eq!(g.node_count(MetaType::GraphEmbedding), 1);
    assert_eq!(g.node_count(MetaType::ValueNode), 1);
    assert_eq!(g.node_count(MetaType::Depot), 4);
}

#[test]
fn graph_json_lists_every_relation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let world = random_world(&mut rng);
    let nb = observe(&world, 0, 1, world.depots.len()).unwrap();
    let json = build_hig(&world, &nb).unwrap().to_json().unwrap();
    for r in Relation::INTERACTION {
        assert!(json.contains(r.name()), "{}", r.name());
    }
}
