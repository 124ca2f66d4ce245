//! Local observations as typed graphs: the interaction graph a vehicle
//! builds from its neighbourhood and the fixed decoder graph over depots.

use std::collections::BTreeMap;

use aam_nn::Matrix;
use serde::{Deserialize, Serialize};

use crate::sim::{PayloadRequest, Point, World};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaType {
    Vehicle,
    Depot,
    Payload,
    GraphEmbedding,
    ValueNode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Has,
    Visits,
    Depends,
    AssignedTo,
    Communicates,
    GContributesVal,
    DContributesG,
    DContributesVal,
    DNearD,
}

impl Relation {
    pub const INTERACTION: [Relation; 5] = [
        Relation::Has,
        Relation::Visits,
        Relation::Depends,
        Relation::AssignedTo,
        Relation::Communicates,
    ];
    pub const DECODER: [Relation; 4] = [
        Relation::GContributesVal,
        Relation::DContributesG,
        Relation::DContributesVal,
        Relation::DNearD,
    ];

    pub fn source(self) -> MetaType {
        use MetaType::*;
        match self {
            Relation::Has | Relation::Depends | Relation::AssignedTo => Payload,
            Relation::Visits | Relation::Communicates => Vehicle,
            Relation::GContributesVal => GraphEmbedding,
            Relation::DContributesG | Relation::DContributesVal | Relation::DNearD => Depot,
        }
    }

    pub fn target(self) -> MetaType {
        use MetaType::*;
        match self {
            Relation::Has | Relation::Visits | Relation::DNearD => Depot,
            Relation::Depends => Payload,
            Relation::AssignedTo | Relation::Communicates => Vehicle,
            Relation::GContributesVal | Relation::DContributesVal => ValueNode,
            Relation::DContributesG => GraphEmbedding,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Has => "has",
            Relation::Visits => "visits",
            Relation::Depends => "depends",
            Relation::AssignedTo => "assigned_to",
            Relation::Communicates => "communicates",
            Relation::GContributesVal => "g_contributes_val",
            Relation::DContributesG => "d_contributes_g",
            Relation::DContributesVal => "d_contributes_val",
            Relation::DNearD => "d_near_d",
        }
    }
}

/// Feature widths of the interaction graph's node types.
pub const VEHICLE_FEATURES: usize = 5;
pub const DEPOT_FEATURES: usize = 4;
pub const PAYLOAD_FEATURES: usize = 4;

/// What one vehicle can see when it decides.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    pub ego: usize,
    /// Observed vehicles, ego first, then by distance.
    pub vehicles: Vec<usize>,
    /// Observed depots, nearest first.
    pub depots: Vec<usize>,
    /// Queued requests of the observed depots, in depot then queue order.
    pub payloads: Vec<PayloadRequest>,
}

impl Neighborhood {
    pub fn observes_depot(&self, depot: usize) -> bool {
        self.depots.contains(&depot)
    }
}

/// Typed nodes and edges. Edge endpoints index into the node list of the
/// relation's source and target types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeteroGraph {
    /// World ids of the nodes of each type (vehicle, depot or payload id;
    /// 0 for the singleton decoder nodes).
    pub nodes: BTreeMap<MetaType, Vec<u64>>,
    pub edges: BTreeMap<Relation, Vec<(usize, usize)>>,
    pub features: BTreeMap<MetaType, Matrix>,
}

impl HeteroGraph {
    pub fn node_count(&self, t: MetaType) -> usize {
        self.nodes.get(&t).map_or(0, Vec::len)
    }

    pub fn edge_count(&self, r: Relation) -> usize {
        self.edges.get(&r).map_or(0, Vec::len)
    }

    pub fn edges(&self, r: Relation) -> &[(usize, usize)] {
        self.edges.get(&r).map_or(&[], Vec::as_slice)
    }

    pub fn features(&self, t: MetaType) -> Option<&Matrix> {
        self.features.get(&t)
    }

    pub fn total_edges(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    /// Checks that every edge endpoint names an existing node.
    pub fn validate(&self) -> Result<()> {
        for (&r, list) in &self.edges {
            let (ns, nt) = (self.node_count(r.source()), self.node_count(r.target()));
            if let Some(&(s, t)) = list.iter().find(|&&(s, t)| s >= ns || t >= nt) {
                return Err(Error::LengthMismatch(format!(
                    "{} edge ({s}, {t}) outside {ns}x{nt} nodes",
                    r.name()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The `k_v` closest vehicles (ego first) and `k_d` closest depots of
/// `ego`; ties go to the lower id.
pub fn observe(world: &World, ego: usize, k_v: usize, k_d: usize) -> Result<Neighborhood> {
    let me = world.vehicles.get(ego).ok_or(Error::UnknownVehicle(ego))?.position;
    let by_distance = |items: &mut Vec<(f64, usize)>| items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut others: Vec<(f64, usize)> = world
        .vehicles
        .iter()
        .filter(|v| v.id != ego)
        .map(|v| (me.distance(v.position), v.id))
        .collect();
    by_distance(&mut others);
    let mut vehicles = vec![ego];
    vehicles.extend(others.iter().take(k_v.saturating_sub(1)).map(|&(_, id)| id));

    let mut depots: Vec<(f64, usize)> = world.depots.iter().map(|d| (me.distance(d.position), d.id)).collect();
    by_distance(&mut depots);
    let depots: Vec<usize> = depots.iter().take(k_d).map(|&(_, id)| id).collect();

    let payloads = depots
        .iter()
        .flat_map(|&d| world.depots[d].queue.iter().cloned())
        .collect();
    Ok(Neighborhood {
        ego,
        vehicles,
        depots,
        payloads,
    })
}

fn normalized(p: Point) -> [f64; 2] {
    let g = f64::from(crate::config::GRID_SIZE);
    [p.x / g, p.y / g]
}

pub fn vehicle_row(world: &World, v: usize) -> [f64; VEHICLE_FEATURES] {
    let veh = &world.vehicles[v];
    let [px, py] = normalized(world.node_position(veh.prev_stop));
    let [nx, ny] = normalized(world.node_position(veh.next_stop));
    [px, py, nx, ny, f64::from(veh.capacity)]
}

pub fn depot_row(world: &World, d: usize) -> [f64; DEPOT_FEATURES] {
    let depot = &world.depots[d];
    let [x, y] = normalized(depot.position);
    [x, y, depot.arrival_rate, depot.expected_size]
}

pub fn payload_row(world: &World, p: &PayloadRequest) -> [f64; PAYLOAD_FEATURES] {
    let [x, y] = normalized(world.node_position(p.destination));
    [p.payoff, x, y, f64::from(p.capacity)]
}

/// Feature matrices for the observed vehicles, all depots and the observed
/// payloads. An empty type gets a `0 x width` matrix.
pub fn feature_vectors(world: &World, nb: &Neighborhood) -> BTreeMap<MetaType, Matrix> {
    fn stack<const W: usize>(rows: Vec<[f64; W]>) -> Matrix {
        let n = rows.len();
        Matrix::from_vec(n, W, rows.into_iter().flatten().collect()).expect("row width is fixed")
    }
    BTreeMap::from([
        (MetaType::Vehicle, stack(nb.vehicles.iter().map(|&v| vehicle_row(world, v)).collect())),
        (MetaType::Depot, stack((0..world.depots.len()).map(|d| depot_row(world, d)).collect())),
        (MetaType::Payload, stack(nb.payloads.iter().map(|p| payload_row(world, p)).collect())),
    ])
}

/// The interaction graph of a neighbourhood. Depot nodes are all depots in
/// id order, since every observed vehicle may visit any of them.
pub fn build_hig(world: &World, nb: &Neighborhood) -> Result<HeteroGraph> {
    let depot_count = world.depots.len();
    if let Some(p) = nb.payloads.iter().find(|p| !nb.observes_depot(p.origin)) {
        return Err(Error::UnobservedDepot {
            payload: p.id,
            depot: p.origin,
        });
    }
    let caps: Vec<u8> = nb.vehicles.iter().map(|&v| world.vehicles[v].capacity).collect();
    let mut edges: BTreeMap<Relation, Vec<(usize, usize)>> = Relation::INTERACTION.iter().map(|&r| (r, Vec::new())).collect();
    let mut push = |r: Relation, s: usize, t: usize| edges.get_mut(&r).expect("all relations present").push((s, t));

    for (i, _) in nb.vehicles.iter().enumerate() {
        for d in 0..depot_count {
            push(Relation::Visits, i, d);
        }
        for j in 0..nb.vehicles.len() {
            push(Relation::Communicates, i, j);
        }
    }
    for (k, p) in nb.payloads.iter().enumerate() {
        push(Relation::Has, k, p.origin);
        push(Relation::Depends, k, k);
        for (i, &cap) in caps.iter().enumerate() {
            if p.capacity <= cap {
                push(Relation::AssignedTo, k, i);
            }
        }
    }

    let graph = HeteroGraph {
        nodes: BTreeMap::from([
            (MetaType::Vehicle, nb.vehicles.iter().map(|&v| v as u64).collect()),
            (MetaType::Depot, (0..depot_count as u64).collect()),
            (MetaType::Payload, nb.payloads.iter().map(|p| p.id).collect()),
        ]),
        edges,
        features: feature_vectors(world, nb),
    };
    Ok(graph)
}

/// The decoder graph over `depots` depot nodes plus one graph-embedding
/// node and one value node. It carries no features of its own.
pub fn build_hdg(depots: usize) -> HeteroGraph {
    let mut edges = BTreeMap::new();
    edges.insert(Relation::GContributesVal, vec![(0, 0)]);
    edges.insert(Relation::DContributesG, (0..depots).map(|d| (d, 0)).collect());
    edges.insert(Relation::DContributesVal, (0..depots).map(|d| (d, 0)).collect());
    edges.insert(
        Relation::DNearD,
        (0..depots).flat_map(|a| (0..depots).map(move |b| (a, b))).collect(),
    );
    HeteroGraph {
        nodes: BTreeMap::from([
            (MetaType::GraphEmbedding, vec![0]),
            (MetaType::Depot, (0..depots as u64).collect()),
            (MetaType::ValueNode, vec![0]),
        ]),
        edges,
        features: BTreeMap::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::EpisodeConfig;

    #[test]
    fn decoder_edge_counts() {
        let g = build_hdg(1);
        for r in Relation::DECODER {
            assert_eq!(g.edge_count(r), 1);
        }
        assert_eq!(build_hdg(10).edge_count(Relation::DNearD), 100);
        assert_eq!(build_hdg(3).total_edges(), 16);
        build_hdg(4).validate().unwrap();
    }

    #[test]
    fn relation_endpoints() {
        assert_eq!(Relation::Visits.source(), MetaType::Vehicle);
        assert_eq!(Relation::Visits.target(), MetaType::Depot);
        assert_eq!(Relation::AssignedTo.target(), MetaType::Vehicle);
        assert_eq!(Relation::DContributesG.target(), MetaType::GraphEmbedding);
    }

    #[test]
    fn features_have_fixed_widths() {
        let c = EpisodeConfig::one_shot([1, 1, 1], 4, 4);
        let w = World::new(&c, 0).unwrap();
        let nb = observe(&w, 1, 3, 2).unwrap();
        let g = build_hig(&w, &nb).unwrap();
        assert_eq!(g.features(MetaType::Vehicle).unwrap().cols(), 5);
        assert_eq!(g.features(MetaType::Depot).unwrap().cols(), 4);
        assert_eq!(g.features(MetaType::Payload).unwrap().cols(), 4);
        assert_eq!(nb.vehicles[0], 1);
        g.validate().unwrap();
        let back: HeteroGraph = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
