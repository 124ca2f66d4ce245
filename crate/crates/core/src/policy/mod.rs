//! Graph-attention policies over the interaction graph.
//!
//! The encoder-decoder runs three attention layers over the interaction
//! graph, pools each node type into a graph embedding, and runs two more
//! layers over the decoder graph. Depot scores are the (leaky) dot product
//! of each depot's final embedding with the graph node's; the value is read
//! off the value node. The single-stage variants stop after the encoder and
//! read scores straight from a one-wide depot output.

mod batch;
mod layer;

use std::collections::BTreeMap;
use std::path::Path;
use std::rc::Rc;

use aam_nn::{softmax_rows, Checkpoint, Matrix, ParamSet, Tape, Var, LEAKY_SLOPE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use batch::{GraphBatch, RelationIndex};
pub use layer::{AttentionRecord, LayerSpec};

use crate::obsgraph::{
    build_hdg, build_hig, observe, HeteroGraph, MetaType, Neighborhood, Relation, DEPOT_FEATURES, PAYLOAD_FEATURES,
    VEHICLE_FEATURES,
};
use crate::sim::World;
use crate::{Error, Result};

/// Width of each node embedding leaving the encoder.
pub const EMBEDDING: usize = 64;
/// Width of the value node's initial (zero) feature.
pub const VALUE_INIT: usize = 32;
const VALUE_HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Attention encoder plus attention decoder with a value node.
    EncDec,
    /// Attention encoder only; depots score themselves.
    HetGat,
    /// As `HetGat` with uniform neighbour weights instead of attention.
    HetGcn,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::EncDec => "encdec",
            Architecture::HetGat => "hetgat",
            Architecture::HetGcn => "hetgcn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "encdec" => Some(Architecture::EncDec),
            "hetgat" => Some(Architecture::HetGat),
            "hetgcn" => Some(Architecture::HetGcn),
            _ => None,
        }
    }

    pub fn default_entropy_coef(self) -> f64 {
        match self {
            Architecture::EncDec => 1e-2,
            Architecture::HetGat | Architecture::HetGcn => 1e-3,
        }
    }
}

/// Observed depots with nothing the vehicle can carry are excluded; if that
/// excludes every depot the mask is lifted entirely. `true` means excluded.
pub fn rebalancing_mask(nb: &Neighborhood, depot_count: usize, capacity: u8) -> Vec<bool> {
    let mut mask = vec![false; depot_count];
    for &d in &nb.depots {
        mask[d] = !nb.payloads.iter().any(|p| p.origin == d && p.capacity <= capacity);
    }
    if mask.iter().all(|&m| m) {
        mask.fill(false);
    }
    mask
}

/// Everything a vehicle's decision depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub hig: HeteroGraph,
    /// Excluded depots; all `false` when masking is off.
    pub mask: Vec<bool>,
}

impl Observation {
    pub fn new(world: &World, vehicle: usize, k_v: usize, k_d: usize, use_mask: bool) -> Result<Self> {
        let nb = observe(world, vehicle, k_v, k_d)?;
        let hig = build_hig(world, &nb)?;
        let depots = world.depots.len();
        let mask = if use_mask {
            rebalancing_mask(&nb, depots, world.vehicles[vehicle].capacity)
        } else {
            vec![false; depots]
        };
        Ok(Self { hig, mask })
    }

    pub fn depot_count(&self) -> usize {
        self.mask.len()
    }
}

/// Several observations prepared for one batched forward pass.
#[derive(Clone, Debug)]
pub struct BatchInput {
    pub hig: GraphBatch,
    pub hdg: GraphBatch,
    pub mask: Rc<[bool]>,
    pub graphs: usize,
    pub depots: usize,
}

impl BatchInput {
    pub fn new(observations: &[&Observation]) -> Result<Self> {
        let depots = observations.first().map_or(0, |o| o.depot_count());
        if observations.is_empty() || observations.iter().any(|o| o.depot_count() != depots) {
            return Err(Error::LengthMismatch("batch needs observations over one depot set".into()));
        }
        let higs: Vec<&HeteroGraph> = observations.iter().map(|o| &o.hig).collect();
        let hdg = build_hdg(depots);
        let hdgs = vec![&hdg; observations.len()];
        Ok(Self {
            hig: GraphBatch::new(&higs),
            hdg: GraphBatch::new(&hdgs),
            mask: observations.iter().flat_map(|o| o.mask.iter().copied()).collect(),
            graphs: observations.len(),
            depots,
        })
    }
}

/// Tape handles produced by one forward pass over a batch.
pub struct ForwardPass {
    /// Unmasked depot scores, `graphs x depots`.
    pub scores: Var,
    /// Masked log-probabilities, `graphs x depots`.
    pub log_probs: Var,
    /// `graphs x 1`.
    pub values: Var,
    pub attention: Vec<AttentionRecord>,
}

/// Action distribution and value for one observation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyOutput {
    pub probabilities: Vec<f64>,
    pub value: f64,
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Policy {
    pub arch: Architecture,
    pub params: ParamSet,
    encoder: Vec<LayerSpec>,
    decoder: Vec<LayerSpec>,
}

fn widths(v: usize, d: usize, p: usize) -> BTreeMap<MetaType, usize> {
    BTreeMap::from([(MetaType::Vehicle, v), (MetaType::Depot, d), (MetaType::Payload, p)])
}

fn decoder_widths(g: usize, d: usize, val: usize) -> BTreeMap<MetaType, usize> {
    BTreeMap::from([(MetaType::GraphEmbedding, g), (MetaType::Depot, d), (MetaType::ValueNode, val)])
}

impl Policy {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let attention = arch != Architecture::HetGcn;
        let enc = |name: &str, inputs, outputs, heads, linear: Vec<MetaType>| LayerSpec {
            name: name.into(),
            inputs,
            outputs,
            heads,
            relations: Relation::INTERACTION.to_vec(),
            linear,
            attention,
        };
        let mut encoder = vec![
            enc("enc1", widths(VEHICLE_FEATURES, DEPOT_FEATURES, PAYLOAD_FEATURES), widths(32, 32, 32), 8, vec![]),
            enc("enc2", widths(32, 32, 32), widths(32, 32, 32), 8, vec![]),
        ];
        let mut decoder = Vec::new();
        if arch == Architecture::EncDec {
            encoder.push(enc("enc3", widths(32, 32, 32), widths(EMBEDDING, EMBEDDING, EMBEDDING), 1, vec![]));
            let dec = |name: &str, inputs, outputs, heads, linear| LayerSpec {
                name: name.into(),
                inputs,
                outputs,
                heads,
                relations: Relation::DECODER.to_vec(),
                linear,
                attention,
            };
            decoder.push(dec("dec1", decoder_widths(3 * EMBEDDING, EMBEDDING, VALUE_INIT), decoder_widths(48, 48, 48), 8, vec![]));
            decoder.push(dec(
                "dec2",
                decoder_widths(48, 48, 48),
                decoder_widths(EMBEDDING, EMBEDDING, EMBEDDING),
                1,
                vec![MetaType::GraphEmbedding, MetaType::Depot],
            ));
        } else {
            encoder.push(enc("enc3", widths(32, 32, 32), widths(EMBEDDING, 1, EMBEDDING), 1, vec![MetaType::Depot]));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for layer in encoder.iter().chain(&decoder) {
            layer.register(&mut params, &mut rng)?;
        }
        params.insert_glorot("value.w1", EMBEDDING, VALUE_HIDDEN, &mut rng)?;
        params.insert_zeros("value.b1", 1, VALUE_HIDDEN)?;
        params.insert_glorot("value.w2", VALUE_HIDDEN, VALUE_HIDDEN, &mut rng)?;
        params.insert_zeros("value.b2", 1, VALUE_HIDDEN)?;
        params.insert_glorot("value.w3", VALUE_HIDDEN, 1, &mut rng)?;
        params.insert_zeros("value.b3", 1, 1)?;
        Ok(Self {
            arch,
            params,
            encoder,
            decoder,
        })
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn value_head(tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let mut h = x;
        for k in 1..=3 {
            let w = tape.param_named(&format!("value.w{k}"))?;
            let b = tape.param_named(&format!("value.b{k}"))?;
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
            if k < 3 {
                h = tape.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }

    /// Records the batched forward computation on `tape`.
    pub fn forward(&self, tape: &mut Tape<'_>, input: &BatchInput) -> Result<ForwardPass> {
        let mut attention = Vec::new();
        let mut h: BTreeMap<MetaType, Var> = [MetaType::Vehicle, MetaType::Depot, MetaType::Payload]
            .into_iter()
            .map(|t| {
                let width = self.encoder[0].inputs[&t];
                let x = input.hig.features.get(&t).cloned().unwrap_or_else(|| Matrix::zeros(0, width));
                (t, tape.constant(x))
            })
            .collect();
        for layer in &self.encoder {
            h = layer.forward(tape, &input.hig, &h, &mut attention)?;
        }
        let pooled = |tape: &mut Tape<'_>, t: MetaType, x: Var| -> Result<Var> {
            let pool = tape.constant(input.hig.mean_pool(t));
            Ok(tape.matmul(pool, x)?)
        };

        let (scores, values) = if self.arch == Architecture::EncDec {
            let parts = [MetaType::Vehicle, MetaType::Depot, MetaType::Payload]
                .into_iter()
                .map(|t| pooled(tape, t, h[&t]))
                .collect::<Result<Vec<_>>>()?;
            let g = tape.concat_cols(&parts)?;
            let value_init = tape.constant(Matrix::zeros(input.graphs, VALUE_INIT));
            let mut d = BTreeMap::from([
                (MetaType::GraphEmbedding, g),
                (MetaType::Depot, h[&MetaType::Depot]),
                (MetaType::ValueNode, value_init),
            ]);
            for layer in &self.decoder {
                d = layer.forward(tape, &input.hdg, &d, &mut attention)?;
            }
            let owner: Rc<[usize]> = input.hdg.owner[&MetaType::Depot].clone().into();
            let query = tape.gather_rows(d[&MetaType::GraphEmbedding], owner)?;
            let product = tape.mul(query, d[&MetaType::Depot])?;
            // scaled so initial scores stay near zero
            let ones = tape.constant(Matrix::filled(EMBEDDING, 1, 1.0 / (EMBEDDING as f64).sqrt()));
            let s = tape.matmul(product, ones)?;
            let s = tape.leaky_relu(s, LEAKY_SLOPE);
            let scores = tape.reshape(s, input.graphs, input.depots)?;
            let values = Self::value_head(tape, d[&MetaType::ValueNode])?;
            (scores, values)
        } else {
            let scores = tape.reshape(h[&MetaType::Depot], input.graphs, input.depots)?;
            let v = pooled(tape, MetaType::Vehicle, h[&MetaType::Vehicle])?;
            (scores, Self::value_head(tape, v)?)
        };

        let masked = if input.mask.iter().any(|&m| m) {
            tape.mask_fill(scores, input.mask.clone())?
        } else {
            scores
        };
        let log_probs = tape.log_softmax(masked)?;
        Ok(ForwardPass {
            scores,
            log_probs,
            values,
            attention,
        })
    }

    /// Distribution and value for a single observation.
    pub fn evaluate(&self, obs: &Observation) -> Result<PolicyOutput> {
        let input = BatchInput::new(&[obs])?;
        let mut tape = Tape::new(&self.params);
        let pass = self.forward(&mut tape, &input)?;
        let scores = tape.value(pass.scores).clone();
        let mut masked = scores.clone();
        for (v, &m) in masked.data_mut().iter_mut().zip(obs.mask.iter()) {
            if m {
                *v = f64::NEG_INFINITY;
            }
        }
        Ok(PolicyOutput {
            probabilities: softmax_rows(&masked)?.into_data(),
            value: tape.value(pass.values).item(),
            scores: scores.into_data(),
            mask: obs.mask.clone(),
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::from_params(&self.params);
        ckpt.meta.insert("architecture".into(), self.arch.name().into());
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let name = ckpt.meta.get("architecture").map_or("encdec", String::as_str);
        let arch = Architecture::parse(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture {name:?} in checkpoint")))?;
        let mut policy = Self::new(arch, 0)?;
        ckpt.load_into(&mut policy.params)?;
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn info(&self) -> PolicyInfo {
        PolicyInfo {
            architecture: self.arch.name().into(),
            layers: self
                .layers()
                .map(|l| LayerInfo {
                    name: l.name.clone(),
                    heads: l.heads,
                    attention: l.attention,
                    relations: l.relations.iter().map(|r| r.name().to_string()).collect(),
                    outputs: l.outputs.iter().map(|(t, w)| (format!("{t:?}"), *w)).collect(),
                })
                .collect(),
            parameters: self
                .params
                .iter()
                .map(|p| ParamInfo {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    count: p.value.len(),
                })
                .collect(),
            total_parameters: self.params.scalar_count(),
        }
    }
}

/// Audit listing of a policy's structure.
#[derive(Clone, Debug, Serialize)]
pub struct PolicyInfo {
    pub architecture: String,
    pub layers: Vec<LayerInfo>,
    pub parameters: Vec<ParamInfo>,
    pub total_parameters: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerInfo {
    pub name: String,
    pub heads: usize,
    pub attention: bool,
    pub relations: Vec<String>,
    pub outputs: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: [usize; 2],
    pub count: usize,
}

/// Observes, builds the graphs and evaluates `policy` for one vehicle.
pub fn policy_forward(
    world: &World,
    vehicle: usize,
    policy: &Policy,
    k_v: usize,
    k_d: usize,
    use_mask: bool,
) -> Result<PolicyOutput> {
    policy.evaluate(&Observation::new(world, vehicle, k_v, k_d, use_mask)?)
}
