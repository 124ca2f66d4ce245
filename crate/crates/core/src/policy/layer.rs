//! One relation-typed attention layer.
//!
//! For every relation `S -> T` the layer projects source rows with its own
//! weight, scores each edge per head from a source and a target attention
//! vector, normalises the scores over each target's in-neighbours and sums
//! the weighted messages. The target's own projection is added before the
//! activation; without it, relations that connect every source to every
//! target hand all targets the same message. A node's output is the mean
//! over the relation types that reach it.

use std::collections::BTreeMap;
use std::rc::Rc;

use aam_nn::{Matrix, ParamSet, Tape, Var, LEAKY_SLOPE};
use rand::Rng;

use super::batch::GraphBatch;
use crate::obsgraph::{MetaType, Relation};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub inputs: BTreeMap<MetaType, usize>,
    /// Total output width per target type (all heads together).
    pub outputs: BTreeMap<MetaType, usize>,
    pub heads: usize,
    pub relations: Vec<Relation>,
    /// Target types that skip the activation.
    pub linear: Vec<MetaType>,
    /// Learned attention when true, uniform `1 / in-degree` weights otherwise.
    pub attention: bool,
}

/// Attention weights of one relation, `edges x heads`, for inspection.
#[derive(Clone, Debug)]
pub struct AttentionRecord {
    pub layer: String,
    pub relation: Relation,
    pub weights: Var,
    pub targets: Rc<[usize]>,
}

impl LayerSpec {
    fn key(&self, r: Relation, part: &str) -> String {
        format!("{}.{}.{}", self.name, r.name(), part)
    }

    fn width(map: &BTreeMap<MetaType, usize>, t: MetaType) -> Result<usize> {
        map.get(&t)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(format!("no width for {t:?}")))
    }

    pub fn register(&self, params: &mut ParamSet, rng: &mut impl Rng) -> Result<()> {
        for &r in &self.relations {
            let (s, t) = (r.source(), r.target());
            let (din, dout) = (Self::width(&self.inputs, s)?, Self::width(&self.outputs, t)?);
            if dout % self.heads != 0 {
                return Err(Error::InvalidConfig(format!("{}: width {dout} not divisible by {} heads", self.name, self.heads)));
            }
            params.insert_glorot(self.key(r, "w"), din, dout, rng)?;
            params.insert_glorot(self.key(r, "w_dst"), Self::width(&self.inputs, t)?, dout, rng)?;
            if self.attention {
                params.insert_glorot(self.key(r, "a_src"), 1, dout, rng)?;
                params.insert_glorot(self.key(r, "a_dst"), 1, dout, rng)?;
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        graph: &GraphBatch,
        inputs: &BTreeMap<MetaType, Var>,
        attention: &mut Vec<AttentionRecord>,
    ) -> Result<BTreeMap<MetaType, Var>> {
        let mut sums: BTreeMap<MetaType, Var> = BTreeMap::new();
        for index in &graph.relations {
            let r = index.relation;
            if !self.relations.contains(&r) {
                return Err(Error::UnknownRelation(format!("{} in layer {}", r.name(), self.name)));
            }
            let (s, t) = (r.source(), r.target());
            let input = |m: MetaType| {
                inputs
                    .get(&m)
                    .copied()
                    .ok_or_else(|| Error::UnknownRelation(format!("{} has no {m:?} input", self.name)))
            };
            let w = tape.param_named(&self.key(r, "w"))?;
            let xs = input(s)?;
            let projected = tape.matmul(xs, w)?;
            let w_dst = tape.param_named(&self.key(r, "w_dst"))?;
            let xt = input(t)?;
            let target_proj = tape.matmul(xt, w_dst)?;

            let weights = if self.attention {
                let a_src = tape.param_named(&self.key(r, "a_src"))?;
                let a_dst = tape.param_named(&self.key(r, "a_dst"))?;
                let from = tape.head_scores(projected, a_src, self.heads)?;
                let to = tape.head_scores(target_proj, a_dst, self.heads)?;
                let from = tape.gather_rows(from, index.src.clone())?;
                let to = tape.gather_rows(to, index.tgt.clone())?;
                let logits = tape.add(from, to)?;
                let logits = tape.leaky_relu(logits, LEAKY_SLOPE);
                let beta = tape.segment_softmax(logits, index.tgt.clone())?;
                attention.push(AttentionRecord {
                    layer: self.name.clone(),
                    relation: r,
                    weights: beta,
                    targets: index.tgt.clone(),
                });
                beta
            } else {
                let edges = index.src.len();
                let data = index
                    .uniform_weight
                    .iter()
                    .flat_map(|&w| std::iter::repeat_n(w, self.heads))
                    .collect();
                tape.constant(Matrix::from_vec(edges, self.heads, data)?)
            };

            let gathered = tape.edge_aggregate(weights, projected, index.src.clone(), index.tgt.clone(), graph.count(t), self.heads)?;
            let root = tape.scale_rows(target_proj, index.reached.clone())?;
            let mut message = tape.add(gathered, root)?;
            if !self.linear.contains(&t) {
                message = tape.leaky_relu(message, LEAKY_SLOPE);
            }
            let total = match sums.get(&t) {
                Some(&acc) => tape.add(acc, message)?,
                None => message,
            };
            sums.insert(t, total);
        }

        let mut out = BTreeMap::new();
        for (&t, &width) in &self.outputs {
            let v = match sums.get(&t) {
                Some(&sum) => tape.scale_rows(sum, graph.relation_share[&t].clone())?,
                None => tape.constant(Matrix::zeros(graph.count(t), width)),
            };
            out.insert(t, v);
        }
        Ok(out)
    }
}
