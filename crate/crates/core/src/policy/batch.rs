//! Disjoint union of several graphs so a layer runs once per minibatch.

use std::collections::BTreeMap;
use std::rc::Rc;

use aam_nn::Matrix;

use crate::obsgraph::{HeteroGraph, MetaType, Relation};

/// Edge index arrays of one relation over the whole batch.
#[derive(Clone, Debug)]
pub struct RelationIndex {
    pub relation: Relation,
    pub src: Rc<[usize]>,
    pub tgt: Rc<[usize]>,
    /// `1 / in-degree` of each edge's target within this relation.
    pub uniform_weight: Rc<[f64]>,
    /// 1 for target nodes with at least one edge of this relation, else 0.
    pub reached: Rc<[f64]>,
}

#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub graphs: usize,
    /// Graph index of every node, per type.
    pub owner: BTreeMap<MetaType, Vec<usize>>,
    /// Stacked feature rows, for the types the graphs carry features for.
    pub features: BTreeMap<MetaType, Matrix>,
    /// Relations with at least one edge, in relation order.
    pub relations: Vec<RelationIndex>,
    /// Per type, `1 / (number of relation types with an edge into the node)`,
    /// or 0 for nodes nothing points at.
    pub relation_share: BTreeMap<MetaType, Rc<[f64]>>,
}

impl GraphBatch {
    pub fn new(graphs: &[&HeteroGraph]) -> Self {
        let mut owner: BTreeMap<MetaType, Vec<usize>> = BTreeMap::new();
        let mut offsets: Vec<BTreeMap<MetaType, usize>> = Vec::with_capacity(graphs.len());
        for (b, g) in graphs.iter().enumerate() {
            let mut at = BTreeMap::new();
            for (&t, ids) in &g.nodes {
                let list = owner.entry(t).or_default();
                at.insert(t, list.len());
                list.extend(std::iter::repeat_n(b, ids.len()));
            }
            offsets.push(at);
        }

        let mut features = BTreeMap::new();
        let typed: Vec<MetaType> = graphs.iter().flat_map(|g| g.features.keys().copied()).collect();
        for t in typed {
            if features.contains_key(&t) {
                continue;
            }
            let width = graphs.iter().find_map(|g| g.features.get(&t)).map_or(0, Matrix::cols);
            let mut data = Vec::new();
            for g in graphs {
                if let Some(m) = g.features.get(&t) {
                    data.extend_from_slice(m.data());
                }
            }
            let rows = data.len() / width.max(1);
            features.insert(t, Matrix::from_vec(rows, width, data).expect("uniform widths"));
        }

        let count = |t: MetaType| owner.get(&t).map_or(0, Vec::len);
        let mut relations = Vec::new();
        let mut received: BTreeMap<MetaType, Vec<u32>> = BTreeMap::new();
        let all: Vec<Relation> = {
            let mut rs: Vec<Relation> = graphs.iter().flat_map(|g| g.edges.keys().copied()).collect();
            rs.sort();
            rs.dedup();
            rs
        };
        for r in all {
            let (mut src, mut tgt) = (Vec::new(), Vec::new());
            for (g, off) in graphs.iter().zip(&offsets) {
                let (os, ot) = (off.get(&r.source()).copied().unwrap_or(0), off.get(&r.target()).copied().unwrap_or(0));
                for &(s, t) in g.edges(r) {
                    src.push(s + os);
                    tgt.push(t + ot);
                }
            }
            if src.is_empty() {
                continue;
            }
            let mut degree = vec![0u32; count(r.target())];
            for &t in &tgt {
                degree[t] += 1;
            }
            let hits = received.entry(r.target()).or_insert_with(|| vec![0; count(r.target())]);
            for (h, &d) in hits.iter_mut().zip(&degree) {
                *h += u32::from(d > 0);
            }
            let uniform_weight = tgt.iter().map(|&t| 1.0 / f64::from(degree[t])).collect();
            let reached = degree.iter().map(|&d| if d > 0 { 1.0 } else { 0.0 }).collect();
            relations.push(RelationIndex {
                relation: r,
                src: src.into(),
                tgt: tgt.into(),
                uniform_weight,
                reached,
            });
        }
        let relation_share = owner
            .keys()
            .map(|&t| {
                let share = match received.get(&t) {
                    Some(h) => h.iter().map(|&n| if n == 0 { 0.0 } else { 1.0 / f64::from(n) }).collect(),
                    None => vec![0.0; count(t)].into(),
                };
                (t, share)
            })
            .collect();

        Self {
            graphs: graphs.len(),
            owner,
            features,
            relations,
            relation_share,
        }
    }

    pub fn count(&self, t: MetaType) -> usize {
        self.owner.get(&t).map_or(0, Vec::len)
    }

    /// `graphs x count(t)` matrix averaging each graph's rows of type `t`;
    /// graphs without such nodes get a zero row.
    pub fn mean_pool(&self, t: MetaType) -> Matrix {
        let owner = self.owner.get(&t).map_or(&[][..], Vec::as_slice);
        let mut sizes = vec![0usize; self.graphs];
        for &b in owner {
            sizes[b] += 1;
        }
        let mut m = Matrix::zeros(self.graphs, owner.len());
        for (n, &b) in owner.iter().enumerate() {
            m.set(b, n, 1.0 / sizes[b] as f64);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obsgraph::build_hdg;

    #[test]
    fn union_offsets_edges() {
        let (a, b) = (build_hdg(2), build_hdg(3));
        let batch = GraphBatch::new(&[&a, &b]);
        assert_eq!(batch.count(MetaType::Depot), 5);
        assert_eq!(batch.count(MetaType::GraphEmbedding), 2);
        let near = batch.relations.iter().find(|r| r.relation == Relation::DNearD).unwrap();
        assert_eq!(near.src.len(), 4 + 9);
        assert_eq!((near.src[4], near.tgt[4]), (2, 2));
        assert!(near.uniform_weight[4..].iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        // the value node receives two relation types
        assert_eq!(&batch.relation_share[&MetaType::ValueNode][..], &[0.5, 0.5]);
        let pool = batch.mean_pool(MetaType::Depot);
        assert_eq!(pool.row(1), &[0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }
}
