use crate::error::{Error, Result};
use crate::graph::{RegionalPartition, SiteGraph};
use crate::numerics::{Tape, Tensor, Var};

/// Constant matrices derived from a graph and its optional partition,
/// computed once and borrowed by every forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphContext {
    n: usize,
    normalized: Tensor,
    self_and_neighbors: Tensor,
    ones: Tensor,
    regions: Vec<RegionContext>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionContext {
    pub label: String,
    pub nodes: Vec<usize>,
    /// `n_r x n` row selector.
    pub gather: Tensor,
    /// `n x n_r`, the transpose of `gather`.
    pub scatter: Tensor,
    pub normalized: Tensor,
    pub ones: Tensor,
}

/// A [`GraphContext`] recorded on one tape.
#[derive(Clone, Debug)]
pub struct ContextVars {
    pub normalized: Var,
    pub self_and_neighbors: Var,
    pub ones: Var,
    pub regions: Vec<RegionVars>,
}

#[derive(Clone, Debug)]
pub struct RegionVars {
    pub label: String,
    pub gather: Var,
    pub scatter: Var,
    pub normalized: Var,
    pub ones: Var,
}

impl GraphContext {
    pub fn new(graph: &SiteGraph, partition: Option<&RegionalPartition>) -> Result<Self> {
        let n = graph.len();
        let regions = match partition {
            None => Vec::new(),
            Some(p) => {
                if p.node_count() != n {
                    return Err(Error::Data(format!(
                        "partition covers {} nodes, graph has {n}",
                        p.node_count()
                    )));
                }
                p.subgraphs()
                    .iter()
                    .map(|sg| {
                        let mut gather = Tensor::zeros(&[sg.nodes.len(), n]);
                        for (local, &global) in sg.nodes.iter().enumerate() {
                            gather.set(local, global, 1.0);
                        }
                        RegionContext {
                            label: sg.label.clone(),
                            nodes: sg.nodes.clone(),
                            scatter: gather.transpose(),
                            gather,
                            normalized: sg.graph.normalized().clone(),
                            ones: Tensor::filled(&[sg.nodes.len(), 1], 1.0),
                        }
                    })
                    .collect()
            }
        };
        Ok(GraphContext {
            n,
            normalized: graph.normalized().clone(),
            self_and_neighbors: graph.self_and_neighbors(),
            ones: Tensor::filled(&[n, 1], 1.0),
            regions,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn regions(&self) -> &[RegionContext] {
        &self.regions
    }

    pub fn region_labels(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.label.clone()).collect()
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> ContextVars {
        ContextVars {
            normalized: tape.leaf_ref(&self.normalized, false),
            self_and_neighbors: tape.leaf_ref(&self.self_and_neighbors, false),
            ones: tape.leaf_ref(&self.ones, false),
            regions: self
                .regions
                .iter()
                .map(|r| RegionVars {
                    label: r.label.clone(),
                    gather: tape.leaf_ref(&r.gather, false),
                    scatter: tape.leaf_ref(&r.scatter, false),
                    normalized: tape.leaf_ref(&r.normalized, false),
                    ones: tape.leaf_ref(&r.ones, false),
                })
                .collect(),
        }
    }
}
