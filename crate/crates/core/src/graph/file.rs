use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, EdgeWeighting, PartitionKind, RegionalPartition, SiteGraph, SiteMeta, Subgraph};
use crate::error::{Error, Result};

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Connected,
    Random,
    Regional,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "connected" => Ok(Strategy::Connected),
            "random" => Ok(Strategy::Random),
            "regional" => Ok(Strategy::Regional),
            other => Err(Error::Config(format!("unknown strategy {other}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Connected => "connected",
            Strategy::Random => "random",
            Strategy::Regional => "regional",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub miles: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgraphRecord {
    pub label: String,
    /// Global node indices, in local order.
    pub nodes: Vec<usize>,
    /// Edges in local indexing.
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub kind: PartitionKind,
    pub region_order: Vec<String>,
    /// Region label per node, in node order.
    pub region_of: Vec<String>,
    pub subgraphs: Vec<SubgraphRecord>,
}

/// On-disk graph: node order, edges, weights and an optional partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub format_version: u32,
    pub strategy: Strategy,
    pub threshold_miles: f64,
    pub weighting: EdgeWeighting,
    pub nodes: Vec<SiteMeta>,
    pub edges: Vec<EdgeRecord>,
    pub partition: Option<PartitionFile>,
}

fn edge_records(g: &SiteGraph) -> Vec<EdgeRecord> {
    g.edges()
        .iter()
        .map(|e| EdgeRecord {
            i: e.i,
            j: e.j,
            miles: e.miles,
            weight: g.adjacency().get(e.i, e.j),
        })
        .collect()
}

fn edges_from(records: &[EdgeRecord]) -> Vec<Edge> {
    records
        .iter()
        .map(|r| Edge {
            i: r.i,
            j: r.j,
            miles: r.miles,
        })
        .collect()
}

/// Random groups always carry raw distances; regional subgraphs share the
/// full graph's weighting.
fn partition_weighting(kind: PartitionKind, full: EdgeWeighting) -> EdgeWeighting {
    match kind {
        PartitionKind::Random { .. } => EdgeWeighting::Raw,
        PartitionKind::Regional => full,
    }
}

impl GraphFile {
    pub fn new(
        strategy: Strategy,
        threshold_miles: f64,
        graph: &SiteGraph,
        partition: Option<&RegionalPartition>,
    ) -> Self {
        let partition = partition.map(|p| PartitionFile {
            kind: p.kind(),
            region_order: p.region_order().into_iter().map(str::to_owned).collect(),
            region_of: (0..p.node_count()).map(|i| p.region_of(i).to_owned()).collect(),
            subgraphs: p
                .subgraphs()
                .iter()
                .map(|s| SubgraphRecord {
                    label: s.label.clone(),
                    nodes: s.nodes.clone(),
                    edges: edge_records(&s.graph),
                })
                .collect(),
        });
        GraphFile {
            format_version: GRAPH_FORMAT_VERSION,
            strategy,
            threshold_miles,
            weighting: graph.weighting(),
            nodes: graph.nodes().to_vec(),
            edges: edge_records(graph),
            partition,
        }
    }

    /// Rebuilds the full graph and (when present) the partition, recomputing
    /// all normalized operators.
    pub fn materialize(&self) -> Result<(SiteGraph, Option<RegionalPartition>)> {
        if self.format_version != GRAPH_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported graph format version {}",
                self.format_version
            )));
        }
        let graph = SiteGraph::from_edges(self.nodes.clone(), edges_from(&self.edges), self.weighting)?;
        let partition = match &self.partition {
            None => None,
            Some(pf) => {
                let weighting = partition_weighting(pf.kind, self.weighting);
                let subgraphs =
                    pf.subgraphs
                        .iter()
                        .map(|s| {
                            let nodes =
                                s.nodes
                                    .iter()
                                    .map(|&g| {
                                        self.nodes.get(g).cloned().ok_or_else(|| {
                                            Error::Data(format!("subgraph {} references node {g}", s.label))
                                        })
                                    })
                                    .collect::<Result<Vec<_>>>()?;
                            Ok(Subgraph {
                                label: s.label.clone(),
                                nodes: s.nodes.clone(),
                                graph: SiteGraph::from_edges(nodes, edges_from(&s.edges), weighting)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                Some(RegionalPartition::from_subgraphs(pf.kind, self.nodes.len(), subgraphs)?)
            }
        };
        match (self.strategy, &partition) {
            (Strategy::Connected, None) => {}
            (Strategy::Regional | Strategy::Random, Some(_)) => {}
            (s, _) => {
                return Err(Error::Config(format!(
                    "graph strategy {s} inconsistent with partition presence"
                )))
            }
        }
        Ok((graph, partition))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::site;
    use super::super::{build_connected, decompose_random, decompose_regional, Haversine};
    use super::*;

    #[test]
    fn roundtrip_preserves_graph_and_partition() {
        let sites = vec![
            site("a", "WI", 43.0, -89.0),
            site("b", "WI", 43.2, -89.1),
            site("c", "IA", 43.3, -89.3),
            site("d", "IA", 43.1, -89.6),
        ];
        let g = build_connected(&sites, &Haversine, 40.0, EdgeWeighting::default()).unwrap();
        for (strategy, p) in [
            (Strategy::Regional, decompose_regional(&g).unwrap()),
            (Strategy::Random, decompose_random(&g, 2, 3, &Haversine).unwrap()),
        ] {
            let file = GraphFile::new(strategy, 40.0, &g, Some(&p));
            let json = serde_json::to_string(&file).unwrap();
            let back: GraphFile = serde_json::from_str(&json).unwrap();
            let (g2, p2) = back.materialize().unwrap();
            assert_eq!(g2, g);
            assert_eq!(p2.unwrap(), p);
        }
    }

    #[test]
    fn strategy_and_partition_must_agree() {
        let g = build_connected(&[site("a", "WI", 43.0, -89.0)], &Haversine, 40.0, EdgeWeighting::Binary).unwrap();
        let file = GraphFile::new(Strategy::Regional, 40.0, &g, None);
        assert!(matches!(file.materialize(), Err(Error::Config(_))));
    }
}
