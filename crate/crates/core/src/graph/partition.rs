use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invert_permutation, DistanceProvider, Edge, EdgeWeighting, SiteGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionKind {
    /// One subgraph per region label, keeping the parent graph's edges.
    Regional,
    /// Seeded near-equal groups, each a complete graph weighted by raw
    /// distance.
    Random { groups: usize, seed: u64 },
}

/// One region's subgraph; `nodes[k]` is the global index of local node `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub label: String,
    pub nodes: Vec<usize>,
    pub graph: SiteGraph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionalPartition {
    kind: PartitionKind,
    node_count: usize,
    region_of: Vec<usize>,
    subgraphs: Vec<Subgraph>,
}

impl RegionalPartition {
    /// Assembles a partition from subgraphs, checking that their node sets
    /// are disjoint and cover `0..node_count`.
    pub fn from_subgraphs(kind: PartitionKind, node_count: usize, subgraphs: Vec<Subgraph>) -> Result<Self> {
        let mut region_of = vec![usize::MAX; node_count];
        for (r, sg) in subgraphs.iter().enumerate() {
            if sg.nodes.len() != sg.graph.len() {
                return Err(Error::Data(format!("subgraph {} node count mismatch", sg.label)));
            }
            for &g in &sg.nodes {
                if g >= node_count {
                    return Err(Error::Data(format!("subgraph {} references node {g}", sg.label)));
                }
                if region_of[g] != usize::MAX {
                    return Err(Error::Data(format!("node {g} assigned to two subgraphs")));
                }
                region_of[g] = r;
            }
        }
        if let Some(missing) = region_of.iter().position(|&r| r == usize::MAX) {
            return Err(Error::Data(format!("node {missing} not covered by the partition")));
        }
        Ok(RegionalPartition {
            kind,
            node_count,
            region_of,
            subgraphs,
        })
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn subgraphs(&self) -> &[Subgraph] {
        &self.subgraphs
    }

    pub fn region_order(&self) -> Vec<&str> {
        self.subgraphs.iter().map(|s| s.label.as_str()).collect()
    }

    /// Index into [`subgraphs`](Self::subgraphs) of the region holding `node`.
    pub fn region_index(&self, node: usize) -> usize {
        self.region_of[node]
    }

    pub fn region_of(&self, node: usize) -> &str {
        &self.subgraphs[self.region_of[node]].label
    }

    /// Degree of `node` inside its own subgraph.
    pub fn local_degree(&self, node: usize) -> usize {
        let sg = &self.subgraphs[self.region_of[node]];
        let local = sg.nodes.iter().position(|&g| g == node).expect("node in its region");
        sg.graph.degree(local)
    }

    /// Sum over subgraphs of `n_r * l_r` (each subgraph's own mean
    /// neighborhood size, self-loop included).
    pub fn overlap_cost(&self) -> f64 {
        self.subgraphs.iter().map(|s| s.graph.overlap_cost()).sum()
    }

    /// Union of all subgraph edges in global indexing.
    pub fn union_graph(&self, parent: &SiteGraph) -> Result<SiteGraph> {
        let mut edges = Vec::new();
        for sg in &self.subgraphs {
            for e in sg.graph.edges() {
                edges.push(Edge {
                    i: sg.nodes[e.i],
                    j: sg.nodes[e.j],
                    miles: e.miles,
                });
            }
        }
        SiteGraph::from_edges(parent.nodes().to_vec(), edges, parent.weighting())
    }

    /// Relabels nodes so that new node `k` is old node `perm[k]`. Subgraph
    /// membership is preserved; local order follows the new global order.
    pub fn permuted(&self, perm: &[usize]) -> Result<RegionalPartition> {
        let inverse = invert_permutation(perm, self.node_count)?;
        let mut subgraphs = Vec::with_capacity(self.subgraphs.len());
        for sg in &self.subgraphs {
            let mut order: Vec<usize> = (0..sg.nodes.len()).collect();
            order.sort_by_key(|&k| inverse[sg.nodes[k]]);
            let nodes = order.iter().map(|&k| inverse[sg.nodes[k]]).collect();
            subgraphs.push(Subgraph {
                label: sg.label.clone(),
                nodes,
                graph: sg.graph.permuted(&order)?,
            });
        }
        RegionalPartition::from_subgraphs(self.kind, self.node_count, subgraphs)
    }
}

/// One subgraph per distinct region label, labels in sorted order.
pub fn decompose_regional(g: &SiteGraph) -> Result<RegionalPartition> {
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, site) in g.nodes().iter().enumerate() {
        if site.region.trim().is_empty() {
            return Err(Error::Data(format!("site {} has an empty region label", site.site_id)));
        }
        members.entry(site.region.as_str()).or_default().push(i);
    }
    let subgraphs = members
        .into_iter()
        .map(|(label, nodes)| {
            Ok(Subgraph {
                label: label.to_owned(),
                graph: g.induced(&nodes)?,
                nodes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RegionalPartition::from_subgraphs(PartitionKind::Regional, g.len(), subgraphs)
}

/// Shuffles nodes into `groups` near-equal groups and connects every pair
/// inside a group, weighted by the raw `provider` distance.
pub fn decompose_random(
    g: &SiteGraph,
    groups: usize,
    seed: u64,
    provider: &dyn DistanceProvider,
) -> Result<RegionalPartition> {
    let n = g.len();
    if groups == 0 || groups > n {
        return Err(Error::Usage(format!("cannot split {n} nodes into {groups} groups")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (n / groups, n % groups);
    let mut subgraphs = Vec::with_capacity(groups);
    let mut start = 0;
    for r in 0..groups {
        let size = base + usize::from(r < extra);
        let mut nodes = order[start..start + size].to_vec();
        nodes.sort_unstable();
        start += size;

        let sites: Vec<_> = nodes.iter().map(|&i| g.nodes()[i].clone()).collect();
        let mut edges = Vec::new();
        for a in 0..sites.len() {
            for b in a + 1..sites.len() {
                let miles = provider.distance_miles(&sites[a], &sites[b])?;
                edges.push(Edge { i: a, j: b, miles });
            }
        }
        subgraphs.push(Subgraph {
            label: format!("G{r}"),
            graph: SiteGraph::from_edges(sites, edges, EdgeWeighting::Raw)?,
            nodes,
        });
    }
    RegionalPartition::from_subgraphs(PartitionKind::Random { groups, seed }, n, subgraphs)
}

/// `n * l` node-feature references for `n` nodes with mean neighborhood `l`.
pub fn overlap_count(n: usize, mean_neighborhood: f64) -> f64 {
    n as f64 * mean_neighborhood
}

#[cfg(test)]
mod tests {
    use super::super::test_support::site;
    use super::super::{EdgeWeighting, Haversine};
    use super::*;

    fn four_node() -> SiteGraph {
        let nodes = vec![
            site("w1", "WI", 43.0, -89.0),
            site("w2", "WI", 43.1, -89.0),
            site("i1", "IA", 42.0, -93.0),
            site("i2", "IA", 42.1, -93.0),
        ];
        let edges = vec![
            Edge { i: 0, j: 1, miles: 7.0 },
            Edge { i: 2, j: 3, miles: 7.0 },
            Edge {
                i: 1,
                j: 2,
                miles: 30.0,
            },
        ];
        SiteGraph::from_edges(nodes, edges, EdgeWeighting::Binary).unwrap()
    }

    #[test]
    fn regional_split_drops_cross_edges() {
        let g = four_node();
        let p = decompose_regional(&g).unwrap();
        assert_eq!(p.subgraphs().len(), 2);
        assert_eq!(p.region_order(), vec!["IA", "WI"]);
        for sg in p.subgraphs() {
            assert_eq!(sg.graph.len(), 2);
            assert_eq!(sg.graph.edges().len(), 1);
            assert_eq!(sg.graph.weighting(), g.weighting());
        }
        assert_eq!(p.region_of(1), "WI");
        assert!(p.overlap_cost() < g.overlap_cost());
        for i in 0..4 {
            assert!(p.local_degree(i) <= g.degree(i));
        }
    }

    #[test]
    fn single_region_is_identity() {
        let mut g = four_node();
        let nodes: Vec<_> = g
            .nodes()
            .iter()
            .cloned()
            .map(|mut s| {
                s.region = "WI".into();
                s
            })
            .collect();
        g = SiteGraph::from_edges(nodes, g.edges().to_vec(), g.weighting()).unwrap();
        let p = decompose_regional(&g).unwrap();
        assert_eq!(p.subgraphs().len(), 1);
        assert_eq!(p.subgraphs()[0].graph, g);
    }

    #[test]
    fn empty_region_label_is_a_data_error() {
        let g = four_node();
        let mut nodes = g.nodes().to_vec();
        nodes[2].region = " ".into();
        let g = SiteGraph::from_edges(nodes, vec![], EdgeWeighting::Binary).unwrap();
        assert!(matches!(decompose_regional(&g), Err(Error::Data(_))));
    }

    #[test]
    fn random_groups_are_complete_and_balanced() {
        let g = four_node();
        let p = decompose_random(&g, 2, 7, &Haversine).unwrap();
        for sg in p.subgraphs() {
            assert_eq!(sg.nodes.len(), 2);
            assert_eq!(sg.graph.edges().len(), 1);
            assert_eq!(sg.graph.weighting(), EdgeWeighting::Raw);
        }
        let whole = decompose_random(&g, 1, 7, &Haversine).unwrap();
        assert_eq!(whole.subgraphs()[0].graph.edges().len(), 6);
        assert!(matches!(decompose_random(&g, 5, 7, &Haversine), Err(Error::Usage(_))));
        assert!(decompose_random(&g, 0, 7, &Haversine).is_err());
    }

    #[test]
    fn random_partition_is_seeded() {
        let nodes: Vec<_> = (0..105)
            .map(|i| site(&format!("s{i}"), "WI", 40.0 + i as f64 * 0.05, -89.0))
            .collect();
        let g = SiteGraph::from_edges(nodes, vec![], EdgeWeighting::Binary).unwrap();
        let a = decompose_random(&g, 8, 11, &Haversine).unwrap();
        let b = decompose_random(&g, 8, 11, &Haversine).unwrap();
        let c = decompose_random(&g, 8, 12, &Haversine).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let sizes: Vec<_> = a.subgraphs().iter().map(|s| s.nodes.len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), 105);
    }

    #[test]
    fn overlapping_subgraphs_rejected() {
        let g = four_node();
        let a = g.induced(&[0, 1]).unwrap();
        let b = g.induced(&[1, 2, 3]).unwrap();
        let subgraphs = vec![
            Subgraph {
                label: "a".into(),
                nodes: vec![0, 1],
                graph: a,
            },
            Subgraph {
                label: "b".into(),
                nodes: vec![1, 2, 3],
                graph: b,
            },
        ];
        assert!(RegionalPartition::from_subgraphs(PartitionKind::Regional, 4, subgraphs).is_err());
    }

    #[test]
    fn permutation_preserves_membership() {
        let g = four_node();
        let p = decompose_regional(&g).unwrap();
        let perm = [3, 1, 0, 2];
        let gp = g.permuted(&perm).unwrap();
        let pp = p.permuted(&perm).unwrap();
        let direct = decompose_regional(&gp).unwrap();
        assert_eq!(pp, direct);
    }

    #[test]
    fn overlap_formula() {
        assert_eq!(overlap_count(105, 3.0), 315.0);
    }
}
