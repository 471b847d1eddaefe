//! Site graphs, the normalized propagation operator and the three
//! connectivity strategies (connected, random groups, regional).

mod distance;
mod file;
mod partition;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use distance::{haversine_miles, CachedProvider, DistanceProvider, Haversine, RoutingProvider, EARTH_RADIUS_MILES};
pub use file::{GraphFile, PartitionFile, Strategy};
pub use partition::{decompose_random, decompose_regional, overlap_count, PartitionKind, RegionalPartition, Subgraph};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DEFAULT_THRESHOLD_MILES: f64 = 40.0;
pub const DEFAULT_SIGMA_MILES: f64 = 20.0;

/// Static attributes of one parking site. Serialized with the sites-CSV
/// column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteMeta {
    pub site_id: String,
    pub region: String,
    #[serde(rename = "lat")]
    pub latitude: f64,
    #[serde(rename = "lon")]
    pub longitude: f64,
    /// Minutes from the nearest city.
    #[serde(rename = "travel_time_min")]
    pub travel_time: f64,
    /// 1 = public, 0 = private.
    pub owner: u8,
    #[serde(rename = "amenities")]
    pub amenity_count: u32,
    pub capacity: u32,
}

impl SiteMeta {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Data(format!("site {}: {what}", self.site_id)));
        if self.site_id.is_empty() {
            return Err(Error::Data("empty site_id".into()));
        }
        if self.capacity < 1 {
            return bad("capacity must be at least 1");
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return bad("latitude out of range");
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return bad("longitude out of range");
        }
        if self.owner > 1 {
            return bad("owner must be 0 or 1");
        }
        if !self.travel_time.is_finite() || self.travel_time < 0.0 {
            return bad("travel time must be finite and non-negative");
        }
        Ok(())
    }
}

pub fn read_sites_csv(path: impl AsRef<Path>) -> Result<Vec<SiteMeta>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let sites = reader
        .deserialize::<SiteMeta>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    for s in &sites {
        s.validate()?;
    }
    check_unique_ids(&sites)?;
    Ok(sites)
}

pub fn write_sites_csv(path: impl AsRef<Path>, sites: &[SiteMeta]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for s in sites {
        writer.serialize(s)?;
    }
    writer.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

fn check_unique_ids(sites: &[SiteMeta]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in sites {
        if !seen.insert(s.site_id.as_str()) {
            return Err(Error::Data(format!("duplicate site id {}", s.site_id)));
        }
    }
    Ok(())
}

/// How a distance in miles becomes an adjacency weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeWeighting {
    /// `exp(-(d / sigma)^2)`
    Gaussian {
        sigma_miles: f64,
    },
    Binary,
    /// The distance itself.
    Raw,
}

impl Default for EdgeWeighting {
    fn default() -> Self {
        EdgeWeighting::Gaussian {
            sigma_miles: DEFAULT_SIGMA_MILES,
        }
    }
}

impl EdgeWeighting {
    pub fn weight(&self, miles: f64) -> f64 {
        match *self {
            EdgeWeighting::Gaussian { sigma_miles } => (-(miles / sigma_miles).powi(2)).exp(),
            EdgeWeighting::Binary => 1.0,
            EdgeWeighting::Raw => miles,
        }
    }
}

/// Undirected edge between node indices `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub miles: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteGraph {
    nodes: Vec<SiteMeta>,
    edges: Vec<Edge>,
    weighting: EdgeWeighting,
    adjacency: Tensor,
    normalized: Tensor,
}

impl SiteGraph {
    /// Builds the graph from an explicit edge list. Edges are stored with
    /// `i < j` and sorted.
    pub fn from_edges(nodes: Vec<SiteMeta>, edges: Vec<Edge>, weighting: EdgeWeighting) -> Result<Self> {
        let n = nodes.len();
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for e in edges {
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            if i == j || j >= n {
                return Err(Error::Data(format!("invalid edge ({}, {}) for {n} nodes", e.i, e.j)));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Data(format!("duplicate edge ({i}, {j})")));
            }
            if !e.miles.is_finite() || e.miles < 0.0 {
                return Err(Error::Data(format!("edge ({i}, {j}) has distance {}", e.miles)));
            }
            canonical.push(Edge { i, j, miles: e.miles });
        }
        canonical.sort_by_key(|e| (e.i, e.j));

        let mut adjacency = Tensor::zeros(&[n, n]);
        for e in &canonical {
            let w = weighting.weight(e.miles);
            if w <= 0.0 || !w.is_finite() {
                return Err(Error::Data(format!(
                    "edge ({}, {}) maps to non-positive weight {w}",
                    e.i, e.j
                )));
            }
            adjacency.set(e.i, e.j, w);
            adjacency.set(e.j, e.i, w);
        }
        let normalized = normalize_adjacency(&adjacency);
        Ok(SiteGraph {
            nodes,
            edges: canonical,
            weighting,
            adjacency,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SiteMeta] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weighting(&self) -> EdgeWeighting {
        self.weighting
    }

    /// Weighted adjacency `A` (zero diagonal).
    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    /// `D^-1/2 (A + I) D^-1/2`.
    pub fn normalized(&self) -> &Tensor {
        &self.normalized
    }

    /// `I + B` where `B` is the 0/1 neighbor indicator; row `i` sums a node
    /// with all its neighbors.
    pub fn self_and_neighbors(&self) -> Tensor {
        let n = self.len();
        let mut m = Tensor::identity(n);
        for e in &self.edges {
            m.set(e.i, e.j, 1.0);
            m.set(e.j, e.i, 1.0);
        }
        m
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, &w)| j != i && w > 0.0)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, &w)| j != i && w > 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adjacency.get(i, j) > 0.0
    }

    pub fn index_of(&self, site_id: &str) -> Option<usize> {
        self.nodes.iter().position(|s| s.site_id == site_id)
    }

    /// Node-feature references a full-graph convolution makes: `n * l`
    /// with `l` the mean neighborhood size including the self-loop.
    pub fn overlap_cost(&self) -> f64 {
        self.degrees().iter().map(|&d| (d + 1) as f64).sum()
    }

    pub fn mean_neighborhood(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.overlap_cost() / self.len() as f64
        }
    }

    /// Relabels nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SiteGraph> {
        let inverse = invert_permutation(perm, self.len())?;
        let nodes = perm.iter().map(|&old| self.nodes[old].clone()).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                i: inverse[e.i],
                j: inverse[e.j],
                miles: e.miles,
            })
            .collect();
        SiteGraph::from_edges(nodes, edges, self.weighting)
    }

    /// Subgraph induced by `members` (in the given order), keeping only
    /// edges between members.
    pub fn induced(&self, members: &[usize]) -> Result<SiteGraph> {
        let mut local = vec![usize::MAX; self.len()];
        for (k, &g) in members.iter().enumerate() {
            local[g] = k;
        }
        let nodes = members.iter().map(|&g| self.nodes[g].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| local[e.i] != usize::MAX && local[e.j] != usize::MAX)
            .map(|e| Edge {
                i: local[e.i],
                j: local[e.j],
                miles: e.miles,
            })
            .collect();
        SiteGraph::from_edges(nodes, edges, self.weighting)
    }
}

pub(crate) fn invert_permutation(perm: &[usize], n: usize) -> Result<Vec<usize>> {
    if perm.len() != n {
        return Err(Error::Usage(format!(
            "permutation of length {} for {n} nodes",
            perm.len()
        )));
    }
    let mut inverse = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || inverse[old] != usize::MAX {
            return Err(Error::Usage("not a permutation".into()));
        }
        inverse[old] = new;
    }
    Ok(inverse)
}

/// `D^-1/2 (A + I) D^-1/2` with `D` the row sums of `A + I`.
pub fn normalize_adjacency(adjacency: &Tensor) -> Tensor {
    let n = adjacency.rows();
    let mut with_loops = adjacency.clone();
    for i in 0..n {
        with_loops.set(i, i, adjacency.get(i, i) + 1.0);
    }
    let degree: Vec<f64> = (0..n).map(|i| with_loops.row(i).iter().sum()).collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let a = with_loops.get(i, j);
            if a != 0.0 {
                // symmetric by construction: d_i * d_j == d_j * d_i
                out.set(i, j, a / (degree[i] * degree[j]).sqrt());
            }
        }
    }
    out
}

/// Connects every pair of sites within `threshold_miles` under `provider`.
pub fn build_connected(
    sites: &[SiteMeta],
    provider: &dyn DistanceProvider,
    threshold_miles: f64,
    weighting: EdgeWeighting,
) -> Result<SiteGraph> {
    if sites.is_empty() {
        return Err(Error::Usage("graph needs at least one site".into()));
    }
    if !(threshold_miles > 0.0) {
        return Err(Error::Usage(format!(
            "threshold must be positive, got {threshold_miles}"
        )));
    }
    for s in sites {
        s.validate()?;
    }
    check_unique_ids(sites)?;
    let mut edges = Vec::new();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let miles = provider.distance_miles(&sites[i], &sites[j]).map_err(|e| match e {
                e @ Error::Provider { .. } => e,
                other => Error::Provider {
                    a: sites[i].site_id.clone(),
                    b: sites[j].site_id.clone(),
                    reason: other.to_string(),
                },
            })?;
            if miles <= threshold_miles {
                edges.push(Edge { i, j, miles });
            }
        }
    }
    SiteGraph::from_edges(sites.to_vec(), edges, weighting)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::SiteMeta;

    pub fn site(id: &str, region: &str, lat: f64, lon: f64) -> SiteMeta {
        SiteMeta {
            site_id: id.into(),
            region: region.into(),
            latitude: lat,
            longitude: lon,
            travel_time: 10.0,
            owner: 1,
            amenity_count: 3,
            capacity: 50,
        }
    }

    /// Latitude offset (degrees) that puts two points `miles` apart on a
    /// meridian.
    pub fn lat_offset(miles: f64) -> f64 {
        (miles / super::EARTH_RADIUS_MILES).to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn threshold_decides_edges() {
        let near = [
            site("a", "WI", 43.0, -89.0),
            site("b", "WI", 43.0 + lat_offset(30.0), -89.0),
        ];
        let g = build_connected(&near, &Haversine, 40.0, EdgeWeighting::Binary).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!((g.edges()[0].miles - 30.0).abs() < 1e-9);

        let far = [
            site("a", "WI", 43.0, -89.0),
            site("b", "WI", 43.0 + lat_offset(50.0), -89.0),
        ];
        let g = build_connected(&far, &Haversine, 40.0, EdgeWeighting::Binary).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn single_site_graph() {
        let g = build_connected(
            &[site("a", "WI", 43.0, -89.0)],
            &Haversine,
            40.0,
            EdgeWeighting::default(),
        )
        .unwrap();
        assert_eq!(g.adjacency().data(), &[0.0]);
        assert_eq!(g.normalized().data(), &[1.0]);
    }

    #[test]
    fn two_sites_binary_normalization() {
        let sites = [site("a", "WI", 43.0, -89.0), site("b", "WI", 43.1, -89.0)];
        let g = build_connected(&sites, &Haversine, 40.0, EdgeWeighting::Binary).unwrap();
        assert_eq!(g.normalized().data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let sites = [site("a", "WI", 43.0, -89.0), site("a", "WI", 43.1, -89.0)];
        assert!(matches!(
            build_connected(&sites, &Haversine, 40.0, EdgeWeighting::Binary),
            Err(Error::Data(_))
        ));
    }

    struct Broken;
    impl DistanceProvider for Broken {
        fn distance_miles(&self, _: &SiteMeta, _: &SiteMeta) -> Result<f64> {
            Err(Error::Data("offline".into()))
        }
    }

    #[test]
    fn provider_failure_names_pair() {
        let sites = [site("a", "WI", 43.0, -89.0), site("b", "WI", 43.1, -89.0)];
        let err = build_connected(&sites, &Broken, 40.0, EdgeWeighting::Binary).unwrap_err();
        assert!(matches!(err, Error::Provider { ref a, ref b, .. } if a == "a" && b == "b"));
    }

    #[test]
    fn path_graph_degrees() {
        let nodes = vec![
            site("1", "WI", 0.0, 0.0),
            site("2", "WI", 0.0, 0.0),
            site("3", "WI", 0.0, 0.0),
        ];
        let edges = vec![Edge { i: 0, j: 1, miles: 1.0 }, Edge { i: 1, j: 2, miles: 1.0 }];
        let g = SiteGraph::from_edges(nodes, edges, EdgeWeighting::Binary).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.overlap_cost(), 7.0);
    }

    #[test]
    fn kernels() {
        assert_eq!(EdgeWeighting::Binary.weight(33.0), 1.0);
        assert_eq!(EdgeWeighting::Raw.weight(33.0), 33.0);
        let g = EdgeWeighting::Gaussian { sigma_miles: 20.0 }.weight(20.0);
        assert!((g - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_keeps_self_loop() {
        let nodes = vec![
            site("1", "WI", 0.0, 0.0),
            site("2", "WI", 0.0, 0.0),
            site("3", "WI", 0.0, 0.0),
        ];
        let g = SiteGraph::from_edges(nodes, vec![Edge { i: 0, j: 1, miles: 3.0 }], EdgeWeighting::Binary).unwrap();
        assert_eq!(g.normalized().get(2, 2), 1.0);
        assert_eq!(g.normalized().get(0, 0), 0.5);
    }

    #[test]
    fn sites_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sites.csv");
        let sites = vec![site("a", "WI", 43.0, -89.0), site("b", "IA", 42.0, -93.5)];
        write_sites_csv(&path, &sites).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("site_id,region,lat,lon,travel_time_min,owner,amenities,capacity\n"));
        assert_eq!(read_sites_csv(&path).unwrap(), sites);
    }
}
