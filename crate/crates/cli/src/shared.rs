use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use regraph_core::data::{interpolate_to_grid, read_records_csv, FrameSeries, GridSpec};
use regraph_core::graph::{
    read_sites_csv, CachedProvider, DistanceProvider, GraphFile, Haversine, RegionalPartition, RoutingProvider,
    SiteGraph, SiteMeta,
};
use regraph_core::models::GraphContext;

use crate::error::{self, CliError, CliResult};

pub const SITES_FILE: &str = "sites.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const DISTANCE_CACHE_ENV: &str = "REGRAPH_DISTANCE_CACHE";
pub const ROUTING_URL_ENV: &str = "REGRAPH_ROUTING_URL";

/// Haversine unless `REGRAPH_ROUTING_URL` is set; memoized to the file named
/// by `REGRAPH_DISTANCE_CACHE` when that is set.
pub fn distance_provider() -> CliResult<Box<dyn DistanceProvider>> {
    let url = std::env::var(ROUTING_URL_ENV).ok().filter(|u| !u.is_empty());
    let cache = std::env::var_os(DISTANCE_CACHE_ENV).filter(|p| !p.is_empty());
    let cached_err = |e| error::input("distance cache", e);
    Ok(match (url, cache) {
        (Some(url), Some(path)) => {
            Box::new(CachedProvider::with_file(RoutingProvider::new(url), path).map_err(cached_err)?)
        }
        (Some(url), None) => Box::new(RoutingProvider::new(url)),
        (None, Some(path)) => Box::new(CachedProvider::with_file(Haversine, path).map_err(cached_err)?),
        (None, None) => Box::new(Haversine),
    })
}

pub struct LoadedGraph {
    pub file: GraphFile,
    pub graph: SiteGraph,
    pub partition: Option<RegionalPartition>,
    pub ctx: GraphContext,
}

pub fn load_graph(path: &Path) -> CliResult<LoadedGraph> {
    let context = format!("graph {}", path.display());
    let file = GraphFile::read(path).map_err(|e| error::input(&context, e))?;
    graph_from_file(file, &context)
}

pub fn graph_from_file(file: GraphFile, context: &str) -> CliResult<LoadedGraph> {
    let (graph, partition) = file.materialize().map_err(|e| error::input(context, e))?;
    let ctx = GraphContext::new(&graph, partition.as_ref()).map_err(|e| error::input(context, e))?;
    Ok(LoadedGraph {
        file,
        graph,
        partition,
        ctx,
    })
}

/// Reads `sites.csv` and `records.csv` from `dir` and grids the records of
/// the graph's sites in graph node order. Records of other sites are ignored.
pub fn load_series(dir: &Path, nodes: &[SiteMeta], grid: GridSpec) -> CliResult<FrameSeries> {
    let sites_path = dir.join(SITES_FILE);
    let sites = read_sites_csv(&sites_path).map_err(|e| error::input(&sites_path.display().to_string(), e))?;
    let by_id: BTreeMap<&str, &SiteMeta> = sites.iter().map(|s| (s.site_id.as_str(), s)).collect();
    for node in nodes {
        match by_id.get(node.site_id.as_str()) {
            None => {
                return Err(CliError::data(format!(
                    "graph site {} missing from {}",
                    node.site_id,
                    sites_path.display()
                )))
            }
            Some(s) if *s != node => {
                return Err(CliError::data(format!(
                    "site {} differs between graph and {}",
                    node.site_id,
                    sites_path.display()
                )))
            }
            Some(_) => {}
        }
    }
    let records_path = dir.join(RECORDS_FILE);
    let mut records =
        read_records_csv(&records_path).map_err(|e| error::input(&records_path.display().to_string(), e))?;
    let wanted: BTreeMap<&str, ()> = nodes.iter().map(|n| (n.site_id.as_str(), ())).collect();
    records.retain(|r| wanted.contains_key(r.site_id.as_str()));
    interpolate_to_grid(nodes, &records, grid).map_err(|e| error::input(&records_path.display().to_string(), e))
}

/// Creates `dir` and refuses to reuse one that already holds files.
pub fn fresh_dir(dir: &Path) -> CliResult<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| error::io(&dir.display().to_string(), e))?;
        if entries.next().is_some() {
            return Err(CliError::other(format!(
                "output directory {} is not empty; run outputs are never overwritten",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| error::io(&dir.display().to_string(), e))
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| error::io(&p.display().to_string(), e))
        }
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::other(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| error::io(&path.display().to_string(), e))
}

pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
