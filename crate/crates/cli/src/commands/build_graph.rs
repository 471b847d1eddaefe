use std::collections::BTreeSet;
use std::path::Path;

use regraph_core::graph::{build_connected, decompose_random, decompose_regional, read_sites_csv, GraphFile, Strategy};

use crate::config::{GraphSection, RunConfig};
use crate::error::{self, CliError, CliResult};
use crate::shared::{distance_provider, ensure_parent};

pub struct BuildGraphArgs<'a> {
    pub sites: &'a Path,
    pub strategy: Strategy,
    pub regions: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
}

/// Builds the distance-threshold graph and, for `regional` and `random`,
/// its decomposition. Command-line values override the config's `graph`
/// section.
pub fn run(args: BuildGraphArgs<'_>) -> CliResult<()> {
    let section = match args.config {
        Some(p) => RunConfig::load(p)?.graph,
        None => GraphSection::default(),
    };
    let threshold = args.threshold.unwrap_or(section.threshold_miles);
    if !(threshold > 0.0) {
        return Err(CliError::config(format!("threshold must be positive, got {threshold}")));
    }
    let sites = read_sites_csv(args.sites).map_err(|e| error::input(&args.sites.display().to_string(), e))?;
    let provider = distance_provider()?;
    let graph = build_connected(&sites, provider.as_ref(), threshold, section.weighting)?;
    let partition = match args.strategy {
        Strategy::Connected => {
            if args.regions.is_some() {
                return Err(CliError::config("--regions only applies to the random strategy"));
            }
            None
        }
        Strategy::Regional => Some(decompose_regional(&graph)?),
        Strategy::Random => {
            let distinct: BTreeSet<&str> = sites.iter().map(|s| s.region.as_str()).collect();
            let groups = args.regions.or(section.random_regions).unwrap_or(distinct.len());
            let seed = args.seed.unwrap_or(section.seed);
            Some(
                decompose_random(&graph, groups, seed, provider.as_ref())
                    .map_err(|e| CliError::config(e.to_string()))?,
            )
        }
    };
    let file = GraphFile::new(args.strategy, threshold, &graph, partition.as_ref());
    ensure_parent(args.out)?;
    file.write(args.out).map_err(|e| CliError::other(e.to_string()))?;
    let subgraphs = partition.as_ref().map_or(0, |p| p.subgraphs().len());
    println!(
        "{} graph: {} sites, {} edges, {} subgraphs -> {}",
        args.strategy,
        graph.len(),
        graph.edges().len(),
        subgraphs,
        args.out.display()
    );
    Ok(())
}
