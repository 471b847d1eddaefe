#![allow(dead_code)]

use regraph_core::data::{
    generate_synthetic, interpolate_to_grid, prepare, GridSpec, Prepared, SyntheticConfig, WeekSplit,
};
use regraph_core::graph::{
    build_connected, decompose_regional, EdgeWeighting, Haversine, RegionalPartition, SiteGraph,
    DEFAULT_THRESHOLD_MILES,
};

pub struct Fixture {
    pub data: Prepared,
    pub graph: SiteGraph,
    pub regional: RegionalPartition,
}

/// Synthetic sites and records run through the full preparation path; the
/// last week is the test week.
pub fn fixture(n_sites: usize, n_regions: usize, days: usize, seed: u64, k: usize, horizons: &[usize]) -> Fixture {
    let cfg = SyntheticConfig {
        n_sites,
        n_regions,
        days,
        seed,
        ..SyntheticConfig::default()
    };
    let synth = generate_synthetic(&cfg).unwrap();
    let series = interpolate_to_grid(&synth.sites, &synth.records, GridSpec::default()).unwrap();
    let weeks = (days as u32).div_ceil(7);
    let split = WeekSplit {
        train: (1..weeks).collect(),
        test: vec![weeks],
        generality: vec![],
    };
    let data = prepare(series, k, horizons, &split, 0.1).unwrap();
    let graph = build_connected(
        &synth.sites,
        &Haversine,
        DEFAULT_THRESHOLD_MILES,
        EdgeWeighting::default(),
    )
    .unwrap();
    let regional = decompose_regional(&graph).unwrap();
    Fixture { data, graph, regional }
}
