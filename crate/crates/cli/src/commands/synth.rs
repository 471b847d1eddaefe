use std::path::Path;

use regraph_core::data::{generate_synthetic, write_records_csv};
use regraph_core::graph::write_sites_csv;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::shared::{fresh_dir, write_json, RECORDS_FILE, SITES_FILE};

pub const SYNTH_FILE: &str = "synth.json";

/// Writes `sites.csv`, `records.csv` and the generator settings to `out`.
pub fn run(config: &Path, out: &Path) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let synth = &cfg.data.synthetic;
    let data = generate_synthetic(synth)?;
    fresh_dir(out)?;
    let sites = out.join(SITES_FILE);
    write_sites_csv(&sites, &data.sites).map_err(|e| CliError::other(format!("{}: {e}", sites.display())))?;
    let records = out.join(RECORDS_FILE);
    write_records_csv(&records, &data.records).map_err(|e| CliError::other(format!("{}: {e}", records.display())))?;
    write_json(&out.join(SYNTH_FILE), synth)?;
    println!(
        "{} sites in {} regions, {} records over {} days -> {}",
        data.sites.len(),
        synth.n_regions,
        data.records.len(),
        synth.days,
        out.display()
    );
    Ok(())
}
