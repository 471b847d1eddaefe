use std::path::Path;

use regraph_core::data::make_windows;
use regraph_core::evaluation::{predict_windows, write_timeseries_csv};
use regraph_core::models::ModelCheckpoint;
use regraph_core::par::Execution;

use crate::commands::train::CONFIG_FILE;
use crate::config::RunConfig;
use crate::error::{self, CliError, CliResult};
use crate::shared::{ensure_parent, graph_from_file, load_series};

/// Frozen inference over every window of the data (or of the given weeks).
/// The grid comes from `config`, else from the run's `config.json` next to
/// the checkpoint, else the defaults.
pub fn run(checkpoint: &Path, data: &Path, out: &Path, config: Option<&Path>, weeks: &[u32]) -> CliResult<()> {
    let ck = ModelCheckpoint::load(checkpoint).map_err(|e| error::input(&checkpoint.display().to_string(), e))?;
    let sibling = checkpoint.parent().map(|p| p.join(CONFIG_FILE));
    let cfg = match (config, sibling) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(p)) if p.exists() => RunConfig::load(&p)?,
        _ => RunConfig::default(),
    };
    let model = ck.to_model().map_err(|e| error::input("checkpoint", e))?;
    let loaded = graph_from_file(ck.graph.clone(), "checkpoint graph")?;
    let series = load_series(data, loaded.graph.nodes(), cfg.data.grid)?;
    let spec = model.spec();
    let max_h = *spec.horizons.iter().max().expect("validated spec");
    let mut windows = make_windows(&series, spec.k, &spec.horizons)?;
    if !weeks.is_empty() {
        windows.retain(|s| (series.week_of(s.start)..=series.week_of(s.end(max_h))).all(|w| weeks.contains(&w)));
    }
    if windows.is_empty() {
        return Err(CliError::data("no complete windows to predict"));
    }
    let frames = ck.scaler.apply_series(&series);
    let preds = predict_windows(&model, &loaded.ctx, &frames, &windows, Execution::available())?;
    ensure_parent(out)?;
    write_timeseries_csv(out, &series, &windows, &preds, &spec.horizons)?;
    println!("{} windows -> {}", windows.len(), out.display());
    Ok(())
}
