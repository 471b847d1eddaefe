use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use regraph_core::data::{prepare, FrameSeries, WindowSample};
use regraph_core::evaluation::{
    compare_connectivities, generality_inference, horizon_metrics, overlap_report, predict_windows, q95_for_samples,
    write_metrics_csv, write_timeseries_csv, MetricRow, MetricSet, OverlapRow,
};
use regraph_core::graph::Strategy;
use regraph_core::models::{Model, ModelCheckpoint};
use regraph_core::numerics::Tensor;
use regraph_core::par::{self, Execution};
use regraph_core::training::{rmse_by_column, TrainReport};

use crate::commands::train::{RunMeta, CHECKPOINT_FILE, CONFIG_FILE, REPORT_FILE};
use crate::config::RunConfig;
use crate::error::{self, CliError, CliResult};
use crate::shared::{fresh_dir, graph_from_file, load_series, write_json, LoadedGraph};

pub const METRICS_FILE: &str = "metrics.csv";
pub const GENERALITY_FILE: &str = "generality_metrics.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const OVERLAP_FILE: &str = "overlap.json";
pub const RUNS_FILE: &str = "runs.json";
pub const TIMESERIES_DIR: &str = "timeseries";

/// Per-run consistency record: the test RMSE stored at training time next
/// to the value recomputed here.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub model: String,
    pub connectivity: String,
    pub seed: u64,
    pub test_windows: usize,
    pub test_rmse_report: Option<Vec<f64>>,
    pub test_rmse_evaluated: Vec<f64>,
    pub max_abs_diff: Option<f64>,
}

struct RunResult {
    summary: RunSummary,
    rows: Vec<MetricRow>,
    generality: Vec<MetricRow>,
    overlap: Vec<OverlapRow>,
    timeseries: Option<(FrameSeries, Vec<WindowSample>, Vec<Tensor>, Vec<usize>)>,
    literal: bool,
}

pub struct EvaluateArgs<'a> {
    pub runs: &'a [PathBuf],
    pub out: &'a Path,
    /// Overrides the data directory recorded in each run.
    pub data: Option<&'a Path>,
    /// Forces the literal MAE/MAPE headline regardless of run configs.
    pub literal: bool,
}

pub fn run(args: EvaluateArgs<'_>) -> CliResult<()> {
    if args.runs.is_empty() {
        return Err(CliError::config("evaluate needs at least one run directory"));
    }
    let mut results = par::try_map_slice(Execution::available(), args.runs, |run| evaluate_run(run, args.data))?;
    results.sort_by(|a, b| {
        let key = |r: &RunResult| {
            (
                r.summary.model.clone(),
                r.summary.connectivity.clone(),
                r.summary.seed,
                r.summary.run.clone(),
            )
        };
        key(a).cmp(&key(b))
    });
    let literal = args.literal || results.iter().any(|r| r.literal);

    fresh_dir(args.out)?;
    let rows: Vec<MetricRow> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    write_metrics_csv(args.out.join(METRICS_FILE), &rows)?;
    let generality: Vec<MetricRow> = results.iter().flat_map(|r| r.generality.iter().cloned()).collect();
    if !generality.is_empty() {
        write_metrics_csv(args.out.join(GENERALITY_FILE), &generality)?;
    }

    let mut overlap: BTreeMap<String, OverlapRow> = BTreeMap::new();
    for r in &results {
        for row in &r.overlap {
            overlap.entry(row.connectivity.clone()).or_insert_with(|| row.clone());
        }
    }
    let overlap: Vec<OverlapRow> = overlap.into_values().collect();
    write_json(&args.out.join(OVERLAP_FILE), &overlap)?;
    let comparison = compare_connectivities(&rows, overlap);
    comparison.write_json(args.out.join(COMPARISON_JSON))?;
    comparison.write_csv(args.out.join(COMPARISON_CSV), literal)?;

    let summaries: Vec<&RunSummary> = results.iter().map(|r| &r.summary).collect();
    write_json(&args.out.join(RUNS_FILE), &summaries)?;

    let mut used = BTreeSet::new();
    for r in &results {
        let Some((series, samples, preds, horizons)) = &r.timeseries else {
            continue;
        };
        let dir = args.out.join(TIMESERIES_DIR);
        fs::create_dir_all(&dir).map_err(|e| error::io(&dir.display().to_string(), e))?;
        let base = format!("{}_{}_seed{}", r.summary.model, r.summary.connectivity, r.summary.seed);
        let mut name = base.clone();
        let mut i = 1;
        while !used.insert(name.clone()) {
            name = format!("{base}_{i}");
            i += 1;
        }
        write_timeseries_csv(dir.join(format!("{name}.csv")), series, samples, preds, horizons)?;
    }

    for s in &summaries {
        if let Some(d) = s.max_abs_diff {
            if d > 1e-12 {
                log::warn!(
                    "{}: evaluated test RMSE differs from the training report by {d:e}",
                    s.run
                );
            }
        }
    }
    println!(
        "{} runs, {} metric rows -> {}",
        results.len(),
        rows.len(),
        args.out.display()
    );
    Ok(())
}

fn metric_rows(model: &Model, set: &[MetricSet], step_minutes: i64) -> Vec<MetricRow> {
    let spec = model.spec();
    spec.horizons
        .iter()
        .zip(set)
        .map(|(&h, m)| MetricRow {
            model: spec.architecture.to_string(),
            connectivity: spec.connectivity.to_string(),
            horizon_min: h as u64 * step_minutes as u64,
            seed: spec.seed,
            rmse: m.rmse,
            mae: m.mae,
            mape: m.mape,
            mae_literal: m.mae_literal,
            mape_literal: m.mape_literal,
        })
        .collect()
}

fn evaluate_run(run: &Path, data_override: Option<&Path>) -> CliResult<RunResult> {
    let label = run.display().to_string();
    let cfg = RunConfig::load(&run.join(CONFIG_FILE))?;
    let data_dir = match data_override {
        Some(d) => d.to_path_buf(),
        None => RunMeta::load(run)?.data_dir,
    };
    let ck_path = run.join(CHECKPOINT_FILE);
    let ck = ModelCheckpoint::load(&ck_path).map_err(|e| error::input(&ck_path.display().to_string(), e))?;
    let model = ck.to_model().map_err(|e| error::input(&label, e))?;
    let loaded = graph_from_file(ck.graph.clone(), &label)?;
    let report_path = run.join(REPORT_FILE);
    let report: TrainReport = serde_json::from_str(
        &fs::read_to_string(&report_path).map_err(|e| CliError::data(format!("{}: {e}", report_path.display())))?,
    )
    .map_err(|e| CliError::data(format!("{}: {e}", report_path.display())))?;

    let series = load_series(&data_dir, loaded.graph.nodes(), cfg.data.grid)?;
    let step = series.step_minutes;
    let d = &cfg.data;
    let prepared = prepare(series, d.k, &d.horizons, &d.weeks, cfg.train.validation_fraction)
        .map_err(|e| error::input("windowing", e))?;
    if prepared.scaler != ck.scaler {
        return Err(CliError::data(format!(
            "{label}: data in {} is not the data the run was trained on",
            data_dir.display()
        )));
    }
    if prepared.test.is_empty() {
        return Err(CliError::data(format!(
            "{label}: no test windows in weeks {:?}",
            d.weeks.test
        )));
    }

    let spec = model.spec();
    let max_h = *spec.horizons.iter().max().expect("validated spec");
    let preds = predict_windows(
        &model,
        &loaded.ctx,
        &prepared.frames,
        &prepared.test,
        Execution::available(),
    )?;
    let q95 = q95_for_samples(&prepared.series, &prepared.test, max_h);
    let metrics = horizon_metrics(&preds, &prepared.test, &q95)?;
    let rows = metric_rows(&model, &metrics, step);

    let generality = if !d.weeks.generality.is_empty() && !prepared.generality.is_empty() {
        let set = generality_inference(
            &model,
            &loaded.ctx,
            &prepared.series,
            &prepared.frames,
            &prepared.generality,
            &d.weeks.train,
            &d.weeks.generality,
        )?;
        metric_rows(&model, &set, step)
    } else {
        Vec::new()
    };

    let evaluated = rmse_by_column(&preds, &prepared.test).0;
    let max_abs_diff = report.test_rmse.as_ref().map(|stored| {
        if stored.len() != evaluated.len() {
            f64::INFINITY
        } else {
            stored
                .iter()
                .zip(&evaluated)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        }
    });
    let summary = RunSummary {
        run: label,
        model: spec.architecture.to_string(),
        connectivity: spec.connectivity.to_string(),
        seed: spec.seed,
        test_windows: prepared.test.len(),
        test_rmse_report: report.test_rmse.clone(),
        test_rmse_evaluated: evaluated,
        max_abs_diff,
    };
    let overlap = overlap_rows(&loaded);
    let horizons = spec.horizons.clone();
    let timeseries = cfg
        .eval
        .timeseries
        .then(|| (prepared.series, prepared.test, preds, horizons));
    Ok(RunResult {
        summary,
        rows,
        generality,
        overlap,
        timeseries,
        literal: cfg.eval.literal_eq14,
    })
}

/// Overlap of the run's own decomposition plus the connected baseline. Every
/// graph file stores the threshold graph as its full graph.
fn overlap_rows(loaded: &LoadedGraph) -> Vec<OverlapRow> {
    let mut rows = vec![overlap_report("connected", &loaded.graph, None)];
    if loaded.file.strategy != Strategy::Connected {
        rows.push(overlap_report(
            &loaded.file.strategy.to_string(),
            &loaded.graph,
            loaded.partition.as_ref(),
        ));
    }
    rows
}
