use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use regraph_core::data::prepare;
use regraph_core::evaluation::predict_windows;
use regraph_core::models::{Model, ModelCheckpoint};
use regraph_core::par::Execution;
use regraph_core::training::{rmse_by_column, train_with_callback, TrainData};

use crate::config::RunConfig;
use crate::error::{self, CliError, CliResult};
use crate::shared::{absolute, fresh_dir, load_graph, load_series, write_json};

pub const CHECKPOINT_FILE: &str = "checkpoint.rgck";
pub const REPORT_FILE: &str = "train_report.json";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const META_FILE: &str = "meta.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Run provenance and timings. The only run file allowed to differ between
/// identical reruns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub started_at: String,
    pub finished_at: String,
    pub wall_seconds: f64,
    pub epoch_seconds: Vec<f64>,
    pub data_dir: PathBuf,
    pub graph: PathBuf,
    pub parallel: bool,
    pub version: String,
}

impl RunMeta {
    pub fn load(run: &Path) -> CliResult<Self> {
        let path = run.join(META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

pub fn run(config: &Path, data: &Path, graph: &Path, out: &Path) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let started = Utc::now();
    let clock = Instant::now();

    let loaded = load_graph(graph)?;
    let wanted = cfg.strategy();
    if loaded.file.strategy != wanted {
        return Err(CliError::config(format!(
            "{} needs a {wanted} graph, {} holds a {} graph",
            cfg.model.architecture,
            graph.display(),
            loaded.file.strategy
        )));
    }
    let series = load_series(data, loaded.graph.nodes(), cfg.data.grid)?;
    let d = &cfg.data;
    let prepared = prepare(series, d.k, &d.horizons, &d.weeks, cfg.train.validation_fraction)
        .map_err(|e| error::input("windowing", e))?;
    log::info!(
        "{} train, {} validation, {} test, {} generality windows",
        prepared.train.len(),
        prepared.validation.len(),
        prepared.test.len(),
        prepared.generality.len()
    );

    let spec = cfg.model_spec().with_regions_from(&loaded.ctx);
    let mut model = Model::new(spec)?;
    fresh_dir(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_json()).map_err(|e| error::io(CONFIG_FILE, e))?;

    let ckpt_dir = out.join(CHECKPOINT_DIR);
    let mut periodic = |epoch: usize, m: &Model| {
        fs::create_dir_all(&ckpt_dir).map_err(|e| regraph_core::Error::io(&ckpt_dir, e))?;
        ModelCheckpoint::from_model(m, &prepared.scaler, loaded.file.clone())
            .save(ckpt_dir.join(format!("epoch_{epoch:04}.rgck")))
    };
    let td = TrainData {
        frames: &prepared.frames,
        ctx: &loaded.ctx,
        train: &prepared.train,
        validation: &prepared.validation,
    };
    let mut report = train_with_callback(&mut model, td, &cfg.train, &mut periodic)?;
    if !prepared.test.is_empty() {
        let preds = predict_windows(
            &model,
            &loaded.ctx,
            &prepared.frames,
            &prepared.test,
            Execution::available(),
        )?;
        report.test_rmse = Some(rmse_by_column(&preds, &prepared.test).0);
    }

    ModelCheckpoint::from_model(&model, &prepared.scaler, loaded.file.clone()).save(out.join(CHECKPOINT_FILE))?;
    write_json(&out.join(REPORT_FILE), &report)?;
    report.write_loss_trace(out.join(LOSS_TRACE_FILE))?;
    let meta = RunMeta {
        started_at: started.to_rfc3339_opts(SecondsFormat::Millis, true),
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        wall_seconds: clock.elapsed().as_secs_f64(),
        epoch_seconds: report.epoch_seconds.clone(),
        data_dir: absolute(data),
        graph: absolute(graph),
        parallel: Execution::available() == Execution::Parallel,
        version: env!("CARGO_PKG_VERSION").to_owned(),
    };
    write_json(&out.join(META_FILE), &meta)?;

    let best = report.best();
    println!(
        "{}: {} epochs ({}), best epoch {} val RMSE {} -> {}",
        cfg.model.architecture,
        report.epochs.len(),
        report.stop_reason,
        best.epoch,
        best.val_rmse_overall.map_or("n/a".to_owned(), |v| format!("{v:.6}")),
        out.display()
    );
    Ok(())
}
