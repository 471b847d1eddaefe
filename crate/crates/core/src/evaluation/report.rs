use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FrameSeries, WindowSample};
use crate::error::{Error, Result};
use crate::graph::{RegionalPartition, SiteGraph};
use crate::numerics::Tensor;

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub connectivity: String,
    pub horizon_min: u64,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub mape: f64,
    pub mae_literal: f64,
    pub mape_literal: f64,
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub seeds: Vec<u64>,
    pub rmse: MeanStd,
    pub mae: MeanStd,
    pub mape: MeanStd,
    pub mae_literal: MeanStd,
    pub mape_literal: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub horizon_min: u64,
    /// `None` when no run covers this model and horizon.
    pub stats: Option<CellStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub connectivity: String,
    pub cells: Vec<ComparisonCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub connectivity: String,
    pub nodes: usize,
    pub subgraphs: usize,
    /// Mean neighborhood size including the node itself.
    pub mean_neighborhood: f64,
    /// Node-feature computations implied by neighborhood references.
    pub overlap_cost: f64,
}

/// Models by horizon, mean and standard deviation over seeds, plus the
/// overlap cost of each connectivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub horizons_min: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
    pub overlap: Vec<OverlapRow>,
}

pub fn compare_connectivities(rows: &[MetricRow], overlap: Vec<OverlapRow>) -> Comparison {
    let horizons: BTreeSet<u64> = rows.iter().map(|r| r.horizon_min).collect();
    let mut cells: BTreeMap<(&str, &str), BTreeMap<u64, Vec<&MetricRow>>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.model.as_str(), r.connectivity.as_str()))
            .or_default()
            .entry(r.horizon_min)
            .or_default()
            .push(r);
    }
    let rows = cells
        .into_iter()
        .map(|((model, connectivity), by_h)| ComparisonRow {
            model: model.to_owned(),
            connectivity: connectivity.to_owned(),
            cells: horizons
                .iter()
                .map(|&h| ComparisonCell {
                    horizon_min: h,
                    stats: by_h.get(&h).map(|runs| {
                        let mut runs = runs.clone();
                        runs.sort_by_key(|r| r.seed);
                        let col =
                            |f: fn(&MetricRow) -> f64| MeanStd::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
                        CellStats {
                            seeds: runs.iter().map(|r| r.seed).collect(),
                            rmse: col(|r| r.rmse),
                            mae: col(|r| r.mae),
                            mape: col(|r| r.mape),
                            mae_literal: col(|r| r.mae_literal),
                            mape_literal: col(|r| r.mape_literal),
                        }
                    }),
                })
                .collect(),
        })
        .collect();
    Comparison {
        horizons_min: horizons.into_iter().collect(),
        rows,
        overlap,
    }
}

impl Comparison {
    pub fn cell(&self, model: &str, connectivity: &str, horizon_min: u64) -> Option<&CellStats> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.connectivity == connectivity)?
            .cells
            .iter()
            .find(|c| c.horizon_min == horizon_min)?
            .stats
            .as_ref()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Flat CSV, one line per present cell. With `literal` the MAE and MAPE
    /// columns carry the squared-error readings instead.
    pub fn write_csv(&self, path: impl AsRef<Path>, literal: bool) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let (mae, mape) = if literal {
            ("mae_literal", "mape_literal")
        } else {
            ("mae", "mape")
        };
        w.write_record([
            "model".to_owned(),
            "connectivity".to_owned(),
            "horizon_min".to_owned(),
            "seeds".to_owned(),
            "rmse_mean".to_owned(),
            "rmse_std".to_owned(),
            format!("{mae}_mean"),
            format!("{mae}_std"),
            format!("{mape}_mean"),
            format!("{mape}_std"),
        ])?;
        for row in &self.rows {
            for cell in &row.cells {
                let Some(s) = &cell.stats else { continue };
                let (mae, mape) = if literal {
                    (s.mae_literal, s.mape_literal)
                } else {
                    (s.mae, s.mape)
                };
                w.write_record([
                    row.model.clone(),
                    row.connectivity.clone(),
                    cell.horizon_min.to_string(),
                    s.seeds.len().to_string(),
                    s.rmse.mean.to_string(),
                    s.rmse.std.to_string(),
                    mae.mean.to_string(),
                    mae.std.to_string(),
                    mape.mean.to_string(),
                    mape.std.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Overlap cost of the full graph, or of a decomposition when given.
pub fn overlap_report(label: &str, graph: &SiteGraph, partition: Option<&RegionalPartition>) -> OverlapRow {
    let n = graph.len();
    let (subgraphs, cost) = match partition {
        Some(p) => (p.subgraphs().len(), p.overlap_cost()),
        None => (1, graph.overlap_cost()),
    };
    OverlapRow {
        connectivity: label.to_owned(),
        nodes: n,
        subgraphs,
        mean_neighborhood: if n == 0 { 0.0 } else { cost / n as f64 },
        overlap_cost: cost,
    }
}

/// `site_id,time,truth,pred_h{h}...`: one line per site and grid time.
/// `pred_h{h}` at time `t` is the forecast issued `h` steps earlier; cells
/// with no such forecast are empty.
pub fn write_timeseries_csv(
    path: impl AsRef<Path>,
    series: &FrameSeries,
    samples: &[WindowSample],
    preds: &[Tensor],
    horizons: &[usize],
) -> Result<()> {
    let path = path.as_ref();
    if preds.len() != samples.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} windows",
            preds.len(),
            samples.len()
        )));
    }
    // frame index -> (sample index) per horizon column
    let mut issued: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    for (k, s) in samples.iter().enumerate() {
        for (c, &h) in horizons.iter().enumerate() {
            issued.entry(s.anchor + h).or_insert_with(|| vec![None; horizons.len()])[c] = Some(k);
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["site_id".to_owned(), "time".to_owned(), "truth".to_owned()];
    header.extend(horizons.iter().map(|h| format!("pred_h{h}")));
    w.write_record(&header)?;
    for (site, id) in series.site_ids.iter().enumerate() {
        for (&frame, cols) in &issued {
            let f = &series.frames[frame];
            let mut rec = vec![id.clone(), f.time.to_rfc3339(), f.occupancy(site).to_string()];
            for (c, k) in cols.iter().enumerate() {
                rec.push(k.map_or(String::new(), |k| preds[k].get(site, c).to_string()));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
