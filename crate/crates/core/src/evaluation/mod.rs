//! Error metrics, the q95 reference capacity, batch inference and the
//! comparison and overlap reports.

mod report;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use report::{
    compare_connectivities, overlap_report, read_metrics_csv, write_metrics_csv, write_timeseries_csv, CellStats,
    Comparison, ComparisonCell, ComparisonRow, MeanStd, MetricRow, OverlapRow,
};

use crate::data::{FrameSeries, WindowSample};
use crate::error::{Error, Result};
use crate::models::{GraphContext, Model};
use crate::numerics::Tensor;
use crate::par::{self, Execution};

/// Sites with fewer observations than this get no reference capacity.
pub const MIN_Q95_OBSERVATIONS: usize = 20;

/// Percentile with linear interpolation between order statistics at
/// position `p * (n - 1)`.
pub fn percentile_linear(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// 95th percentile of one site's occupancy; `None` below
/// [`MIN_Q95_OBSERVATIONS`].
pub fn q95_reference(values: &[f64]) -> Option<f64> {
    if values.len() < MIN_Q95_OBSERVATIONS {
        return None;
    }
    percentile_linear(values, 0.95)
}

/// Per-site q95 over every frame touched by `samples`.
pub fn q95_for_samples(series: &FrameSeries, samples: &[WindowSample], max_horizon: usize) -> Vec<Option<f64>> {
    let mut frames = BTreeSet::new();
    for s in samples {
        frames.extend(s.start..=s.end(max_horizon));
    }
    (0..series.site_count())
        .map(|site| {
            let values: Vec<f64> = frames.iter().map(|&f| series.frames[f].occupancy(site)).collect();
            let q = q95_reference(&values);
            if q.is_none() {
                log::warn!(
                    "site {} has {} observations; excluded from MAPE",
                    series.site_ids[site],
                    values.len()
                );
            }
            q
        })
        .collect()
}

/// Both readings of the error metrics. Averages run over every site x time
/// entry; MAPE terms skip sites without a positive reference capacity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub mae: f64,
    /// `100 * mean(|e| / q95)`
    pub mape: f64,
    /// Mean squared error, the printed form of the absolute-error formula.
    pub mae_literal: f64,
    /// `100 * mean(e^2 / q95)`
    pub mape_literal: f64,
    pub count: usize,
    pub mape_count: usize,
}

#[derive(Clone, Debug, Default)]
pub struct MetricAccumulator {
    sum_sq: f64,
    sum_abs: f64,
    sum_ape: f64,
    sum_ape_literal: f64,
    count: usize,
    mape_count: usize,
}

impl MetricAccumulator {
    pub fn add(&mut self, predicted: f64, truth: f64, q95: Option<f64>) {
        let e = predicted - truth;
        self.sum_sq += e * e;
        self.sum_abs += e.abs();
        self.count += 1;
        if let Some(q) = q95.filter(|q| *q > 0.0) {
            self.sum_ape += e.abs() / q;
            self.sum_ape_literal += e * e / q;
            self.mape_count += 1;
        }
    }

    pub fn finish(&self) -> MetricSet {
        let n = self.count.max(1) as f64;
        let m = self.mape_count.max(1) as f64;
        MetricSet {
            rmse: (self.sum_sq / n).sqrt(),
            mae: self.sum_abs / n,
            mape: 100.0 * self.sum_ape / m,
            mae_literal: self.sum_sq / n,
            mape_literal: 100.0 * self.sum_ape_literal / m,
            count: self.count,
            mape_count: self.mape_count,
        }
    }
}

/// Metrics for an `n x m` prediction block; row `i` belongs to site `i`.
pub fn compute_metrics(predicted: &Tensor, truth: &Tensor, q95: &[Option<f64>]) -> Result<MetricSet> {
    if predicted.shape() != truth.shape() || !predicted.is_matrix() {
        return Err(Error::shape("compute_metrics", predicted.shape(), truth.shape()));
    }
    if q95.len() != predicted.rows() {
        return Err(Error::shape("compute_metrics", &[q95.len()], &[predicted.rows()]));
    }
    let mut acc = MetricAccumulator::default();
    for (i, q) in q95.iter().enumerate() {
        for j in 0..predicted.cols() {
            acc.add(predicted.get(i, j), truth.get(i, j), *q);
        }
    }
    if q95.contains(&Some(0.0)) {
        log::warn!("sites with zero reference capacity excluded from MAPE");
    }
    Ok(acc.finish())
}

/// Metrics per horizon column over a set of windows.
pub fn horizon_metrics(preds: &[Tensor], samples: &[WindowSample], q95: &[Option<f64>]) -> Result<Vec<MetricSet>> {
    if preds.len() != samples.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} windows",
            preds.len(),
            samples.len()
        )));
    }
    let cols = samples.first().map_or(0, |s| s.targets.cols());
    let mut accs = vec![MetricAccumulator::default(); cols];
    for (p, s) in preds.iter().zip(samples) {
        if p.shape() != s.targets.shape() {
            return Err(Error::shape("horizon_metrics", p.shape(), s.targets.shape()));
        }
        for i in 0..p.rows() {
            for (c, acc) in accs.iter_mut().enumerate() {
                acc.add(p.get(i, c), s.targets.get(i, c), q95[i]);
            }
        }
    }
    Ok(accs.iter().map(MetricAccumulator::finish).collect())
}

/// Frozen-weight predictions for every window, in window order.
pub fn predict_windows(
    model: &Model,
    ctx: &GraphContext,
    frames: &[Tensor],
    samples: &[WindowSample],
    exec: Execution,
) -> Result<Vec<Tensor>> {
    par::try_map_slice(exec, samples, |s| model.predict(ctx, &frames[s.start..=s.anchor]))
}

/// Inference on held-out weeks. Refuses when those weeks overlap the
/// training weeks.
pub fn generality_inference(
    model: &Model,
    ctx: &GraphContext,
    series: &FrameSeries,
    frames: &[Tensor],
    samples: &[WindowSample],
    train_weeks: &[u32],
    held_out_weeks: &[u32],
) -> Result<Vec<MetricSet>> {
    if let Some(w) = held_out_weeks.iter().find(|w| train_weeks.contains(w)) {
        return Err(Error::Config(format!("held-out week {w} is also a training week")));
    }
    let max_h = *model.spec().horizons.iter().max().expect("validated spec");
    for s in samples {
        let (a, b) = (series.week_of(s.start), series.week_of(s.end(max_h)));
        if !(a..=b).all(|w| held_out_weeks.contains(&w)) {
            return Err(Error::Config(format!(
                "window at frame {} leaves the held-out weeks",
                s.start
            )));
        }
    }
    let preds = predict_windows(model, ctx, frames, samples, Execution::available())?;
    let q95 = q95_for_samples(series, samples, max_h);
    horizon_metrics(&preds, samples, &q95)
}
