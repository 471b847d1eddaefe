//! Mean-squared-error training with RMSProp, one optimizer step per window.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::data::split_validation;
use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::evaluation::predict_windows;
use crate::models::{GraphContext, Model};
use crate::numerics::{RmsPropConfig, RmsPropState, Tape, Tensor, Var};
use crate::par::Execution;

/// Default global gradient-norm clip; guards the GRU against rare blow-ups.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

/// Mean over all entries of the squared difference.
pub fn mse_loss(tape: &mut Tape<'_>, predicted: Var, target: Var) -> Result<Var> {
    if tape.shape(predicted) != tape.shape(target) {
        return Err(Error::shape("mse_loss", tape.shape(predicted), tape.shape(target)));
    }
    let diff = tape.sub(predicted, target)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

/// Tape-free [`mse_loss`].
pub fn mse(predicted: &Tensor, target: &Tensor) -> Result<f64> {
    if predicted.shape() != target.shape() {
        return Err(Error::shape("mse", predicted.shape(), target.shape()));
    }
    let sum: f64 = predicted
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predicted.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub rmsprop_epsilon: f64,
    pub rmsprop_decay: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub shuffle: bool,
    /// Epochs without validation improvement before stopping; `None`
    /// disables early stopping.
    pub patience: Option<usize>,
    /// Invoke the checkpoint callback every this many epochs; 0 = never.
    pub checkpoint_every: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Trailing share of the training windows held out for validation.
    pub validation_fraction: f64,
    /// Stop once overall validation RMSE drops below this value.
    pub stop_at_val_rmse: Option<f64>,
    /// Stop once the epoch training loss drops below this value.
    pub stop_at_train_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = RmsPropConfig::default();
        TrainConfig {
            epochs: 100,
            learning_rate: opt.learning_rate,
            weight_decay: opt.weight_decay,
            rmsprop_epsilon: opt.smoothing,
            rmsprop_decay: opt.decay_rate,
            seed: 0,
            shuffle: true,
            patience: Some(20),
            checkpoint_every: 0,
            clip_norm: Some(DEFAULT_CLIP_NORM),
            validation_fraction: 0.1,
            stop_at_val_rmse: None,
            stop_at_train_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning rate and weight decay must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must be in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || !(self.rmsprop_epsilon > 0.0) {
            return Err(Error::Config(
                "rmsprop decay must be in [0, 1) and epsilon positive".into(),
            ));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            smoothing: self.rmsprop_epsilon,
            decay_rate: self.rmsprop_decay,
        }
    }
}

/// Scaled frames, the graph operators and the windows for one run.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    /// Scaled features for every frame of the series.
    pub frames: &'a [Tensor],
    pub ctx: &'a GraphContext,
    pub train: &'a [WindowSample],
    pub validation: &'a [WindowSample],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Per horizon, in model horizon order; empty without validation data.
    pub val_rmse: Vec<f64>,
    pub val_rmse_overall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub horizons: Vec<usize>,
    pub train_windows: usize,
    pub validation_windows: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: String,
    /// Filled in after training by whoever evaluates the held-out split.
    #[serde(default)]
    pub test_rmse: Option<Vec<f64>>,
    /// Wall-clock seconds per epoch. Not serialized so that reports stay
    /// reproducible.
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

impl TrainReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// `epoch,train_loss,val_rmse_h{h}...`
    pub fn write_loss_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("epoch,train_loss");
        for h in &self.horizons {
            out.push_str(&format!(",val_rmse_h{h}"));
        }
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&format!("{},{}", e.epoch, e.train_loss));
            for c in 0..self.horizons.len() {
                match e.val_rmse.get(c) {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Forward, loss and backward for one window. Gradients are left on the
/// model's parameters; returns the loss.
pub fn compute_gradients(model: &mut Model, ctx: &GraphContext, inputs: &[Tensor], targets: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let params = model.params().bind(&mut tape);
    let c = ctx.bind(&mut tape);
    let xs: Vec<Var> = inputs.iter().map(|x| tape.leaf_ref(x, false)).collect();
    let pred = model.forward(&mut tape, &params, &c, &xs)?;
    let target = tape.leaf_ref(targets, false);
    let loss = mse_loss(&mut tape, pred, target)?;
    let value = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss)?;
    model.params_mut().collect_grads(&params, &mut grads);
    Ok(value)
}

/// Root-mean-squared error per output column and overall.
pub fn rmse_by_column(preds: &[Tensor], samples: &[WindowSample]) -> (Vec<f64>, f64) {
    let cols = samples.first().map_or(0, |s| s.targets.cols());
    let mut sums = vec![0.0; cols];
    let mut count = 0usize;
    for (p, s) in preds.iter().zip(samples) {
        for i in 0..p.rows() {
            for (c, sum) in sums.iter_mut().enumerate() {
                let e = p.get(i, c) - s.targets.get(i, c);
                *sum += e * e;
            }
        }
        count += p.rows();
    }
    let per: Vec<f64> = sums.iter().map(|s| (s / count as f64).sqrt()).collect();
    let overall = (sums.iter().sum::<f64>() / (count * cols) as f64).sqrt();
    (per, overall)
}

fn window_inputs<'f>(frames: &'f [Tensor], s: &WindowSample) -> &'f [Tensor] {
    &frames[s.start..=s.anchor]
}

pub fn train(model: &mut Model, data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_callback(model, data, cfg, &mut |_, _| Ok(()))
}

/// Trains in place and leaves the best-scoring parameters on `model`.
/// `on_checkpoint` receives the epoch number and the current model every
/// `checkpoint_every` epochs.
pub fn train_with_callback(
    model: &mut Model,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(usize, &Model) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    model.check_context(data.ctx)?;
    let spec = model.spec().clone();
    for s in data.train.iter().chain(data.validation) {
        if s.k() != spec.k || s.targets.cols() != spec.horizons.len() {
            return Err(Error::Usage(format!(
                "window with K={} and {} targets does not fit model with K={} and {} horizons",
                s.k(),
                s.targets.cols(),
                spec.k,
                spec.horizons.len()
            )));
        }
    }

    let mut optimizer = RmsPropState::new(cfg.optimizer(), model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut report = TrainReport {
        horizons: spec.horizons.clone(),
        train_windows: data.train.len(),
        validation_windows: data.validation.len(),
        epochs: Vec::new(),
        best_epoch: 0,
        stop_reason: "epoch limit".into(),
        test_rmse: None,
        epoch_seconds: Vec::new(),
    };
    let mut best_score = f64::INFINITY;
    let mut best_params = model.params().clone();
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for (step, &idx) in order.iter().enumerate() {
            let s = &data.train[idx];
            let loss = compute_gradients(model, data.ctx, window_inputs(data.frames, s), &s.targets)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, step {}",
                    step + 1
                )));
            }
            if let Some(max) = cfg.clip_norm {
                model.params_mut().clip_grad_norm(max);
            }
            optimizer.step(model.params_mut())?;
            total += loss;
        }
        let train_loss = total / order.len() as f64;

        let (val_rmse, val_rmse_overall) = if data.validation.is_empty() {
            (Vec::new(), None)
        } else {
            let preds = predict_windows(model, data.ctx, data.frames, data.validation, Execution::available())?;
            let (per, overall) = rmse_by_column(&preds, data.validation);
            if !overall.is_finite() {
                return Err(Error::Numeric(format!("non-finite validation RMSE at epoch {epoch}")));
            }
            (per, Some(overall))
        };
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        let score = val_rmse_overall.unwrap_or(train_loss);
        let record = EpochRecord {
            epoch,
            train_loss,
            val_rmse,
            val_rmse_overall,
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.6}{}",
            val_rmse_overall.map_or(String::new(), |v| format!(", val rmse {v:.5}"))
        );
        report.epochs.push(record);

        if score < best_score {
            best_score = score;
            best_params = model.params().clone();
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            on_checkpoint(epoch, model)?;
        }
        if cfg.stop_at_train_loss.is_some_and(|t| train_loss < t) {
            report.stop_reason = "training loss target reached".into();
            break;
        }
        if let (Some(t), Some(v)) = (cfg.stop_at_val_rmse, val_rmse_overall) {
            if v < t {
                report.stop_reason = "validation target reached".into();
                break;
            }
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            report.stop_reason = format!("no improvement for {since_best} epochs");
            break;
        }
    }
    *model.params_mut() = best_params;
    model.params_mut().clear_grads();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::matrix(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn eval_loss(p: &Tensor, t: &Tensor) -> Result<f64> {
        let mut tape = Tape::new();
        let a = tape.leaf_ref(p, false);
        let b = tape.leaf_ref(t, false);
        let l = mse_loss(&mut tape, a, b)?;
        Ok(tape.value(l).data()[0])
    }

    #[test]
    fn mse_trivial_cases() {
        let t = Tensor::filled(&[3, 2], 0.4);
        assert_eq!(eval_loss(&t, &t).unwrap(), 0.0);
        let p = t.map(|v| v + 0.1);
        assert!((eval_loss(&p, &t).unwrap() - 0.01).abs() < 1e-15);
        assert!(eval_loss(&p, &Tensor::zeros(&[2, 3])).is_err());
    }

    #[test]
    fn mse_matches_two_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random(5, 3, &mut rng);
        let t = random(5, 3, &mut rng);
        let mut sum = 0.0;
        for i in 0..5 {
            for j in 0..3 {
                sum += (p.get(i, j) - t.get(i, j)).powi(2);
            }
        }
        assert!((eval_loss(&p, &t).unwrap() - sum / 15.0).abs() < 1e-15);
        assert!((mse(&p, &t).unwrap() - sum / 15.0).abs() < 1e-15);
    }

    #[test]
    fn validation_split_is_chronological_tail() {
        let s = |i: usize| WindowSample {
            start: i,
            anchor: i,
            targets: Tensor::zeros(&[1, 1]),
        };
        let all: Vec<_> = (0..25).map(s).collect();
        let (train, val) = split_validation(&all, 0.1);
        assert_eq!((train.len(), val.len()), (22, 3));
        assert_eq!(val[0].start, 22);
        let (train, val) = split_validation(&all[..1], 0.1);
        assert_eq!((train.len(), val.len()), (1, 0));
        assert_eq!(split_validation(&all, 0.0).1.len(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad: std::result::Result<TrainConfig, _> = serde_json::from_str(r#"{"epoch": 3}"#);
        assert!(bad.is_err());
    }
}
