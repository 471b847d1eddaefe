use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FrameSeries, FEATURE_COUNT, OCCUPANCY_COLUMN};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `K` consecutive input frames `[start, anchor]` and occupancy targets at
/// `anchor + h` for every requested horizon `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub start: usize,
    pub anchor: usize,
    /// `n x |horizons|`
    pub targets: Tensor,
}

impl WindowSample {
    pub fn k(&self) -> usize {
        self.anchor - self.start + 1
    }

    /// Last frame index this sample touches.
    pub fn end(&self, max_horizon: usize) -> usize {
        self.anchor + max_horizon
    }

    /// Scaled input frames, oldest first.
    pub fn inputs(&self, series: &FrameSeries, scaler: &FeatureScaler) -> Vec<Tensor> {
        series.frames[self.start..=self.anchor]
            .iter()
            .map(|f| scaler.apply(&f.features))
            .collect()
    }
}

fn check_window_params(k: usize, horizons: &[usize]) -> Result<usize> {
    if k == 0 {
        return Err(Error::Usage("window length K must be at least 1".into()));
    }
    match horizons.iter().max() {
        Some(&m) if m >= 1 && !horizons.contains(&0) => Ok(m),
        _ => Err(Error::Usage("horizons must be non-empty and positive".into())),
    }
}

/// Stride-1 sliding windows over every run of valid frames.
pub fn make_windows(series: &FrameSeries, k: usize, horizons: &[usize]) -> Result<Vec<WindowSample>> {
    let max_h = check_window_params(k, horizons)?;
    let n = series.site_count();
    let span = k + max_h;
    let mut samples = Vec::new();
    let mut run_start = 0;
    let frames = &series.frames;
    while run_start < frames.len() {
        if !frames[run_start].valid {
            run_start += 1;
            continue;
        }
        let mut run_end = run_start;
        while run_end < frames.len() && frames[run_end].valid {
            run_end += 1;
        }
        let run_len = run_end - run_start;
        if run_len >= span {
            for start in run_start..=run_end - span {
                let anchor = start + k - 1;
                let mut targets = Tensor::zeros(&[n, horizons.len()]);
                for (c, &h) in horizons.iter().enumerate() {
                    let frame = &frames[anchor + h];
                    for i in 0..n {
                        targets.set(i, c, frame.features.get(i, OCCUPANCY_COLUMN));
                    }
                }
                samples.push(WindowSample { start, anchor, targets });
            }
        }
        run_start = run_end;
    }
    if samples.is_empty() {
        log::warn!(
            "no windows: need {span} contiguous valid frames, series has {} valid of {}",
            series.valid_count(),
            frames.len()
        );
    }
    Ok(samples)
}

/// Splits chronologically ordered windows into training and validation,
/// holding out the last `fraction` (rounded up, at least one window when
/// `fraction > 0` and two or more windows exist).
pub fn split_validation(samples: &[WindowSample], fraction: f64) -> (Vec<WindowSample>, Vec<WindowSample>) {
    if fraction <= 0.0 || samples.len() < 2 {
        return (samples.to_vec(), Vec::new());
    }
    let held = ((samples.len() as f64 * fraction).ceil() as usize).clamp(1, samples.len() - 1);
    let cut = samples.len() - held;
    (samples[..cut].to_vec(), samples[cut..].to_vec())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSplit {
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub generality: Vec<WindowSample>,
}

/// Assigns each sample to the split owning every week it touches; samples
/// straddling two splits (or touching an unassigned week) are dropped.
pub fn split_by_weeks(
    series: &FrameSeries,
    samples: &[WindowSample],
    max_horizon: usize,
    train_weeks: &[u32],
    test_weeks: &[u32],
    generality_weeks: &[u32],
) -> Result<SampleSplit> {
    let sets: [BTreeSet<u32>; 3] = [
        train_weeks.iter().copied().collect(),
        test_weeks.iter().copied().collect(),
        generality_weeks.iter().copied().collect(),
    ];
    for a in 0..3 {
        for b in a + 1..3 {
            if let Some(w) = sets[a].intersection(&sets[b]).next() {
                return Err(Error::Config(format!("week {w} assigned to more than one split")));
            }
        }
    }
    let mut split = SampleSplit::default();
    for s in samples {
        let first = series.week_of(s.start);
        let last = series.week_of(s.end(max_horizon));
        for (set, out) in sets
            .iter()
            .zip([&mut split.train, &mut split.test, &mut split.generality])
        {
            if (first..=last).all(|w| set.contains(&w)) {
                out.push(s.clone());
            }
        }
    }
    Ok(split)
}

/// Min-max scaling of the seven non-target columns, fitted on training
/// frames. Occupancy passes through unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity() -> Self {
        FeatureScaler {
            min: vec![0.0; FEATURE_COUNT],
            max: vec![1.0; FEATURE_COUNT],
        }
    }

    pub fn fit(series: &FrameSeries, samples: &[WindowSample]) -> Result<Self> {
        let mut min = vec![f64::INFINITY; FEATURE_COUNT];
        let mut max = vec![f64::NEG_INFINITY; FEATURE_COUNT];
        let mut frames = BTreeSet::new();
        for s in samples {
            frames.extend(s.start..=s.anchor);
        }
        if frames.is_empty() {
            return Err(Error::Data("cannot fit feature scaling on zero samples".into()));
        }
        for &f in &frames {
            let x = &series.frames[f].features;
            for i in 0..x.rows() {
                for c in 0..FEATURE_COUNT {
                    min[c] = min[c].min(x.get(i, c));
                    max[c] = max[c].max(x.get(i, c));
                }
            }
        }
        min[OCCUPANCY_COLUMN] = 0.0;
        max[OCCUPANCY_COLUMN] = 1.0;
        Ok(FeatureScaler { min, max })
    }

    pub fn apply(&self, features: &Tensor) -> Tensor {
        let mut out = features.clone();
        let cols = features.cols();
        for (idx, v) in out.data_mut().iter_mut().enumerate() {
            let c = idx % cols;
            if c == OCCUPANCY_COLUMN {
                continue;
            }
            let range = self.max[c] - self.min[c];
            *v = if range > 0.0 { (*v - self.min[c]) / range } else { 0.0 };
        }
        out
    }

    /// Scales every frame of a series, in order.
    pub fn apply_series(&self, series: &FrameSeries) -> Vec<Tensor> {
        crate::par::map_slice(crate::par::Execution::available(), &series.frames, |f| {
            self.apply(&f.features)
        })
    }
}

/// Week numbers (dataset-relative, 1-based) assigned to each split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeekSplit {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    #[serde(default)]
    pub generality: Vec<u32>,
}

/// A windowed, split and scaled series ready for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub series: FrameSeries,
    pub scaler: FeatureScaler,
    /// Scaled features of every frame.
    pub frames: Vec<Tensor>,
    pub train: Vec<WindowSample>,
    pub validation: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub generality: Vec<WindowSample>,
}

/// Windows the series, splits it by weeks, holds out the validation tail
/// and fits the scaler on the remaining training windows.
pub fn prepare(
    series: FrameSeries,
    k: usize,
    horizons: &[usize],
    weeks: &WeekSplit,
    validation_fraction: f64,
) -> Result<Prepared> {
    let samples = make_windows(&series, k, horizons)?;
    let max_h = check_window_params(k, horizons)?;
    let split = split_by_weeks(&series, &samples, max_h, &weeks.train, &weeks.test, &weeks.generality)?;
    if split.train.is_empty() {
        return Err(Error::Data(format!(
            "no training windows in weeks {:?} ({} windows overall)",
            weeks.train,
            samples.len()
        )));
    }
    let (train, validation) = split_validation(&split.train, validation_fraction);
    let scaler = FeatureScaler::fit(&series, &train)?;
    let frames = scaler.apply_series(&series);
    Ok(Prepared {
        series,
        scaler,
        frames,
        train,
        validation,
        test: split.test,
        generality: split.generality,
    })
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::super::FeatureFrame;
    use super::*;

    /// `len` frames of one site, 10-minute grid from Monday 2024-01-01,
    /// occupancy = frame index / 1000.
    fn series(len: usize, invalid: &[usize]) -> FrameSeries {
        let frames = (0..len)
            .map(|t| {
                let mut features = Tensor::zeros(&[1, FEATURE_COUNT]);
                features.set(0, OCCUPANCY_COLUMN, t as f64 / 1000.0);
                FeatureFrame {
                    time: Utc.timestamp_opt(1_704_067_200 + t as i64 * 600, 0).unwrap(),
                    features,
                    valid: !invalid.contains(&t),
                }
            })
            .collect();
        FrameSeries {
            site_ids: vec!["a".into()],
            step_minutes: 10,
            frames,
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&series(10, &[]), 6, &[1, 3]).unwrap().len(), 2);
        assert_eq!(make_windows(&series(9, &[]), 6, &[3]).unwrap().len(), 1);
        assert!(make_windows(&series(8, &[]), 6, &[3]).unwrap().is_empty());
    }

    #[test]
    fn targets_pick_requested_horizons() {
        let s = series(20, &[]);
        let w = make_windows(&s, 6, &[1, 3, 12]).unwrap();
        let first = &w[0];
        assert_eq!((first.start, first.anchor), (0, 5));
        assert_eq!(first.targets.row(0), &[0.006, 0.008, 0.017]);
    }

    #[test]
    fn windows_never_cross_invalid_frames() {
        let s = series(30, &[12]);
        let w = make_windows(&s, 3, &[2]).unwrap();
        for sample in &w {
            assert!(!(sample.start..=sample.end(2)).contains(&12));
        }
        // runs of 12 and 17 frames: (12-5+1) + (17-5+1)
        assert_eq!(w.len(), 8 + 13);
    }

    #[test]
    fn bad_parameters() {
        let s = series(10, &[]);
        assert!(make_windows(&s, 0, &[1]).is_err());
        assert!(make_windows(&s, 2, &[]).is_err());
        assert!(make_windows(&s, 2, &[0, 1]).is_err());
    }

    #[test]
    fn week_split_is_disjoint() {
        // two weeks of 10-minute frames
        let s = series(2 * 7 * 144, &[]);
        let w = make_windows(&s, 6, &[1]).unwrap();
        let split = split_by_weeks(&s, &w, 1, &[1], &[2], &[]).unwrap();
        assert!(split.generality.is_empty());
        assert!(split.train.iter().all(|x| s.week_of(x.end(1)) == 1));
        assert!(split.test.iter().all(|x| s.week_of(x.start) == 2));
        // the 6 windows that straddle the week boundary are dropped
        assert_eq!(split.train.len() + split.test.len(), w.len() - 6);
        assert!(matches!(
            split_by_weeks(&s, &w, 1, &[1, 2], &[2], &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scaler_maps_training_range_to_unit_interval() {
        let mut s = series(10, &[]);
        for (t, f) in s.frames.iter_mut().enumerate() {
            f.features.set(0, 2, t as f64);
            f.features.set(0, 6, 40.0);
        }
        let w = make_windows(&s, 2, &[1]).unwrap();
        let scaler = FeatureScaler::fit(&s, &w[..3]).unwrap();
        let x = scaler.apply(&s.frames[3].features);
        assert_eq!(x.get(0, 2), 1.0);
        assert_eq!(x.get(0, 6), 0.0);
        assert_eq!(x.get(0, OCCUPANCY_COLUMN), 0.003);
    }
}
