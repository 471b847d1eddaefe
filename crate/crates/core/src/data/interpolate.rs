use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{FeatureFrame, FrameSeries, SiteRecord, FEATURE_COUNT, OCCUPANCY_COLUMN};
use crate::error::{Error, Result};
use crate::graph::SiteMeta;
use crate::numerics::Tensor;
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub step_minutes: i64,
    /// Longest run of missing grid points that is still filled.
    pub max_gap: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            step_minutes: 10,
            max_gap: 6,
        }
    }
}

/// Per-site occupancy on the grid; `None` where no usable value exists.
fn site_series(
    site: &SiteMeta,
    records: &[&SiteRecord],
    start: i64,
    len: usize,
    step: i64,
    max_gap: usize,
) -> Vec<Option<f64>> {
    let capacity = f64::from(site.capacity);
    // Exact duplicate timestamps: the later row wins.
    let mut by_time: BTreeMap<i64, f64> = BTreeMap::new();
    for r in records {
        let occ = ((capacity - r.available as f64) / capacity).max(0.0);
        by_time.insert(r.timestamp.timestamp(), occ);
    }
    // Several observations inside one grid cell are averaged.
    let mut sums = vec![(0.0, 0u32); len];
    for (&ts, &occ) in &by_time {
        let idx = ((ts - start).div_euclid(step)) as usize;
        sums[idx].0 += occ;
        sums[idx].1 += 1;
    }
    let mut values: Vec<Option<f64>> = sums.iter().map(|&(s, c)| (c > 0).then(|| s / f64::from(c))).collect();

    let mut i = 0;
    while i < len {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < len && values[i].is_none() {
            i += 1;
        }
        let bounded = gap_start > 0 && i < len;
        if bounded && i - gap_start <= max_gap {
            let fill = (values[gap_start - 1].unwrap() + values[i].unwrap()) / 2.0;
            for v in &mut values[gap_start..i] {
                *v = Some(fill);
            }
        }
    }
    values
}

/// Resamples raw records onto a uniform grid spanning all records and
/// encodes the node features. Missing grid points between two known values
/// are filled with the mean of those two values when the run is at most
/// `max_gap` long; otherwise the affected frames are invalid.
pub fn interpolate_to_grid(sites: &[SiteMeta], records: &[SiteRecord], grid: GridSpec) -> Result<FrameSeries> {
    if grid.step_minutes <= 0 {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let index: BTreeMap<&str, usize> = sites.iter().enumerate().map(|(i, s)| (s.site_id.as_str(), i)).collect();
    let mut grouped: Vec<Vec<&SiteRecord>> = vec![Vec::new(); sites.len()];
    for r in records {
        let &i = index
            .get(r.site_id.as_str())
            .ok_or_else(|| Error::Data(format!("records reference unknown site {}", r.site_id)))?;
        grouped[i].push(r);
    }
    if let Some(i) = grouped.iter().position(|g| g.len() < 2) {
        return Err(Error::Data(format!(
            "site {} has fewer than 2 records",
            sites[i].site_id
        )));
    }

    let step = grid.step_minutes * 60;
    let min_ts = records.iter().map(|r| r.timestamp.timestamp()).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp.timestamp()).max().unwrap();
    let start = min_ts.div_euclid(step) * step;
    let len = ((max_ts.div_euclid(step) * step - start) / step) as usize + 1;

    let columns: Vec<Vec<Option<f64>>> = par::map_indexed(Execution::available(), sites.len(), |i| {
        site_series(&sites[i], &grouped[i], start, len, step, grid.max_gap)
    });

    let n = sites.len();
    let frames = (0..len)
        .map(|t| {
            let time = Utc.timestamp_opt(start + t as i64 * step, 0).unwrap();
            let mut features = Tensor::zeros(&[n, FEATURE_COUNT]);
            let mut valid = true;
            for (i, site) in sites.iter().enumerate() {
                let dynamic = dynamic_ids(time);
                let row = [
                    dynamic[0],
                    dynamic[1],
                    dynamic[2],
                    site.travel_time,
                    f64::from(site.owner),
                    f64::from(site.amenity_count),
                    f64::from(site.capacity),
                    columns[i][t].unwrap_or(f64::NAN),
                ];
                valid &= columns[i][t].is_some();
                for (c, v) in row.into_iter().enumerate() {
                    features.set(i, c, v);
                }
            }
            debug_assert_eq!(OCCUPANCY_COLUMN, FEATURE_COUNT - 1);
            FeatureFrame { time, features, valid }
        })
        .collect();

    Ok(FrameSeries {
        site_ids: sites.iter().map(|s| s.site_id.clone()).collect(),
        step_minutes: grid.step_minutes,
        frames,
    })
}

/// ISO week, weekday (Monday = 0) and hour of a grid time.
pub(crate) fn dynamic_ids(time: DateTime<Utc>) -> [f64; 3] {
    [
        f64::from(time.iso_week().week()),
        f64::from(time.weekday().num_days_from_monday()),
        f64::from(time.hour()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SiteMeta;

    fn meta(id: &str, capacity: u32) -> SiteMeta {
        SiteMeta {
            site_id: id.into(),
            region: "WI".into(),
            latitude: 43.0,
            longitude: -89.0,
            travel_time: 12.0,
            owner: 0,
            amenity_count: 4,
            capacity,
        }
    }

    fn rec(id: &str, minute: i64, available: i64) -> SiteRecord {
        SiteRecord {
            site_id: id.into(),
            timestamp: Utc.timestamp_opt(1_704_067_200 + minute * 60, 0).unwrap(),
            available,
        }
    }

    #[test]
    fn single_missing_point_is_mean_of_neighbors() {
        // capacity 10: available 6 -> 0.4, available 4 -> 0.6
        let sites = [meta("a", 10)];
        let records = [rec("a", 0, 6), rec("a", 20, 4)];
        let series = interpolate_to_grid(&sites, &records, GridSpec::default()).unwrap();
        let occ: Vec<f64> = series.frames.iter().map(|f| f.occupancy(0)).collect();
        assert_eq!(occ.len(), 3);
        assert!((occ[1] - 0.5).abs() < 1e-12);
        assert!(series.frames.iter().all(|f| f.valid));
    }

    #[test]
    fn complete_grid_is_unchanged() {
        let sites = [meta("a", 50)];
        let avail = [10, 20, 30, 5, 0, 50];
        let records: Vec<_> = avail
            .iter()
            .enumerate()
            .map(|(i, &a)| rec("a", i as i64 * 10, a))
            .collect();
        let series = interpolate_to_grid(&sites, &records, GridSpec::default()).unwrap();
        for (f, &a) in series.frames.iter().zip(&avail) {
            assert_eq!(f.occupancy(0), (50.0 - a as f64) / 50.0);
        }
        assert_eq!(series.frames[0].occupancy(0), 0.8);
    }

    #[test]
    fn long_gap_invalidates_frames() {
        let sites = [meta("a", 10)];
        let records = [rec("a", 0, 5), rec("a", 80, 5), rec("a", 90, 5)];
        let grid = GridSpec {
            step_minutes: 10,
            max_gap: 6,
        };
        let series = interpolate_to_grid(&sites, &records, grid).unwrap();
        // 7 missing points (10..70) exceed max_gap
        let valid: Vec<bool> = series.frames.iter().map(|f| f.valid).collect();
        assert_eq!(
            valid,
            vec![true, false, false, false, false, false, false, false, true, true]
        );

        let records = [rec("a", 0, 5), rec("a", 70, 5)];
        let series = interpolate_to_grid(&sites, &records, grid).unwrap();
        assert!(series.frames.iter().all(|f| f.valid));
    }

    #[test]
    fn unknown_site_is_a_data_error() {
        let sites = [meta("a", 10)];
        let records = [rec("a", 0, 5), rec("a", 10, 5), rec("zz", 0, 1)];
        assert!(matches!(
            interpolate_to_grid(&sites, &records, GridSpec::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn sub_grid_observations_are_averaged() {
        let sites = [meta("a", 10)];
        let records = [rec("a", 0, 10), rec("a", 5, 0), rec("a", 10, 5)];
        let series = interpolate_to_grid(&sites, &records, GridSpec::default()).unwrap();
        assert_eq!(series.frames.len(), 2);
        assert!((series.frames[0].occupancy(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dynamic_and_static_columns() {
        let sites = [meta("a", 10), meta("b", 30)];
        let records = [rec("a", 0, 5), rec("a", 70, 5), rec("b", 0, 5), rec("b", 70, 5)];
        let series = interpolate_to_grid(&sites, &records, GridSpec::default()).unwrap();
        // 2024-01-01 is a Monday in ISO week 1
        let f0 = &series.frames[0].features;
        assert_eq!(f0.row(0)[..3], [1.0, 0.0, 0.0]);
        assert_eq!(series.frames[6].features.get(1, 2), 1.0);
        for f in &series.frames {
            assert_eq!(f.features.get(1, 6), 30.0);
            assert_eq!(f.features.get(0, 3), 12.0);
        }
    }

    #[test]
    fn over_capacity_is_kept() {
        let sites = [meta("a", 10)];
        let records = [rec("a", 0, -1), rec("a", 10, 0)];
        let series = interpolate_to_grid(&sites, &records, GridSpec::default()).unwrap();
        assert!((series.frames[0].occupancy(0) - 1.1).abs() < 1e-12);
    }
}
