//! Occupancy records, the 8-column node features, grid interpolation,
//! windowing and the synthetic generator.

mod interpolate;
mod synthetic;
mod window;

use std::path::Path;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

pub use interpolate::{interpolate_to_grid, GridSpec};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};
pub use window::{
    make_windows, prepare, split_by_weeks, split_validation, FeatureScaler, Prepared, SampleSplit, WeekSplit,
    WindowSample,
};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Node feature columns, in order.
pub const FEATURE_NAMES: [&str; 8] = [
    "week_id",
    "day_id",
    "hour_id",
    "travel_time",
    "owner",
    "amenity",
    "capacity",
    "occupancy_rate",
];
pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();
pub const OCCUPANCY_COLUMN: usize = 7;

/// One raw observation. `available` may be negative when a site is
/// over-parked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub site_id: String,
    #[serde(rename = "timestamp_iso8601")]
    pub timestamp: DateTime<Utc>,
    pub available: i64,
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<SiteRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let records = reader
        .deserialize::<SiteRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(records)
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[SiteRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Node features at one grid time. Frames with a site lacking a usable
/// occupancy value are marked invalid and never enter a window.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub time: DateTime<Utc>,
    /// `n x 8`, columns per [`FEATURE_NAMES`].
    pub features: Tensor,
    pub valid: bool,
}

impl FeatureFrame {
    pub fn occupancy(&self, site: usize) -> f64 {
        self.features.get(site, OCCUPANCY_COLUMN)
    }
}

/// Uniform-grid feature frames for a fixed site order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSeries {
    pub site_ids: Vec<String>,
    pub step_minutes: i64,
    pub frames: Vec<FeatureFrame>,
}

impl FrameSeries {
    pub fn site_count(&self) -> usize {
        self.site_ids.len()
    }

    /// Dataset-relative week (1-based, Monday-aligned) of frame `index`.
    pub fn week_of(&self, index: usize) -> u32 {
        let first = self.frames[0].time;
        let monday = first.date_naive() - chrono::Duration::days(first.weekday().num_days_from_monday() as i64);
        let days = (self.frames[index].time.date_naive() - monday).num_days();
        (days / 7) as u32 + 1
    }

    /// Number of valid frames.
    pub fn valid_count(&self) -> usize {
        self.frames.iter().filter(|f| f.valid).count()
    }
}
