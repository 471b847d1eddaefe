//! Seeded stand-in for an archived parking feed.
//!
//! Demand per site is a base level, an overnight-peaking diurnal cosine
//! whose phase is shared within a region, a weekend modulation, and AR(1)
//! noise with a site part and a region part. Demand above capacity spills to
//! the other sites of the same region, scaled by `coupling`, before the
//! occupancy is clipped to `[0, over_capacity_max]`.

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SiteRecord;
use crate::error::{Error, Result};
use crate::graph::{SiteMeta, EARTH_RADIUS_MILES};

const STATE_CODES: [&str; 8] = ["IA", "IL", "KS", "KY", "MI", "MN", "OH", "WI"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_sites: usize,
    pub n_regions: usize,
    pub days: usize,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub step_minutes: i64,
    /// Spacing of region centres on a square grid.
    pub region_spacing_miles: f64,
    /// Sites are placed uniformly in a disk of this radius around their
    /// region centre.
    pub site_spread_miles: f64,
    pub capacity_range: [u32; 2],
    pub base_range: [f64; 2],
    pub amplitude_range: [f64; 2],
    /// Hour of peak demand per region is drawn from this range.
    pub peak_hour_range: [f64; 2],
    /// Per-site jitter of the regional peak hour.
    pub peak_jitter_hours: f64,
    /// Multiplier on the base level on Saturday and Sunday.
    pub weekend_factor: f64,
    pub noise_level: f64,
    pub regional_noise_level: f64,
    /// AR(1) persistence of both noise components.
    pub noise_persistence: f64,
    /// Fraction of a full site's excess demand pushed to its region.
    pub coupling: f64,
    pub over_capacity_max: f64,
    /// Probability that a record is missing from the feed.
    pub dropout_prob: f64,
    /// Fraction of sites reporting every half step.
    pub fast_site_fraction: f64,
    /// Sites (by index) whose demand is held above capacity.
    pub forced_full: Vec<usize>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sites: 105,
            n_regions: 8,
            days: 42,
            seed: 7,
            start: DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            step_minutes: 10,
            region_spacing_miles: 60.0,
            site_spread_miles: 35.0,
            capacity_range: [20, 120],
            base_range: [0.35, 0.6],
            amplitude_range: [0.2, 0.35],
            peak_hour_range: [20.0, 28.0],
            peak_jitter_hours: 0.5,
            weekend_factor: 0.8,
            noise_level: 0.03,
            regional_noise_level: 0.05,
            noise_persistence: 0.95,
            coupling: 0.5,
            over_capacity_max: 1.1,
            dropout_prob: 0.01,
            fast_site_fraction: 0.2,
            forced_full: Vec::new(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic: {m}")));
        if self.n_sites == 0 || self.n_regions == 0 || self.n_regions > self.n_sites {
            return bad("need 1 <= n_regions <= n_sites");
        }
        if self.days == 0 || self.step_minutes <= 0 || (24 * 60) % self.step_minutes != 0 {
            return bad("days must be positive and step_minutes must divide a day");
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad("coupling must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.noise_persistence) {
            return bad("noise_persistence must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) || !(0.0..=1.0).contains(&self.fast_site_fraction) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.capacity_range[0] < 1 || self.capacity_range[0] > self.capacity_range[1] {
            return bad("capacity_range must be ordered and at least 1");
        }
        if self.over_capacity_max < 1.0 {
            return bad("over_capacity_max must be at least 1");
        }
        let floats = [
            self.region_spacing_miles,
            self.site_spread_miles,
            self.base_range[0],
            self.base_range[1],
            self.amplitude_range[0],
            self.amplitude_range[1],
            self.peak_hour_range[0],
            self.peak_hour_range[1],
            self.peak_jitter_hours,
            self.weekend_factor,
            self.noise_level,
            self.regional_noise_level,
        ];
        if floats.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("ranges and levels must be finite and non-negative");
        }
        if self.base_range[0] > self.base_range[1]
            || self.amplitude_range[0] > self.amplitude_range[1]
            || self.peak_hour_range[0] > self.peak_hour_range[1]
        {
            return bad("ranges must be ordered");
        }
        if let Some(&i) = self.forced_full.iter().find(|&&i| i >= self.n_sites) {
            return bad(&format!("forced_full index {i} out of range"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.days * 24 * 60 / self.step_minutes as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub sites: Vec<SiteMeta>,
    pub records: Vec<SiteRecord>,
    /// Simulated occupancy, `[site][step]`, before quantization.
    pub occupancy: Vec<Vec<f64>>,
}

fn range(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn region_label(r: usize, n_regions: usize) -> String {
    if n_regions <= STATE_CODES.len() {
        STATE_CODES[r].to_owned()
    } else {
        format!("R{r:02}")
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, r_count) = (cfg.n_sites, cfg.n_regions);

    // Region centres on a square grid around (42N, 90W).
    let cols = (r_count as f64).sqrt().ceil() as usize;
    let deg_lat = |miles: f64| (miles / EARTH_RADIUS_MILES).to_degrees();
    let centres: Vec<(f64, f64)> = (0..r_count)
        .map(|r| {
            let (row, col) = ((r / cols) as f64, (r % cols) as f64);
            let lat = 42.0 + deg_lat(row * cfg.region_spacing_miles);
            let lon = -90.0 + deg_lat(col * cfg.region_spacing_miles) / 42f64.to_radians().cos();
            (lat, lon)
        })
        .collect();
    let region_peak: Vec<f64> = (0..r_count).map(|_| range(&mut rng, cfg.peak_hour_range)).collect();

    let mut sites = Vec::with_capacity(n);
    let mut region_of = Vec::with_capacity(n);
    let mut base = Vec::with_capacity(n);
    let mut amplitude = Vec::with_capacity(n);
    let mut peak = Vec::with_capacity(n);
    let mut counters = vec![0usize; r_count];
    for i in 0..n {
        let r = i % r_count;
        counters[r] += 1;
        let (clat, clon) = centres[r];
        let radius = cfg.site_spread_miles * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let lat = clat + deg_lat(radius * angle.sin());
        let lon = clon + deg_lat(radius * angle.cos()) / clat.to_radians().cos();
        let label = region_label(r, r_count);
        sites.push(SiteMeta {
            site_id: format!("{label}{:03}", counters[r]),
            region: label,
            latitude: (lat * 1e6).round() / 1e6,
            longitude: (lon * 1e6).round() / 1e6,
            travel_time: (rng.random_range(2.0..45.0_f64) * 10.0).round() / 10.0,
            owner: u8::from(rng.random_bool(0.6)),
            amenity_count: rng.random_range(0..=8),
            capacity: rng.random_range(cfg.capacity_range[0]..=cfg.capacity_range[1]),
        });
        region_of.push(r);
        base.push(range(&mut rng, cfg.base_range));
        amplitude.push(range(&mut rng, cfg.amplitude_range));
        peak.push(region_peak[r] + cfg.peak_jitter_hours * (2.0 * rng.random::<f64>() - 1.0));
    }
    let members: Vec<Vec<usize>> = (0..r_count)
        .map(|r| (0..n).filter(|&i| region_of[i] == r).collect())
        .collect();

    let steps = cfg.steps();
    let phi = cfg.noise_persistence;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut site_noise = vec![0.0; n];
    let mut region_noise = vec![0.0; r_count];
    let mut occupancy = vec![Vec::with_capacity(steps); n];
    let mut demand = vec![0.0; n];
    for t in 0..steps {
        let time = cfg.start + Duration::minutes(t as i64 * cfg.step_minutes);
        let hour = f64::from(time.hour()) + f64::from(time.minute()) / 60.0;
        let weekend = time.weekday().num_days_from_monday() >= 5;
        for rn in &mut region_noise {
            *rn = phi * *rn + innovation * cfg.regional_noise_level * normal(&mut rng);
        }
        for i in 0..n {
            site_noise[i] = phi * site_noise[i] + innovation * cfg.noise_level * normal(&mut rng);
            let level = if weekend { base[i] * cfg.weekend_factor } else { base[i] };
            let diurnal = amplitude[i] * (std::f64::consts::TAU * (hour - peak[i]) / 24.0).cos();
            demand[i] = level + diurnal + site_noise[i] + region_noise[region_of[i]];
        }
        for &i in &cfg.forced_full {
            demand[i] = demand[i].max(1.0 + cfg.over_capacity_max);
        }
        let mut spill = vec![0.0; n];
        if cfg.coupling > 0.0 {
            for group in &members {
                if group.len() < 2 {
                    continue;
                }
                for &i in group {
                    let excess = (demand[i] - 1.0).max(0.0);
                    if excess > 0.0 {
                        let share = cfg.coupling * excess / (group.len() - 1) as f64;
                        for &j in group.iter().filter(|&&j| j != i) {
                            spill[j] += share;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            occupancy[i].push((demand[i] + spill[i]).clamp(0.0, cfg.over_capacity_max));
        }
    }

    let mut records = Vec::new();
    let half = Duration::minutes(cfg.step_minutes / 2);
    for (i, site) in sites.iter().enumerate() {
        let fast = rng.random_bool(cfg.fast_site_fraction);
        let capacity = f64::from(site.capacity);
        let available = |occ: f64| (capacity * (1.0 - occ)).round() as i64;
        for (t, &occ) in occupancy[i].iter().enumerate() {
            let time = cfg.start + Duration::minutes(t as i64 * cfg.step_minutes);
            // first and last observations are always kept so the grid spans
            // the full range
            let keep = t == 0 || t + 1 == steps || !rng.random_bool(cfg.dropout_prob);
            if keep {
                records.push(SiteRecord {
                    site_id: site.site_id.clone(),
                    timestamp: time,
                    available: available(occ),
                });
            }
            if fast && t + 1 < steps && half > Duration::zero() {
                let mid = (occ + occupancy[i][t + 1]) / 2.0;
                records.push(SiteRecord {
                    site_id: site.site_id.clone(),
                    timestamp: time + half,
                    available: available(mid),
                });
            }
        }
    }
    Ok(SyntheticDataset {
        sites,
        records,
        occupancy,
    })
}
