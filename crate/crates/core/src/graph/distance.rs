use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;

use super::SiteMeta;
use crate::error::{Error, Result};

/// Mean earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Source of pairwise site distances in miles.
pub trait DistanceProvider: Send + Sync {
    fn distance_miles(&self, a: &SiteMeta, b: &SiteMeta) -> Result<f64>;
}

pub fn haversine_miles(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin()
}

/// Great-circle distance; the offline default.
#[derive(Clone, Copy, Debug, Default)]
pub struct Haversine;

impl DistanceProvider for Haversine {
    fn distance_miles(&self, a: &SiteMeta, b: &SiteMeta) -> Result<f64> {
        Ok(haversine_miles(a.latitude, a.longitude, b.latitude, b.longitude))
    }
}

fn cache_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Memoizes another provider, optionally persisted as `site_a,site_b,miles`.
pub struct CachedProvider<P> {
    inner: P,
    path: Option<PathBuf>,
    cache: Mutex<BTreeMap<(String, String), f64>>,
}

#[derive(Deserialize)]
struct CacheRow {
    site_a: String,
    site_b: String,
    miles: f64,
}

impl<P: DistanceProvider> CachedProvider<P> {
    pub fn in_memory(inner: P) -> Self {
        CachedProvider {
            inner,
            path: None,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Loads an existing cache file (if any); misses are appended to it.
    pub fn with_file(inner: P, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut cache = BTreeMap::new();
        if path.exists() {
            let mut reader = csv::Reader::from_path(&path)?;
            for row in reader.deserialize::<CacheRow>() {
                let row = row?;
                cache.insert(cache_key(&row.site_a, &row.site_b), row.miles);
            }
        }
        Ok(CachedProvider {
            inner,
            path: Some(path),
            cache: Mutex::new(cache),
        })
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: DistanceProvider> DistanceProvider for CachedProvider<P> {
    fn distance_miles(&self, a: &SiteMeta, b: &SiteMeta) -> Result<f64> {
        let key = cache_key(&a.site_id, &b.site_id);
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(&miles) = cache.get(&key) {
            return Ok(miles);
        }
        let miles = self.inner.distance_miles(a, b)?;
        if let Some(path) = &self.path {
            let fresh = !path.exists();
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let mut line = String::new();
            if fresh {
                line.push_str("site_a,site_b,miles\n");
            }
            line.push_str(&format!("{},{},{}\n", key.0, key.1, miles));
            file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        cache.insert(key, miles);
        Ok(miles)
    }
}

/// Driving distances from an HTTP routing service.
///
/// Request: `GET {base_url}?from_lat=..&from_lon=..&to_lat=..&to_lon=..`.
/// Response: JSON object `{"miles": <number>}`.
#[derive(Clone, Debug)]
pub struct RoutingProvider {
    base_url: String,
}

#[derive(Deserialize)]
struct RoutingResponse {
    miles: f64,
}

impl RoutingProvider {
    pub fn new(base_url: impl Into<String>) -> Self {
        RoutingProvider {
            base_url: base_url.into(),
        }
    }
}

impl DistanceProvider for RoutingProvider {
    fn distance_miles(&self, a: &SiteMeta, b: &SiteMeta) -> Result<f64> {
        let fail = |reason: String| Error::Provider {
            a: a.site_id.clone(),
            b: b.site_id.clone(),
            reason,
        };
        let response: RoutingResponse = ureq::get(&self.base_url)
            .query("from_lat", a.latitude.to_string())
            .query("from_lon", a.longitude.to_string())
            .query("to_lat", b.latitude.to_string())
            .query("to_lon", b.longitude.to_string())
            .call()
            .map_err(|e| fail(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| fail(e.to_string()))?;
        if !response.miles.is_finite() || response.miles < 0.0 {
            return Err(fail(format!("invalid distance {}", response.miles)));
        }
        Ok(response.miles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn site(id: &str, lat: f64, lon: f64) -> SiteMeta {
        SiteMeta {
            site_id: id.into(),
            region: "WI".into(),
            latitude: lat,
            longitude: lon,
            travel_time: 5.0,
            owner: 1,
            amenity_count: 2,
            capacity: 40,
        }
    }

    /// Spherical law of cosines, independent of the haversine formula.
    fn cosine_law_miles(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dl = (lon2 - lon1).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_MILES * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn identical_points_are_zero() {
        assert_eq!(haversine_miles(43.0, -89.0, 43.0, -89.0), 0.0);
    }

    #[test]
    fn antipodal_points() {
        let d = haversine_miles(10.0, 20.0, -10.0, -160.0);
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_MILES).abs() < 1e-3);
        assert!((d - 12436.0).abs() < 1.5);
    }

    #[test]
    fn madison_to_chicago_matches_independent_formula() {
        let d = haversine_miles(43.0731, -89.4012, 41.8781, -87.6298);
        let oracle = cosine_law_miles(43.0731, -89.4012, 41.8781, -87.6298);
        assert!((d - oracle).abs() < 0.1, "{d} vs {oracle}");
        assert!((d - 122.2).abs() < 1.0, "{d}");
    }

    struct Counting(AtomicUsize);

    impl DistanceProvider for Counting {
        fn distance_miles(&self, a: &SiteMeta, b: &SiteMeta) -> Result<f64> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Haversine.distance_miles(a, b)
        }
    }

    #[test]
    fn cache_persists_and_is_symmetric() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.csv");
        let (a, b) = (site("A", 43.0, -89.0), site("B", 43.2, -89.1));
        let provider = CachedProvider::with_file(Counting(AtomicUsize::new(0)), &path).unwrap();
        let d1 = provider.distance_miles(&a, &b).unwrap();
        let d2 = provider.distance_miles(&b, &a).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(provider.inner.0.load(Ordering::SeqCst), 1);

        let reloaded = CachedProvider::with_file(Counting(AtomicUsize::new(0)), &path).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded.distance_miles(&a, &b).unwrap(), d1);
        assert_eq!(reloaded.inner.0.load(Ordering::SeqCst), 0);
    }

    fn serve_once(body: &'static str, status: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/route", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let response = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
            request_line
        });
        (url, handle)
    }

    #[test]
    fn routing_client_round_trip() {
        let (url, handle) = serve_once(r#"{"miles": 27.5}"#, "200 OK");
        let provider = RoutingProvider::new(url);
        let d = provider
            .distance_miles(&site("A", 43.0, -89.0), &site("B", 43.2, -89.1))
            .unwrap();
        assert_eq!(d, 27.5);
        let request = handle.join().unwrap();
        assert!(request.starts_with("GET /route?"));
        assert!(request.contains("from_lat=43"));
        assert!(request.contains("to_lon=-89.1"));
    }

    #[test]
    fn routing_failure_names_the_pair() {
        let (url, handle) = serve_once(r#"{"error": "nope"}"#, "500 Internal Server Error");
        let provider = RoutingProvider::new(url);
        let err = provider
            .distance_miles(&site("A", 43.0, -89.0), &site("B", 43.2, -89.1))
            .unwrap_err();
        handle.join().unwrap();
        assert!(matches!(err, Error::Provider { ref a, ref b, .. } if a == "A" && b == "B"));
    }
}
