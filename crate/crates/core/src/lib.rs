//! Regional spatio-temporal graph forecasting of truck-parking occupancy.
//!
//! The crate covers the whole pipeline: site graphs and their regional or
//! random decompositions ([`graph`]), occupancy ingestion, interpolation and
//! windowing plus a synthetic generator ([`data`]), a small reverse-mode
//! autodiff core ([`numerics`]), the forecasting architectures ([`models`]),
//! RMSProp training ([`training`]) and metrics ([`evaluation`]).

pub mod data;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod models;
pub mod numerics;
pub mod par;
pub mod training;

pub use error::{Error, Result};
