//! Benchmarking forecasters on annual global mean temperature anomalies.
//!
//! The pipeline runs from [`ingest`] (parsing, descriptive statistics,
//! outliers) through [`transform`] and the model families in [`forecast`]
//! and [`lagreg`], to tuning and scoring in [`evalx`] and the experiment
//! grid in [`runner`].

pub mod error;
pub mod evalx;
pub mod forecast;
pub mod ingest;
pub mod lagreg;
pub mod linalg;
pub mod models;
pub mod plot;
pub mod report;
pub mod runner;
pub mod stats;
pub mod stattests;
pub mod transform;

pub use error::{Error, Result};

/// GISTEMP v4 global land-ocean annual means (J-D column), 1880-2020.
pub const PINNED_GISTEMP: &str = include_str!("../data/gistemp_v4_glb_annual_1880_2020.csv");
