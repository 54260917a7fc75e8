//! Long-term surface water mapping from multispectral reflectance archives.
//!
//! The crate turns a date-ordered archive of six-band reflectance scenes plus a
//! DEM into per-scene water maps that are robust to cloud, ice/snow and terrain
//! shadow, refines water boundaries by two-endmember spectral unmixing, fills
//! cloud/ice gaps along the time axis, and derives reservoir analytics: water
//! area, coverage rate, landscape division index and accuracy metrics.
//!
//! Modules follow the processing order:
//!
//! * [`raster`] — grids, masks, scenes and class maps
//! * [`classify`] — TC4 cloud test, water index, shadow and ice/snow filters
//! * [`unmix`] — mixed-pixel refinement along water/land boundaries
//! * [`timeseries`] — date stacks, temporal interpolation, coverage rate
//! * [`analytics`] — areas, patches, division index, validation metrics
//! * [`pipeline`] — the whole chain over an archive
//! * [`synth`] — deterministic synthetic scenes with ground truth
//! * [`io`] — raw raster + JSON sidecar files and CSV tables

pub mod analytics;
pub mod classify;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod timeseries;
pub mod unmix;

pub use config::{ClassifyConfig, PipelineConfig, UnmixConfig};
pub use error::{Error, Result};
pub use raster::{
    AreaRecord, BandRole, ClassLabel, ClassMap, ConfusionMatrix, Grid, Mask, ReflectanceScene,
    SensorKind, Spectrum,
};
