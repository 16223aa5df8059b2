//! Bird's-eye-view (BEV) processing for urban-scale point clouds.
//!
//! The crate turns large colored, labeled point clouds into dense 2D raster
//! windows (RGB, altitude, label, validity mask), fills the gaps in those
//! sparse rasters, maps 2D label predictions back onto the 3D points and
//! measures how much information the top-down projection throws away.
//!
//! Pipeline stages, in order:
//!
//! - [`io`]: native binary point format, streaming reader, label files.
//! - [`synth`]: deterministic synthetic urban scenes for tests and demos.
//! - [`projection`]: grid cells, sliding windows, top-z rasterization.
//! - [`bundle`]: PNG/JSON export of projected windows and the manifest.
//! - [`completion`]: fill-only neighborhood completion of sparse rasters.
//! - [`remap`]: BEV predictions back to per-point labels.
//! - [`analysis`]: spatial/class overlap statistics and the oracle bound.
//! - [`metrics`]: confusion matrices, OA/mAcc/mIoU, class weights.
//! - [`config`]: the flat `key = value` pipeline configuration file.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled and fall back to plain iterators otherwise. Results never depend
//! on the schedule.

pub mod analysis;
pub mod bundle;
pub mod classes;
pub mod completion;
pub mod config;
mod error;
pub mod io;
pub mod metrics;
pub mod par;
pub mod projection;
pub mod remap;
pub mod synth;

pub use classes::{CLASS_NAMES, NUM_CLASSES, UNLABELED};
pub use error::{Error, Result};
pub use io::Point;
pub use projection::{ProjectionConfig, RasterSet, WindowMeta};
