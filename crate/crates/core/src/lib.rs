//! Residential vs non-residential building classification from a DEM raster
//! and building footprint polygons.
//!
//! The crate covers the whole pipeline:
//!
//! - [`geodata_io`]: ESRI ASCII Grid DEMs, GeoJSON footprints, classified GeoJSON output.
//! - [`geometry`]: shoelace areas, node counts, even-odd point-in-polygon, zonal statistics.
//! - [`features`]: the per-building attribute table, Pearson correlation, correlated-feature
//!   pruning, one-hot/z-score encoding and stratified splits.
//! - [`neuralnet`]: a dense LeakyReLU/ReLU/sigmoid network with hand-written backpropagation,
//!   binary cross-entropy and the AMSGrad flavour of Adam.
//! - [`trainer`]: mini-batch training with validation-F1 early stopping and classification reports.
//! - [`synth`]: a seeded synthetic dataset with a planted decision rule, plus rasterized scenes.
//! - [`cli`]: the `bldgclass` command line front end (`extract`, `analyze`, `train`, `predict`,
//!   `evaluate`, `synth`).
//!
//! See the `examples/` directory of this crate for one runnable program per capability.

pub mod cli;
pub mod features;
pub mod geodata_io;
pub mod geometry;
pub mod neuralnet;
pub mod synth;
pub mod trainer;

pub use features::{AttributeRow, AttributeTable, EncodingSpec, FeatureMatrix, SplitIndices};
pub use geodata_io::{BuildingClass, DemGrid, FootprintRecord};
pub use geometry::{Coord, Geometry, Polygon, ZonalStats};
pub use neuralnet::{Mlp, OptimizerState};
pub use trainer::{ClassificationReport, TrainConfig, TrainHistory};
