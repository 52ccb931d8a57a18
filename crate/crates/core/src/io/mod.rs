//! File formats: run configuration, RF tensors, images and tables.

pub mod config;
pub mod output;
pub mod rf_file;

pub use config::{
    AcquisitionConfig, BeamformerConfig, GridConfig, ResolvedRun, RoiConfig, RunConfig, SceneFile,
    SceneRef, SchemeConfig,
};
pub use output::{beamsum_csv, contour_csv, dv_csv, encode_pgm, raw_grid_csv, write_file};
pub use rf_file::{decode_rf, encode_rf, read_rf, write_rf, RfHeader};
