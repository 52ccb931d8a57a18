//! Reflection characterization: per-pixel channel × transmission contour maps
//! and sub-aperture Directivity Variance.

pub mod contour;
pub mod dv;

pub use contour::{
    extract_contours, marching_squares, pixel_channel_tx_map, Contour, ContourSet, Levels,
    PixelChannelTxMap,
};
pub use dv::{
    circular_mean, directivity_variance, dv_analyze, dv_at, dv_overlay, percentile,
    sa_receive_angle, vectorize_intensity, DvConfig, DvReport, DvVector, Roi,
};
