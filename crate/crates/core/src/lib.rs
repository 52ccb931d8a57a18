//! Synthetic-aperture and plane-wave ultrasound beamforming with
//! specular/diffuse reflection analysis.
//!
//! The pipeline is: an [`AcquisitionSpec`] and a [`Scene`] produce an
//! [`RfDataset`] (via [`scene::synth_rf`] or [`io::read_rf`]); a
//! [`Beamformer`] turns it into a compounded [`RawImage`]; [`compounding`]
//! detects the envelope and log-compresses; [`analysis`] characterizes
//! individual pixels.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod analysis;
pub mod beamform;
pub mod compounding;
pub mod dsp;
pub mod error;
pub mod io;
pub mod rf;
pub mod scene;

pub use acquisition::{
    AcquisitionSpec, ArrayGeometry, DelayTable, MediumSpec, Pixel, PixelGrid, PulseSpec,
    TransmitScheme,
};
pub use analysis::{ContourSet, DvConfig, DvReport, PixelChannelTxMap};
pub use beamform::{Beamformer, RawImage};
pub use compounding::{BeamformedImage, BeamsumProfile};
pub use error::{Error, Result};
pub use rf::RfDataset;
pub use scene::Scene;
