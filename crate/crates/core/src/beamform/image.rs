use std::borrow::Cow;

use rayon::prelude::*;

use super::fdmas::{fdmas_line_upsampled, fdmas_per_tx, resample_line, upsample_rf};
use super::specular::{matched_filter_rf, sb_pixel};
use super::{apodization_or_nearest, das_unchecked, delay_compensate_into, mvdr, Beamformer};
use crate::acquisition::{DelayTable, Pixel, PixelGrid, DEFAULT_TABLE_CAP};
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Channel data pre-processed for a particular beamformer: upsampled for
/// F-DMAS, pulse-correlated for SB, untouched otherwise.
#[derive(Debug, Clone)]
pub struct PreparedRf<'a> {
    data: Cow<'a, RfDataset>,
    beamformer: Beamformer,
}

impl<'a> PreparedRf<'a> {
    pub fn new(rf: &'a RfDataset, beamformer: &Beamformer) -> Result<Self> {
        let f0 = rf.acquisition().pulse.center_frequency;
        let data = match beamformer {
            Beamformer::Das { f_number, .. } => {
                if !(*f_number > 0.0) {
                    return Err(Error::invalid("f_number", "must be positive"));
                }
                Cow::Borrowed(rf)
            }
            Beamformer::Mvdr(cfg) => {
                cfg.resolve(rf.n_ch())?;
                Cow::Borrowed(rf)
            }
            Beamformer::Fdmas(cfg) => {
                cfg.validate(f0, rf.fs())?;
                Cow::Owned(upsample_rf(rf, cfg.upsample_factor)?)
            }
            Beamformer::Sb(cfg) => {
                cfg.validate()?;
                if cfg.matched_filter {
                    Cow::Owned(matched_filter_rf(rf)?)
                } else {
                    Cow::Borrowed(rf)
                }
            }
        };
        Ok(Self {
            data,
            beamformer: beamformer.clone(),
        })
    }

    pub fn data(&self) -> &RfDataset {
        &self.data
    }

    pub fn beamformer(&self) -> &Beamformer {
        &self.beamformer
    }

    /// Beamformed value of each transmission at `pixel` before compounding.
    ///
    /// F-DMAS values are pre-filter; SB values are taken at the best tilt.
    pub fn pixel_values(
        &self,
        pixel: Pixel,
        tx_delays: &[f64],
        rx_delays: &[f64],
    ) -> Result<Vec<f64>> {
        let rf = self.data();
        let n_tx = rf.n_tx();
        let mut snapshot = vec![0.0; rf.n_ch()];
        match &self.beamformer {
            Beamformer::Das { f_number, window } => {
                let apod =
                    apodization_or_nearest(pixel, &rf.acquisition().geometry, *f_number, *window)?;
                Ok((0..n_tx)
                    .map(|j| {
                        delay_compensate_into(rf, j, tx_delays[j], rx_delays, &mut snapshot);
                        das_unchecked(&snapshot, &apod.weights)
                    })
                    .collect())
            }
            Beamformer::Mvdr(cfg) => (0..n_tx)
                .map(|j| {
                    delay_compensate_into(rf, j, tx_delays[j], rx_delays, &mut snapshot);
                    match mvdr(&snapshot, cfg) {
                        Ok(out) => Ok(out.value),
                        Err(Error::SingularCovariance) => Ok(0.0),
                        Err(e) => Err(e),
                    }
                })
                .collect(),
            Beamformer::Fdmas(cfg) => {
                fdmas_per_tx(rf, cfg, pixel, tx_delays, rx_delays, &mut snapshot)
            }
            Beamformer::Sb(cfg) => Ok(sb_pixel(rf, pixel, cfg, tx_delays, rx_delays).per_tx),
        }
    }
}

/// Per-transmission beamformed values at one pixel of `rf`.
pub fn per_transmission_values(
    rf: &RfDataset,
    pixel: Pixel,
    beamformer: &Beamformer,
) -> Result<Vec<f64>> {
    let prepared = PreparedRf::new(rf, beamformer)?;
    let acq = rf.acquisition();
    let table = DelayTable::for_pixels(
        &[pixel],
        &acq.scheme,
        &acq.geometry,
        &acq.medium,
        DEFAULT_TABLE_CAP,
    )?;
    prepared.pixel_values(pixel, table.tx(0), table.rx(0))
}

/// Coherently compounded beamformer output over a grid (column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub grid: PixelGrid,
    pub values: Vec<f64>,
    /// Best tilt per pixel, SB only.
    pub tilts: Option<Vec<f64>>,
}

impl RawImage {
    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.values[self.grid.index(ix, iz)]
    }

    pub fn column(&self, ix: usize) -> &[f64] {
        let n = self.grid.n_z;
        &self.values[ix * n..(ix + 1) * n]
    }
}

fn sum_ascending(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in values {
        acc += v;
    }
    acc
}

/// Beamform and coherently compound every pixel of `grid`.
///
// Values of one image column and, for SB, the winning tilts.
type Column = (Vec<f64>, Option<Vec<f64>>);

/// Columns are processed in parallel. F-DMAS columns are evaluated on an
/// internal line at the upsampled rate, band-pass filtered, and resampled to
/// the grid depths.
pub fn beamform_raw(rf: &RfDataset, grid: &PixelGrid, beamformer: &Beamformer) -> Result<RawImage> {
    grid.validate()?;
    rf.acquisition().validate()?;
    let prepared = PreparedRf::new(rf, beamformer)?;
    let acq = prepared.data().acquisition().clone();

    let columns: Vec<Result<Column>> = (0..grid.n_x)
        .into_par_iter()
        .map(|ix| {
            let x = grid.x(ix);
            if let Beamformer::Fdmas(cfg) = beamformer {
                let depths: Vec<f64> = (0..grid.n_z).map(|iz| grid.z(iz)).collect();
                let line = fdmas_line_upsampled(prepared.data(), cfg, x, grid.z_min, grid.z_max)?;
                return Ok((resample_line(&line, &depths), None));
            }
            let pixels = grid.column(ix);
            let table = DelayTable::for_pixels(
                &pixels,
                &acq.scheme,
                &acq.geometry,
                &acq.medium,
                DEFAULT_TABLE_CAP,
            )?;
            let mut values = Vec::with_capacity(grid.n_z);
            let mut tilts = Vec::new();
            for (k, &p) in pixels.iter().enumerate() {
                if let Beamformer::Sb(cfg) = beamformer {
                    let out = sb_pixel(prepared.data(), p, cfg, table.tx(k), table.rx(k));
                    values.push(out.value);
                    tilts.push(out.tilt);
                } else {
                    let per_tx = prepared.pixel_values(p, table.tx(k), table.rx(k))?;
                    values.push(sum_ascending(&per_tx));
                }
            }
            let tilts = matches!(beamformer, Beamformer::Sb(_)).then_some(tilts);
            Ok((values, tilts))
        })
        .collect();

    let mut values = Vec::with_capacity(grid.len());
    let mut tilts = matches!(beamformer, Beamformer::Sb(_)).then(Vec::new);
    for col in columns {
        let (v, t) = col?;
        values.extend(v);
        if let (Some(all), Some(t)) = (tilts.as_mut(), t) {
            all.extend(t);
        }
    }
    Ok(RawImage {
        grid: *grid,
        values,
        tilts,
    })
}
