use rayon::prelude::*;

use super::delay_compensate_into;
use crate::acquisition::{element_angle, DelayTable, Pixel};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Specular beamforming settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SbConfig {
    /// Candidate reflector tilts, radians.
    pub tilt_grid: Vec<f64>,
    /// Width of the receive weighting around the mirror direction, radians.
    pub receive_sigma: f64,
    /// Correlate channel data with the transmit pulse before beamforming.
    pub matched_filter: bool,
}

impl Default for SbConfig {
    fn default() -> Self {
        Self {
            tilt_grid: (0..=120)
                .map(|k| (-30.0 + 0.5 * k as f64).to_radians())
                .collect(),
            receive_sigma: 3f64.to_radians(),
            matched_filter: true,
        }
    }
}

impl SbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tilt_grid.is_empty() {
            return Err(Error::invalid("tilt_grid", "must not be empty"));
        }
        if !(self.receive_sigma > 0.0) {
            return Err(Error::invalid("receive_sigma", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbOutput {
    /// Compounded value at the best tilt.
    pub value: f64,
    /// Tilt maximizing the compounded magnitude.
    pub tilt: f64,
    /// Per-transmission values at the best tilt.
    pub per_tx: Vec<f64>,
}

/// Channel data correlated with the transmit pulse.
pub(crate) fn matched_filter_rf(rf: &RfDataset) -> Result<RfDataset> {
    let template = rf.acquisition().pulse.sampled();
    let traces: Vec<Vec<f64>> = (0..rf.n_tx() * rf.n_ch())
        .into_par_iter()
        .map(|k| dsp::matched_filter(rf.trace(k / rf.n_ch(), k % rf.n_ch()), &template))
        .collect();
    RfDataset::from_samples(rf.acquisition().clone(), rf.t0(), rf.n_t(), traces.concat())
}

// Receive weights beyond this many sigmas are treated as zero.
const WEIGHT_SPAN: f64 = 5.0;

/// Snell-indexed beamforming at one pixel of already filtered data.
///
/// For each candidate tilt `a_g` and transmission `j`, the mirror law gives
/// the expected receive angle `a_r = a_inc(j) - 2 a_g`; channels are
/// weighted by a Gaussian in `theta_i - a_r` and summed, then compounded
/// over `j`. The tilt with the largest compounded magnitude wins.
pub fn sb_pixel(
    rf: &RfDataset,
    pixel: Pixel,
    cfg: &SbConfig,
    tx_delays: &[f64],
    rx_delays: &[f64],
) -> SbOutput {
    let acq = rf.acquisition();
    let geometry = &acq.geometry;
    let n_ch = rf.n_ch();
    let n_tx = rf.n_tx();

    let mut snap = vec![0.0; n_tx * n_ch];
    for (j, row) in snap.chunks_mut(n_ch).enumerate() {
        delay_compensate_into(rf, j, tx_delays[j], rx_delays, row);
    }
    // Decreasing in i because element x increases.
    let theta: Vec<f64> = geometry
        .element_x()
        .iter()
        .map(|&x| element_angle(pixel, x))
        .collect();
    let incidence: Vec<f64> = (0..n_tx)
        .map(|j| acq.scheme.incidence_angle(j, pixel, geometry))
        .collect();
    let inv2s2 = 1.0 / (2.0 * cfg.receive_sigma * cfg.receive_sigma);
    let span = WEIGHT_SPAN * cfg.receive_sigma;

    let per_tx_at = |tilt: f64, out: &mut [f64]| {
        for j in 0..n_tx {
            let reflected = incidence[j] - 2.0 * tilt;
            let lo = theta.partition_point(|&t| t > reflected + span);
            let hi = theta.partition_point(|&t| t >= reflected - span);
            let row = &snap[j * n_ch..(j + 1) * n_ch];
            let mut acc = 0.0;
            for i in lo..hi {
                let d = theta[i] - reflected;
                acc += (-(d * d) * inv2s2).exp() * row[i];
            }
            out[j] = acc;
        }
    };

    let mut per_tx = vec![0.0; n_tx];
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &tilt in &cfg.tilt_grid {
        per_tx_at(tilt, &mut per_tx);
        let total: f64 = per_tx.iter().sum();
        if total.abs() > best.0 {
            best = (total.abs(), total, tilt);
        }
    }
    per_tx_at(best.2, &mut per_tx);
    SbOutput {
        value: best.1,
        tilt: best.2,
        per_tx,
    }
}

/// Specular beamforming of `rf` at entry `pixel` of `delays`.
pub fn sb(
    rf: &RfDataset,
    pixel: Pixel,
    index: usize,
    cfg: &SbConfig,
    delays: &DelayTable,
) -> Result<SbOutput> {
    cfg.validate()?;
    let filtered;
    let data = if cfg.matched_filter {
        filtered = matched_filter_rf(rf)?;
        &filtered
    } else {
        rf
    };
    Ok(sb_pixel(
        data,
        pixel,
        cfg,
        delays.tx(index),
        delays.rx(index),
    ))
}
