use rayon::prelude::*;

use super::{apodization_or_nearest, delay_compensate_into, WindowKind};
use crate::acquisition::{DelayTable, Pixel, DEFAULT_TABLE_CAP};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rf::RfDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdmasApodization {
    /// F-DMAS(NA): all channels enter the pairwise products unweighted.
    None,
    /// F-DMAS(A): channels are weighted by the receive apodization first.
    Receive { f_number: f64, window: WindowKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdmasConfig {
    pub upsample_factor: usize,
    /// Pass band in Hz; `None` selects `[1.5 f0, 2.5 f0]`.
    pub passband: Option<(f64, f64)>,
    pub taps: usize,
    pub apodization: FdmasApodization,
}

impl Default for FdmasConfig {
    fn default() -> Self {
        Self {
            upsample_factor: 2,
            passband: None,
            taps: 101,
            apodization: FdmasApodization::None,
        }
    }
}

impl FdmasConfig {
    pub fn apodized() -> Self {
        Self {
            apodization: FdmasApodization::Receive {
                f_number: 1.5,
                window: WindowKind::default(),
            },
            ..Self::default()
        }
    }

    pub fn passband_for(&self, f0: f64) -> (f64, f64) {
        self.passband.unwrap_or((1.5 * f0, 2.5 * f0))
    }

    pub fn validate(&self, f0: f64, fs: f64) -> Result<()> {
        if self.upsample_factor == 0 {
            return Err(Error::invalid("upsample_factor", "must be at least 1"));
        }
        let (lo, hi) = self.passband_for(f0);
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid("passband", "need 0 < f_lo < f_hi"));
        }
        if !(self.upsample_factor as f64 * fs > 2.0 * hi) {
            return Err(Error::invalid(
                "upsample_factor",
                format!("upsampled rate does not exceed twice the upper band edge {hi} Hz"),
            ));
        }
        Ok(())
    }
}

/// Pairwise multiply-and-sum of signed square roots, excluding self
/// products: `sum_{i<l} s'_i s'_l` with `s' = sign(s) sqrt|s|`.
///
/// Uses `((sum s')^2 - sum s'^2) / 2`, which equals the pair sum.
pub fn fdmas(snapshot: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for &s in snapshot {
        let r = signed_sqrt(s);
        sum += r;
        sq += r * r;
    }
    0.5 * (sum * sum - sq)
}

#[inline]
fn signed_sqrt(v: f64) -> f64 {
    v.signum() * v.abs().sqrt()
}

/// [`fdmas`] on channels pre-weighted by `weights`.
pub(crate) fn fdmas_weighted(snapshot: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => fdmas(snapshot),
        Some(w) => {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for (&s, &wi) in snapshot.iter().zip(w) {
                let r = signed_sqrt(s * wi);
                sum += r;
                sq += r * r;
            }
            0.5 * (sum * sum - sq)
        }
    }
}

/// Zero-phase band-pass of a beamline sampled at `fs` (Hz, in round-trip
/// time). Keeps the second-harmonic band of the DMAS output.
pub fn fdmas_filter(beamline: &[f64], fs: f64, f0: f64, cfg: &FdmasConfig) -> Vec<f64> {
    let (lo, hi) = cfg.passband_for(f0);
    let h = dsp::bandpass_fir(lo, hi, fs, cfg.taps);
    dsp::filtfilt(&h, beamline)
}

/// Band-limited upsampling of every trace.
pub(crate) fn upsample_rf(rf: &RfDataset, factor: usize) -> Result<RfDataset> {
    if factor <= 1 {
        return Ok(rf.clone());
    }
    let n_t = rf.n_t() * factor;
    let traces: Vec<Vec<f64>> = (0..rf.n_tx() * rf.n_ch())
        .into_par_iter()
        .map(|k| dsp::upsample(rf.trace(k / rf.n_ch(), k % rf.n_ch()), factor))
        .collect();
    let samples = traces.concat();
    rf.resampled(rf.fs() * factor as f64, rf.t0(), n_t, samples)
}

/// Compounded (pre-filter) DMAS value of each transmission at `pixel`.
pub(crate) fn fdmas_per_tx(
    rf_up: &RfDataset,
    cfg: &FdmasConfig,
    pixel: Pixel,
    tx_delays: &[f64],
    rx_delays: &[f64],
    snapshot: &mut [f64],
) -> Result<Vec<f64>> {
    let weights = match cfg.apodization {
        FdmasApodization::None => None,
        FdmasApodization::Receive { f_number, window } => Some(
            apodization_or_nearest(pixel, &rf_up.acquisition().geometry, f_number, window)?.weights,
        ),
    };
    Ok((0..rf_up.n_tx())
        .map(|j| {
            delay_compensate_into(rf_up, j, tx_delays[j], rx_delays, snapshot);
            fdmas_weighted(snapshot, weights.as_deref())
        })
        .collect())
}

/// A lateral beamline computed at the upsampled rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmasBeamline {
    pub depths: Vec<f64>,
    /// Compounded DMAS values before filtering.
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    /// Sampling rate of the line in round-trip time, Hz.
    pub sampling_rate: f64,
}

/// Filtered F-DMAS beamline at lateral position `x` over `[z_lo, z_hi]`,
/// sampled at `c / (2 fs_up)`. `rf_up` must already be upsampled.
pub(crate) fn fdmas_line_upsampled(
    rf_up: &RfDataset,
    cfg: &FdmasConfig,
    x: f64,
    z_lo: f64,
    z_hi: f64,
) -> Result<FdmasBeamline> {
    let acq = rf_up.acquisition();
    let c = acq.medium.speed_of_sound;
    let fs = rf_up.fs();
    let dz = c / (2.0 * fs);
    let margin = cfg.taps as f64 * dz;
    let start = (z_lo - margin).max(dz);
    let n = (((z_hi + margin - start) / dz).ceil() as usize).max(1) + 1;
    let depths: Vec<f64> = (0..n).map(|k| start + k as f64 * dz).collect();
    let pixels: Vec<Pixel> = depths.iter().map(|&z| Pixel::new(x, z)).collect();
    let table = DelayTable::for_pixels(
        &pixels,
        &acq.scheme,
        &acq.geometry,
        &acq.medium,
        DEFAULT_TABLE_CAP,
    )?;
    let mut snapshot = vec![0.0; rf_up.n_ch()];
    let mut raw = Vec::with_capacity(n);
    for (k, &p) in pixels.iter().enumerate() {
        let per_tx = fdmas_per_tx(rf_up, cfg, p, table.tx(k), table.rx(k), &mut snapshot)?;
        raw.push(per_tx.iter().sum());
    }
    let filtered = fdmas_filter(&raw, fs, acq.pulse.center_frequency, cfg);
    Ok(FdmasBeamline {
        depths,
        raw,
        filtered,
        sampling_rate: fs,
    })
}

/// Filtered F-DMAS beamline of `rf` at lateral position `x`; upsamples first.
pub fn fdmas_beamline(
    rf: &RfDataset,
    cfg: &FdmasConfig,
    x: f64,
    z_lo: f64,
    z_hi: f64,
) -> Result<FdmasBeamline> {
    let acq = rf.acquisition();
    cfg.validate(acq.pulse.center_frequency, rf.fs())?;
    let rf_up = upsample_rf(rf, cfg.upsample_factor)?;
    fdmas_line_upsampled(&rf_up, cfg, x, z_lo, z_hi)
}

/// Linear interpolation of the filtered line at `depths`.
pub(crate) fn resample_line(line: &FdmasBeamline, depths: &[f64]) -> Vec<f64> {
    let z0 = line.depths[0];
    let dz = if line.depths.len() > 1 {
        line.depths[1] - line.depths[0]
    } else {
        1.0
    };
    depths
        .iter()
        .map(|&z| super::sample_at(&line.filtered, (z - z0) / dz))
        .collect()
}
