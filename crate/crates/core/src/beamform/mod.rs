//! Receive beamforming: delay compensation, F-number apodization, DAS, and
//! the adaptive/nonlinear beamformers in the submodules.

mod fdmas;
mod image;
mod mvdr;
mod specular;

pub use fdmas::{
    fdmas, fdmas_beamline, fdmas_filter, FdmasApodization, FdmasBeamline, FdmasConfig,
};
pub use image::{beamform_raw, per_transmission_values, PreparedRf, RawImage};
pub use mvdr::{mvdr, mvdr_weights, solve_mvdr_weights, MvdrConfig, MvdrOutput};
pub use specular::{sb, sb_pixel, SbConfig, SbOutput};

use crate::acquisition::{ArrayGeometry, DelayTable, Pixel};
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Delay-compensated samples of every channel for one pixel and one
/// transmission. Channels whose delay falls outside the record hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot(pub Vec<f64>);

impl ChannelSnapshot {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Linear interpolation of `trace` at the fractional index `pos`; 0 outside
/// `[0, len - 1]`.
#[inline]
pub fn sample_at(trace: &[f64], pos: f64) -> f64 {
    let last = trace.len() as f64 - 1.0;
    if !(pos >= 0.0 && pos <= last) {
        return 0.0;
    }
    let k = pos.floor();
    let frac = pos - k;
    let k = k as usize;
    if frac == 0.0 {
        return trace[k];
    }
    (1.0 - frac) * trace[k] + frac * trace[k + 1]
}

/// Fill `out[i]` with channel `i` of transmission `tx` sampled at
/// `tx_delay + rx_delays[i]`.
#[inline]
pub fn delay_compensate_into(
    rf: &RfDataset,
    tx: usize,
    tx_delay: f64,
    rx_delays: &[f64],
    out: &mut [f64],
) {
    let fs = rf.fs();
    let t0 = rf.t0();
    for (i, (o, &rx)) in out.iter_mut().zip(rx_delays).enumerate() {
        *o = sample_at(rf.trace(tx, i), (tx_delay + rx - t0) * fs);
    }
}

/// Snapshot for entry `pixel` of `delays` under transmission `tx`.
pub fn delay_compensate(
    rf: &RfDataset,
    pixel: usize,
    tx: usize,
    delays: &DelayTable,
) -> ChannelSnapshot {
    let mut out = vec![0.0; rf.n_ch()];
    delay_compensate_into(rf, tx, delays.tx(pixel)[tx], delays.rx(pixel), &mut out);
    ChannelSnapshot(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    Rectangular,
    /// Tukey window; `taper` is the tapered fraction in `[0, 1]`.
    Tukey {
        taper: f64,
    },
}

impl Default for WindowKind {
    fn default() -> Self {
        WindowKind::Tukey { taper: 0.5 }
    }
}

impl WindowKind {
    /// Window value at normalized distance `r = |u|` from the aperture center.
    fn eval(&self, r: f64) -> f64 {
        match *self {
            WindowKind::Rectangular => 1.0,
            WindowKind::Tukey { taper } => {
                let flat = 1.0 - taper;
                if r <= flat || taper <= 0.0 {
                    1.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * (r - flat) / taper).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApodizationProfile {
    pub weights: Vec<f64>,
    pub f_number: f64,
    pub window: WindowKind,
}

impl ApodizationProfile {
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
            f_number: 0.0,
            window: WindowKind::Rectangular,
        }
    }

    pub fn active_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

// Absorbs rounding in element positions at the aperture boundary.
const APERTURE_EPS: f64 = 1e-12;

/// Receive apodization for `pixel`: elements within `z_p / (2 F#)` of the
/// pixel get the window value at their normalized offset, others 0. Weights
/// are scaled so the largest is 1.
pub fn apodization_weights(
    pixel: Pixel,
    geometry: &ArrayGeometry,
    f_number: f64,
    window: WindowKind,
) -> Result<ApodizationProfile> {
    if !(f_number > 0.0) {
        return Err(Error::invalid("f_number", "must be positive"));
    }
    let half = pixel.z / (2.0 * f_number);
    let mut weights: Vec<f64> = geometry
        .element_x()
        .iter()
        .map(|&xi| {
            let d = (xi - pixel.x).abs();
            if d > half + APERTURE_EPS {
                0.0
            } else {
                window.eval((d / half).min(1.0))
            }
        })
        .collect();
    let active = geometry
        .element_x()
        .iter()
        .any(|&xi| (xi - pixel.x).abs() <= half + APERTURE_EPS);
    if !active {
        return Err(Error::DegenerateAperture {
            depth: pixel.z,
            f_number,
        });
    }
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        weights.iter_mut().for_each(|w| *w /= max);
    } else {
        // Only boundary elements active under a full taper: keep the nearest.
        let nearest = nearest_element(pixel, geometry);
        weights[nearest] = 1.0;
    }
    Ok(ApodizationProfile {
        weights,
        f_number,
        window,
    })
}

fn nearest_element(pixel: Pixel, geometry: &ArrayGeometry) -> usize {
    geometry
        .element_x()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - pixel.x).abs().total_cmp(&(b.1 - pixel.x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// [`apodization_weights`], falling back to the nearest element with
/// weight 1 when the aperture is empty.
pub fn apodization_or_nearest(
    pixel: Pixel,
    geometry: &ArrayGeometry,
    f_number: f64,
    window: WindowKind,
) -> Result<ApodizationProfile> {
    match apodization_weights(pixel, geometry, f_number, window) {
        Err(Error::DegenerateAperture { .. }) => {
            let mut weights = vec![0.0; geometry.num_elements()];
            weights[nearest_element(pixel, geometry)] = 1.0;
            Ok(ApodizationProfile {
                weights,
                f_number,
                window,
            })
        }
        other => other,
    }
}

/// Delay-and-sum: `sum_i W_i s_i`, accumulated in ascending element order.
pub fn das(snapshot: &[f64], weights: &[f64]) -> Result<f64> {
    if snapshot.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            actual: snapshot.len(),
        });
    }
    Ok(das_unchecked(snapshot, weights))
}

#[inline]
pub(crate) fn das_unchecked(snapshot: &[f64], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (s, w) in snapshot.iter().zip(weights) {
        acc += w * s;
    }
    acc
}

/// Receive beamformer selection with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Beamformer {
    Das { f_number: f64, window: WindowKind },
    Fdmas(FdmasConfig),
    Mvdr(MvdrConfig),
    Sb(SbConfig),
}

impl Beamformer {
    /// DAS with F# 1.5 and a Tukey(0.5) window.
    pub fn das_default() -> Self {
        Beamformer::Das {
            f_number: 1.5,
            window: WindowKind::default(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Beamformer::Das { .. } => "das",
            Beamformer::Fdmas(cfg) => match cfg.apodization {
                FdmasApodization::None => "fdmas-na",
                FdmasApodization::Receive { .. } => "fdmas-a",
            },
            Beamformer::Mvdr(_) => "mvdr",
            Beamformer::Sb(_) => "sb",
        }
    }

    /// Display dynamic range used when none is configured: 40 dB for SB,
    /// 70 dB otherwise.
    pub fn default_dynamic_range(&self) -> f64 {
        match self {
            Beamformer::Sb(_) => 40.0,
            _ => 70.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{AcquisitionSpec, MediumSpec, PulseSpec, TransmitScheme};

    fn tiny_rf(trace: Vec<f64>) -> RfDataset {
        let geometry = ArrayGeometry::linear(1, 0.3e-3).unwrap();
        let acq = AcquisitionSpec {
            scheme: TransmitScheme::sta_full(&geometry),
            geometry,
            pulse: PulseSpec::new(1.0, 8.0, 2.0).unwrap(),
            medium: MediumSpec::new(1540.0).unwrap(),
        };
        let n = trace.len();
        RfDataset::from_samples(acq, 0.0, n, trace).unwrap()
    }

    #[test]
    fn interpolation_identity_and_midpoint() {
        let rf = tiny_rf(vec![0.1, 0.7, -0.3, 0.9]);
        let mut out = [0.0];
        delay_compensate_into(&rf, 0, 0.0, &[2.0 / 8.0], &mut out);
        assert_eq!(out[0], -0.3);
        delay_compensate_into(&rf, 0, 0.5 / 8.0, &[1.0 / 8.0], &mut out);
        assert_eq!(out[0], (0.7 + -0.3) / 2.0);
        delay_compensate_into(&rf, 0, 0.0, &[3.0 / 8.0], &mut out);
        assert_eq!(out[0], 0.9);
        delay_compensate_into(&rf, 0, 0.0, &[3.5 / 8.0], &mut out);
        assert_eq!(out[0], 0.0);
        delay_compensate_into(&rf, 0, -1.0 / 8.0, &[0.0], &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn rectangular_deep_pixel_uses_everything() {
        let g = ArrayGeometry::linear(128, 0.3e-3).unwrap();
        let apod =
            apodization_weights(Pixel::new(0.0, 0.2), &g, 1.5, WindowKind::Rectangular).unwrap();
        assert!(apod.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn aperture_rule_at_nine_mm() {
        let g = ArrayGeometry::linear(128, 0.3e-3).unwrap();
        let xe = g.element_x()[64];
        let apod =
            apodization_weights(Pixel::new(xe, 9e-3), &g, 1.5, WindowKind::Rectangular).unwrap();
        assert_eq!(apod.active_count(), 21);
        assert!(apod.weights[54..=74].iter().all(|&w| w == 1.0));
    }

    #[test]
    fn tukey_symmetric_about_element() {
        let g = ArrayGeometry::linear(128, 0.3e-3).unwrap();
        let xe = g.element_x()[40];
        let apod =
            apodization_weights(Pixel::new(xe, 12e-3), &g, 1.5, WindowKind::default()).unwrap();
        for k in 1..30 {
            assert!((apod.weights[40 - k] - apod.weights[40 + k]).abs() < 1e-12);
        }
        assert_eq!(apod.weights[40], 1.0);
    }

    #[test]
    fn shallow_pixel_is_degenerate() {
        let g = ArrayGeometry::linear(4, 0.3e-3).unwrap();
        // Between two elements and barely below the array.
        let p = Pixel::new(0.0, 1e-5);
        assert!(matches!(
            apodization_weights(p, &g, 1.5, WindowKind::default()),
            Err(Error::DegenerateAperture { .. })
        ));
        let fallback = apodization_or_nearest(p, &g, 1.5, WindowKind::default()).unwrap();
        assert_eq!(fallback.active_count(), 1);
    }

    #[test]
    fn das_basics() {
        assert_eq!(das(&[1.0; 5], &[1.0; 5]).unwrap(), 5.0);
        assert_eq!(das(&[3.0; 5], &[0.0; 5]).unwrap(), 0.0);
        assert!(das(&[1.0; 4], &[1.0; 5]).is_err());
    }
}
