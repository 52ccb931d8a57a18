use rayon::prelude::*;

use crate::acquisition::{Pixel, PixelGrid, TransmitScheme};
use crate::beamform::{beamform_raw, per_transmission_values, Beamformer, RawImage};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Coherent sum of per-transmission values, in ascending transmission order.
pub fn compound(per_tx: &[f64], scheme: &TransmitScheme) -> Result<f64> {
    let expected = scheme.num_transmissions();
    if per_tx.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: per_tx.len(),
        });
    }
    let mut acc = 0.0;
    for v in per_tx {
        acc += v;
    }
    Ok(acc)
}

/// Analytic-signal magnitude of a depth series.
pub fn envelope(beamline: &[f64]) -> Result<Vec<f64>> {
    if beamline.len() < 8 {
        return Err(Error::invalid(
            "beamline",
            format!("envelope needs at least 8 samples, got {}", beamline.len()),
        ));
    }
    Ok(dsp::analytic_magnitude(beamline))
}

/// What 0 dB refers to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Normalization {
    /// The maximum of the image itself.
    #[default]
    ImageMax,
    /// A fixed envelope value, for comparing several images on one scale.
    Reference(f64),
}

/// `20 log10(env / ref)` clipped to `[-dynamic_range, 0]`.
pub fn log_compress(envelope: &[f64], dynamic_range: f64, norm: Normalization) -> Result<Vec<f64>> {
    if !(dynamic_range > 0.0) {
        return Err(Error::invalid("dynamic_range", "must be positive"));
    }
    let reference = match norm {
        Normalization::ImageMax => envelope.iter().fold(0.0f64, |m, &v| m.max(v)),
        Normalization::Reference(r) => r,
    };
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(Error::AllZeroImage);
    }
    Ok(envelope
        .iter()
        .map(|&v| {
            let db = if v >= reference {
                0.0
            } else {
                20.0 * (v / reference).log10()
            };
            // log10(0) is -inf, which the clamp maps to the floor.
            db.max(-dynamic_range)
        })
        .collect())
}

/// A compounded image with its envelope and display scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pub raw: RawImage,
    pub envelope: Vec<f64>,
    pub db: Vec<f64>,
    pub dynamic_range: f64,
    pub beamformer: String,
    pub scheme: String,
}

impl BeamformedImage {
    /// Envelope-detects each column of `raw` and log-compresses the result.
    pub fn from_raw(
        raw: RawImage,
        dynamic_range: f64,
        norm: Normalization,
        beamformer: &str,
        scheme: &str,
    ) -> Result<Self> {
        let n_z = raw.grid.n_z;
        let columns: Vec<Vec<f64>> = raw
            .values
            .par_chunks(n_z)
            .map(envelope)
            .collect::<Result<_>>()?;
        let envelope = columns.concat();
        let db = log_compress(&envelope, dynamic_range, norm)?;
        Ok(Self {
            raw,
            envelope,
            db,
            dynamic_range,
            beamformer: beamformer.to_string(),
            scheme: scheme.to_string(),
        })
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.raw.grid
    }

    /// Grid indices of the brightest envelope pixel.
    pub fn peak(&self) -> (usize, usize) {
        let (k, _) =
            self.envelope
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| {
                    if v > best.1 {
                        (k, v)
                    } else {
                        best
                    }
                });
        let n_z = self.raw.grid.n_z;
        (k / n_z, k % n_z)
    }

    pub fn envelope_at(&self, ix: usize, iz: usize) -> f64 {
        self.envelope[self.raw.grid.index(ix, iz)]
    }
}

pub fn scheme_tag(scheme: &TransmitScheme) -> &'static str {
    if scheme.is_sta() {
        "sta"
    } else {
        "pw"
    }
}

/// Beamform, compound, envelope-detect and log-compress `rf` over `grid`.
/// `dynamic_range` defaults to the beamformer's convention.
pub fn beamform_image(
    rf: &RfDataset,
    grid: &PixelGrid,
    beamformer: &Beamformer,
    dynamic_range: Option<f64>,
) -> Result<BeamformedImage> {
    let raw = beamform_raw(rf, grid, beamformer)?;
    BeamformedImage::from_raw(
        raw,
        dynamic_range.unwrap_or_else(|| beamformer.default_dynamic_range()),
        Normalization::ImageMax,
        beamformer.tag(),
        scheme_tag(&rf.acquisition().scheme),
    )
}

/// Per-transmission values at one pixel, before compounding.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamsumProfile {
    pub pixel: Pixel,
    pub values: Vec<f64>,
    /// Steering angle in degrees (PW) or transmitting element (STA) per entry.
    pub labels: Vec<f64>,
    pub beamformer: String,
}

impl BeamsumProfile {
    pub fn compounded(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn beamsum_profile(
    rf: &RfDataset,
    pixel: Pixel,
    beamformer: &Beamformer,
) -> Result<BeamsumProfile> {
    let values = per_transmission_values(rf, pixel, beamformer)?;
    let scheme = &rf.acquisition().scheme;
    Ok(BeamsumProfile {
        pixel,
        labels: (0..values.len()).map(|j| scheme.label(j)).collect(),
        values,
        beamformer: beamformer.tag().to_string(),
    })
}

/// Cosine similarity of two profiles; 0 if either is all zero.
pub fn profile_correlation(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pw(n: usize) -> TransmitScheme {
        TransmitScheme::Pw {
            angles: (0..n).map(|k| 0.01 * k as f64).collect(),
        }
    }

    #[test]
    fn compound_examples() {
        assert_eq!(compound(&[0.0; 3], &pw(3)).unwrap(), 0.0);
        assert_eq!(compound(&[1.0, 2.0, 3.0], &pw(3)).unwrap(), 6.0);
        assert!(matches!(
            compound(&[1.0, 2.0], &pw(3)),
            Err(Error::LengthMismatch {
                expected: 3,
                actual: 2
            })
        ));
    }

    #[test]
    fn envelope_of_windowed_tone() {
        let n = 512;
        let a = 2.5;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
                let w = if (64..n - 64).contains(&k) { 1.0 } else { w };
                a * w * (2.0 * std::f64::consts::PI * 0.125 * k as f64).cos()
            })
            .collect();
        let e = envelope(&x).unwrap();
        for v in &e[96..n - 96] {
            assert!((v - a).abs() <= 0.02 * a, "{v}");
        }
        assert!(envelope(&[0.0; 16]).unwrap().iter().all(|&v| v == 0.0));
        assert!(envelope(&[1.0; 7]).is_err());
    }

    #[test]
    fn log_compress_examples() {
        let db = log_compress(&[1.0, 0.1, 1e-9], 70.0, Normalization::ImageMax).unwrap();
        assert_eq!(db[0], 0.0);
        assert!((db[1] + 20.0).abs() < 1e-12);
        assert_eq!(db[2], -70.0);
        assert!(matches!(
            log_compress(&[0.0; 4], 70.0, Normalization::ImageMax),
            Err(Error::AllZeroImage)
        ));
        let fixed = log_compress(&[0.5], 70.0, Normalization::Reference(5.0)).unwrap();
        assert!((fixed[0] + 20.0).abs() < 1e-12);
    }
}
