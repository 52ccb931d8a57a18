use rayon::prelude::*;

use crate::acquisition::{element_angle, ArrayGeometry, DelayTable, Pixel, DEFAULT_TABLE_CAP};
use crate::beamform::delay_compensate_into;
use crate::compounding::BeamformedImage;
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Sub-aperture partition for directivity analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvConfig {
    pub num_subapertures: usize,
}

impl Default for DvConfig {
    fn default() -> Self {
        Self {
            num_subapertures: 4,
        }
    }
}

impl DvConfig {
    pub fn block_len(&self, geometry: &ArrayGeometry) -> Result<usize> {
        let n = geometry.num_elements();
        let s = self.num_subapertures;
        if s == 0 || n % s != 0 {
            return Err(Error::invalid(
                "num_subapertures",
                format!("{s} does not divide {n} elements"),
            ));
        }
        Ok(n / s)
    }

    /// Lateral centre of each contiguous sub-aperture.
    pub fn centers(&self, geometry: &ArrayGeometry) -> Result<Vec<f64>> {
        let b = self.block_len(geometry)?;
        Ok(geometry
            .element_x()
            .chunks(b)
            .map(|block| block.iter().sum::<f64>() / b as f64)
            .collect())
    }
}

/// Receive angle of a sub-aperture centred at `center` seen from `pixel`.
pub fn sa_receive_angle(pixel: Pixel, center: f64) -> f64 {
    element_angle(pixel, center)
}

/// `(axial, lateral)` components `(I cos eta, I sin eta)`.
pub fn vectorize_intensity(intensity: f64, eta: f64) -> (f64, f64) {
    (intensity * eta.cos(), intensity * eta.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvReport {
    pub pixel: Pixel,
    pub num_subapertures: usize,
    pub n_tx: usize,
    /// Sub-aperture beams, row-major by sub-aperture: `(n, j)` at `n * n_tx + j`.
    pub sa: Vec<f64>,
    /// Squared deviation of each beam from its transmission's cross-SA mean.
    pub phi: Vec<f64>,
    pub phi_m: f64,
    pub phi_v: f64,
    /// `(sub-aperture, transmission)` of the largest deviation.
    pub best: (usize, usize),
    /// Reflection direction; `None` with a single sub-aperture.
    pub eta: Option<f64>,
    pub intensity: f64,
    /// `(axial, lateral)` intensity vector along `eta`.
    pub vector: Option<(f64, f64)>,
}

/// Directivity statistics from per-SA beams (`n_sa × n_tx`, row-major).
///
/// Returns `(phi, phi_m, phi_v, best)`.
pub fn directivity_variance(
    sa: &[f64],
    n_sa: usize,
    n_tx: usize,
) -> (Vec<f64>, f64, f64, (usize, usize)) {
    let mut phi = vec![0.0; n_sa * n_tx];
    for j in 0..n_tx {
        let mean = (0..n_sa).map(|n| sa[n * n_tx + j]).sum::<f64>() / n_sa as f64;
        for n in 0..n_sa {
            let d = sa[n * n_tx + j] - mean;
            phi[n * n_tx + j] = d * d;
        }
    }
    let count = phi.len() as f64;
    let phi_m = phi.iter().sum::<f64>() / count;
    let phi_v = phi.iter().map(|p| (p - phi_m) * (p - phi_m)).sum::<f64>() / count;
    let mut best = 0;
    for (k, &p) in phi.iter().enumerate() {
        if p > phi[best] {
            best = k;
        }
    }
    (phi, phi_m, phi_v, (best / n_tx, best % n_tx))
}

/// Directivity Variance at the pixel stored at entry `index` of `delays`.
///
/// Sub-aperture beams are unapodized sums of delay-compensated samples. The
/// reflection direction is `a_inc(j*) - a_R(n*)`, which equals twice the
/// reflector tilt under the mirror law.
pub fn dv_analyze(
    rf: &RfDataset,
    pixel: Pixel,
    cfg: &DvConfig,
    delays: &DelayTable,
    index: usize,
    intensity: f64,
) -> Result<DvReport> {
    let acq = rf.acquisition();
    let block = cfg.block_len(&acq.geometry)?;
    let n_sa = cfg.num_subapertures;
    let (n_ch, n_tx) = (rf.n_ch(), rf.n_tx());
    if intensity < 0.0 {
        return Err(Error::invalid("intensity", "must be >= 0"));
    }

    let mut snapshot = vec![0.0; n_ch];
    let mut sa = vec![0.0; n_sa * n_tx];
    for j in 0..n_tx {
        delay_compensate_into(rf, j, delays.tx(index)[j], delays.rx(index), &mut snapshot);
        for (n, chunk) in snapshot.chunks(block).enumerate() {
            sa[n * n_tx + j] = chunk.iter().sum();
        }
    }
    let (phi, phi_m, phi_v, best) = directivity_variance(&sa, n_sa, n_tx);
    let eta = (n_sa > 1).then(|| {
        let centers = cfg.centers(&acq.geometry).expect("validated above");
        acq.scheme.incidence_angle(best.1, pixel, &acq.geometry)
            - sa_receive_angle(pixel, centers[best.0])
    });
    Ok(DvReport {
        pixel,
        num_subapertures: n_sa,
        n_tx,
        sa,
        phi,
        phi_m,
        phi_v,
        best,
        eta,
        intensity,
        vector: eta.map(|e| vectorize_intensity(intensity, e)),
    })
}

/// [`dv_analyze`] with delays computed for the single pixel.
pub fn dv_at(rf: &RfDataset, pixel: Pixel, cfg: &DvConfig, intensity: f64) -> Result<DvReport> {
    let acq = rf.acquisition();
    let table = DelayTable::for_pixels(
        &[pixel],
        &acq.scheme,
        &acq.geometry,
        &acq.medium,
        DEFAULT_TABLE_CAP,
    )?;
    dv_analyze(rf, pixel, cfg, &table, 0, intensity)
}

/// Rectangular region of grid indices, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub ix: (usize, usize),
    pub iz: (usize, usize),
}

impl Roi {
    pub fn is_empty(&self) -> bool {
        self.ix.0 >= self.ix.1 || self.iz.0 >= self.iz.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvVector {
    pub x: f64,
    pub z: f64,
    pub phi_v: f64,
    pub phi_m: f64,
    pub eta: f64,
    /// Lateral component.
    pub vx: f64,
    /// Axial component.
    pub vz: f64,
    pub magnitude: f64,
}

/// Linear-interpolated percentile (0–100) of `values`.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (pct / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Intensity vectors for ROI pixels whose `phi_v` exceeds the given
/// percentile of `phi_v` within the ROI.
pub fn dv_overlay(
    rf: &RfDataset,
    image: &BeamformedImage,
    roi: Roi,
    cfg: &DvConfig,
    threshold_percentile: f64,
) -> Result<Vec<DvVector>> {
    let grid = image.grid();
    if roi.ix.1 > grid.n_x || roi.iz.1 > grid.n_z {
        return Err(Error::invalid("roi", "extends beyond the image grid"));
    }
    if roi.is_empty() {
        return Ok(Vec::new());
    }
    let indices: Vec<(usize, usize)> = (roi.ix.0..roi.ix.1)
        .flat_map(|ix| (roi.iz.0..roi.iz.1).map(move |iz| (ix, iz)))
        .collect();
    let reports: Vec<DvReport> = indices
        .par_iter()
        .map(|&(ix, iz)| dv_at(rf, grid.pixel(ix, iz), cfg, image.envelope_at(ix, iz)))
        .collect::<Result<_>>()?;
    let phi_v: Vec<f64> = reports.iter().map(|r| r.phi_v).collect();
    let threshold = percentile(&phi_v, threshold_percentile);
    Ok(reports
        .into_iter()
        .filter(|r| r.phi_v > threshold)
        .filter_map(|r| {
            let eta = r.eta?;
            let (axial, lateral) = r.vector?;
            Some(DvVector {
                x: r.pixel.x,
                z: r.pixel.z,
                phi_v: r.phi_v,
                phi_m: r.phi_m,
                eta,
                vx: lateral,
                vz: axial,
                magnitude: r.intensity,
            })
        })
        .collect())
}

/// Circular mean of angles, weighted equally.
pub fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn receive_angle_examples() {
        assert_eq!(sa_receive_angle(Pixel::new(1e-3, 5e-3), 1e-3), 0.0);
        assert!((sa_receive_angle(Pixel::new(6e-3, 5e-3), 1e-3) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn uniform_beams_have_zero_variance() {
        let sa = vec![2.5; 4 * 7];
        let (phi, m, v, _) = directivity_variance(&sa, 4, 7);
        assert!(phi.iter().all(|&p| p == 0.0));
        assert_eq!((m, v), (0.0, 0.0));
    }

    #[test]
    fn common_offset_per_transmission_is_ignored() {
        let sa: Vec<f64> = (0..12).map(|k| ((k * 7) % 5) as f64).collect();
        let mut shifted = sa.clone();
        for n in 0..3 {
            for j in 0..4 {
                shifted[n * 4 + j] += 10.0 * j as f64;
            }
        }
        let a = directivity_variance(&sa, 3, 4);
        let b = directivity_variance(&shifted, 3, 4);
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.3, b.3);
    }

    #[test]
    fn vector_examples() {
        assert_eq!(vectorize_intensity(3.0, 0.0), (3.0, 0.0));
        let (a, l) = vectorize_intensity(3.0, std::f64::consts::FRAC_PI_2);
        assert!(a.abs() < 1e-15 && (l - 3.0).abs() < 1e-15);
    }

    #[test]
    fn centers_partition_aperture() {
        let g = ArrayGeometry::linear(8, 1e-3).unwrap();
        let c = DvConfig::default().centers(&g).unwrap();
        for (a, e) in c.iter().zip([-3e-3, -1e-3, 1e-3, 3e-3]) {
            assert!((a - e).abs() < 1e-15);
        }
        assert!(DvConfig {
            num_subapertures: 3
        }
        .centers(&g)
        .is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..11).map(|k| k as f64).collect();
        assert_eq!(percentile(&v, 90.0), 9.0);
        assert_eq!(percentile(&v, 95.0), 9.5);
    }
}
