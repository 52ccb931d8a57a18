//! One-dimensional signal processing used along traces and beamlines.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Magnitude of the analytic signal of `x` (FFT-based discrete Hilbert transform).
pub fn analytic_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    // One-sided spectrum: keep DC (and Nyquist for even n), double positives.
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= h;
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.norm() * scale).collect()
}

/// Band-limited interpolation by an integer factor via spectral zero padding.
///
/// Output sample `k * factor` reproduces input sample `k` up to rounding.
pub fn upsample(x: &[f64], factor: usize) -> Vec<f64> {
    let n = x.len();
    if factor <= 1 || n == 0 {
        return x.to_vec();
    }
    let m = n * factor;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(m);
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);

    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    if n % 2 == 0 {
        padded[..half].copy_from_slice(&spec[..half]);
        // Split the Nyquist bin between the two new symmetric positions.
        padded[half] = spec[half] * 0.5;
        padded[m - half] = spec[half] * 0.5;
        padded[m - half + 1..].copy_from_slice(&spec[half + 1..]);
    } else {
        padded[..=half].copy_from_slice(&spec[..=half]);
        padded[m - half..].copy_from_slice(&spec[half + 1..]);
    }
    inv.process(&mut padded);
    let scale = 1.0 / n as f64;
    padded.iter().map(|c| c.re * scale).collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Linear-phase band-pass FIR (Blackman-windowed sinc) with unit gain at
/// the band center. `taps` is rounded up to an odd count.
pub fn bandpass_fir(f_lo: f64, f_hi: f64, fs: f64, taps: usize) -> Vec<f64> {
    let taps = taps.max(3) | 1;
    let mid = (taps / 2) as f64;
    let (a, b) = (f_lo / fs, f_hi / fs);
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - mid;
            let w = 0.42 - 0.5 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos()
                + 0.08 * (4.0 * PI * n as f64 / (taps - 1) as f64).cos();
            w * (2.0 * b * sinc(2.0 * b * t) - 2.0 * a * sinc(2.0 * a * t))
        })
        .collect();
    let fc = 0.5 * (a + b);
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
        let ph = 2.0 * PI * fc * n as f64;
        (re + v * ph.cos(), im - v * ph.sin())
    });
    let gain = (re * re + im * im).sqrt();
    h.iter_mut().for_each(|v| *v /= gain);
    h
}

fn fir_causal(h: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, &c)| c * x[n - k])
                .sum()
        })
        .collect()
}

/// Zero-phase forward-backward FIR filtering with odd-reflection padding
/// at both ends. Output length equals input length.
pub fn filtfilt(h: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![x[0] * h.iter().sum::<f64>().powi(2)];
    }
    let pad = (3 * h.len()).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));

    let mut y = fir_causal(h, &ext);
    y.reverse();
    let mut y = fir_causal(h, &y);
    y.reverse();
    y[pad..pad + n].to_vec()
}

/// Cross-correlation of `x` with a centered template (`template.len() / 2`
/// is lag zero), normalized by template energy so an exact copy of the
/// template peaks at 1.
pub fn matched_filter(x: &[f64], template: &[f64]) -> Vec<f64> {
    let energy: f64 = template.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return vec![0.0; x.len()];
    }
    let center = (template.len() / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for (m, &p) in template.iter().enumerate() {
                let idx = k + m as isize - center;
                if (0..n).contains(&idx) {
                    acc += x[idx as usize] * p;
                }
            }
            acc / energy
        })
        .collect()
}

/// Power spectrum `|X(f)|^2` over the non-negative frequency bins, paired
/// with bin frequencies in Hz.
pub fn power_spectrum(x: &[f64], fs: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    (0..=n / 2)
        .map(|k| (k as f64 * fs / n as f64, buf[k].norm_sqr()))
        .collect()
}

/// Gain magnitude of an FIR at frequency `f`.
pub fn fir_gain(h: &[f64], f: f64, fs: f64) -> f64 {
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
        let ph = 2.0 * PI * f / fs * n as f64;
        (re + v * ph.cos(), im - v * ph.sin())
    });
    (re * re + im * im).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_zero_is_zero() {
        assert!(analytic_magnitude(&[0.0; 32]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn envelope_of_windowed_cosine() {
        let fs = 100.0;
        let f0 = 7.0;
        let n = 512;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                3.0 * (2.0 * PI * f0 * t).cos()
            })
            .collect();
        let env = analytic_magnitude(&x);
        for &v in &env[64..n - 64] {
            assert!((v - 3.0).abs() < 0.06, "{v}");
        }
    }

    #[test]
    fn upsample_keeps_original_samples() {
        let x: Vec<f64> = (0..64)
            .map(|k| (0.3 * k as f64).sin() + 0.1 * k as f64 % 1.3)
            .collect();
        let y = upsample(&x, 2);
        assert_eq!(y.len(), 128);
        for (k, &v) in x.iter().enumerate() {
            assert!((y[2 * k] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn filtfilt_rejects_dc() {
        let h = bandpass_fir(11.4e6, 19.0e6, 62.5e6, 101);
        let y = filtfilt(&h, &[2.0; 400]);
        assert!(y.iter().all(|v| v.abs() <= 2e-3), "{:?}", &y[..4]);
    }

    #[test]
    fn matched_filter_peaks_at_one() {
        let p = [0.2, -0.5, 1.0, -0.5, 0.2];
        let mut x = vec![0.0; 20];
        x[8..13].copy_from_slice(&p);
        let y = matched_filter(&x, &p);
        let (imax, vmax) =
            y.iter()
                .enumerate()
                .fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        assert_eq!(imax, 10);
        assert!((vmax - 1.0).abs() < 1e-12);
    }
}
