//! Binary RF tensor container.
//!
//! Layout, all little-endian: magic `URFD`, version `u32`, `n_tx`, `n_ch`,
//! `n_samples` as `u32`, then `fs`, `f0`, `c`, `pitch`, `t0` as `f64`,
//! followed by `n_tx * n_ch * n_samples` `f32` samples ordered by
//! transmission, then channel, then time.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::acquisition::{AcquisitionSpec, ArrayGeometry, MediumSpec, PulseSpec, TransmitScheme};
use crate::error::{Error, Result};
use crate::rf::RfDataset;

pub const MAGIC: &[u8; 4] = b"URFD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 * 4 + 5 * 8;

/// Header fields of an RF file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfHeader {
    pub version: u32,
    pub n_tx: u32,
    pub n_ch: u32,
    pub n_samples: u32,
    pub fs: f64,
    pub f0: f64,
    pub c: f64,
    pub pitch: f64,
    pub t0: f64,
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

/// Serializes `rf`; samples are narrowed to `f32`.
pub fn encode_rf(rf: &RfDataset) -> Result<Vec<u8>> {
    let acq = rf.acquisition();
    let dims = [rf.n_tx(), rf.n_ch(), rf.n_t()];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rf.samples().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::invalid("rf", "dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in [
        rf.fs(),
        acq.pulse.center_frequency,
        acq.medium.speed_of_sound,
        acq.geometry.pitch(),
        rf.t0(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &s in rf.samples() {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<RfHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(0, "bad magic, expected \"URFD\""));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version == 0 || version > VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let header = RfHeader {
        version,
        n_tx: u32_at(8),
        n_ch: u32_at(12),
        n_samples: u32_at(16),
        fs: f64_at(20),
        f0: f64_at(28),
        c: f64_at(36),
        pitch: f64_at(44),
        t0: f64_at(52),
    };
    for (off, name, v) in [
        (8, "n_tx", header.n_tx),
        (12, "n_ch", header.n_ch),
        (16, "n_samples", header.n_samples),
    ] {
        if v == 0 {
            return Err(format_err(off, format!("{name} must be nonzero")));
        }
    }
    for (off, name, v) in [
        (20, "fs", header.fs),
        (28, "f0", header.f0),
        (36, "c", header.c),
        (44, "pitch", header.pitch),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(format_err(
                off,
                format!("{name} must be positive and finite"),
            ));
        }
    }
    if !header.t0.is_finite() {
        return Err(format_err(52, "t0 must be finite"));
    }
    Ok(header)
}

/// Parses an RF file. The transmit scheme is not stored; `scheme` supplies
/// it (defaulting to STA over all elements when `n_tx == n_ch`, otherwise
/// to the 73-angle plane-wave preset when `n_tx == 73`).
pub fn decode_rf(
    bytes: &[u8],
    scheme: Option<TransmitScheme>,
    num_cycles: f64,
) -> Result<RfDataset> {
    let h = decode_header(bytes)?;
    let (n_tx, n_ch, n_t) = (h.n_tx as usize, h.n_ch as usize, h.n_samples as usize);
    let expected = n_tx
        .checked_mul(n_ch)
        .and_then(|v| v.checked_mul(n_t))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err(8, "declared dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(format_err(
            bytes.len().min(expected),
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let geometry = ArrayGeometry::linear(n_ch, h.pitch)?;
    let scheme = match scheme {
        Some(s) => s,
        None if n_tx == n_ch => TransmitScheme::sta_full(&geometry),
        None if n_tx == 73 => TransmitScheme::pw_preset(),
        None => {
            return Err(Error::Config(format!(
                "cannot infer the transmit scheme for {n_tx} transmissions; supply it in the config"
            )))
        }
    };
    if scheme.num_transmissions() != n_tx {
        return Err(Error::Config(format!(
            "scheme has {} transmissions but the file holds {n_tx}",
            scheme.num_transmissions()
        )));
    }
    let acq = AcquisitionSpec {
        geometry,
        pulse: PulseSpec::new(h.f0, h.fs, num_cycles)?,
        medium: MediumSpec::new(h.c)?,
        scheme,
    };
    acq.validate()?;
    let samples: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
        return Err(format_err(HEADER_LEN + 4 * k, "non-finite sample"));
    }
    RfDataset::from_samples(acq, h.t0, n_t, samples)
}

pub fn write_rf(path: &Path, rf: &RfDataset) -> Result<()> {
    let bytes = encode_rf(rf)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_rf(path: &Path, scheme: Option<TransmitScheme>, num_cycles: f64) -> Result<RfDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rf(&bytes, scheme, num_cycles)
}
