use crate::acquisition::AcquisitionSpec;
use crate::error::{Error, Result};

/// Received channel data: a `(transmission, channel, time)` tensor plus the
/// acquisition that produced it.
///
/// Sample `k` of every trace is taken at `t0 + k / fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfDataset {
    acquisition: AcquisitionSpec,
    t0: f64,
    n_tx: usize,
    n_ch: usize,
    n_t: usize,
    samples: Vec<f64>,
}

impl RfDataset {
    pub fn zeros(acquisition: AcquisitionSpec, t0: f64, n_t: usize) -> Self {
        let n_tx = acquisition.scheme.num_transmissions();
        let n_ch = acquisition.geometry.num_elements();
        Self {
            acquisition,
            t0,
            n_tx,
            n_ch,
            n_t,
            samples: vec![0.0; n_tx * n_ch * n_t],
        }
    }

    pub fn from_samples(
        acquisition: AcquisitionSpec,
        t0: f64,
        n_t: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let n_tx = acquisition.scheme.num_transmissions();
        let n_ch = acquisition.geometry.num_elements();
        if samples.len() != n_tx * n_ch * n_t {
            return Err(Error::LengthMismatch {
                expected: n_tx * n_ch * n_t,
                actual: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "non-finite value"));
        }
        Ok(Self {
            acquisition,
            t0,
            n_tx,
            n_ch,
            n_t,
            samples,
        })
    }

    pub fn acquisition(&self) -> &AcquisitionSpec {
        &self.acquisition
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn fs(&self) -> f64 {
        self.acquisition.pulse.sampling_frequency
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_ch(&self) -> usize {
        self.n_ch
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn trace(&self, tx: usize, ch: usize) -> &[f64] {
        let start = (tx * self.n_ch + ch) * self.n_t;
        &self.samples[start..start + self.n_t]
    }

    pub fn trace_mut(&mut self, tx: usize, ch: usize) -> &mut [f64] {
        let start = (tx * self.n_ch + ch) * self.n_t;
        &mut self.samples[start..start + self.n_t]
    }

    /// All traces of one transmission, channel-major.
    pub fn transmission(&self, tx: usize) -> &[f64] {
        let len = self.n_ch * self.n_t;
        &self.samples[tx * len..(tx + 1) * len]
    }

    pub fn transmissions_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        let len = self.n_ch * self.n_t;
        self.samples.chunks_mut(len.max(1))
    }

    /// Same data with a new time axis: `samples` must have `n_t` entries per
    /// trace and sampling rate `fs`.
    pub fn resampled(&self, fs: f64, t0: f64, n_t: usize, samples: Vec<f64>) -> Result<Self> {
        let mut acquisition = self.acquisition.clone();
        acquisition.pulse.sampling_frequency = fs;
        Self::from_samples(acquisition, t0, n_t, samples)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// Elementwise sum with a dataset of the same shape and time axis.
    pub fn add(&self, other: &RfDataset) -> Result<Self> {
        if self.samples.len() != other.samples.len() || self.n_t != other.n_t {
            return Err(Error::LengthMismatch {
                expected: self.samples.len(),
                actual: other.samples.len(),
            });
        }
        if self.t0 != other.t0 {
            return Err(Error::invalid("t0", "datasets have different time origins"));
        }
        let mut out = self.clone();
        for (a, b) in out.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
        Ok(out)
    }

    /// Replace the acquisition's transmit scheme; transmission counts must agree.
    pub fn with_scheme(mut self, scheme: crate::acquisition::TransmitScheme) -> Result<Self> {
        if scheme.num_transmissions() != self.n_tx {
            return Err(Error::LengthMismatch {
                expected: self.n_tx,
                actual: scheme.num_transmissions(),
            });
        }
        scheme.validate(&self.acquisition.geometry)?;
        self.acquisition.scheme = scheme;
        Ok(self)
    }
}
