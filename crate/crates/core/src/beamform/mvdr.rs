use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-variance beamformer settings.
///
/// The snapshot is real-valued RF, so conjugate transposes reduce to plain
/// transposes; an analytic-signal variant would only change the element type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MvdrConfig {
    /// Spatial-smoothing subarray length; `None` selects `N_c / 4`.
    pub subarray_length: Option<usize>,
    /// Diagonal loading relative to the covariance trace; `None` selects
    /// `1 / (100 L_sub)`.
    pub diagonal_loading: Option<f64>,
}

impl MvdrConfig {
    pub fn resolve(&self, n_ch: usize) -> Result<(usize, f64)> {
        let l = self.subarray_length.unwrap_or((n_ch / 4).max(1));
        if l == 0 || l > n_ch {
            return Err(Error::invalid(
                "subarray_length",
                format!("{l} not in [1, {n_ch}]"),
            ));
        }
        let delta = self.diagonal_loading.unwrap_or(1.0 / (100.0 * l as f64));
        if !(delta >= 0.0) {
            return Err(Error::invalid("diagonal_loading", "must be >= 0"));
        }
        Ok((l, delta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvdrOutput {
    pub value: f64,
    pub weights: Vec<f64>,
}

/// Forward spatially smoothed sample covariance of `snapshot` over all
/// length-`l` subarrays.
pub fn smoothed_covariance(snapshot: &[f64], l: usize) -> DMatrix<f64> {
    let count = snapshot.len() + 1 - l;
    let mut r = DMatrix::<f64>::zeros(l, l);
    for p in 0..count {
        let s = &snapshot[p..p + l];
        for a in 0..l {
            let sa = s[a];
            if sa == 0.0 {
                continue;
            }
            for b in a..l {
                r[(a, b)] += sa * s[b];
            }
        }
    }
    let inv = 1.0 / count as f64;
    for a in 0..l {
        for b in a..l {
            let v = r[(a, b)] * inv;
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    r
}

/// Distortionless weights `R^-1 a / (a^T R^-1 a)` with an all-ones steering
/// vector, after loading the diagonal by `delta * trace(R)`.
pub fn solve_mvdr_weights(covariance: &DMatrix<f64>, delta: f64) -> Result<Vec<f64>> {
    let l = covariance.nrows();
    let trace = covariance.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::SingularCovariance);
    }
    let mut loaded = covariance.clone();
    let load = delta * trace;
    for a in 0..l {
        loaded[(a, a)] += load;
    }
    let chol = loaded.cholesky().ok_or(Error::SingularCovariance)?;
    let mut x = chol.solve(&DVector::from_element(l, 1.0));
    // Rescale by the largest entry first so equal entries sum exactly.
    let peak = x.amax();
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::SingularCovariance);
    }
    x /= peak;
    let denom: f64 = x.iter().sum();
    if !(denom.abs() > 0.0) || !denom.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(x.iter().map(|v| v / denom).collect())
}

/// MVDR weights for one snapshot.
pub fn mvdr_weights(snapshot: &[f64], cfg: &MvdrConfig) -> Result<Vec<f64>> {
    let (l, delta) = cfg.resolve(snapshot.len())?;
    solve_mvdr_weights(&smoothed_covariance(snapshot, l), delta)
}

/// MVDR output: the weights applied to every subarray, averaged.
pub fn mvdr(snapshot: &[f64], cfg: &MvdrConfig) -> Result<MvdrOutput> {
    let (l, _) = cfg.resolve(snapshot.len())?;
    let weights = mvdr_weights(snapshot, cfg)?;
    let count = snapshot.len() + 1 - l;
    let mut acc = 0.0;
    for p in 0..count {
        acc += super::das_unchecked(&snapshot[p..p + l], &weights);
    }
    Ok(MvdrOutput {
        value: acc / count as f64,
        weights,
    })
}
