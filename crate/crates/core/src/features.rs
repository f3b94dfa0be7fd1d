//! Group-level PCA spatial filters.
//!
//! Group ERPs (channels x samples) are concatenated along time, each channel
//! is centred, and the leading eigenvectors of the channel covariance become
//! the rows of the projection matrix. Projection subtracts the fit-time
//! channel means and applies the same matrix at every time sample.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::epochs::EpochSet;
use crate::error::{Error, Result};
use crate::metrics::Erp;

/// Relative tolerance under which two eigenvalues count as tied.
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialProjector {
    /// `n_components` rows of length `n_channels`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Row means of the concatenated fit data, subtracted before projecting.
    pub channel_means: Vec<f64>,
    pub fitted_on: String,
}

impl SpatialProjector {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_means.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits the projector on `(group id, ERP)` pairs sharing one channel layout.
pub fn fit_projector(
    group_erps: &[(String, Erp)],
    n_components: usize,
    fitted_on: impl Into<String>,
) -> Result<SpatialProjector> {
    let first = group_erps
        .first()
        .ok_or_else(|| Error::InvalidArgument("no group ERPs to fit".into()))?;
    let n_ch = first.1.n_channels;
    if n_components == 0 || n_components > n_ch {
        return Err(Error::InvalidArgument(format!(
            "n_components {n_components} must be in 1..={n_ch}"
        )));
    }
    if let Some((id, _)) = group_erps.iter().find(|(_, e)| e.n_channels != n_ch) {
        return Err(Error::DimensionMismatch(format!(
            "group {id} has a different channel count"
        )));
    }
    let blocks: Vec<(&[f64], usize)> = group_erps
        .iter()
        .map(|(_, e)| (e.data.as_slice(), e.n_samples))
        .collect();
    fit_from_blocks(&blocks, n_ch, n_components, fitted_on.into())
}

/// Same as [`fit_projector`] on raw `n_channels * len` row-major blocks.
pub fn fit_from_blocks(
    blocks: &[(&[f64], usize)],
    n_ch: usize,
    n_components: usize,
    fitted_on: String,
) -> Result<SpatialProjector> {
    let total: usize = blocks.iter().map(|b| b.1).sum();
    let mut x = DMatrix::<f64>::zeros(n_ch, total);
    let mut col = 0;
    for &(data, len) in blocks {
        if data.len() != n_ch * len {
            return Err(Error::DimensionMismatch(format!(
                "block of {} values is not {n_ch} x {len}",
                data.len()
            )));
        }
        for c in 0..n_ch {
            for s in 0..len {
                let v = data[c * len + s];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        trial: 0,
                        channel: c,
                        sample: col + s,
                    });
                }
                x[(c, col + s)] = v;
            }
        }
        col += len;
    }
    let distinct = count_distinct_columns(&x);
    if distinct < n_components {
        return Err(Error::InvalidArgument(format!(
            "{distinct} distinct time columns, need at least {n_components}"
        )));
    }

    let means: Vec<f64> = (0..n_ch).map(|c| x.row(c).mean()).collect();
    for (c, &m) in means.iter().enumerate() {
        x.row_mut(c).iter_mut().for_each(|v| *v -= m);
    }
    let denom = (total.max(2) - 1) as f64;
    let cov = (&x * x.transpose()) / denom;
    let eig = SymmetricEigen::new(cov);

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n_ch)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            normalise_sign(&mut v);
            (eig.eigenvalues[i].max(0.0), v)
        })
        .collect();
    let scale = pairs.iter().map(|p| p.0).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= TIE_TOL * scale {
            // ties: lexicographically larger vector first
            b.1.iter()
                .zip(&a.1)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    let total_var: f64 = pairs.iter().map(|p| p.0).sum();
    let explained_variance_ratio = pairs
        .iter()
        .take(n_components)
        .map(|p| if total_var > 0.0 { p.0 / total_var } else { 0.0 })
        .collect();
    Ok(SpatialProjector {
        components: pairs.into_iter().take(n_components).map(|p| p.1).collect(),
        explained_variance_ratio,
        channel_means: means,
        fitted_on,
    })
}

fn count_distinct_columns(x: &DMatrix<f64>) -> usize {
    let mut cols: Vec<Vec<u64>> = x
        .column_iter()
        .map(|c| c.iter().map(|v| v.to_bits()).collect())
        .collect();
    cols.sort_unstable();
    cols.dedup();
    cols.len()
}

/// Flips `v` so its largest-magnitude entry is positive.
fn normalise_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `components · (trial - channel_means)` for every trial; the result has one
/// "channel" per component.
pub fn project(e: &EpochSet, p: &SpatialProjector) -> Result<EpochSet> {
    if e.n_channels() != p.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "epochs have {} channels, projector expects {}",
            e.n_channels(),
            p.n_channels()
        )));
    }
    let ns = e.n_samples();
    let nc = p.n_components();
    let mut data = vec![0.0; e.n_trials() * nc * ns];
    for t in 0..e.n_trials() {
        let out = &mut data[t * nc * ns..(t + 1) * nc * ns];
        for ch in 0..e.n_channels() {
            let x = e.trial_channel(t, ch);
            let m = p.channel_means[ch];
            for (k, comp) in p.components.iter().enumerate() {
                let w = comp[ch];
                let row = &mut out[k * ns..(k + 1) * ns];
                row.iter_mut().zip(x).for_each(|(o, &v)| *o += w * (v - m));
            }
        }
    }
    e.with_data(data, nc, ns, e.fs(), e.t0(), e.labels().to_vec())
}
