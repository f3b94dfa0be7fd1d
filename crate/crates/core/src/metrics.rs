//! ERP feature-quality metrics: SNR in dB and the Type1 - Type2 amplitude difference.

use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, SentenceType, TimeWindow};
use crate::error::{Error, Result};

/// A trial-averaged response, `n_channels * n_samples` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Erp {
    pub data: Vec<f64>,
    pub n_channels: usize,
    pub n_samples: usize,
    pub fs: f64,
    pub t0: f64,
}

impl Erp {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    fn window(&self, w: &TimeWindow) -> Result<std::ops::Range<usize>> {
        w.sample_range(self.t0, self.fs, self.n_samples)
    }

    /// Root mean square pooled over all channels and window samples.
    pub fn rms(&self, w: &TimeWindow) -> Result<f64> {
        let r = self.window(w)?;
        let mut acc = 0.0;
        for c in 0..self.n_channels {
            acc += self.channel(c)[r.clone()].iter().map(|v| v * v).sum::<f64>();
        }
        Ok((acc / (self.n_channels * r.len()) as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErpPair {
    pub erp_type1: Erp,
    pub erp_type2: Erp,
    pub n_type1: usize,
    pub n_type2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub snr_db: f64,
    pub delta_erp: f64,
    pub signal: TimeWindow,
    pub baseline: TimeWindow,
}

/// Elementwise mean over the given trials.
pub fn average(e: &EpochSet, indices: &[usize]) -> Erp {
    Erp {
        data: e.mean_of(indices),
        n_channels: e.n_channels(),
        n_samples: e.n_samples(),
        fs: e.fs(),
        t0: e.t0(),
    }
}

/// ERP over every trial of the set regardless of label.
pub fn grand_erp(e: &EpochSet) -> Result<Erp> {
    if e.n_trials() == 0 {
        return Err(Error::EmptyClass("any label".into()));
    }
    let all: Vec<usize> = (0..e.n_trials()).collect();
    Ok(average(e, &all))
}

/// Per sentence type ERPs.
pub fn compute_erp(e: &EpochSet) -> Result<ErpPair> {
    let idx1 = e.indices_where(|l| l.sentence_type == SentenceType::Type1);
    let idx2 = e.indices_where(|l| l.sentence_type == SentenceType::Type2);
    if idx1.is_empty() {
        return Err(Error::EmptyClass(SentenceType::Type1.to_string()));
    }
    if idx2.is_empty() {
        return Err(Error::EmptyClass(SentenceType::Type2.to_string()));
    }
    Ok(ErpPair {
        erp_type1: average(e, &idx1),
        erp_type2: average(e, &idx2),
        n_type1: idx1.len(),
        n_type2: idx2.len(),
    })
}

/// `20 log10(RMS(signal window) / RMS(baseline window))`.
pub fn snr(erp: &Erp, signal: &TimeWindow, baseline: &TimeWindow) -> Result<f64> {
    let s = erp.rms(signal)?;
    let b = erp.rms(baseline)?;
    if !(b > 0.0) {
        return Err(Error::DegenerateDenominator("baseline RMS is zero".into()));
    }
    Ok(20.0 * (s / b).log10())
}

/// Window mean of `ERP_Type1 - ERP_Type2` for each channel separately.
pub fn delta_erp_per_channel(p: &ErpPair, signal: &TimeWindow) -> Result<Vec<f64>> {
    let r = p.erp_type1.window(signal)?;
    let n = r.len() as f64;
    Ok((0..p.erp_type1.n_channels)
        .map(|c| {
            let a = &p.erp_type1.channel(c)[r.clone()];
            let b = &p.erp_type2.channel(c)[r.clone()];
            a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / n
        })
        .collect())
}

/// Window mean of `ERP_Type1 - ERP_Type2`, channels reduced by their mean.
pub fn delta_erp(p: &ErpPair, signal: &TimeWindow) -> Result<f64> {
    let per = delta_erp_per_channel(p, signal)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// SNR of the all-trial ERP and ΔERP of the type split, for one trial set.
pub fn quality(e: &EpochSet, signal: &TimeWindow, baseline: &TimeWindow) -> Result<QualityScore> {
    let snr_db = snr(&grand_erp(e)?, signal, baseline)?;
    let delta_erp = delta_erp(&compute_erp(e)?, signal)?;
    Ok(QualityScore {
        snr_db,
        delta_erp,
        signal: *signal,
        baseline: *baseline,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard error of the mean (n-1 denominator).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
