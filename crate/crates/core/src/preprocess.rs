//! Epoch-level preprocessing: baseline z-scoring, zero-phase Butterworth
//! low-pass filtering and integer-factor decimation.

use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, TimeWindow};
use crate::error::{Error, Result};

/// Low-pass Butterworth filter specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    /// Even design order; the forward-backward pass doubles the effective order.
    pub order: usize,
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64) -> Self {
        FilterSpec { cutoff_hz, order: 4 }
    }

    /// Edge extension length on each side.
    pub fn padlen(&self) -> usize {
        3 * self.order
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(Error::InvalidFilter(format!(
                "order {} must be even and >= 2",
                self.order
            )));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < fs / 2.0) {
            return Err(Error::InvalidFilter(format!(
                "cutoff {} Hz must lie in (0, {})",
                self.cutoff_hz,
                fs / 2.0
            )));
        }
        Ok(())
    }
}

/// One biquad in transposed direct form II, `a0` normalised to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// State that makes a constant unit input produce a constant unit output.
    fn step_state(&self) -> [f64; 2] {
        let z2 = self.b[2] - self.a[2];
        let z1 = self.b[1] - self.a[1] + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass as a cascade of biquads (bilinear transform
/// with frequency pre-warping). Each section has unit gain at DC.
pub fn butterworth_lowpass(spec: &FilterSpec, fs: f64) -> Result<Vec<Biquad>> {
    spec.validate(fs)?;
    let n = spec.order;
    let k = (std::f64::consts::PI * spec.cutoff_hz / fs).tan();
    let k2 = k * k;
    Ok((0..n / 2)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            let q = 2.0 * theta.sin();
            let a0 = 1.0 + q * k + k2;
            Biquad {
                b: [k2 / a0, 2.0 * k2 / a0, k2 / a0],
                a: [1.0, 2.0 * (k2 - 1.0) / a0, (1.0 - q * k + k2) / a0],
            }
        })
        .collect())
}

/// Squared magnitude response of an analogue Butterworth prototype at `f`.
pub fn butterworth_power_gain(spec: &FilterSpec, f_hz: f64) -> f64 {
    1.0 / (1.0 + (f_hz / spec.cutoff_hz).powi(2 * spec.order as i32))
}

fn cascade(sections: &[Biquad], x: &mut [f64]) {
    for s in sections {
        let [z1, z2] = s.step_state();
        let x0 = x[0];
        s.run(x, [z1 * x0, z2 * x0]);
    }
}

/// Forward-backward filtering of one signal with odd-symmetric edge extension.
pub fn filtfilt(sections: &[Biquad], signal: &[f64], padlen: usize) -> Result<Vec<f64>> {
    let n = signal.len();
    if n <= padlen {
        return Err(Error::EpochTooShort { have: n, need: padlen });
    }
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    ext.extend((1..=padlen).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=padlen).map(|i| 2.0 * last - signal[n - 1 - i]));

    cascade(sections, &mut ext);
    ext.reverse();
    cascade(sections, &mut ext);
    ext.reverse();
    Ok(ext[padlen..padlen + n].to_vec())
}

/// Per trial and channel: `(x - mean_baseline) / sd_baseline`, with the
/// sample standard deviation (denominator n-1) of the baseline samples.
pub fn baseline_zscore(e: &EpochSet, baseline: &TimeWindow) -> Result<EpochSet> {
    let r = e.window_range(baseline)?;
    if r.len() < 2 {
        return Err(Error::InvalidWindow {
            start: baseline.start_s,
            end: baseline.end_s,
            reason: format!("baseline needs at least 2 samples, has {}", r.len()),
        });
    }
    let nb = r.len() as f64;
    let mut data = Vec::with_capacity(e.data().len());
    for t in 0..e.n_trials() {
        for c in 0..e.n_channels() {
            let x = e.trial_channel(t, c);
            let base = &x[r.clone()];
            let mean = base.iter().sum::<f64>() / nb;
            let var = base.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(Error::DegenerateBaseline { trial: t, channel: c });
            }
            data.extend(x.iter().map(|v| (v - mean) / sd));
        }
    }
    e.with_data(data, e.n_channels(), e.n_samples(), e.fs(), e.t0(), e.labels().to_vec())
}

/// Zero-phase Butterworth low-pass applied to every trial-channel.
pub fn lowpass_zerophase(e: &EpochSet, spec: &FilterSpec) -> Result<EpochSet> {
    let sections = butterworth_lowpass(spec, e.fs())?;
    let padlen = spec.padlen();
    let mut data = Vec::with_capacity(e.data().len());
    for t in 0..e.n_trials() {
        for c in 0..e.n_channels() {
            data.extend(filtfilt(&sections, e.trial_channel(t, c), padlen)?);
        }
    }
    e.with_data(data, e.n_channels(), e.n_samples(), e.fs(), e.t0(), e.labels().to_vec())
}

/// Keeps samples `0, factor, 2*factor, ...`; a partial trailing block is dropped.
pub fn downsample(e: &EpochSet, factor: usize) -> Result<EpochSet> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(e.clone());
    }
    let n_out = e.n_samples() / factor;
    if n_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "factor {factor} leaves no samples out of {}",
            e.n_samples()
        )));
    }
    let mut data = Vec::with_capacity(e.n_trials() * e.n_channels() * n_out);
    for t in 0..e.n_trials() {
        for c in 0..e.n_channels() {
            let x = e.trial_channel(t, c);
            data.extend((0..n_out).map(|j| x[j * factor]));
        }
    }
    e.with_data(
        data,
        e.n_channels(),
        n_out,
        e.fs() / factor as f64,
        e.t0(),
        e.labels().to_vec(),
    )
}

/// The fixed epoch pipeline: baseline z-score, then low-pass, then decimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub baseline: Option<TimeWindow>,
    pub lowpass: Option<FilterSpec>,
    pub downsample: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            baseline: Some(TimeWindow {
                start_s: -0.2,
                end_s: 0.0,
            }),
            lowpass: Some(FilterSpec::lowpass(20.0)),
            downsample: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn apply(&self, e: &EpochSet) -> Result<EpochSet> {
        let mut out = match &self.baseline {
            Some(b) => baseline_zscore(e, b)?,
            None => e.clone(),
        };
        if let Some(spec) = &self.lowpass {
            out = lowpass_zerophase(&out, spec)?;
        }
        if self.downsample > 1 {
            if self
                .lowpass
                .is_none_or(|s| s.cutoff_hz >= out.fs() / (2.0 * self.downsample as f64))
            {
                return Err(Error::InvalidConfig(format!(
                    "downsampling by {} needs a low-pass below the new Nyquist {} Hz",
                    self.downsample,
                    out.fs() / (2.0 * self.downsample as f64)
                )));
            }
            out = downsample(&out, self.downsample)?;
        }
        Ok(out)
    }
}
