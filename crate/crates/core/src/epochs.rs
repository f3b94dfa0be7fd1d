//! Epoched trial data and label taxonomy.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of a sample tolerated when mapping window edges to indices.
const EDGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topic {
    Bio,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentenceType {
    Type1,
    Type2,
}

impl SentenceType {
    pub const ALL: [SentenceType; 2] = [SentenceType::Type1, SentenceType::Type2];

    /// Classifier target: Type1 is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            SentenceType::Type1 => 1.0,
            SentenceType::Type2 => -1.0,
        }
    }
}

impl Topic {
    pub const ALL: [Topic; 2] = [Topic::Bio, Topic::Int];
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topic::Bio => f.write_str("Bio"),
            Topic::Int => f.write_str("Int"),
        }
    }
}

impl fmt::Display for SentenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentenceType::Type1 => f.write_str("Type1"),
            SentenceType::Type2 => f.write_str("Type2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialLabel {
    pub topic: Topic,
    pub sentence_type: SentenceType,
}

impl TrialLabel {
    pub const fn new(topic: Topic, sentence_type: SentenceType) -> Self {
        TrialLabel { topic, sentence_type }
    }

    /// Single-byte file code: 0=Bio/Type1, 1=Bio/Type2, 2=Int/Type1, 3=Int/Type2.
    pub fn code(self) -> u8 {
        let t = match self.topic {
            Topic::Bio => 0,
            Topic::Int => 2,
        };
        let s = match self.sentence_type {
            SentenceType::Type1 => 0,
            SentenceType::Type2 => 1,
        };
        t + s
    }

    pub fn from_code(code: u8) -> Result<Self> {
        let (topic, sentence_type) = match code {
            0 => (Topic::Bio, SentenceType::Type1),
            1 => (Topic::Bio, SentenceType::Type2),
            2 => (Topic::Int, SentenceType::Type1),
            3 => (Topic::Int, SentenceType::Type2),
            c => return Err(Error::UnknownLabelCode(c)),
        };
        Ok(TrialLabel::new(topic, sentence_type))
    }
}

/// Half-open time interval `[start_s, end_s)` in seconds relative to onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl TimeWindow {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite()) || start_s >= end_s {
            return Err(Error::InvalidWindow {
                start: start_s,
                end: end_s,
                reason: "start must be finite and strictly before end".into(),
            });
        }
        Ok(TimeWindow { start_s, end_s })
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Indices of samples whose time `t0 + s/fs` lies in the window.
    /// Errors when no sample of the epoch falls inside.
    pub fn sample_range(&self, t0: f64, fs: f64, n_samples: usize) -> Result<Range<usize>> {
        let first = ((self.start_s - t0) * fs - EDGE_TOL).ceil();
        let last = ((self.end_s - t0) * fs - EDGE_TOL).ceil();
        let lo = first.clamp(0.0, n_samples as f64) as usize;
        let hi = last.clamp(0.0, n_samples as f64) as usize;
        if lo >= hi {
            return Err(Error::InvalidWindow {
                start: self.start_s,
                end: self.end_s,
                reason: format!("no samples inside epoch span [{t0}, {})", t0 + n_samples as f64 / fs),
            });
        }
        Ok(lo..hi)
    }
}

impl FromStr for TimeWindow {
    type Err = Error;

    /// Parses `start:end` in seconds, e.g. `-0.2:0` or `0.3:0.6`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected start:end, got {s:?}"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        TimeWindow::new(a, b)
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_s, self.end_s)
    }
}

/// A subject's epoched trials.
///
/// Data is stored trial-major, then channel, then sample, so each trial is one
/// contiguous `n_channels * n_samples` block.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    data: Vec<f64>,
    n_trials: usize,
    n_channels: usize,
    n_samples: usize,
    fs: f64,
    t0: f64,
    labels: Vec<TrialLabel>,
    subject_id: String,
}

impl EpochSet {
    pub fn new(
        data: Vec<f64>,
        n_channels: usize,
        n_samples: usize,
        fs: f64,
        t0: f64,
        labels: Vec<TrialLabel>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::DimensionMismatch(format!(
                "n_channels={n_channels}, n_samples={n_samples}; both must be >= 1"
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling rate {fs} must be > 0")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("t0 must be finite".into()));
        }
        let n_trials = labels.len();
        let block = n_channels * n_samples;
        if data.len() != n_trials * block {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} trials x {} channels x {} samples",
                data.len(),
                n_trials,
                n_channels,
                n_samples
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                trial: pos / block,
                channel: (pos % block) / n_samples,
                sample: pos % n_samples,
            });
        }
        Ok(EpochSet {
            data,
            n_trials,
            n_channels,
            n_samples,
            fs,
            t0,
            labels,
            subject_id: subject_id.into(),
        })
    }

    /// Same metadata, new data of possibly different shape. Used by transforms
    /// that already guarantee finiteness.
    pub(crate) fn with_data(
        &self,
        data: Vec<f64>,
        n_channels: usize,
        n_samples: usize,
        fs: f64,
        t0: f64,
        labels: Vec<TrialLabel>,
    ) -> Result<Self> {
        EpochSet::new(data, n_channels, n_samples, fs, t0, labels, self.subject_id.clone())
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn labels(&self) -> &[TrialLabel] {
        &self.labels
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn trial_len(&self) -> usize {
        self.n_channels * self.n_samples
    }

    /// One trial as a `n_channels * n_samples` row-major matrix.
    pub fn trial(&self, i: usize) -> &[f64] {
        let b = self.trial_len();
        &self.data[i * b..(i + 1) * b]
    }

    pub fn trial_channel(&self, trial: usize, channel: usize) -> &[f64] {
        let start = trial * self.trial_len() + channel * self.n_samples;
        &self.data[start..start + self.n_samples]
    }

    pub fn time_of(&self, sample: usize) -> f64 {
        self.t0 + sample as f64 / self.fs
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|s| self.time_of(s)).collect()
    }

    /// End of the epoch span (exclusive).
    pub fn t_end(&self) -> f64 {
        self.time_of(self.n_samples)
    }

    pub fn window_range(&self, w: &TimeWindow) -> Result<Range<usize>> {
        w.sample_range(self.t0, self.fs, self.n_samples)
    }

    pub fn count(&self, pred: impl Fn(&TrialLabel) -> bool) -> usize {
        self.labels.iter().filter(|l| pred(l)).count()
    }

    /// Indices of trials whose label satisfies `pred`, in original order.
    pub fn indices_where(&self, pred: impl Fn(&TrialLabel) -> bool) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| pred(l))
            .map(|(i, _)| i)
            .collect()
    }

    /// Trials whose labels satisfy the filter, order preserved.
    pub fn select_trials(&self, pred: impl Fn(&TrialLabel) -> bool) -> EpochSet {
        let idx = self.indices_where(pred);
        self.subset(&idx)
    }

    /// Trials at the given indices (repeats allowed), in the given order.
    pub fn subset(&self, indices: &[usize]) -> EpochSet {
        let mut data = Vec::with_capacity(indices.len() * self.trial_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.trial(i));
            labels.push(self.labels[i]);
        }
        EpochSet {
            data,
            n_trials: indices.len(),
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            fs: self.fs,
            t0: self.t0,
            labels,
            subject_id: self.subject_id.clone(),
        }
    }

    /// Samples with `t` in `[w.start_s, w.end_s)`; new `t0` is the first kept sample.
    pub fn crop(&self, w: &TimeWindow) -> Result<EpochSet> {
        let r = self.window_range(w)?;
        Ok(self.crop_samples(r))
    }

    pub fn crop_samples(&self, r: Range<usize>) -> EpochSet {
        let len = r.end - r.start;
        let mut data = Vec::with_capacity(self.n_trials * self.n_channels * len);
        for t in 0..self.n_trials {
            for c in 0..self.n_channels {
                data.extend_from_slice(&self.trial_channel(t, c)[r.clone()]);
            }
        }
        EpochSet {
            data,
            n_trials: self.n_trials,
            n_channels: self.n_channels,
            n_samples: len,
            fs: self.fs,
            t0: self.time_of(r.start),
            labels: self.labels.clone(),
            subject_id: self.subject_id.clone(),
        }
    }

    /// Elementwise mean of the given trials, `n_channels * n_samples`.
    pub fn mean_of(&self, indices: &[usize]) -> Vec<f64> {
        let mut acc = vec![0.0; self.trial_len()];
        for &i in indices {
            for (a, &x) in acc.iter_mut().zip(self.trial(i)) {
                *a += x;
            }
        }
        let n = indices.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}
