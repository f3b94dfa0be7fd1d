//! Synthetic two-topic, two-type ERP cohorts with known effect sizes.
//!
//! Each trial is a sum of `spatial_rank` fixed orthonormal channel patterns,
//! each carrying a class-independent ERP waveform plus a Gaussian bump whose
//! sign depends on sentence type (`+effect/2` for Type1, `-effect/2` for
//! Type2). Everything is scaled by a per-subject lognormal gain and buried in
//! Gaussian noise (white, or AR(1) when `ar1 != 0`). Pre-stimulus samples
//! carry noise only.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, SentenceType, TimeWindow, Topic, TrialLabel};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Trials per topic x type cell; each subject gets four cells.
    pub n_trials_per_cell: usize,
    pub n_channels: usize,
    pub fs: f64,
    pub epoch_span: TimeWindow,
    pub erp_latency_s: f64,
    /// Standard deviation of the Gaussian bump, seconds.
    pub erp_width_s: f64,
    pub effect_bio: f64,
    pub effect_int: f64,
    pub noise_sd: f64,
    pub spatial_rank: usize,
    pub subject_jitter: f64,
    /// AR(1) coefficient of the per-channel noise; 0 gives white noise.
    pub ar1: f64,
    pub seed: RngSeed,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 20,
            n_trials_per_cell: 40,
            n_channels: 47,
            fs: 250.0,
            epoch_span: TimeWindow {
                start_s: -0.2,
                end_s: 1.5,
            },
            erp_latency_s: 0.45,
            erp_width_s: 0.15,
            effect_bio: 0.3,
            effect_int: 0.9,
            noise_sd: 1.0,
            spatial_rank: 3,
            subject_jitter: 0.2,
            ar1: 0.0,
            seed: RngSeed(7),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_subjects == 0 || self.n_trials_per_cell == 0 {
            return bad("n_subjects and n_trials_per_cell must be >= 1".into());
        }
        if self.n_channels == 0 {
            return bad("n_channels must be >= 1".into());
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return bad(format!("fs {} must be > 0", self.fs));
        }
        TimeWindow::new(self.epoch_span.start_s, self.epoch_span.end_s)?;
        if self.n_samples() == 0 {
            return bad("epoch span shorter than one sample".into());
        }
        if !(self.effect_bio >= 0.0 && self.effect_int >= 0.0) {
            return bad("effects must be >= 0".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return bad(format!("noise_sd {} must be > 0", self.noise_sd));
        }
        if self.spatial_rank == 0 || self.spatial_rank > self.n_channels {
            return bad(format!(
                "spatial_rank {} must be in 1..={}",
                self.spatial_rank, self.n_channels
            ));
        }
        if !(self.erp_width_s > 0.0 && self.erp_latency_s.is_finite()) {
            return bad("erp_width_s must be > 0".into());
        }
        if !(self.subject_jitter >= 0.0 && self.subject_jitter.is_finite()) {
            return bad("subject_jitter must be >= 0".into());
        }
        if !(self.ar1.abs() < 1.0) {
            return bad(format!("ar1 {} must satisfy |ar1| < 1", self.ar1));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.epoch_span.duration() * self.fs).round() as usize
    }

    pub fn effect(&self, topic: Topic) -> f64 {
        match topic {
            Topic::Bio => self.effect_bio,
            Topic::Int => self.effect_int,
        }
    }

    pub fn time_of(&self, sample: usize) -> f64 {
        self.epoch_span.start_s + sample as f64 / self.fs
    }

    /// Unit-peak Gaussian bump; zero before stimulus onset.
    pub fn bump(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let z = (t - self.erp_latency_s) / self.erp_width_s;
        (-0.5 * z * z).exp()
    }

    /// Fixed orthonormal spatial patterns, `spatial_rank` rows of `n_channels`.
    /// Each pattern is signed so that its channel sum is non-negative.
    pub fn patterns(&self) -> Vec<Vec<f64>> {
        let mut rng = self.seed.derive_rng(&[stream::PATTERNS]);
        let n = self.n_channels;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.spatial_rank);
        while out.len() < self.spatial_rank {
            let offset = if out.is_empty() { 1.0 } else { 0.0 };
            let mut v: Vec<f64> = (0..n)
                .map(|_| offset + 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            // two Gram-Schmidt passes for numerical orthogonality
            for _ in 0..2 {
                for u in &out {
                    let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            v.iter_mut().for_each(|x| *x *= sign / norm);
            out.push(v);
        }
        out
    }

    /// Class-independent ERP waveform carried by pattern `r`.
    pub fn base_waveform(&self, r: usize, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let g = |c: f64, w: f64| (-0.5 * ((t - c) / w).powi(2)).exp();
        let gain = 1.0 / (1.0 + (r / 3) as f64);
        gain * match r % 3 {
            0 => 1.2 * g(0.10, 0.03) - 0.9 * g(0.20, 0.05) + 0.4 * g(0.70, 0.20),
            1 => -1.0 * g(0.17, 0.04) + 0.7 * g(0.32, 0.08),
            _ => 0.8 * g(0.28, 0.10) - 0.5 * g(0.90, 0.25),
        }
    }

    /// Noise-free mean trial for one cell, `n_channels * n_samples`, unit subject gain.
    pub fn mean_trial(&self, label: TrialLabel) -> Vec<f64> {
        let patterns = self.patterns();
        self.template(&patterns, label)
    }

    fn template(&self, patterns: &[Vec<f64>], label: TrialLabel) -> Vec<f64> {
        let n_samples = self.n_samples();
        let half = 0.5 * self.effect(label.topic) * label.sentence_type.sign();
        let coeffs: Vec<Vec<f64>> = (0..patterns.len())
            .map(|r| {
                (0..n_samples)
                    .map(|s| {
                        let t = self.time_of(s);
                        self.base_waveform(r, t) + half * self.bump(t)
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![0.0; self.n_channels * n_samples];
        for (r, p) in patterns.iter().enumerate() {
            for (c, &pc) in p.iter().enumerate() {
                let row = &mut out[c * n_samples..(c + 1) * n_samples];
                row.iter_mut().zip(&coeffs[r]).for_each(|(o, &w)| *o += pc * w);
            }
        }
        out
    }

    /// Lognormal gain of one subject (mean one).
    pub fn subject_scale(&self, subject_index: usize) -> f64 {
        let mut rng = self.subject_rng(subject_index);
        self.draw_scale(&mut rng)
    }

    fn subject_rng(&self, subject_index: usize) -> Rng {
        self.seed.derive_rng(&[stream::SUBJECT, subject_index as u64])
    }

    fn draw_scale(&self, rng: &mut Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let s = self.subject_jitter;
        (s * z - 0.5 * s * s).exp()
    }

    /// Trial order: all Bio/Type1, Bio/Type2, Int/Type1, Int/Type2 cells in turn.
    pub fn labels(&self) -> Vec<TrialLabel> {
        let mut labels = Vec::with_capacity(4 * self.n_trials_per_cell);
        for topic in Topic::ALL {
            for ty in SentenceType::ALL {
                labels.extend(std::iter::repeat_n(TrialLabel::new(topic, ty), self.n_trials_per_cell));
            }
        }
        labels
    }
}

pub fn subject_id(index: usize) -> String {
    format!("sub-{index:03}")
}

pub fn generate_subject(cfg: &SynthConfig, subject_index: usize) -> Result<EpochSet> {
    cfg.validate()?;
    if subject_index >= cfg.n_subjects {
        return Err(Error::InvalidConfig(format!(
            "subject index {subject_index} >= n_subjects {}",
            cfg.n_subjects
        )));
    }
    let patterns = cfg.patterns();
    let n_samples = cfg.n_samples();
    let block = cfg.n_channels * n_samples;
    let mut rng = cfg.subject_rng(subject_index);
    let scale = cfg.draw_scale(&mut rng);

    let labels = cfg.labels();
    let mut data = Vec::with_capacity(labels.len() * block);
    let innovation = (1.0 - cfg.ar1 * cfg.ar1).sqrt() * cfg.noise_sd;
    let mut cached: Option<(TrialLabel, Vec<f64>)> = None;
    for &label in &labels {
        if cached.as_ref().is_none_or(|(l, _)| *l != label) {
            let mut t = cfg.template(&patterns, label);
            t.iter_mut().for_each(|v| *v *= scale);
            cached = Some((label, t));
        }
        let template = &cached.as_ref().unwrap().1;
        for c in 0..cfg.n_channels {
            let row = &template[c * n_samples..(c + 1) * n_samples];
            let mut prev = cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
            for (s, &m) in row.iter().enumerate() {
                if s > 0 {
                    prev = cfg.ar1 * prev + innovation * rng.sample::<f64, _>(StandardNormal);
                }
                data.push(m + prev);
            }
        }
    }
    EpochSet::new(
        data,
        cfg.n_channels,
        n_samples,
        cfg.fs,
        cfg.epoch_span.start_s,
        labels,
        subject_id(subject_index),
    )
}
