//! wasm-bindgen bindings behind `www/index.html`.
//!
//! A [`Demo`] holds one preprocessed synthetic subject. The page calls three
//! operations on it: topic ERP differences, bootstrap sub-averages and
//! window decoding under each sampling scheme.

use wasm_bindgen::prelude::*;

use neuroboot::bootstrap::{augment_traced, build_weight_vector, BootstrapPlan, Scheme, TopicWeights};
use neuroboot::decode::report::Condition;
use neuroboot::decode::{decode_window, DecodeConfig};
use neuroboot::metrics::{compute_erp, delta_erp};
use neuroboot::preprocess::PreprocessConfig;
use neuroboot::synthgen::{generate_subject, SynthConfig};
use neuroboot::{EpochSet, RngSeed, SentenceType, TimeWindow, Topic};

const SIGNAL: TimeWindow = TimeWindow {
    start_s: 0.3,
    end_s: 0.6,
};

fn js(e: neuroboot::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn scheme(name: &str) -> Result<Scheme, JsError> {
    name.parse().map_err(js)
}

/// Channel mean of one trial, per sample.
fn channel_mean(e: &EpochSet, trial: usize) -> Vec<f64> {
    let (nc, ns) = (e.n_channels(), e.n_samples());
    let mut out = vec![0.0; ns];
    for c in 0..nc {
        for (o, v) in out.iter_mut().zip(e.trial_channel(trial, c)) {
            *o += v / nc as f64;
        }
    }
    out
}

#[wasm_bindgen]
pub struct Demo {
    subject: EpochSet,
}

#[wasm_bindgen]
impl Demo {
    /// Simulates and preprocesses one subject.
    #[wasm_bindgen(constructor)]
    pub fn new(
        effect_bio: f64,
        effect_int: f64,
        noise_sd: f64,
        trials_per_cell: usize,
        seed: u64,
    ) -> Result<Demo, JsError> {
        let cfg = SynthConfig {
            n_subjects: 1,
            n_trials_per_cell: trials_per_cell,
            effect_bio,
            effect_int,
            noise_sd,
            seed: RngSeed(seed),
            ..SynthConfig::default()
        };
        let raw = generate_subject(&cfg, 0).map_err(js)?;
        let subject = PreprocessConfig::default().apply(&raw).map_err(js)?;
        Ok(Demo { subject })
    }

    pub fn times(&self) -> Vec<f64> {
        self.subject.times()
    }

    /// Channel-mean Type1 − Type2 ERP of one topic (`"Bio"` or `"Int"`).
    pub fn erp_difference(&self, topic: &str) -> Result<Vec<f64>, JsError> {
        let topic = match topic {
            "Bio" => Topic::Bio,
            "Int" => Topic::Int,
            other => return Err(JsError::new(&format!("unknown topic {other}"))),
        };
        let set = self.subject.select_trials(|l| l.topic == topic);
        let pair = compute_erp(&set).map_err(js)?;
        let ns = set.n_samples();
        let nc = set.n_channels();
        let (a, b) = (&pair.erp_type1, &pair.erp_type2);
        Ok((0..ns)
            .map(|s| (0..nc).map(|c| a.channel(c)[s] - b.channel(c)[s]).sum::<f64>() / nc as f64)
            .collect())
    }

    /// Signal-window ΔERP of each topic, `[bio, int]`.
    pub fn delta_erps(&self) -> Result<Vec<f64>, JsError> {
        [Topic::Bio, Topic::Int]
            .iter()
            .map(|&t| {
                let set = self.subject.select_trials(|l| l.topic == t);
                compute_erp(&set).and_then(|p| delta_erp(&p, &SIGNAL)).map_err(js)
            })
            .collect()
    }

    /// Draws `l` sub-averages of `k` trials and returns a flat
    /// `[int_share, type1 curve.., type2 curve..]` vector: the share of
    /// draws that came from Int trials, then the channel-mean average of
    /// the Type1 and of the Type2 sub-averages.
    pub fn bootstrap(&self, scheme_name: &str, k: usize, l: usize, w_int: f64, seed: u64) -> Result<Vec<f64>, JsError> {
        let e = &self.subject;
        let weights = TopicWeights { w_bio: 1.0, w_int };
        let wv = build_weight_vector(e.labels(), weights, scheme(scheme_name)?, RngSeed(seed)).map_err(js)?;
        let plan = BootstrapPlan::new(k, l, RngSeed(seed).derive(&[1]));
        let (aug, _) = augment_traced(e, &wv, &plan).map_err(js)?;
        let int_share = aug.count(|lab| lab.topic == Topic::Int) as f64 / aug.n_trials() as f64;
        let mut out = vec![int_share];
        for ty in SentenceType::ALL {
            let idx = aug.indices_where(|lab| lab.sentence_type == ty);
            let mut curve = vec![0.0; aug.n_samples()];
            for &i in &idx {
                for (c, v) in curve.iter_mut().zip(channel_mean(&aug, i)) {
                    *c += v / idx.len() as f64;
                }
            }
            out.extend(curve);
        }
        Ok(out)
    }

    /// Mean cross-validated window accuracy for one scheme.
    pub fn decode(&self, scheme_name: &str, k: usize, l: usize, w_int: f64, seed: u64) -> Result<f64, JsError> {
        let cfg = DecodeConfig {
            condition: Condition::BioInt,
            scheme: scheme(scheme_name)?,
            k,
            l,
            weights: TopicWeights { w_bio: 1.0, w_int },
            seed: RngSeed(seed),
            ..DecodeConfig::default()
        };
        let out = decode_window(&self.subject, &SIGNAL, &cfg, None).map_err(js)?;
        let acc: Vec<f64> = out.rows.iter().map(|r| r.accuracy).collect();
        Ok(acc.iter().sum::<f64>() / acc.len() as f64)
    }
}
