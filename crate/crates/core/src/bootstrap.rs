//! Reliability-weighted bootstrap augmentation.
//!
//! Trials of each topic get a common weight derived from how strongly that
//! topic separates the two sentence types in *other* subjects (`w_bio = 1`,
//! `w_int = mean|ΔERP_Int| / mean|ΔERP_Bio|`). Weights are normalised into
//! sampling probabilities, `k` trials are drawn with replacement (a
//! multinomial count vector), and the augmented trial is the count-weighted
//! mean `(1/k) Σ_i N_i x_i`. Repeating this `L` times yields `L` synthetic
//! trials.
//!
//! Three schemes are supported: uniform (all weights one), weighted, and a
//! shuffled null that permutes the weighted vector across trials.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, SentenceType, TimeWindow, Topic, TrialLabel};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng::{stream, Rng, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Weighted,
    #[serde(rename = "shuffled")]
    RandomShuffled,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Uniform, Scheme::Weighted, Scheme::RandomShuffled];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Weighted => "weighted",
            Scheme::RandomShuffled => "shuffled",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Scheme::Uniform),
            "weighted" => Ok(Scheme::Weighted),
            "shuffled" | "random-shuffled" | "random" => Ok(Scheme::RandomShuffled),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme {other:?} (uniform|weighted|shuffled)"
            ))),
        }
    }
}

/// Per-topic trial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicWeights {
    pub w_bio: f64,
    pub w_int: f64,
}

impl TopicWeights {
    pub const EQUAL: TopicWeights = TopicWeights { w_bio: 1.0, w_int: 1.0 };

    pub fn of(&self, topic: Topic) -> f64 {
        match topic {
            Topic::Bio => self.w_bio,
            Topic::Int => self.w_int,
        }
    }
}

/// Per-subject |ΔERP| of each topic, the input to weight estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicDeltas {
    pub bio: f64,
    pub int: f64,
}

/// Signed ΔERP of each topic over the signal window.
pub fn topic_deltas(e: &EpochSet, signal: &TimeWindow) -> Result<TopicDeltas> {
    let delta = |topic: Topic| -> Result<f64> {
        let sub = e.select_trials(|l| l.topic == topic);
        metrics::delta_erp(&metrics::compute_erp(&sub)?, signal)
            .map_err(|err| err.at("delta_erp", format!("{} {topic}", e.subject_id())))
    };
    Ok(TopicDeltas {
        bio: delta(Topic::Bio)?,
        int: delta(Topic::Int)?,
    })
}

/// `w_bio = 1`, `w_int = mean|ΔERP_Int| / mean|ΔERP_Bio|` across subjects.
pub fn weights_from_deltas(deltas: &[TopicDeltas]) -> Result<TopicWeights> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument(
            "weight estimation needs at least one other subject".into(),
        ));
    }
    let n = deltas.len() as f64;
    let bio = deltas.iter().map(|d| d.bio.abs()).sum::<f64>() / n;
    let int = deltas.iter().map(|d| d.int.abs()).sum::<f64>() / n;
    if !(bio > 0.0) {
        return Err(Error::DegenerateDenominator("mean |ΔERP_Bio| is zero".into()));
    }
    Ok(TopicWeights {
        w_bio: 1.0,
        w_int: int / bio,
    })
}

/// Weight estimation from the other subjects' epochs.
pub fn estimate_weights(others: &[EpochSet], signal: &TimeWindow) -> Result<TopicWeights> {
    let deltas = others
        .iter()
        .map(|e| topic_deltas(e, signal))
        .collect::<Result<Vec<_>>>()?;
    weights_from_deltas(&deltas)
}

/// Leave-one-out weights: entry `i` is estimated from every subject but `i`.
pub fn leave_one_out_weights(deltas: &[TopicDeltas]) -> Result<Vec<TopicWeights>> {
    (0..deltas.len())
        .map(|i| {
            let others: Vec<TopicDeltas> = deltas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| *d)
                .collect();
            weights_from_deltas(&others)
        })
        .collect()
}

/// Trial weights and their normalised sampling probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    probs: Vec<f64>,
    scheme: Scheme,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, scheme: Scheme) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("at least one weight must be positive".into()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(WeightVector { weights, probs, scheme })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The sub-vector over `indices`, renormalised.
    pub fn restrict(&self, indices: &[usize]) -> Result<WeightVector> {
        WeightVector::new(indices.iter().map(|&i| self.weights[i]).collect(), self.scheme)
    }
}

pub fn build_weight_vector(
    labels: &[TrialLabel],
    w: TopicWeights,
    scheme: Scheme,
    seed: RngSeed,
) -> Result<WeightVector> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no trials to weight".into()));
    }
    let mut weights: Vec<f64> = match scheme {
        Scheme::Uniform => vec![1.0; labels.len()],
        Scheme::Weighted | Scheme::RandomShuffled => labels.iter().map(|l| w.of(l.topic)).collect(),
    };
    if scheme == Scheme::RandomShuffled {
        weights.shuffle(&mut seed.derive_rng(&[stream::SHUFFLE]));
    }
    WeightVector::new(weights, scheme)
}

/// Inverse-CDF categorical sampler, one uniform per draw.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Sampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Sampler { cdf, last_positive }
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }

    /// Multinomial count vector from `k` independent draws.
    pub fn counts(&self, k: usize, rng: &mut Rng) -> Vec<usize> {
        let mut n = vec![0usize; self.cdf.len()];
        for _ in 0..k {
            n[self.draw(rng)] += 1;
        }
        n
    }
}

pub fn draw_counts(wv: &WeightVector, k: usize, seed: RngSeed) -> Vec<usize> {
    Sampler::new(wv.probs()).counts(k, &mut seed.rng())
}

/// `(1/k) Σ_i N_i x_i` over the trials of `e`.
pub fn sub_average(e: &EpochSet, counts: &[usize], k: usize) -> Result<Vec<f64>> {
    if counts.len() != e.n_trials() {
        return Err(Error::DimensionMismatch(format!(
            "{} counts for {} trials",
            counts.len(),
            e.n_trials()
        )));
    }
    let sum: usize = counts.iter().sum();
    if sum != k || k == 0 {
        return Err(Error::CountMismatch { sum, k });
    }
    Ok(weighted_sum(e, counts.iter().enumerate().map(|(i, &n)| (i, n)), k))
}

fn weighted_sum(e: &EpochSet, picks: impl Iterator<Item = (usize, usize)>, k: usize) -> Vec<f64> {
    let mut acc = vec![0.0; e.trial_len()];
    for (i, n) in picks {
        if n == 0 {
            continue;
        }
        let w = n as f64;
        for (a, &x) in acc.iter_mut().zip(e.trial(i)) {
            *a += w * x;
        }
    }
    let k = k as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    /// Trials per sub-average.
    pub k: usize,
    /// Number of augmented trials.
    pub l: usize,
    pub seed: RngSeed,
    /// Sample each sentence type from its own trials only.
    pub per_class: bool,
}

impl BootstrapPlan {
    pub fn new(k: usize, l: usize, seed: RngSeed) -> Self {
        BootstrapPlan {
            k,
            l,
            seed,
            per_class: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::InvalidArgument("k and L must be >= 1".into()));
        }
        if self.per_class && !self.l.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "per-class augmentation needs an even L, got {}",
                self.l
            )));
        }
        Ok(())
    }
}

/// Generates `plan.l` augmented trials. Per-class plans emit `l/2` Type1
/// trials followed by `l/2` Type2 trials. Topic labels follow the majority
/// of the drawn trials (ties go to Bio).
pub fn augment(e: &EpochSet, wv: &WeightVector, plan: &BootstrapPlan) -> Result<EpochSet> {
    augment_traced(e, wv, plan).map(|(out, _)| out)
}

/// [`augment`] that also reports which source trials were drawn at least once.
pub fn augment_traced(e: &EpochSet, wv: &WeightVector, plan: &BootstrapPlan) -> Result<(EpochSet, Vec<usize>)> {
    plan.validate()?;
    if wv.len() != e.n_trials() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} trials",
            wv.len(),
            e.n_trials()
        )));
    }
    let pools: Vec<(u64, Vec<usize>, usize)> = if plan.per_class {
        SentenceType::ALL
            .iter()
            .enumerate()
            .map(|(ci, &ty)| {
                let idx = e.indices_where(|l| l.sentence_type == ty);
                if idx.is_empty() {
                    return Err(Error::EmptyClass(ty.to_string()));
                }
                Ok((ci as u64, idx, plan.l / 2))
            })
            .collect::<Result<_>>()?
    } else {
        vec![(2, (0..e.n_trials()).collect(), plan.l)]
    };

    let mut data = Vec::with_capacity(plan.l * e.trial_len());
    let mut labels = Vec::with_capacity(plan.l);
    let mut used = vec![false; e.n_trials()];
    for (tag, idx, count) in &pools {
        let sub_wv = wv.restrict(idx)?;
        let sampler = Sampler::new(sub_wv.probs());
        let make = |b: usize| {
            let mut rng = plan.seed.derive_rng(&[stream::AUGMENT, *tag, b as u64]);
            let n = sampler.counts(plan.k, &mut rng);
            let trial = weighted_sum(e, idx.iter().copied().zip(n.iter().copied()), plan.k);
            (trial, majority_label(e, idx, &n), n)
        };
        let made: Vec<(Vec<f64>, TrialLabel, Vec<usize>)> = crate::par::map_range(*count, make);
        for (trial, label, n) in made {
            data.extend(trial);
            labels.push(label);
            for (&i, &c) in idx.iter().zip(&n) {
                used[i] |= c > 0;
            }
        }
    }
    let out = e.with_data(data, e.n_channels(), e.n_samples(), e.fs(), e.t0(), labels)?;
    let used = used.iter().enumerate().filter(|(_, &u)| u).map(|(i, _)| i).collect();
    Ok((out, used))
}

fn majority_label(e: &EpochSet, idx: &[usize], counts: &[usize]) -> TrialLabel {
    let mut topic = [0usize; 2];
    let mut ty = [0usize; 2];
    for (&i, &n) in idx.iter().zip(counts) {
        let l = e.labels()[i];
        topic[(l.topic == Topic::Int) as usize] += n;
        ty[(l.sentence_type == SentenceType::Type2) as usize] += n;
    }
    TrialLabel::new(
        if topic[1] > topic[0] { Topic::Int } else { Topic::Bio },
        if ty[1] > ty[0] {
            SentenceType::Type2
        } else {
            SentenceType::Type1
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BIO1: TrialLabel = TrialLabel::new(Topic::Bio, SentenceType::Type1);
    const BIO2: TrialLabel = TrialLabel::new(Topic::Bio, SentenceType::Type2);
    const INT1: TrialLabel = TrialLabel::new(Topic::Int, SentenceType::Type1);
    const INT2: TrialLabel = TrialLabel::new(Topic::Int, SentenceType::Type2);

    fn set(labels: Vec<TrialLabel>, len: usize) -> EpochSet {
        let n = labels.len();
        let data = (0..n * len).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        EpochSet::new(data, 1, len, 100.0, 0.0, labels, "s").unwrap()
    }

    #[test]
    fn weights_from_delta_ratio() {
        let d = [TopicDeltas { bio: 0.3, int: -0.6 }];
        let w = weights_from_deltas(&d).unwrap();
        assert_eq!(w.w_bio, 1.0);
        assert!((w.w_int - 2.0).abs() < 1e-12);
        let same = weights_from_deltas(&[TopicDeltas { bio: 0.4, int: 0.4 }]).unwrap();
        assert_eq!(same, TopicWeights::EQUAL);
        assert!(matches!(
            weights_from_deltas(&[TopicDeltas { bio: 0.0, int: 0.4 }]),
            Err(Error::DegenerateDenominator(_))
        ));
        assert!(weights_from_deltas(&[]).is_err());
    }

    #[test]
    fn leave_one_out_excludes_self() {
        let d = [
            TopicDeltas { bio: 1.0, int: 1.0 },
            TopicDeltas { bio: 1.0, int: 3.0 },
            TopicDeltas { bio: 1.0, int: 5.0 },
        ];
        let w = leave_one_out_weights(&d).unwrap();
        assert_eq!(w.iter().map(|w| w.w_int).collect::<Vec<_>>(), vec![4.0, 3.0, 2.0]);
    }

    #[test]
    fn weighted_probs_follow_topic_weights() {
        let labels = [BIO1, BIO2, INT1, INT2];
        let w = TopicWeights { w_bio: 1.0, w_int: 3.0 };
        let wv = build_weight_vector(&labels, w, Scheme::Weighted, RngSeed(1)).unwrap();
        assert_eq!(wv.probs(), &[0.125, 0.125, 0.375, 0.375]);
        let u = build_weight_vector(&labels, w, Scheme::Uniform, RngSeed(1)).unwrap();
        assert_eq!(u.probs(), &[0.25; 4]);
    }

    #[test]
    fn shuffled_preserves_multiset() {
        let labels = [BIO1, BIO2, INT1, INT2];
        let w = TopicWeights { w_bio: 1.0, w_int: 3.0 };
        for s in 0..20 {
            let wv = build_weight_vector(&labels, w, Scheme::RandomShuffled, RngSeed(s)).unwrap();
            let mut p = wv.probs().to_vec();
            p.sort_by(f64::total_cmp);
            assert_eq!(p, vec![0.125, 0.125, 0.375, 0.375]);
        }
    }

    #[test]
    fn empty_labels_rejected() {
        assert!(build_weight_vector(&[], TopicWeights::EQUAL, Scheme::Uniform, RngSeed(0)).is_err());
    }

    #[test]
    fn draw_counts_edge_cases() {
        let wv = WeightVector::new(vec![1.0, 0.0, 0.0], Scheme::Weighted).unwrap();
        assert_eq!(draw_counts(&wv, 5, RngSeed(3)), vec![5, 0, 0]);
        assert_eq!(draw_counts(&wv, 0, RngSeed(3)), vec![0, 0, 0]);
        let tail = WeightVector::new(vec![0.0, 0.0, 2.0], Scheme::Weighted).unwrap();
        assert_eq!(draw_counts(&tail, 7, RngSeed(9)), vec![0, 0, 7]);
    }

    #[test]
    fn sub_average_cases() {
        let e = set(vec![BIO1, BIO1, INT1], 4);
        let one = sub_average(&e, &[0, 1, 0], 1).unwrap();
        assert_eq!(one, e.trial(1));
        let mean = sub_average(&e, &[1, 1, 0], 2).unwrap();
        for s in 0..4 {
            assert_eq!(mean[s], (e.trial(0)[s] + e.trial(1)[s]) / 2.0);
        }
        let skew = sub_average(&e, &[3, 1, 0], 4).unwrap();
        for s in 0..4 {
            let picks = [e.trial(0)[s], e.trial(0)[s], e.trial(0)[s], e.trial(1)[s]];
            let oracle = picks.iter().sum::<f64>() / 4.0;
            assert!((skew[s] - oracle).abs() < 1e-12);
            assert!((skew[s] - (0.75 * e.trial(0)[s] + 0.25 * e.trial(1)[s])).abs() < 1e-12);
        }
        assert!(matches!(
            sub_average(&e, &[1, 1, 0], 3),
            Err(Error::CountMismatch { sum: 2, k: 3 })
        ));
    }

    #[test]
    fn augment_balances_classes() {
        let e = set(vec![BIO1, BIO2, INT1, INT2, BIO1, INT2], 5);
        let wv = build_weight_vector(e.labels(), TopicWeights::EQUAL, Scheme::Uniform, RngSeed(0)).unwrap();
        let out = augment(&e, &wv, &BootstrapPlan::new(8, 250, RngSeed(4))).unwrap();
        assert_eq!(out.n_trials(), 250);
        assert_eq!(out.count(|l| l.sentence_type == SentenceType::Type1), 125);
        assert!(out.labels()[..125]
            .iter()
            .all(|l| l.sentence_type == SentenceType::Type1));
        assert!(augment(&e, &wv, &BootstrapPlan::new(8, 251, RngSeed(4))).is_err());
        let one_class = set(vec![BIO1, INT1], 3);
        let wv1 = build_weight_vector(one_class.labels(), TopicWeights::EQUAL, Scheme::Uniform, RngSeed(0)).unwrap();
        assert!(matches!(
            augment(&one_class, &wv1, &BootstrapPlan::new(2, 4, RngSeed(0))),
            Err(Error::EmptyClass(_))
        ));
    }

    #[test]
    fn k_one_copies_source_trials() {
        let e = set(vec![BIO1, BIO2, INT1, INT2], 6);
        let wv = build_weight_vector(e.labels(), TopicWeights::EQUAL, Scheme::Uniform, RngSeed(0)).unwrap();
        let out = augment(&e, &wv, &BootstrapPlan::new(1, 4, RngSeed(11))).unwrap();
        for b in 0..out.n_trials() {
            assert!((0..e.n_trials()).any(|i| e.trial(i) == out.trial(b)));
        }
    }

    #[test]
    fn uniform_equals_weighted_with_unit_weight() {
        let e = set(vec![BIO1, BIO2, INT1, INT2, BIO1, BIO2, INT1, INT2], 7);
        let plan = BootstrapPlan::new(8, 20, RngSeed(5));
        let u = build_weight_vector(e.labels(), TopicWeights::EQUAL, Scheme::Uniform, RngSeed(2)).unwrap();
        let w = build_weight_vector(e.labels(), TopicWeights::EQUAL, Scheme::Weighted, RngSeed(2)).unwrap();
        assert_eq!(augment(&e, &u, &plan).unwrap(), augment(&e, &w, &plan).unwrap());
    }

    #[test]
    fn pooled_mode_draws_from_everything() {
        let e = set(vec![BIO1, INT2], 3);
        let wv = build_weight_vector(e.labels(), TopicWeights::EQUAL, Scheme::Uniform, RngSeed(0)).unwrap();
        let plan = BootstrapPlan {
            per_class: false,
            ..BootstrapPlan::new(1, 5, RngSeed(1))
        };
        assert_eq!(augment(&e, &wv, &plan).unwrap().n_trials(), 5);
    }

    proptest! {
        #[test]
        fn probs_normalised_and_scale_invariant(ws in prop::collection::vec(0.0f64..10.0, 1..30), c in 0.001f64..1000.0) {
            prop_assume!(ws.iter().any(|&w| w > 0.0));
            let a = WeightVector::new(ws.clone(), Scheme::Weighted).unwrap();
            let b = WeightVector::new(ws.iter().map(|w| w * c).collect(), Scheme::Weighted).unwrap();
            prop_assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (p, q) in a.probs().iter().zip(b.probs()) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn counts_sum_to_k(ws in prop::collection::vec(0.0f64..5.0, 1..20), k in 0usize..40, seed in any::<u64>()) {
            prop_assume!(ws.iter().any(|&w| w > 0.0));
            let wv = WeightVector::new(ws.clone(), Scheme::Weighted).unwrap();
            let n = draw_counts(&wv, k, RngSeed(seed));
            prop_assert_eq!(n.iter().sum::<usize>(), k);
            for (c, w) in n.iter().zip(&ws) {
                if *w == 0.0 { prop_assert_eq!(*c, 0); }
            }
        }
    }
}
