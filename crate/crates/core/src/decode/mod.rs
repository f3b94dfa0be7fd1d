//! Within-subject cross-validated decoding of sentence type.
//!
//! Per fold: fit the spatial projector on group ERPs (other subjects plus this
//! subject's training trials), project, augment training and test trials
//! separately, standardise features with training statistics, train a linear
//! SVM and score it on the augmented test trials.

pub mod folds;
pub mod report;
pub mod svm;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use folds::{make_folds, FoldPlan};
pub use report::{CellKey, Condition, DecodingReport, DecodingRow, Summary, TimePoint};
pub use svm::{train_linear, train_linear_from, LinearModel, SvmParams};

use crate::bootstrap::{augment_traced, build_weight_vector, BootstrapPlan, Scheme, TopicWeights};
use crate::epochs::{EpochSet, SentenceType, TimeWindow, Topic};
use crate::error::{Error, Result};
use crate::features::{fit_from_blocks, project, SpatialProjector};
use crate::rng::{stream, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub condition: Condition,
    pub scheme: Scheme,
    /// Trials per sub-average.
    pub k: usize,
    /// Augmented trials per fold, split between training and test.
    pub l: usize,
    pub n_folds: usize,
    /// Subsample this many source trials (equal per label cell) first.
    pub source_trials: Option<usize>,
    pub n_components: usize,
    pub svm: SvmParams,
    pub standardize: bool,
    pub weights: TopicWeights,
    pub seed: RngSeed,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            condition: Condition::BioInt,
            scheme: Scheme::Weighted,
            k: 20,
            l: 250,
            n_folds: 5,
            source_trials: None,
            n_components: 3,
            svm: SvmParams::default(),
            standardize: true,
            weights: TopicWeights::EQUAL,
            seed: RngSeed(1),
        }
    }
}

impl DecodeConfig {
    /// `(L_train, L_test)`: the test share is `L / n_folds` rounded to an even
    /// count, so that both splits hold equal Type1 and Type2 trials.
    pub fn split_sizes(&self) -> (usize, usize) {
        let half = ((self.l as f64 / (2.0 * self.n_folds as f64)).round() as usize).max(1);
        let test = 2 * half;
        (self.l.saturating_sub(test), test)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.n_folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.n_folds));
        }
        if !self.l.is_multiple_of(2) {
            return bad(format!("L must be even, got {}", self.l));
        }
        let (tr, te) = self.split_sizes();
        if tr < 2 || te < 2 {
            return bad(format!("L = {} too small for {} folds", self.l, self.n_folds));
        }
        if self.n_components == 0 {
            return bad("n_components must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Timecourse,
    Window(TimeWindow),
}

/// Record of what each fitting step saw in one fold. Indices refer to the
/// trials of the decoded set, see [`DecodeOutput::source_indices`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Trials averaged into the ERPs the projector was fitted on.
    pub projector_fit: Vec<usize>,
    /// Checksum of the ERP blocks handed to the projector fit.
    pub projector_checksum: u64,
    pub train_sources: Vec<usize>,
    pub test_sources: Vec<usize>,
    pub projector: SpatialProjector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub report: DecodingReport,
    pub audits: Vec<FoldAudit>,
    /// Trial indices of the input epochs that formed the decoded set.
    pub source_indices: Vec<usize>,
}

/// Per-type ERP sums over a set of subjects, one entry per condition.
///
/// Each subject contributes its own per-type average, so the group ERP is the
/// mean of subject ERPs rather than of pooled trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupErps {
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_subjects: usize,
    /// `[Type1 sum, Type2 sum]` per condition, indexed like [`Condition::ALL`].
    sums: Vec<[Vec<f64>; 2]>,
}

impl GroupErps {
    pub fn empty(n_channels: usize, n_samples: usize) -> Self {
        let zero = || vec![0.0; n_channels * n_samples];
        GroupErps {
            n_channels,
            n_samples,
            n_subjects: 0,
            sums: Condition::ALL.iter().map(|_| [zero(), zero()]).collect(),
        }
    }

    /// One subject's per-type ERPs under every condition.
    pub fn of_subject(e: &EpochSet) -> Result<Self> {
        let mut g = GroupErps::empty(e.n_channels(), e.n_samples());
        for (ci, c) in Condition::ALL.into_iter().enumerate() {
            for (ti, ty) in SentenceType::ALL.into_iter().enumerate() {
                let idx = e.indices_where(|l| c.includes(l) && l.sentence_type == ty);
                if idx.is_empty() {
                    return Err(Error::EmptyClass(format!("{} {c} {ty}", e.subject_id())));
                }
                g.sums[ci][ti] = e.mean_of(&idx);
            }
        }
        g.n_subjects = 1;
        Ok(g)
    }

    pub fn add(&mut self, other: &GroupErps) -> Result<()> {
        if (self.n_channels, self.n_samples) != (other.n_channels, other.n_samples) {
            return Err(Error::DimensionMismatch("group ERPs of different shape".into()));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(u, v)| *u += v);
            }
        }
        self.n_subjects += other.n_subjects;
        Ok(())
    }

    /// Sum over every subject except `skip`, accumulated in index order.
    pub fn leave_one_out(subjects: &[GroupErps], skip: usize) -> Result<Self> {
        let first = subjects
            .first()
            .ok_or_else(|| Error::InvalidArgument("no subjects".into()))?;
        let mut g = GroupErps::empty(first.n_channels, first.n_samples);
        for (i, s) in subjects.iter().enumerate() {
            if i != skip {
                g.add(s)?;
            }
        }
        Ok(g)
    }

    pub fn sum(&self, condition: Condition, ty: SentenceType) -> &[f64] {
        let ci = Condition::ALL.iter().position(|&c| c == condition).unwrap();
        let ti = (ty == SentenceType::Type2) as usize;
        &self.sums[ci][ti]
    }
}

pub fn decode_timecourse(e: &EpochSet, cfg: &DecodeConfig, others: Option<&GroupErps>) -> Result<DecodingReport> {
    decode_audited(e, Mode::Timecourse, cfg, others).map(|o| o.report)
}

pub fn decode_window(
    e: &EpochSet,
    window: &TimeWindow,
    cfg: &DecodeConfig,
    others: Option<&GroupErps>,
) -> Result<DecodingReport> {
    decode_audited(e, Mode::Window(*window), cfg, others).map(|o| o.report)
}

/// FNV-1a over a stream of 64-bit words.
pub fn checksum(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Stable per-subject seed component.
pub fn subject_key(id: &str) -> u64 {
    checksum(id.bytes().map(u64::from))
}

/// Seeded equal-per-cell subsample of the trials admitted by the condition.
pub fn select_source(e: &EpochSet, cfg: &DecodeConfig) -> Result<Vec<usize>> {
    let admitted = e.indices_where(|l| cfg.condition.includes(l));
    let Some(n) = cfg.source_trials else {
        return Ok(admitted);
    };
    let mut cells = Vec::new();
    for topic in Topic::ALL {
        for ty in SentenceType::ALL {
            let cell: Vec<usize> = admitted
                .iter()
                .copied()
                .filter(|&i| e.labels()[i].topic == topic && e.labels()[i].sentence_type == ty)
                .collect();
            if !cell.is_empty() {
                cells.push((topic, ty, cell));
            }
        }
    }
    if cells.is_empty() || n % cells.len() != 0 {
        return Err(Error::InvalidConfig(format!(
            "{n} source trials do not split evenly over {} label cells",
            cells.len()
        )));
    }
    let per = n / cells.len();
    let base = cfg.seed.derive(&[subject_key(e.subject_id())]);
    let mut chosen = Vec::with_capacity(n);
    for (topic, ty, mut cell) in cells {
        if cell.len() < per {
            return Err(Error::InvalidConfig(format!(
                "{topic}/{ty} has {} trials, {per} requested",
                cell.len()
            )));
        }
        let code = crate::epochs::TrialLabel::new(topic, ty).code() as u64;
        cell.shuffle(&mut base.derive_rng(&[stream::SUBSAMPLE, code]));
        chosen.extend_from_slice(&cell[..per]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Runs every fold. `others` holds the other subjects' ERPs used alongside
/// this subject's training trials to fit the projector; with `None` the
/// projector is fitted on this subject alone.
pub fn decode_audited(
    e: &EpochSet,
    mode: Mode,
    cfg: &DecodeConfig,
    others: Option<&GroupErps>,
) -> Result<DecodeOutput> {
    cfg.validate()?;
    if let Some(g) = others {
        if (g.n_channels, g.n_samples) != (e.n_channels(), e.n_samples()) {
            return Err(Error::DimensionMismatch(format!(
                "group ERPs are {}x{}, epochs {}x{}",
                g.n_channels,
                g.n_samples,
                e.n_channels(),
                e.n_samples()
            )));
        }
    }
    let source_indices = select_source(e, cfg)?;
    let set = e.subset(&source_indices);
    let base = cfg.seed.derive(&[subject_key(e.subject_id())]);
    let plan = make_folds(&set, cfg.n_folds, base)?;
    let scored = set.clone();
    let scored = match mode {
        Mode::Timecourse => scored,
        Mode::Window(w) => scored.crop(&w)?,
    };
    let source = source_indices.len();

    let per_fold = crate::par::map_range(cfg.n_folds, |f| {
        run_fold(&set, &scored, &plan, f, mode, cfg, base, others, source)
    });
    let mut report = DecodingReport::default();
    let mut audits = Vec::with_capacity(cfg.n_folds);
    for r in per_fold {
        let (rows, audit) = r?;
        report.rows.extend(rows);
        audits.push(audit);
    }
    Ok(DecodeOutput {
        report,
        audits,
        source_indices,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    set: &EpochSet,
    scored: &EpochSet,
    plan: &FoldPlan,
    fold: usize,
    mode: Mode,
    cfg: &DecodeConfig,
    base: RngSeed,
    others: Option<&GroupErps>,
    source: usize,
) -> Result<(Vec<DecodingRow>, FoldAudit)> {
    let train = plan.train_indices(fold);
    let test = plan.test_indices(fold);

    let by_type = |ty: SentenceType| -> Vec<usize> {
        train
            .iter()
            .copied()
            .filter(|&i| set.labels()[i].sentence_type == ty)
            .collect()
    };
    let (t1, t2) = (by_type(SentenceType::Type1), by_type(SentenceType::Type2));
    let group_erp = |idx: &[usize], ty: SentenceType| {
        let mut erp = set.mean_of(idx);
        if let Some(g) = others.filter(|g| g.n_subjects > 0) {
            let n = (g.n_subjects + 1) as f64;
            erp.iter_mut()
                .zip(g.sum(cfg.condition, ty))
                .for_each(|(a, b)| *a = (*a + b) / n);
        }
        erp
    };
    let erp1 = group_erp(&t1, SentenceType::Type1);
    let erp2 = group_erp(&t2, SentenceType::Type2);
    let projector_checksum = checksum(erp1.iter().chain(&erp2).map(|v| v.to_bits()));
    let projector = fit_from_blocks(
        &[(&erp1, set.n_samples()), (&erp2, set.n_samples())],
        set.n_channels(),
        cfg.n_components,
        format!(
            "{} fold {fold}: {} training trials + {} other subjects",
            set.subject_id(),
            train.len(),
            others.map_or(0, |g| g.n_subjects)
        ),
    )?;
    let mut projector_fit = t1;
    projector_fit.extend(t2);
    projector_fit.sort_unstable();

    let projected = project(scored, &projector)?;
    let (l_train, l_test) = cfg.split_sizes();
    let augment_split = |idx: &[usize], tag: u64, l: usize| {
        let part = projected.subset(idx);
        let seed = base.derive(&[tag, fold as u64]);
        let wv = build_weight_vector(part.labels(), cfg.weights, cfg.scheme, seed)?;
        let (aug, used) = augment_traced(&part, &wv, &BootstrapPlan::new(cfg.k, l, seed))?;
        let used: Vec<usize> = used.into_iter().map(|j| idx[j]).collect();
        Ok::<_, Error>((aug, used))
    };
    let (train_aug, train_sources) = augment_split(&train, stream::TRAIN_SPLIT, l_train)?;
    let (test_aug, test_sources) = augment_split(&test, stream::TEST_SPLIT, l_test)?;

    let y_train = class_labels(&train_aug);
    let y_test = class_labels(&test_aug);
    let row = |point: TimePoint, accuracy: f64| DecodingRow {
        subject: set.subject_id().to_string(),
        condition: cfg.condition,
        scheme: cfg.scheme,
        source,
        k: cfg.k,
        fold,
        point,
        accuracy,
        seed: cfg.seed.0,
    };
    let mut rows = Vec::new();
    match mode {
        Mode::Timecourse => {
            let mut dual: Option<Vec<f64>> = None;
            for s in 0..scored.n_samples() {
                let x_tr = sample_features(&train_aug, s);
                let x_te = sample_features(&test_aug, s);
                let (acc, alpha) = fit_score(x_tr, &y_train, x_te, &y_test, cfg.n_components, cfg, dual.as_deref())?;
                dual = Some(alpha);
                rows.push(row(TimePoint::Time(scored.time_of(s)), acc));
            }
        }
        Mode::Window(w) => {
            let d = train_aug.trial_len();
            let (acc, _) = fit_score(
                train_aug.data().to_vec(),
                &y_train,
                test_aug.data().to_vec(),
                &y_test,
                d,
                cfg,
                None,
            )?;
            rows.push(row(TimePoint::Window(w), acc));
        }
    }
    let audit = FoldAudit {
        fold,
        train,
        test,
        projector_fit,
        projector_checksum,
        train_sources,
        test_sources,
        projector,
    };
    Ok((rows, audit))
}

fn class_labels(e: &EpochSet) -> Vec<f64> {
    e.labels().iter().map(|l| l.sentence_type.sign()).collect()
}

fn sample_features(e: &EpochSet, s: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(e.n_trials() * e.n_channels());
    for t in 0..e.n_trials() {
        for c in 0..e.n_channels() {
            x.push(e.trial_channel(t, c)[s]);
        }
    }
    x
}

fn fit_score(
    mut x_train: Vec<f64>,
    y_train: &[f64],
    mut x_test: Vec<f64>,
    y_test: &[f64],
    d: usize,
    cfg: &DecodeConfig,
    warm: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    if cfg.standardize {
        standardize(&mut x_train, &mut x_test, d);
    }
    let (model, alpha) = svm::train_linear_from(&x_train, d, y_train, &cfg.svm, warm)?;
    Ok((model.accuracy(&x_test, y_test), alpha))
}

/// Scales every feature to zero mean and unit variance using training
/// statistics only. Constant features are centred and left unscaled.
pub fn standardize(train: &mut [f64], test: &mut [f64], d: usize) {
    let n = (train.len() / d) as f64;
    for j in 0..d {
        let m = train.iter().skip(j).step_by(d).sum::<f64>() / n;
        let var = train.iter().skip(j).step_by(d).map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in train
            .iter_mut()
            .skip(j)
            .step_by(d)
            .chain(test.iter_mut().skip(j).step_by(d))
        {
            *v = (*v - m) / sd;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let cfg = DecodeConfig::default();
        assert_eq!(cfg.split_sizes(), (200, 50));
        let small = DecodeConfig { l: 20, ..cfg };
        assert_eq!(small.split_sizes(), (16, 4));
        assert!(DecodeConfig { l: 251, ..cfg }.validate().is_err());
        assert!(DecodeConfig {
            l: 2,
            n_folds: 5,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(DecodeConfig { k: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn standardize_uses_train_stats() {
        let mut tr = vec![1.0, 5.0, 3.0, 5.0];
        let mut te = vec![2.0, 6.0];
        standardize(&mut tr, &mut te, 2);
        assert_eq!(tr, vec![-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(te, vec![0.0, 1.0]);
    }

    #[test]
    fn checksum_is_order_sensitive() {
        assert_ne!(checksum([1, 2]), checksum([2, 1]));
        assert_eq!(checksum([]), 0xcbf2_9ce4_8422_2325);
    }
}
