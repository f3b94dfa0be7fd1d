use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, SentenceType, Topic};
use crate::error::{Error, Result};
use crate::rng::{stream, RngSeed};

/// Stratified k-fold assignment of trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    /// Fold index of every trial.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.where_fold(|f| f == fold)
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.where_fold(|f| f != fold)
    }

    fn where_fold(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Shuffles each sentence type's trials (topic cells shuffled separately and
/// laid end to end) and deals them round-robin over the folds, so fold sizes
/// differ by at most one per class and per topic cell.
pub fn make_folds(e: &EpochSet, n_folds: usize, seed: RngSeed) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    let mut assignments = vec![usize::MAX; e.n_trials()];
    for (ci, ty) in SentenceType::ALL.into_iter().enumerate() {
        let mut class = Vec::new();
        for (ti, topic) in Topic::ALL.into_iter().enumerate() {
            let mut cell = e.indices_where(|l| l.sentence_type == ty && l.topic == topic);
            cell.shuffle(&mut seed.derive_rng(&[stream::FOLDS, ci as u64, ti as u64]));
            class.extend(cell);
        }
        if class.len() < n_folds {
            return Err(Error::ClassTooSmall(format!(
                "{ty} has {} trials for {n_folds} folds",
                class.len()
            )));
        }
        for (pos, i) in class.into_iter().enumerate() {
            assignments[i] = pos % n_folds;
        }
    }
    Ok(FoldPlan { n_folds, assignments })
}
