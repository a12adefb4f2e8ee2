//! Stratified k-fold partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A stratified partition of dataset indices into `k` pairwise-disjoint
/// folds: sizes differ by at most one overall and within every class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Held-out indices of one fold.
    pub fn val_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Union of the other folds, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Stratified split: each class is shuffled and dealt round-robin, with the
/// dealing start rotated by every class's remainder so the leftover samples
/// tile the folds contiguously. That makes both the per-class and the
/// overall fold sizes balanced to within one sample.
pub fn make_folds(
    labels: &[usize],
    class_names: &[String],
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("make_folds", format!("k must be at least 2, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::invalid("make_folds", "empty dataset"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
        return Err(Error::invalid(
            "make_folds",
            format!("label {bad} out of range for {} classes", class_names.len()),
        ));
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, &label) in labels.iter().enumerate() {
        per_class[label].push(i);
    }
    for (c, members) in per_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::invalid(
                "make_folds",
                format!(
                    "class `{}` has {} samples, fewer than k = {k}",
                    class_names[c],
                    members.len()
                ),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for members in per_class.iter_mut() {
        members.shuffle(&mut rng);
        for (j, &idx) in members.iter().enumerate() {
            folds[(cursor + j) % k].push(idx);
        }
        cursor = (cursor + members.len()) % k;
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds })
}
