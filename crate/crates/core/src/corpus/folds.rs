use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Author id → fold index in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, author_id: &str) -> Option<usize> {
        self.assignment.get(author_id).copied()
    }

    /// Indices into `corpus.authors` of the training complement and the
    /// held-out part of `fold`.
    pub fn split(&self, corpus: &Corpus, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, a) in corpus.authors.iter().enumerate() {
            if self.fold_of(&a.author_id) == Some(fold) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment over (gender, variety) cells.
///
/// Each stratum is shuffled with the seed and dealt round-robin; the dealing
/// position carries over from one stratum to the next so that overall fold
/// sizes stay balanced as well.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::validation(format!("fold count must be at least 2, got {k}")));
    }
    if k > corpus.len() {
        return Err(Error::validation(format!(
            "fold count {k} exceeds the number of authors ({})",
            corpus.len()
        )));
    }
    let mut strata: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    for a in &corpus.authors {
        let (Some(g), Some(v)) = (a.gender.as_deref(), a.variety.as_deref()) else {
            return Err(Error::validation(format!(
                "cannot build folds: author {:?} is unlabeled",
                a.author_id
            )));
        };
        strata.entry((g, v)).or_default().push(&a.author_id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for ids in strata.values_mut() {
        // corpus authors are id-sorted, so the pre-shuffle order is canonical
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert((*id).to_owned(), next);
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, assignment })
}

/// Stratified train/test split: in every (gender, variety) cell a
/// seeded-random `round(test_fraction * n)` authors go to the test side.
pub fn holdout_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut strata: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, a) in corpus.authors.iter().enumerate() {
        let (Some(g), Some(v)) = (a.gender.as_deref(), a.variety.as_deref()) else {
            return Err(Error::validation(format!(
                "cannot split: author {:?} is unlabeled",
                a.author_id
            )));
        };
        strata.entry((g, v)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::validation("holdout split leaves one side empty"));
    }
    Ok((corpus.subset(&train), corpus.subset(&test)))
}
