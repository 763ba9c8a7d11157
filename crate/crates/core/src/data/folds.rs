use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use super::records::{ILKey, PropertyRecord};
use crate::error::{Error, Result};
use crate::seed;

/// What must never straddle a train/test boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// The (cation, anion) pair.
    #[default]
    Il,
    /// Every IL sharing a cation lands in the same fold; test cations are unseen in training.
    Cation,
}

/// Assignment of ILs (not records) to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: BTreeMap<ILKey, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, il: &ILKey) -> Option<usize> {
        self.assignment.get(il).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<ILKey, usize> {
        &self.assignment
    }

    pub fn test_ils(&self, fold: usize) -> BTreeSet<ILKey> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn train_ils(&self, fold: usize) -> BTreeSet<ILKey> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(k, _)| *k)
            .collect()
    }

    /// IL counts per fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Record indices `(train, test)` for `fold`. Records whose IL is not in the
    /// plan are left out of both.
    pub fn split(&self, records: &[PropertyRecord], fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, r) in records.iter().enumerate() {
            match self.fold_of(&r.il) {
                Some(f) if f == fold => test.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        (train, test)
    }
}

/// IL-grouped k-fold: distinct ILs are shuffled and dealt round-robin.
pub fn kfold_by_il(records: &[PropertyRecord], k: usize, seed: u64) -> Result<FoldPlan> {
    kfold_grouped(records, k, seed, Grouping::Il)
}

pub fn kfold_grouped(records: &[PropertyRecord], k: usize, seed: u64, grouping: Grouping) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("{k} folds leave nothing to hold out")));
    }
    let ils: BTreeSet<ILKey> = records.iter().map(|r| r.il).collect();
    let mut rng = seed::rng(seed);
    let assignment = match grouping {
        Grouping::Il => {
            let mut keys: Vec<ILKey> = ils.into_iter().collect();
            if keys.len() < k {
                return Err(Error::TooFewIls {
                    have: keys.len(),
                    folds: k,
                });
            }
            keys.shuffle(&mut rng);
            keys.into_iter().enumerate().map(|(i, key)| (key, i % k)).collect()
        }
        Grouping::Cation => {
            let mut cations: Vec<usize> = ils
                .iter()
                .map(|k| k.cation)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if cations.len() < k {
                return Err(Error::TooFewIls {
                    have: cations.len(),
                    folds: k,
                });
            }
            cations.shuffle(&mut rng);
            let fold: BTreeMap<usize, usize> = cations.into_iter().enumerate().map(|(i, c)| (c, i % k)).collect();
            ils.into_iter().map(|key| (key, fold[&key.cation])).collect()
        }
    };
    Ok(FoldPlan { k, assignment })
}

/// Splits ILs into (train, validation), holding out `ceil(fraction·n)` ILs but
/// always leaving at least one for training.
pub fn validation_split(ils: &BTreeSet<ILKey>, fraction: f64, seed: u64) -> (BTreeSet<ILKey>, BTreeSet<ILKey>) {
    let mut keys: Vec<ILKey> = ils.iter().copied().collect();
    keys.shuffle(&mut seed::rng(seed));
    let n_val = if keys.len() < 2 {
        0
    } else {
        ((fraction * keys.len() as f64).ceil() as usize).clamp(1, keys.len() - 1)
    };
    let val = keys[..n_val].iter().copied().collect();
    let train = keys[n_val..].iter().copied().collect();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Property;

    fn records_for(ils: &[(usize, usize)], per_il: usize) -> Vec<PropertyRecord> {
        ils.iter()
            .flat_map(|&(c, a)| {
                (0..per_il).map(move |i| PropertyRecord {
                    il: ILKey::new(c, a),
                    property: Property::Density,
                    temperature: 290.0 + i as f64,
                    pressure: 1.0,
                    value: 1000.0,
                })
            })
            .collect()
    }

    #[test]
    fn four_ils_two_folds() {
        let recs = records_for(&[(0, 0), (0, 1), (1, 0), (1, 1)], 3);
        let plan = kfold_by_il(&recs, 2, 7).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2, 2]);
        for f in 0..2 {
            assert!(plan.test_ils(f).is_disjoint(&plan.train_ils(f)));
            let (train, test) = plan.split(&recs, f);
            assert_eq!(train.len() + test.len(), recs.len());
        }
    }

    #[test]
    fn degenerate_k_and_too_few_ils() {
        let recs = records_for(&[(0, 0), (1, 1)], 1);
        assert!(matches!(kfold_by_il(&recs, 1, 0), Err(Error::Config(_))));
        assert!(matches!(
            kfold_by_il(&recs, 3, 0),
            Err(Error::TooFewIls { have: 2, folds: 3 })
        ));
    }

    #[test]
    fn independent_of_record_order() {
        let mut recs = records_for(&[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (3, 1)], 2);
        let plan = kfold_by_il(&recs, 3, 11).unwrap();
        recs.reverse();
        assert_eq!(kfold_by_il(&recs, 3, 11).unwrap(), plan);
    }

    #[test]
    fn cation_grouping_keeps_cations_together() {
        let ils: Vec<(usize, usize)> = (0..6).flat_map(|c| (0..3).map(move |a| (c, a))).collect();
        let recs = records_for(&ils, 1);
        let plan = kfold_grouped(&recs, 3, 2, Grouping::Cation).unwrap();
        for f in 0..3 {
            let test: BTreeSet<usize> = plan.test_ils(f).iter().map(|k| k.cation).collect();
            let train: BTreeSet<usize> = plan.train_ils(f).iter().map(|k| k.cation).collect();
            assert!(test.is_disjoint(&train));
        }
    }

    #[test]
    fn validation_split_sizes() {
        let ils: BTreeSet<ILKey> = (0..25).map(|i| ILKey::new(i, 0)).collect();
        let (train, val) = validation_split(&ils, 0.1, 3);
        assert_eq!(val.len(), 3);
        assert_eq!(train.len(), 22);
        assert!(train.is_disjoint(&val));
        let one: BTreeSet<ILKey> = [ILKey::new(0, 0)].into();
        assert_eq!(validation_split(&one, 0.1, 3).1.len(), 0);
    }
}
