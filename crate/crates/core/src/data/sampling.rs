use std::collections::HashSet;

use rand::seq::index::sample;

use super::records::ILKey;
use crate::error::{Error, Result};
use crate::seed;

/// Stratified pair sampling: for every cation, `anions_per_cation` distinct anions
/// drawn uniformly without replacement. Output is grouped by cation, ascending.
pub fn sample_pairs(cations: usize, anions: usize, anions_per_cation: usize, seed: u64) -> Result<Vec<ILKey>> {
    if anions_per_cation > anions {
        return Err(Error::Config(format!(
            "cannot draw {anions_per_cation} distinct anions out of {anions}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(cations * anions_per_cation);
    for c in 0..cations {
        let mut picked = sample(&mut rng, anions, anions_per_cation).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|a| ILKey::new(c, a)));
    }
    Ok(out)
}

/// Removes every forbidden IL, preserving order.
pub fn exclude_ils(pairs: &[ILKey], forbidden: &HashSet<ILKey>) -> Vec<ILKey> {
    pairs.iter().filter(|k| !forbidden.contains(k)).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_when_all_anions_requested() {
        let pairs = sample_pairs(4, 3, 3, 1).unwrap();
        let set: HashSet<_> = pairs.iter().copied().collect();
        assert_eq!(pairs.len(), 12);
        assert_eq!(set.len(), 12);
    }

    #[test]
    fn full_scale_count() {
        let pairs = sample_pairs(2268, 311, 50, 3).unwrap();
        assert_eq!(pairs.len(), 113_400);
        let set: HashSet<_> = pairs.iter().copied().collect();
        assert_eq!(set.len(), 113_400);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(sample_pairs(20, 10, 1, 5).unwrap(), sample_pairs(20, 10, 1, 5).unwrap());
        assert_ne!(sample_pairs(20, 10, 3, 5).unwrap(), sample_pairs(20, 10, 3, 6).unwrap());
    }

    #[test]
    fn too_many_anions_rejected() {
        assert!(sample_pairs(2, 3, 4, 0).is_err());
    }

    #[test]
    fn exclusion_edge_cases() {
        let pairs = sample_pairs(5, 4, 2, 9).unwrap();
        assert_eq!(exclude_ils(&pairs, &HashSet::new()), pairs);
        let all: HashSet<_> = pairs.iter().copied().collect();
        assert!(exclude_ils(&pairs, &all).is_empty());
    }
}
