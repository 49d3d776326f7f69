//! Seeded dataset partitioning.
//!
//! Two layers: a record-level fraction split (train/val/test via largest
//! remainder, so sizes are exact for any count) and a domain-level k-fold
//! assignment in which every record of a domain lands in the same fold.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExpError;

/// Fractions and fold count for dataset partitioning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.69, val: 0.14, test: 0.17, folds: 6, seed: 42 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), ExpError> {
        if !(self.train >= 0.0 && self.val >= 0.0 && self.test >= 0.0) {
            return Err(ExpError::Config("split fractions must be non-negative".into()));
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ExpError::Config(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        if self.folds < 2 {
            return Err(ExpError::Config(format!(
                "at least 2 folds required, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}

/// Disjoint record indices covering `0..n` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `0..n_records` into train/val/test by seeded shuffle plus
/// largest-remainder apportionment. Remainder ties go to the earlier
/// subset in train, val, test order.
pub fn split_dataset(n_records: usize, spec: &SplitSpec) -> Result<SplitIndices, ExpError> {
    spec.validate()?;
    if n_records == 0 {
        return Err(ExpError::EmptyDataset("cannot split zero records".into()));
    }
    let mut order: Vec<usize> = (0..n_records).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let sizes = largest_remainder(n_records, &[spec.train, spec.val, spec.test]);
    let val_end = sizes[0] + sizes[1];
    Ok(SplitIndices {
        train: order[..sizes[0]].to_vec(),
        val: order[sizes[0]..val_end].to_vec(),
        test: order[val_end..].to_vec(),
    })
}

/// Integer apportionment of `total` by `fractions`: floor quotas first, then
/// one extra to each bucket in decreasing fractional-remainder order. Equal
/// remainders resolve to the earlier bucket.
fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();

    let mut by_remainder: Vec<usize> = (0..fractions.len()).collect();
    // Stable sort keeps declaration order among equal remainders.
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for &i in by_remainder.iter().take(total - assigned) {
        sizes[i] += 1;
    }
    sizes
}

/// Assigns each record a fold in `0..folds` such that all records sharing a
/// domain value share a fold. Domains are canonically ordered, shuffled by
/// `seed`, and dealt round-robin, so fold populations (in domains) differ by
/// at most one.
pub fn kfold_domains<D: Ord + Clone>(
    record_domains: &[D],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, ExpError> {
    if folds < 2 {
        return Err(ExpError::Config(format!(
            "at least 2 folds required, got {folds}"
        )));
    }
    if record_domains.is_empty() {
        return Err(ExpError::EmptyDataset("no records to fold".into()));
    }
    let distinct: BTreeSet<&D> = record_domains.iter().collect();
    if distinct.len() < folds {
        return Err(ExpError::TooFewDomains(format!(
            "{} distinct domains cannot fill {} folds",
            distinct.len(),
            folds
        )));
    }
    let mut domains: Vec<&D> = distinct.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    domains.shuffle(&mut rng);

    let assignment: BTreeMap<&D, usize> = domains
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, i % folds))
        .collect();
    Ok(record_domains.iter().map(|d| assignment[d]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_partition(split: &SplitIndices, n: usize) {
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.val)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn default_fractions_split_100_records_69_14_17() {
        let split = split_dataset(100, &SplitSpec::default()).unwrap();
        assert_eq!(split.train.len(), 69);
        assert_eq!(split.val.len(), 14);
        assert_eq!(split.test.len(), 17);
        assert_partition(&split, 100);
    }

    #[test]
    fn default_fractions_split_195_records_135_27_33() {
        // Quotas 134.55 / 27.3 / 33.15; the one leftover record follows the
        // largest remainder into the training subset.
        let split = split_dataset(195, &SplitSpec::default()).unwrap();
        assert_eq!(split.train.len(), 135);
        assert_eq!(split.val.len(), 27);
        assert_eq!(split.test.len(), 33);
        assert_partition(&split, 195);
    }

    #[test]
    fn leftovers_follow_fractional_remainders() {
        // 7 records: quotas 4.83 / 0.98 / 1.19 leave two extras, claimed by
        // val (.98) then train (.83).
        let split = split_dataset(7, &SplitSpec::default()).unwrap();
        assert_eq!(
            [split.train.len(), split.val.len(), split.test.len()],
            [5, 1, 1]
        );
        assert_partition(&split, 7);
    }

    #[test]
    fn remainder_ties_favor_the_earlier_subset() {
        let spec = SplitSpec { train: 0.5, val: 0.25, test: 0.25, ..SplitSpec::default() };
        // 2 records: quotas 1.0 / 0.5 / 0.5; val and test tie for the one
        // leftover and val wins by position.
        let split = split_dataset(2, &spec).unwrap();
        assert_eq!(
            [split.train.len(), split.val.len(), split.test.len()],
            [1, 1, 0]
        );
    }

    #[test]
    fn splits_are_bit_reproducible() {
        let spec = SplitSpec::default();
        let a = split_dataset(384, &spec).unwrap();
        let b = split_dataset(384, &spec).unwrap();
        assert_eq!(a, b);

        let other = split_dataset(384, &SplitSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let bad_sum = SplitSpec { train: 0.5, val: 0.2, test: 0.2, ..SplitSpec::default() };
        assert!(matches!(
            split_dataset(10, &bad_sum),
            Err(ExpError::Config(_))
        ));
        let one_fold = SplitSpec { folds: 1, ..SplitSpec::default() };
        assert!(matches!(
            split_dataset(10, &one_fold),
            Err(ExpError::Config(_))
        ));
        assert!(matches!(
            split_dataset(0, &SplitSpec::default()),
            Err(ExpError::EmptyDataset(_))
        ));
    }

    #[test]
    fn kfold_deals_96_domains_into_six_folds_of_16() {
        // One record per domain.
        let domains: Vec<u32> = (0..96).collect();
        let folds = kfold_domains(&domains, 6, 42).unwrap();
        let mut counts = [0usize; 6];
        for &f in &folds {
            counts[f] += 1;
        }
        assert_eq!(counts, [16; 6]);
    }

    #[test]
    fn kfold_deals_24_domains_into_six_folds_of_4() {
        let domains: Vec<u32> = (0..24).collect();
        let folds = kfold_domains(&domains, 6, 42).unwrap();
        let mut counts = [0usize; 6];
        for &f in &folds {
            counts[f] += 1;
        }
        assert_eq!(counts, [4; 6]);
    }

    #[test]
    fn records_of_one_domain_never_straddle_folds() {
        // 13 domains, 3 records each, uneven fold sizes (3,2,2,2,2,2).
        let domains: Vec<u32> = (0..13).flat_map(|d| [d, d, d]).collect();
        let folds = kfold_domains(&domains, 6, 7).unwrap();
        let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
        for (d, f) in domains.iter().zip(&folds) {
            let prev = seen.entry(*d).or_insert(*f);
            assert_eq!(prev, f, "domain {d} appears in two folds");
        }
        let mut counts = [0usize; 6];
        for f in seen.values() {
            counts[*f] += 1;
        }
        counts.sort_unstable();
        assert_eq!(counts, [2, 2, 2, 2, 2, 3]);
    }

    #[test]
    fn kfold_is_deterministic_and_rejects_thin_domain_sets() {
        let domains: Vec<u32> = (0..24).collect();
        assert_eq!(
            kfold_domains(&domains, 6, 1).unwrap(),
            kfold_domains(&domains, 6, 1).unwrap()
        );
        assert!(matches!(
            kfold_domains(&domains[..5], 6, 1),
            Err(ExpError::TooFewDomains(_))
        ));
        assert!(matches!(
            kfold_domains::<u32>(&[], 6, 1),
            Err(ExpError::EmptyDataset(_))
        ));
    }
}
