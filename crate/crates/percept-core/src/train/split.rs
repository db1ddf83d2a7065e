//! Deterministic stratified train/validation/test splitting.

use crate::rng::Prng;

use super::TrainError;

/// Split fractions plus the shuffle seed that makes the split reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, TrainError> {
        let bad = TrainError::BadSplitFractions { train, val, test };
        if train < 0.0 || val < 0.0 || test < 0.0 {
            return Err(bad);
        }
        if (train + val + test - 1.0).abs() > 1e-9 {
            return Err(bad);
        }
        Ok(SplitSpec {
            train,
            val,
            test,
            seed,
        })
    }
}

/// Sample indices per partition, each in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition `0..labels.len()` stratified by class: within each class the
/// indices are shuffled by the spec's seed, `floor(val * n)` go to
/// validation and `floor(test * n)` to test, and the remainder (including
/// rounding leftovers) to train. Class ratios are therefore preserved
/// within one item per class.
pub fn split_dataset(
    labels: &[u32],
    classes: usize,
    spec: &SplitSpec,
) -> Result<SplitIndices, TrainError> {
    if labels.len() < classes {
        return Err(TrainError::TooFewItems {
            n: labels.len(),
            classes,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in labels.iter().enumerate() {
        if label as usize >= classes {
            return Err(TrainError::LabelOutOfRange { label, classes });
        }
        by_class[label as usize].push(i);
    }

    let mut prng = Prng::new(spec.seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut members in by_class {
        prng.shuffle(&mut members);
        let n = members.len();
        let n_val = (spec.val * n as f64).floor() as usize;
        let n_test = (spec.test * n as f64).floor() as usize;
        let n_train = n - n_val - n_test;
        out.train.extend_from_slice(&members[..n_train]);
        out.val.extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced_labels(classes: usize, per_class: usize) -> Vec<u32> {
        (0..classes * per_class)
            .map(|i| (i % classes) as u32)
            .collect()
    }

    #[test]
    fn five_speakers_at_seventy_fifteen_fifteen() {
        let labels = balanced_labels(5, 1500);
        let spec = SplitSpec::new(0.70, 0.15, 0.15, 9).unwrap();
        let s = split_dataset(&labels, 5, &spec).unwrap();
        assert_eq!(s.train.len(), 5250);
        assert_eq!(s.val.len(), 1125);
        assert_eq!(s.test.len(), 1125);
        // Stratification: every class contributes equally to each part.
        for part in [&s.train, &s.val, &s.test] {
            for class in 0..5u32 {
                let count = part.iter().filter(|&&i| labels[i] == class).count();
                assert_eq!(count * 5, part.len());
            }
        }
    }

    #[test]
    fn rounding_remainder_goes_to_train() {
        // 10 per class at 0.7/0.15/0.15: floor gives 1 + 1, train gets 8.
        let labels = balanced_labels(2, 10);
        let spec = SplitSpec::new(0.70, 0.15, 0.15, 1).unwrap();
        let s = split_dataset(&labels, 2, &spec).unwrap();
        assert_eq!(s.train.len(), 16);
        assert_eq!(s.val.len(), 2);
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn all_in_train_when_fractions_say_so() {
        let labels = balanced_labels(3, 4);
        let spec = SplitSpec::new(1.0, 0.0, 0.0, 7).unwrap();
        let s = split_dataset(&labels, 3, &spec).unwrap();
        assert_eq!(s.train.len(), 12);
        assert!(s.val.is_empty());
        assert!(s.test.is_empty());
    }

    #[test]
    fn same_seed_reproduces_the_split_and_seeds_differ() {
        let labels = balanced_labels(4, 25);
        let a = split_dataset(&labels, 4, &SplitSpec::new(0.7, 0.15, 0.15, 5).unwrap()).unwrap();
        let b = split_dataset(&labels, 4, &SplitSpec::new(0.7, 0.15, 0.15, 5).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&labels, 4, &SplitSpec::new(0.7, 0.15, 0.15, 6).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_fractions_are_rejected() {
        assert!(matches!(
            SplitSpec::new(0.5, 0.5, 0.5, 0).unwrap_err(),
            TrainError::BadSplitFractions { .. }
        ));
        assert!(matches!(
            SplitSpec::new(1.2, -0.1, -0.1, 0).unwrap_err(),
            TrainError::BadSplitFractions { .. }
        ));
    }

    #[test]
    fn fewer_items_than_classes_is_rejected() {
        let spec = SplitSpec::new(0.7, 0.15, 0.15, 0).unwrap();
        assert!(matches!(
            split_dataset(&[0, 1], 3, &spec).unwrap_err(),
            TrainError::TooFewItems { n: 2, classes: 3 }
        ));
    }

    proptest! {
        /// Every index lands in exactly one partition, and per-class ratios
        /// hold within one item.
        #[test]
        fn partitions_are_exact_and_stratified(seed in 0u64..200, per_class in 3usize..40) {
            let labels = balanced_labels(3, per_class);
            let spec = SplitSpec::new(0.6, 0.2, 0.2, seed).unwrap();
            let s = split_dataset(&labels, 3, &spec).unwrap();

            let mut seen: Vec<usize> = s
                .train
                .iter()
                .chain(&s.val)
                .chain(&s.test)
                .copied()
                .collect();
            seen.sort_unstable();
            let all: Vec<usize> = (0..labels.len()).collect();
            prop_assert_eq!(seen, all);

            let expect_val = (0.2 * per_class as f64).floor() as usize;
            for class in 0..3u32 {
                let v = s.val.iter().filter(|&&i| labels[i] == class).count();
                prop_assert_eq!(v, expect_val);
            }
        }
    }
}
