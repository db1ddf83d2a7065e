//! Confusion matrices and the classification metrics derived from them.

use super::TrainError;

/// K x K count matrix; rows index the true class, columns the predicted
/// class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        assert!(classes >= 1, "confusion matrix needs at least one class");
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(truth: &[u32], predicted: &[u32], classes: usize) -> Result<Self, TrainError> {
        if truth.len() != predicted.len() {
            return Err(TrainError::LengthMismatch {
                want: truth.len(),
                got: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: u32, predicted: u32) -> Result<(), TrainError> {
        let check = |label: u32| -> Result<usize, TrainError> {
            if (label as usize) < self.classes {
                Ok(label as usize)
            } else {
                Err(TrainError::LabelOutOfRange {
                    label,
                    classes: self.classes,
                })
            }
        };
        let at = check(truth)? * self.classes + check(predicted)?;
        self.counts[at] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    /// Row of counts for one true class.
    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.count(k, k)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is this one.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean of per-class F1 over all classes.
    pub macro_f1: f64,
    /// Support-weighted mean of per-class F1; zero-support classes carry
    /// zero weight.
    pub weighted_f1: f64,
}

/// Derive all reported metrics from a confusion matrix. Ratios with a zero
/// denominator are defined as 0.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<Metrics, TrainError> {
    let total = cm.total();
    if total == 0 {
        return Err(TrainError::EmptyConfusion);
    }
    let k = cm.classes();
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };

    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.count(c, c);
        let support: u64 = cm.row(c).iter().sum();
        let predicted: u64 = (0..k).map(|t| cm.count(t, c)).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }

    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total as f64;

    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        macro_f1,
        weighted_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_two_class_matrix() {
        let cm = ConfusionMatrix::from_pairs(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.row(0), &[1, 1]);
        assert_eq!(cm.row(1), &[0, 2]);
        let m = metrics_from_confusion(&cm).unwrap();
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn precision_recall_f1_hand_evaluated() {
        // Class 0: TP=3, FN=2 (row [3,2]), FP=1 (column intrusion).
        let mut cm = ConfusionMatrix::new(2);
        for _ in 0..3 {
            cm.record(0, 0).unwrap();
        }
        for _ in 0..2 {
            cm.record(0, 1).unwrap();
        }
        cm.record(1, 0).unwrap();
        for _ in 0..4 {
            cm.record(1, 1).unwrap();
        }
        let m = metrics_from_confusion(&cm).unwrap();
        let c0 = &m.per_class[0];
        assert!((c0.precision - 0.75).abs() < 1e-12);
        assert!((c0.recall - 0.60).abs() < 1e-12);
        assert!((c0.f1 - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_matrix_is_perfect() {
        let cm = ConfusionMatrix::from_pairs(&[0, 1, 2, 2, 1], &[0, 1, 2, 2, 1], 3).unwrap();
        let m = metrics_from_confusion(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        for c in &m.per_class {
            assert_eq!(c.f1, 1.0);
        }
        assert_eq!(m.weighted_f1, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn empty_matrix_is_zero_and_metrics_reject_it() {
        let cm = ConfusionMatrix::new(3);
        assert_eq!(cm.total(), 0);
        assert!(matches!(
            metrics_from_confusion(&cm).unwrap_err(),
            TrainError::EmptyConfusion
        ));
    }

    #[test]
    fn zero_support_class_reports_zero_and_carries_no_weight() {
        // Class 1 never appears as a true label and is never predicted.
        let cm = ConfusionMatrix::from_pairs(&[0, 0, 2], &[0, 2, 2], 3).unwrap();
        let m = metrics_from_confusion(&cm).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.per_class[1].recall, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
        assert_eq!(m.per_class[1].support, 0);
        // Weighted F1 averages only over the 3 supported samples.
        let by_hand = (m.per_class[0].f1 * 2.0 + m.per_class[2].f1) / 3.0;
        assert!((m.weighted_f1 - by_hand).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let mut cm = ConfusionMatrix::new(2);
        assert!(matches!(
            cm.record(2, 0).unwrap_err(),
            TrainError::LabelOutOfRange { label: 2, classes: 2 }
        ));
        assert!(matches!(
            cm.record(0, 5).unwrap_err(),
            TrainError::LabelOutOfRange { label: 5, classes: 2 }
        ));
    }

    #[test]
    fn accuracy_equals_direct_match_fraction() {
        let mut prng = Prng::new(50);
        let truth: Vec<u32> = (0..200).map(|_| prng.below(4) as u32).collect();
        let pred: Vec<u32> = (0..200).map(|_| prng.below(4) as u32).collect();
        let cm = ConfusionMatrix::from_pairs(&truth, &pred, 4).unwrap();
        let m = metrics_from_confusion(&cm).unwrap();
        let matches = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
        assert_eq!(m.accuracy, matches as f64 / 200.0);
    }

    proptest! {
        /// Reordering the sample stream never changes the matrix, and the
        /// aggregate F1 scores respect their bounds.
        #[test]
        fn matrix_is_order_invariant_and_f1_bounds_hold(seed in 0u64..500, n in 1usize..60) {
            let mut prng = Prng::new(seed);
            let truth: Vec<u32> = (0..n).map(|_| prng.below(3) as u32).collect();
            let pred: Vec<u32> = (0..n).map(|_| prng.below(3) as u32).collect();
            let cm = ConfusionMatrix::from_pairs(&truth, &pred, 3).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            prng.shuffle(&mut order);
            let truth_p: Vec<u32> = order.iter().map(|&i| truth[i]).collect();
            let pred_p: Vec<u32> = order.iter().map(|&i| pred[i]).collect();
            let cm_p = ConfusionMatrix::from_pairs(&truth_p, &pred_p, 3).unwrap();
            prop_assert_eq!(&cm, &cm_p);
            prop_assert_eq!(cm.total(), n as u64);

            let m = metrics_from_confusion(&cm).unwrap();
            let min_f1 = m.per_class.iter().map(|c| c.f1).fold(f64::INFINITY, f64::min);
            prop_assert!(m.macro_f1 <= 1.0 + 1e-12);
            prop_assert!(m.macro_f1 >= min_f1 - 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&m.weighted_f1));
        }
    }
}
