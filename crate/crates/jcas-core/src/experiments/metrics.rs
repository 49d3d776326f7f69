//! Confusion accounting and chance-corrected agreement.

use super::ExpError;

/// Square confusion matrix over class ids; `counts[truth * classes + pred]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Confusion { classes, counts: vec![0; classes * classes] }
    }

    /// Builds from row-major counts; `counts.len()` must equal `classes`².
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self, ExpError> {
        if counts.len() != classes * classes {
            return Err(ExpError::Config(format!(
                "confusion for {classes} classes needs {} counts, got {}",
                classes * classes,
                counts.len()
            )));
        }
        Ok(Confusion { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, pred: usize) {
        assert!(truth < self.classes && pred < self.classes, "class id out of range");
        self.counts[truth * self.classes + pred] += 1;
    }

    pub fn at(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.at(k, k)).sum()
    }

    /// Observed agreement; requires at least one recorded pair.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        assert!(total > 0, "accuracy of an empty confusion matrix");
        self.trace() as f64 / total as f64
    }

    fn row_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|p| self.at(k, p)).sum()
    }

    fn col_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|t| self.at(t, k)).sum()
    }
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e) with the marginal-product chance
/// term p_e = sum_k row_k * col_k / total^2.
///
/// The degenerate case p_e = 1 is detected in integer arithmetic (the chance
/// numerator equals total^2 exactly) and defined as kappa = 0: marginals
/// concentrated on a single class carry no information to correct for.
pub fn cohen_kappa(confusion: &Confusion) -> Result<f64, ExpError> {
    let total = confusion.total();
    if total == 0 {
        return Err(ExpError::DegenerateMarginals(
            "empty confusion matrix".into(),
        ));
    }
    let mut chance_num: u128 = 0;
    for k in 0..confusion.classes() {
        chance_num += confusion.row_sum(k) as u128 * confusion.col_sum(k) as u128;
    }
    let chance_den = total as u128 * total as u128;
    if chance_num == chance_den {
        return Ok(0.0);
    }
    let p_o = confusion.trace() as f64 / total as f64;
    let p_e = chance_num as f64 / chance_den as f64;
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Evaluation summary for one model on one labeled set.
#[derive(Clone, Debug)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub confusion: Confusion,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Kappa recomputed from the raw label pairs a matrix encodes, using only
    /// the textbook definition. Mirrors none of the production arithmetic:
    /// agreement and marginals are tallied pair by pair.
    fn kappa_from_pairs(c: &Confusion) -> Option<f64> {
        let mut pairs = Vec::new();
        for truth in 0..c.classes() {
            for pred in 0..c.classes() {
                for _ in 0..c.at(truth, pred) {
                    pairs.push((truth, pred));
                }
            }
        }
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let p_o = pairs.iter().filter(|(t, p)| t == p).count() as f64 / n;
        let mut p_e = 0.0;
        for k in 0..c.classes() {
            let t_k = pairs.iter().filter(|(t, _)| *t == k).count() as f64 / n;
            let p_k = pairs.iter().filter(|(_, p)| *p == k).count() as f64 / n;
            p_e += t_k * p_k;
        }
        if (1.0 - p_e).abs() < 1e-12 {
            return Some(0.0);
        }
        Some((p_o - p_e) / (1.0 - p_e))
    }

    #[test]
    fn perfect_agreement_scores_exactly_one() {
        let c = Confusion::from_counts(3, vec![5, 0, 0, 0, 9, 0, 0, 0, 2]).unwrap();
        assert_eq!(cohen_kappa(&c).unwrap(), 1.0);
    }

    #[test]
    fn uniform_confusion_scores_exactly_zero() {
        for classes in 2..=5 {
            for fill in [1u64, 3, 7] {
                let c =
                    Confusion::from_counts(classes, vec![fill; classes * classes]).unwrap();
                assert_eq!(cohen_kappa(&c).unwrap(), 0.0, "classes={classes} fill={fill}");
            }
        }
    }

    #[test]
    fn known_two_class_matrix_scores_one_third() {
        let c = Confusion::from_counts(2, vec![2, 1, 1, 2]).unwrap();
        let k = cohen_kappa(&c).unwrap();
        assert!((k - 1.0 / 3.0).abs() < 1e-15, "kappa = {k}");
    }

    #[test]
    fn single_class_marginals_are_degenerate_not_infinite() {
        // All mass on one diagonal cell: p_o = p_e = 1, defined as 0.
        let c = Confusion::from_counts(2, vec![5, 0, 0, 0]).unwrap();
        assert_eq!(cohen_kappa(&c).unwrap(), 0.0);
        // No agreement at all, but chance agreement is also zero.
        let c = Confusion::from_counts(2, vec![0, 5, 0, 0]).unwrap();
        assert_eq!(cohen_kappa(&c).unwrap(), 0.0);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let c = Confusion::new(3);
        assert!(matches!(
            cohen_kappa(&c),
            Err(ExpError::DegenerateMarginals(_))
        ));
    }

    #[test]
    fn kappa_matches_pairwise_recomputation_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 300 {
            let classes = rng.random_range(2..=6);
            let counts: Vec<u64> =
                (0..classes * classes).map(|_| rng.random_range(0..20)).collect();
            let c = Confusion::from_counts(classes, counts).unwrap();
            let Some(expected) = kappa_from_pairs(&c) else {
                continue;
            };
            let got = cohen_kappa(&c).unwrap();
            assert!(
                (got - expected).abs() < 1e-12,
                "classes={classes} got={got} expected={expected}"
            );
            assert!((-1.0..=1.0).contains(&got), "kappa {got} out of range");
            checked += 1;
        }
    }

    #[test]
    fn kappa_is_positive_exactly_when_accuracy_beats_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let classes = rng.random_range(2..=5);
            let counts: Vec<u64> =
                (0..classes * classes).map(|_| rng.random_range(0..15)).collect();
            let c = Confusion::from_counts(classes, counts).unwrap();
            if c.total() == 0 {
                continue;
            }
            let mut chance_num = 0u128;
            for k in 0..classes {
                let row: u64 = (0..classes).map(|p| c.at(k, p)).sum();
                let col: u64 = (0..classes).map(|t| c.at(t, k)).sum();
                chance_num += row as u128 * col as u128;
            }
            let chance_den = c.total() as u128 * c.total() as u128;
            if chance_num == chance_den {
                continue;
            }
            let p_e = chance_num as f64 / chance_den as f64;
            let kappa = cohen_kappa(&c).unwrap();
            assert_eq!(kappa > 0.0, c.accuracy() > p_e);
        }
    }
}
