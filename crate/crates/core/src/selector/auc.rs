use crate::error::{Error, Result};

/// Area under the ROC curve via the rank-sum statistic. Tied scores share
/// their average rank, so a tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of (1-based, tie-averaged) ranks held by positives, doubled to stay integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        // average rank of the block is (i+1 + j+1)/2
        twice_rank_sum += positives * (i as u128 + j as u128 + 2);
        i = j + 1;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated() {
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.2, 0.9, 0.8], &[true, true, false, false]).unwrap(), 0.0);
    }

    #[test]
    fn all_ties() {
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    }

    #[test]
    fn worked_example() {
        // pairs (0.9,0.6) (0.9,0.2) (0.4,0.2) concordant, (0.4,0.6) not
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap(), 0.75);
    }

    #[test]
    fn single_class() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            pts in prop::collection::vec((-5i32..5, any::<bool>()), 2..40)
        ) {
            let labels: Vec<bool> = pts.iter().map(|p| p.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let scores: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&transformed, &labels).unwrap());
        }
    }
}
