//! Held-out pairwise metrics: pair accuracy, ROC-AUC over the pooled chosen
//! and rejected scores, and mean margin.

use crate::error::{invalid, Result};
use crate::policy::Scorer;
use crate::world::{PreferenceExample, World};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub chosen_score: f64,
    pub rejected_score: f64,
    pub margin: f64,
}

impl ScoredPair {
    pub fn new(chosen_score: f64, rejected_score: f64) -> Self {
        Self { chosen_score, rejected_score, margin: chosen_score - rejected_score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pair_accuracy: f64,
    pub auc: f64,
    pub mean_margin: f64,
    pub n: usize,
    pub per_pair_margins: Vec<f64>,
}

fn check_pairs(pairs: &[ScoredPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(invalid("no scored pairs"));
    }
    if pairs
        .iter()
        .any(|p| p.chosen_score.is_nan() || p.rejected_score.is_nan() || p.margin.is_nan())
    {
        return Err(invalid("NaN score"));
    }
    Ok(())
}

/// Fraction of pairs with strictly positive margin; ties count as wrong.
pub fn pair_accuracy(pairs: &[ScoredPair]) -> Result<f64> {
    check_pairs(pairs)?;
    let correct = pairs.iter().filter(|p| p.margin > 0.0).count();
    Ok(correct as f64 / pairs.len() as f64)
}

pub fn mean_margin(pairs: &[ScoredPair]) -> Result<f64> {
    check_pairs(pairs)?;
    Ok(pairs.iter().map(|p| p.margin).sum::<f64>() / pairs.len() as f64)
}

/// Mann–Whitney AUC of chosen (label 1) against rejected (label 0) scores,
/// pooled over all pairs: `(#{c > r} + ½ #{c = r}) / n²` over every
/// chosen/rejected cross pair.
///
/// Sorts the pooled scores once and walks tie groups, so it runs in
/// O(n log n). Counts are kept in integers (doubled to absorb the halves)
/// so the result is exact.
pub fn roc_auc(pairs: &[ScoredPair]) -> Result<f64> {
    check_pairs(pairs)?;
    let n = pairs.len();
    let mut pooled: Vec<(f64, bool)> = Vec::with_capacity(2 * n);
    pooled.extend(pairs.iter().map(|p| (p.chosen_score, true)));
    pooled.extend(pairs.iter().map(|p| (p.rejected_score, false)));
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut doubled_wins: u128 = 0;
    let mut rejected_below: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        let (mut chosen_here, mut rejected_here) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal, so group by value rather than by bits.
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            if pooled[j].1 {
                chosen_here += 1;
            } else {
                rejected_here += 1;
            }
            j += 1;
        }
        doubled_wins += 2 * chosen_here * rejected_below + chosen_here * rejected_here;
        rejected_below += rejected_here;
        i = j;
    }
    Ok(auc_from_doubled_count(doubled_wins, n))
}

/// `count / (2 n²)`, shared by the sort-based statistic and its brute-force
/// check so both round identically.
pub(crate) fn auc_from_doubled_count(doubled_wins: u128, n: usize) -> f64 {
    doubled_wins as f64 / (2.0 * (n as f64) * (n as f64))
}

pub fn metrics_report(pairs: &[ScoredPair]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        pair_accuracy: pair_accuracy(pairs)?,
        auc: roc_auc(pairs)?,
        mean_margin: mean_margin(pairs)?,
        n: pairs.len(),
        per_pair_margins: pairs.iter().map(|p| p.margin).collect(),
    })
}

/// Score the chosen and rejected candidate of every test pair and report
/// the three metrics.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    test_pairs: &[PreferenceExample],
    world: &World,
) -> Result<MetricsReport> {
    let pairs = test_pairs
        .iter()
        .map(|e| {
            Ok(ScoredPair::new(
                scorer.score(world, e.prompt_id, e.chosen_id)?,
                scorer.score(world, e.prompt_id, e.rejected_id)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    metrics_report(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Policy, TabularPolicy, TrueRewardScorer};

    fn from_margins(margins: &[f64]) -> Vec<ScoredPair> {
        margins.iter().map(|&m| ScoredPair::new(m, 0.0)).collect()
    }

    fn from_scores(chosen: &[f64], rejected: &[f64]) -> Vec<ScoredPair> {
        chosen.iter().zip(rejected).map(|(&c, &r)| ScoredPair::new(c, r)).collect()
    }

    #[test]
    fn accuracy_examples() {
        assert!((pair_accuracy(&from_margins(&[1.0, -1.0, 2.0])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pair_accuracy(&from_margins(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(pair_accuracy(&from_margins(&[0.1])).unwrap(), 1.0);
        assert!(pair_accuracy(&[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&from_scores(&[2.0, 3.0], &[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(roc_auc(&from_scores(&[1.0], &[1.0])).unwrap(), 0.5);
        assert_eq!(roc_auc(&from_scores(&[2.0, 0.0], &[1.0, 3.0])).unwrap(), 0.25);
        assert_eq!(roc_auc(&from_scores(&[0.0], &[-0.0])).unwrap(), 0.5);
        assert!(roc_auc(&[]).is_err());
        assert!(roc_auc(&from_scores(&[f64::NAN], &[0.0])).is_err());
    }

    #[test]
    fn margin_examples() {
        assert_eq!(mean_margin(&from_margins(&[1.0, -1.0])).unwrap(), 0.0);
        assert_eq!(mean_margin(&from_margins(&[0.2995])).unwrap(), 0.2995);
        assert!((mean_margin(&from_margins(&[0.1, 0.2, 0.6])).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let world = World::from_features(3, 2, vec![1.0], vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.25]).unwrap();
        let pairs = vec![
            PreferenceExample::new(&world, 0, 0, 1).unwrap(),
            PreferenceExample::new(&world, 1, 0, 1).unwrap(),
            PreferenceExample::new(&world, 2, 1, 0).unwrap(),
        ];
        let zero: Policy = TabularPolicy::zeros(3, 2, 1.0).unwrap().into();
        let report = evaluate(&zero, &pairs, &world).unwrap();
        assert_eq!((report.pair_accuracy, report.auc, report.mean_margin), (0.0, 0.5, 0.0));

        let oracle = evaluate(&TrueRewardScorer, &pairs, &world).unwrap();
        assert!((oracle.pair_accuracy - 1.0 / 3.0).abs() < 1e-15);

        let one = evaluate(&TrueRewardScorer, &pairs[..1], &world).unwrap();
        assert_eq!((one.pair_accuracy, one.auc, one.mean_margin, one.n), (1.0, 1.0, 1.0, 1));
    }
}
