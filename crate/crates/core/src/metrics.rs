//! Ordinal evaluation metrics: WHDR, AP, MAP over binarisation cuts, NDCG.
//!
//! Predicted orders are derived with [`permutation_from_scores`], so every
//! metric only depends on the order induced by the predictions. Tied
//! predictions are ordered by ascending item index.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::losses::{discount, gain};
use crate::numeric::CompensatedSum;
use crate::ranking::{permutation_from_scores, OrdinalLabel, OrdinalPair, Permutation, RankedSample};

/// Fraction of pairs whose predicted relation disagrees with the label.
///
/// A pair is predicted `Closer` when `z_i - z_j > pred_tie_threshold`,
/// `Farther` when below `-pred_tie_threshold`, `Equal` otherwise.
pub fn whdr(pairs: &[OrdinalPair], pred_scores: &[f64], pred_tie_threshold: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(invalid("WHDR is undefined for an empty pair list"));
    }
    let n = pred_scores.len();
    let mut wrong = 0usize;
    for p in pairs {
        if p.i >= n || p.j >= n {
            return Err(invalid(format!("pair ({}, {}) out of range for n={n}", p.i, p.j)));
        }
        let predicted = OrdinalLabel::from_difference(pred_scores[p.i] - pred_scores[p.j], pred_tie_threshold);
        if predicted != p.r {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / pairs.len() as f64)
}

/// `(disagreements, pairs)` over every unordered pair of the list, labels
/// taken from `gt_scores`. Equivalent to [`whdr`] on
/// [`pairs_from_permutation`](crate::ranking::pairs_from_permutation)
/// without materialising the pairs.
pub fn whdr_counts_all_pairs(
    gt_scores: &[f64],
    pred_scores: &[f64],
    gt_tie_threshold: f64,
    pred_tie_threshold: f64,
) -> (usize, usize) {
    let n = gt_scores.len();
    let mut wrong = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let truth = OrdinalLabel::from_difference(gt_scores[i] - gt_scores[j], gt_tie_threshold);
            let pred = OrdinalLabel::from_difference(pred_scores[i] - pred_scores[j], pred_tie_threshold);
            if truth != pred {
                wrong += 1;
            }
        }
    }
    (wrong, n * n.saturating_sub(1) / 2)
}

/// Average precision of binary labels listed in predicted order.
pub fn average_precision(labels: &[bool]) -> Result<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(invalid("average precision needs at least one positive label"));
    }
    let mut hits = 0usize;
    let mut acc = CompensatedSum::new();
    for (idx, &label) in labels.iter().enumerate() {
        if label {
            hits += 1;
            acc.add(hits as f64 / (idx + 1) as f64);
        }
    }
    Ok(acc.value() / positives as f64)
}

/// Fenwick tree over positions `1..=n`.
struct Fenwick<T> {
    tree: Vec<T>,
}

impl<T: Copy + Default + std::ops::AddAssign> Fenwick<T> {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![T::default(); n + 1],
        }
    }

    fn add(&mut self, mut pos: usize, v: T) {
        while pos < self.tree.len() {
            self.tree[pos] += v;
            pos += pos & pos.wrapping_neg();
        }
    }

    /// Sum over `1..=pos`.
    fn prefix(&self, mut pos: usize) -> T {
        let mut acc = T::default();
        while pos > 0 {
            acc += self.tree[pos];
            pos -= pos & pos.wrapping_neg();
        }
        acc
    }
}

/// Mean AP over cuts `k = 1..n-1` for one sample, where the top-`k` items of
/// `gt_perm` are the positives.
///
/// Cuts are swept incrementally: moving from `k` to `k+1` adds one positive at
/// predicted position `q`, whose own precision term is `(1 + #positives
/// above q) / q`, and every positive below `q` gains `1/p`.
pub fn sample_average_precision(gt_perm: &Permutation, pred_scores: &[f64]) -> Result<f64> {
    let n = gt_perm.len();
    if n < 2 {
        return Err(invalid("MAP needs at least two items per sample"));
    }
    if pred_scores.len() != n {
        return Err(invalid(format!(
            "prediction length {} does not match permutation length {n}",
            pred_scores.len()
        )));
    }
    let pred = permutation_from_scores(pred_scores)?;
    let mut counts = Fenwick::<usize>::new(n);
    let mut inv_pos = Fenwick::<f64>::new(n);
    let mut precision_sum = 0.0f64;
    let mut cuts = CompensatedSum::new();
    for k in 1..n {
        let item = gt_perm.item_at(k);
        let q = pred.rank_of(item);
        let above = counts.prefix(q - 1);
        let below_inv = inv_pos.prefix(n) - inv_pos.prefix(q);
        precision_sum += (1 + above) as f64 / q as f64 + below_inv;
        counts.add(q, 1);
        inv_pos.add(q, 1.0 / q as f64);
        cuts.add(precision_sum / k as f64);
    }
    Ok(cuts.value() / (n - 1) as f64)
}

/// Mean over samples of [`sample_average_precision`].
pub fn mean_average_precision<'a, I>(samples: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a Permutation, &'a [f64])>,
{
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    for (perm, pred) in samples {
        acc.add(sample_average_precision(perm, pred)?);
        count += 1;
    }
    if count == 0 {
        return Err(invalid("MAP needs at least one sample"));
    }
    Ok(acc.value() / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndcg {
    pub value: f64,
    /// Ideal DCG was zero; `value` is reported as 1.0 by convention.
    pub all_zero_gain: bool,
}

/// NDCG of the predicted order with gain `2^s - 1` and discount
/// `1 / log_base(pos + 1)`.
pub fn ndcg(gt_scores: &[f64], pred_scores: &[f64], log_base: f64) -> Result<Ndcg> {
    if gt_scores.is_empty() {
        return Err(invalid("NDCG needs at least one item"));
    }
    if gt_scores.len() != pred_scores.len() {
        return Err(invalid("NDCG inputs differ in length"));
    }
    let dcg = |perm: &Permutation| -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (pos, &item) in perm.order().iter().enumerate() {
            acc.add(gain(gt_scores[item])? * discount(pos + 1, log_base)?);
        }
        Ok(acc.value())
    };
    let ideal = dcg(&permutation_from_scores(gt_scores)?)?;
    let actual = dcg(&permutation_from_scores(pred_scores)?)?;
    if ideal == 0.0 {
        return Ok(Ndcg {
            value: 1.0,
            all_zero_gain: true,
        });
    }
    Ok(Ndcg {
        value: (actual / ideal).clamp(0.0, 1.0),
        all_zero_gain: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Ground-truth score gap at or below which a pair is labelled equal.
    pub gt_tie_threshold: f64,
    /// Predicted score gap at or below which a pair is predicted equal.
    pub pred_tie_threshold: f64,
    pub log_base: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gt_tie_threshold: 0.0,
            pred_tie_threshold: 0.0,
            log_base: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub whdr: f64,
    pub map: f64,
    pub ndcg: f64,
    pub n_samples: usize,
    pub n_pairs: usize,
    /// Samples whose relevance grades are all zero (NDCG reported as 1).
    pub zero_gain_samples: usize,
    /// Samples whose predictions are all tied.
    pub tied_prediction_samples: usize,
}

impl MetricReport {
    pub fn has_degenerate_ties(&self) -> bool {
        self.tied_prediction_samples > 0
    }
}

/// Evaluates predictions sample by sample. WHDR is pooled over all pairs of
/// every sample; MAP and NDCG are averaged over samples. NDCG uses the
/// samples' graded relevance.
pub fn evaluate(samples: &[RankedSample], predictions: &[Vec<f64>], cfg: &EvalConfig) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(invalid("nothing to evaluate"));
    }
    if samples.len() != predictions.len() {
        return Err(invalid(format!(
            "{} samples but {} prediction vectors",
            samples.len(),
            predictions.len()
        )));
    }
    let mut wrong = 0usize;
    let mut pairs = 0usize;
    let mut map = CompensatedSum::new();
    let mut ndcg_sum = CompensatedSum::new();
    let mut zero_gain_samples = 0usize;
    let mut tied_prediction_samples = 0usize;
    for (sample, pred) in samples.iter().zip(predictions) {
        if pred.len() != sample.len() {
            return Err(invalid(format!(
                "sample `{}` has {} items but {} predictions",
                sample.id(),
                sample.len(),
                pred.len()
            )));
        }
        let (w, p) = whdr_counts_all_pairs(sample.gt_scores(), pred, cfg.gt_tie_threshold, cfg.pred_tie_threshold);
        wrong += w;
        pairs += p;
        map.add(sample_average_precision(sample.gt_perm(), pred)?);
        let nd = ndcg(sample.relevance(), pred, cfg.log_base)?;
        ndcg_sum.add(nd.value);
        zero_gain_samples += usize::from(nd.all_zero_gain);
        if pred.iter().all(|v| *v == pred[0]) {
            tied_prediction_samples += 1;
        }
    }
    let m = samples.len() as f64;
    Ok(MetricReport {
        whdr: wrong as f64 / pairs as f64,
        map: map.value() / m,
        ndcg: ndcg_sum.value() / m,
        n_samples: samples.len(),
        n_pairs: pairs,
        zero_gain_samples,
        tied_prediction_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::pairs_from_permutation;

    /// Direct AP/MAP: explicit precision and recall tables per cut.
    fn brute_force_map(gt_perm: &Permutation, pred: &[f64]) -> f64 {
        let n = gt_perm.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pred[b].partial_cmp(&pred[a]).unwrap());
        let mut total = 0.0;
        for k in 1..n {
            let labels: Vec<bool> = order.iter().map(|&it| gt_perm.rank_of(it) <= k).collect();
            let positives = k as f64;
            let mut precision = vec![0.0; n + 1];
            let mut recall = vec![0.0; n + 1];
            let mut hits = 0.0;
            for i in 1..=n {
                if labels[i - 1] {
                    hits += 1.0;
                }
                precision[i] = hits / i as f64;
                recall[i] = hits / positives;
            }
            let ap: f64 = (1..=n).map(|i| precision[i] * (recall[i] - recall[i - 1])).sum();
            total += ap;
        }
        total / (n - 1) as f64
    }

    #[test]
    fn whdr_examples() {
        let gt = [4.0, 3.0, 2.0, 1.0];
        let perm = permutation_from_scores(&gt).unwrap();
        let pairs: Vec<_> = pairs_from_permutation(&perm, &gt, 0.0)
            .unwrap()
            .into_iter()
            .take(4)
            .collect();
        assert_eq!(whdr(&pairs, &gt, 0.0).unwrap(), 0.0);
        let reversed = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(whdr(&pairs, &reversed, 0.0).unwrap(), 1.0);
        // pairs (0,1) (0,2) (0,3) (1,2); lifting item 2 to the top breaks
        // (0,2) and (1,2) only.
        let pred = [2.0, 1.0, 5.0, 0.0];
        let by_hand = pairs
            .iter()
            .filter(|p| (pred[p.i] > pred[p.j]) != (p.r == OrdinalLabel::Closer))
            .count();
        assert_eq!(by_hand, 2);
        assert_eq!(whdr(&pairs, &pred, 0.0).unwrap(), 0.5);
        assert!(whdr(&[], &pred, 0.0).is_err());
    }

    #[test]
    fn whdr_tied_predictions_disagree_with_ordered_labels() {
        let pair = OrdinalPair::new(0, 1, OrdinalLabel::Closer).unwrap();
        assert_eq!(whdr(&[pair], &[1.0, 1.0], 0.0).unwrap(), 1.0);
        assert_eq!(whdr(&[pair], &[1.05, 1.0], 0.1).unwrap(), 1.0);
        let eq = OrdinalPair::new(0, 1, OrdinalLabel::Equal).unwrap();
        assert_eq!(whdr(&[eq], &[1.05, 1.0], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn all_pairs_fast_path_matches_materialised_pairs() {
        let gt = [0.5, 2.0, 2.0, -1.0, 3.0];
        let pred = [1.0, 0.0, 0.0, 2.0, 5.0];
        let perm = permutation_from_scores(&gt).unwrap();
        let pairs = pairs_from_permutation(&perm, &gt, 0.0).unwrap();
        let (w, n) = whdr_counts_all_pairs(&gt, &pred, 0.0, 0.0);
        assert_eq!(n, pairs.len());
        assert_eq!(w as f64 / n as f64, whdr(&pairs, &pred, 0.0).unwrap());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true, true, false]).unwrap(), 1.0);
        assert!((average_precision(&[true, false, true]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&[false, true]).unwrap(), 0.5);
        assert!(average_precision(&[false, false]).is_err());
    }

    #[test]
    fn map_examples() {
        let gt = permutation_from_scores(&[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(mean_average_precision([(&gt, &[9.0, 5.0, 1.0][..])]).unwrap(), 1.0);

        let gt2 = Permutation::identity(2).unwrap();
        assert_eq!(mean_average_precision([(&gt2, &[0.0, 1.0][..])]).unwrap(), 0.5);

        // Oracle: k=1 -> AP 1/3, k=2 -> AP 7/12, mean 11/24.
        let reversed = [1.0, 2.0, 3.0];
        let oracle = brute_force_map(&gt, &reversed);
        assert!((oracle - 11.0 / 24.0).abs() < 1e-15);
        let got = mean_average_precision([(&gt, &reversed[..])]).unwrap();
        assert!((got - 11.0 / 24.0).abs() < 1e-15);

        let single = Permutation::identity(1).unwrap();
        assert!(mean_average_precision([(&single, &[0.0][..])]).is_err());
        assert!(mean_average_precision(std::iter::empty()).is_err());
    }

    #[test]
    fn map_matches_brute_force_with_ties() {
        let gt = permutation_from_scores(&[0.1, 0.9, 0.5, 0.3, 0.7, 0.2]).unwrap();
        let pred = [1.0, 1.0, 0.0, 2.0, 0.0, 1.0];
        let fast = sample_average_precision(&gt, &pred).unwrap();
        assert!((fast - brute_force_map(&gt, &pred)).abs() < 1e-14);
    }

    #[test]
    fn ndcg_examples() {
        let r = ndcg(&[2.0, 1.0, 0.0], &[5.0, 4.0, 3.0], 2.0).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(ndcg(&[3.0], &[0.0], 2.0).unwrap().value, 1.0);
        // (0·1 + 1·(1/log2 3)) / 1, mpmath 0.6309297535714574
        let r = ndcg(&[1.0, 0.0], &[0.0, 1.0], 2.0).unwrap();
        assert!((r.value - 0.630_929_753_571_457_4).abs() < 1e-15);
        let r = ndcg(&[0.0, 0.0], &[0.0, 1.0], 2.0).unwrap();
        assert!(r.all_zero_gain && r.value == 1.0);
    }

    #[test]
    fn evaluate_perfect_and_tied() {
        let s = RankedSample::new("a", 1, vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 2.0]).unwrap();
        let perfect = evaluate(std::slice::from_ref(&s), &[vec![3.0, 1.0, 2.0]], &EvalConfig::default()).unwrap();
        assert_eq!((perfect.whdr, perfect.map, perfect.ndcg), (0.0, 1.0, 1.0));
        assert_eq!(perfect.n_pairs, 3);
        assert!(!perfect.has_degenerate_ties());

        let tied = evaluate(std::slice::from_ref(&s), &[vec![0.0; 3]], &EvalConfig::default()).unwrap();
        assert!(tied.has_degenerate_ties());
        assert_eq!(tied.whdr, 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn distinct_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::hash_set(-1000i32..1000, 2..max_len)
                .prop_map(|s| s.into_iter().map(|v| f64::from(v) / 10.0).collect())
        }

        proptest! {
            #[test]
            fn map_agrees_with_brute_force(gt in distinct_scores(9), seed in any::<u64>()) {
                let n = gt.len();
                // Coarse integer predictions force plenty of ties.
                let pred: Vec<f64> = (0..n).map(|i| ((seed >> (i % 60)) & 3) as f64).collect();
                let perm = permutation_from_scores(&gt).unwrap();
                let fast = sample_average_precision(&perm, &pred).unwrap();
                prop_assert!((fast - brute_force_map(&perm, &pred)).abs() < 1e-12);
            }

            #[test]
            fn gt_as_prediction_has_zero_whdr(gt in distinct_scores(30)) {
                let perm = permutation_from_scores(&gt).unwrap();
                let pairs = pairs_from_permutation(&perm, &gt, 0.0).unwrap();
                prop_assert_eq!(whdr(&pairs, &gt, 0.0).unwrap(), 0.0);
            }

            #[test]
            fn ndcg_in_unit_interval(rel in prop::collection::vec(0.0f64..4.0, 1..30), pred_seed in any::<u64>()) {
                let pred: Vec<f64> = (0..rel.len()).map(|i| ((pred_seed.rotate_left(i as u32 * 7)) % 97) as f64).collect();
                let r = ndcg(&rel, &pred, 2.0).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.value));
            }
        }
    }
}
