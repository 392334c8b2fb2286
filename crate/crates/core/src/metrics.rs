//! Ranking-fidelity metrics comparing predicted model accuracies against
//! true ones. Rank 1 is the highest accuracy; tied values share their
//! average rank. All metrics reject NaN/inf inputs and length mismatches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::rmse;

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_len {
        return Err(Error::Degenerate(format!(
            "need at least {min_len} values, got {}",
            a.len()
        )));
    }
    for v in a.iter().chain(b) {
        if !v.is_finite() {
            return Err(Error::Degenerate("non-finite value in metric input".into()));
        }
    }
    Ok(())
}

/// Average ranks with rank 1 for the largest value.
pub fn ranks_desc(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the mean of ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for p in i..=j {
            ranks[idx[p]] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    pearson(&ranks_desc(x), &ranks_desc(y))
}

/// Kendall tau-b, tie-corrected.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                ties_x += 1;
            }
            if dy == 0.0 {
                ties_y += 1;
            }
            let prod = dx * dy;
            if prod > 0.0 {
                concordant += 1;
            } else if prod < 0.0 {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("all pairs tied in one input".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// 1 - mean(|rank shift|) / n over the two rank vectors. 1.0 means ranks are
/// untouched; a full reversal of n=4 gives 0.5.
pub fn rank_stability(true_ranks: &[f64], pred_ranks: &[f64]) -> Result<f64> {
    check_pair(true_ranks, pred_ranks, 1)?;
    let n = true_ranks.len() as f64;
    let total: f64 = true_ranks
        .iter()
        .zip(pred_ranks)
        .map(|(t, p)| (t - p).abs())
        .sum();
    Ok(1.0 - total / (n * n))
}

/// Fraction of unordered pairs whose order is preserved. A pair counts as
/// preserved when both sides agree, including agreeing on a tie.
pub fn pair_accuracy(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred, 2)?;
    let n = y_true.len();
    let mut preserved = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let st = (y_true[i] - y_true[j]).signum_or_zero();
            let sp = (y_pred[i] - y_pred[j]).signum_or_zero();
            if st == sp {
                preserved += 1;
            }
        }
    }
    Ok(preserved as f64 / (n * (n - 1) / 2) as f64)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> i8;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> i8 {
        if self > 0.0 {
            1
        } else if self < 0.0 {
            -1
        } else {
            0
        }
    }
}

fn order_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// NDCG at cutoff k with the raw true score as gain and the true ordering as
/// the ideal. Ties in either ordering break by original index. When every
/// true score is zero the ideal DCG vanishes and the metric is 1.0 by
/// convention.
pub fn ndcg_at_k(y_true: &[f64], y_pred: &[f64], k: usize) -> Result<f64> {
    check_pair(y_true, y_pred, 1)?;
    if k == 0 || k > y_true.len() {
        return Err(Error::InvalidConfig(format!(
            "ndcg cutoff {k} must be in 1..={}",
            y_true.len()
        )));
    }
    if y_true.iter().any(|&v| v < 0.0) {
        return Err(Error::Degenerate("ndcg gains must be non-negative".into()));
    }
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .take(k)
            .enumerate()
            .map(|(r, &i)| y_true[i] / ((r + 2) as f64).log2())
            .sum()
    };
    let realized = dcg(&order_desc(y_pred));
    let ideal = dcg(&order_desc(y_true));
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok(realized / ideal)
}

/// Intersection-over-union of the top-k index sets, ties broken by index.
pub fn topk_accuracy(y_true: &[f64], y_pred: &[f64], k: usize) -> Result<f64> {
    check_pair(y_true, y_pred, 1)?;
    if k == 0 || k > y_true.len() {
        return Err(Error::InvalidConfig(format!(
            "top-k cutoff {k} must be in 1..={}",
            y_true.len()
        )));
    }
    let top = |values: &[f64]| -> Vec<usize> {
        let mut o = order_desc(values);
        o.truncate(k);
        o
    };
    let a: std::collections::HashSet<usize> = top(y_true).into_iter().collect();
    let b: std::collections::HashSet<usize> = top(y_pred).into_iter().collect();
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    Ok(inter as f64 / union as f64)
}

/// Fraction of models whose rank moved by at most ceil(p * n / 100) places.
pub fn ranking_error_within(y_true: &[f64], y_pred: &[f64], p: f64) -> Result<f64> {
    check_pair(y_true, y_pred, 1)?;
    if !(0.0..=100.0).contains(&p) || p == 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance {p}% must be in (0, 100]")));
    }
    let n = y_true.len();
    let tol = (p * n as f64 / 100.0).ceil();
    let rt = ranks_desc(y_true);
    let rp = ranks_desc(y_pred);
    let within = rt
        .iter()
        .zip(&rp)
        .filter(|(t, p)| (*t - *p).abs() <= tol)
        .count();
    Ok(within as f64 / n as f64)
}

/// Signed rank shifts (predicted rank minus true rank), one per model.
pub fn rank_shifts(y_true: &[f64], y_pred: &[f64]) -> Result<Vec<f64>> {
    check_pair(y_true, y_pred, 1)?;
    let rt = ranks_desc(y_true);
    let rp = ranks_desc(y_pred);
    Ok(rt.iter().zip(&rp).map(|(t, p)| p - t).collect())
}

/// Aggregates shifts into (shift, count) pairs sorted by shift. Counts sum
/// to the number of models.
pub fn shift_histogram(shifts: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = shifts.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, usize)> = Vec::new();
    for s in sorted {
        match out.last_mut() {
            Some((v, c)) if *v == s => *c += 1,
            _ => out.push((s, 1)),
        }
    }
    out
}

/// Full fidelity report for one prediction vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSuite {
    pub n_models: usize,
    pub rmse: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub rank_stability: f64,
    pub pair_accuracy: f64,
    /// Cutoff actually used for NDCG and top-k: `min(requested, n_models)`.
    pub k_used: usize,
    pub ndcg: f64,
    pub topk_accuracy: f64,
    /// Tolerance percentage -> fraction of models within it.
    pub ranking_error_within: BTreeMap<u32, f64>,
    /// Signed per-model rank shifts (predicted minus true), matrix row order.
    pub rank_shifts: Vec<f64>,
}

/// Computes every metric at once. `k_top` is clamped to the model count.
pub fn compute_suite(y_true: &[f64], y_pred: &[f64], k_top: usize) -> Result<MetricSuite> {
    check_pair(y_true, y_pred, 2)?;
    if k_top == 0 {
        return Err(Error::InvalidConfig("k_top must be positive".into()));
    }
    let k_used = k_top.min(y_true.len());
    let mut within = BTreeMap::new();
    for p in [1u32, 2, 5, 10] {
        within.insert(p, ranking_error_within(y_true, y_pred, p as f64)?);
    }
    let rt = ranks_desc(y_true);
    let rp = ranks_desc(y_pred);
    Ok(MetricSuite {
        n_models: y_true.len(),
        rmse: rmse(y_true, y_pred)?,
        pearson: pearson(y_true, y_pred)?,
        spearman: spearman(y_true, y_pred)?,
        kendall: kendall(y_true, y_pred)?,
        rank_stability: rank_stability(&rt, &rp)?,
        pair_accuracy: pair_accuracy(y_true, y_pred)?,
        k_used,
        ndcg: ndcg_at_k(y_true, y_pred, k_used)?,
        topk_accuracy: topk_accuracy(y_true, y_pred, k_used)?,
        ranking_error_within: within,
        rank_shifts: rank_shifts(y_true, y_pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks_desc(&[0.9, 0.5, 0.5, 0.1]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(ranks_desc(&[0.2, 0.8]), vec![2.0, 1.0]);
    }

    #[test]
    fn pearson_hand_values() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&x, &[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn spearman_ignores_monotone_distortion() {
        let x = [0.1, 0.4, 0.7, 0.9];
        let warped: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &warped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_single_adjacent_swap_is_one_third() {
        // three items, prediction swaps the top two: C=2, D=1, tau = 1/3
        let t = [3.0, 2.0, 1.0];
        let p = [2.0, 3.0, 1.0];
        assert!((kendall(&t, &p).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_stability_full_reversal_of_four_is_half() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let p = [4.0, 3.0, 2.0, 1.0];
        assert!((rank_stability(&t, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_stability_identity_is_one() {
        let r = [1.0, 2.0, 3.0];
        assert!((rank_stability(&r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_accuracy_counts_shared_ties_as_preserved() {
        // pairs: (0,1) tied on both sides, (0,2) and (1,2) ordered correctly
        let t = [0.5, 0.5, 0.2];
        let p = [0.7, 0.7, 0.1];
        assert!((pair_accuracy(&t, &p).unwrap() - 1.0).abs() < 1e-12);
        // breaking the tie on one side only loses that pair
        let p2 = [0.7, 0.6, 0.1];
        assert!((pair_accuracy(&t, &p2).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_two_items_reversed() {
        let t = [1.0, 0.5];
        let p = [0.5, 1.0];
        let got = ndcg_at_k(&t, &p, 2).unwrap();
        let inv_log2_3 = 1.0 / 3f64.log2();
        let expected = (0.5 + 1.0 * inv_log2_3) / (1.0 + 0.5 * inv_log2_3);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.8597).abs() < 5e-4, "got {got}");
    }

    #[test]
    fn ndcg_perfect_prediction_is_one() {
        let t = [0.9, 0.4, 0.7, 0.1];
        assert!((ndcg_at_k(&t, &t, 4).unwrap() - 1.0).abs() < 1e-12);
        assert!((ndcg_at_k(&t, &t, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_all_zero_truth_is_one_by_convention() {
        let t = [0.0, 0.0, 0.0];
        let p = [0.3, 0.2, 0.1];
        assert_eq!(ndcg_at_k(&t, &p, 3).unwrap(), 1.0);
    }

    #[test]
    fn topk_is_intersection_over_union() {
        let t = [0.9, 0.8, 0.3, 0.2];
        let p = [0.9, 0.1, 0.8, 0.2];
        // top-2 true {0,1}, predicted {0,2}: IoU = 1/3
        assert!((topk_accuracy(&t, &p, 2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_error_within_uses_ceil_tolerance() {
        // n=10, p=1% -> tolerance ceil(0.1) = 1 rank
        let t: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        let mut p = t.clone();
        p.swap(0, 1); // two models shift by one rank
        assert!((ranking_error_within(&t, &p, 1.0).unwrap() - 1.0).abs() < 1e-12);
        p.swap(5, 9); // two models shift by four ranks
        let got = ranking_error_within(&t, &p, 1.0).unwrap();
        assert!((got - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shifts_sum_to_zero_and_histogram_counts_models() {
        let t = [0.9, 0.5, 0.3, 0.8];
        let p = [0.5, 0.9, 0.3, 0.8];
        let shifts = rank_shifts(&t, &p).unwrap();
        assert!(shifts.iter().sum::<f64>().abs() < 1e-12);
        let hist = shift_histogram(&shifts);
        assert_eq!(hist.iter().map(|(_, c)| c).sum::<usize>(), 4);
    }

    #[test]
    fn suite_clamps_cutoff_and_fills_every_field() {
        let t = [0.9, 0.7, 0.5, 0.3, 0.1];
        let p = [0.85, 0.72, 0.48, 0.33, 0.12];
        let suite = compute_suite(&t, &p, 50).unwrap();
        assert_eq!(suite.k_used, 5);
        assert_eq!(suite.n_models, 5);
        assert_eq!(suite.rank_shifts.len(), 5);
        assert_eq!(suite.ranking_error_within.len(), 4);
        assert!((suite.spearman - 1.0).abs() < 1e-12);
        assert!((suite.pair_accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_reject_bad_input() {
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(kendall(&[1.0, 2.0], &[1.0, f64::NAN]).is_err());
        assert!(ndcg_at_k(&[1.0, 2.0], &[1.0, 2.0], 3).is_err());
        assert!(ranking_error_within(&[1.0, 2.0], &[1.0, 2.0], 0.0).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0]).is_err());
    }
}
